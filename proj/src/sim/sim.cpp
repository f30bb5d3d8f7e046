#include "tdsafe/sim/sim.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include <boost/math/distributions/beta.hpp>

#include "tdsafe/common/error.hpp"
#include "tdsafe/poly/io.hpp"

namespace tdsafe::sim {

HistoryBuffer::HistoryBuffer(std::vector<Eigen::VectorXd> states) : buf_(std::move(states)) {
  if (buf_.empty()) throw Error("history needs at least one state");
  for (const auto& s : buf_) {
    if (s.size() != buf_[0].size()) throw ShapeError("history states differ in dimension");
  }
}

HistoryBuffer::HistoryBuffer(int h, const Eigen::VectorXd& x) : buf_(static_cast<std::size_t>(h) + 1, x) {
  if (h < 0) throw Error("delay must be nonnegative");
}

const Eigen::VectorXd& HistoryBuffer::at(int lag) const {
  if (lag < 0 || lag > h()) throw Error("history lag " + std::to_string(lag) + " out of range");
  return buf_[(head_ + static_cast<std::size_t>(lag)) % buf_.size()];
}

void HistoryBuffer::push(Eigen::VectorXd x) {
  if (x.size() != buf_[0].size()) throw ShapeError("pushed state has wrong dimension");
  head_ = (head_ + buf_.size() - 1) % buf_.size();
  buf_[head_] = std::move(x);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

constexpr double kOverflow = 1e12;

Step make_step(const model::System& sys, const synth::Controller& ctrl, const HistoryBuffer& hist, int k) {
  Step s;
  s.k = k;
  s.x = hist.current();
  s.u = ctrl.evaluate(sys.point(hist.current(), hist.delayed()));
  s.safe = !sys.in_unsafe(s.x);
  return s;
}

}  // namespace

Trace simulate(const model::System& sys, const synth::Controller& ctrl, HistoryBuffer history, int T,
               std::uint64_t seed) {
  if (T < 1) throw PreconditionError("horizon must be at least 1");
  if (history.h() != sys.h) {
    throw ShapeError("history has " + std::to_string(history.size()) + " states, system needs " +
                     std::to_string(sys.h + 1));
  }
  if (history.current().size() != sys.n) throw ShapeError("history states must have dimension n");
  ctrl.check(sys);

  Trace tr;
  tr.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(sys.n);
  bool left_x = false;

  tr.steps.push_back(make_step(sys, ctrl, history, 0));
  for (int k = 1; k <= T; ++k) {
    const Step& prev = tr.steps.back();
    for (int i = 0; i < sys.n; ++i) w[i] = normal(rng);
    Eigen::VectorXd next = sys.drift(prev.x, history.delayed(), prev.u) + sys.E * w;
    if (!next.allFinite() || next.norm() > kOverflow) {
      tr.diagnostic = "state norm exceeded 1e12 at step " + std::to_string(k);
      break;
    }
    history.push(std::move(next));
    tr.steps.push_back(make_step(sys, ctrl, history, k));
    if (!tr.steps.back().safe && !tr.first_violation) tr.first_violation = k;
    if (!left_x && !sys.X.contains(history.current())) {
      left_x = true;
      tr.diagnostic = "state left X at step " + std::to_string(k);
    }
  }
  return tr;
}

double clopper_pearson_upper(int successes, int trials, double alpha) {
  if (trials < 1 || successes < 0 || successes > trials) throw Error("invalid binomial counts");
  if (successes == trials) return 1.0;
  boost::math::beta_distribution<double> b(successes + 1.0, static_cast<double>(trials - successes));
  return boost::math::quantile(b, 1.0 - alpha);
}

nlohmann::json MonteCarloResult::to_json() const {
  return {{"runs", runs},           {"unsafe", unsafe},     {"frequency", frequency},
          {"upper95", upper95},     {"diverged", diverged}, {"first_violation", first_violation}};
}

Trace monte_carlo_run(const model::Problem& prob, const synth::Controller& ctrl, int r, std::uint64_t seed,
                      const MonteCarloOptions& opts) {
  const auto& sys = prob.system;
  const std::uint64_t s = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(r)));
  std::optional<HistoryBuffer> hist;
  if (opts.fixed_history) {
    hist.emplace(*opts.fixed_history);
  } else {
    std::mt19937_64 rng(splitmix64(s));
    hist.emplace(model::sample_set(sys.Xa, sys.h + 1, rng));
  }
  return simulate(sys, ctrl, std::move(*hist), prob.spec.T, s);
}

MonteCarloResult monte_carlo_safety(const model::Problem& prob, const synth::Controller& ctrl, int runs,
                                    std::uint64_t seed, const MonteCarloOptions& opts) {
  if (runs < 1) throw PreconditionError("runs must be at least 1");
  const auto& sys = prob.system;
  ctrl.check(sys);

  auto one = [&](int r) { return monte_carlo_run(prob, ctrl, r, seed, opts); };

  MonteCarloResult res;
  res.runs = runs;
  res.first_violation.assign(runs, -1);
  std::vector<char> diverged(runs, 0);
  auto work = [&](int lo, int hi) {
    for (int r = lo; r < hi; ++r) {
      Trace t = one(r);
      if (t.first_violation) res.first_violation[r] = *t.first_violation;
      if (t.diagnostic.rfind("state norm", 0) == 0) diverged[r] = 1;
    }
  };
  const int threads = std::max(1, std::min(opts.threads, runs));
  if (threads == 1) {
    work(0, runs);
  } else {
    std::vector<std::future<void>> fs;
    for (int t = 0; t < threads; ++t) {
      fs.push_back(std::async(std::launch::async, work, runs * t / threads, runs * (t + 1) / threads));
    }
    for (auto& f : fs) f.get();
  }
  for (int r = 0; r < runs; ++r) {
    res.unsafe += res.first_violation[r] >= 0;
    res.diverged += diverged[r];
  }
  res.frequency = static_cast<double>(res.unsafe) / runs;
  res.upper95 = clopper_pearson_upper(res.unsafe, runs);
  return res;
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
  if (trace.steps.empty()) throw Error("empty trace");
  const auto n = trace.steps[0].x.size(), m = trace.steps[0].u.size();
  out << "k";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i + 1;
  for (Eigen::Index q = 0; q < m; ++q) out << ",u" << q + 1;
  out << ",safe\n";
  for (const auto& s : trace.steps) {
    out << s.k;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << poly::format_number(s.x[i]);
    for (Eigen::Index q = 0; q < m; ++q) out << ',' << poly::format_number(s.u[q]);
    out << ',' << (s.safe ? 1 : 0) << '\n';
  }
}

void export_trace(const Trace& trace, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    write_trace_csv(trace, out);
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(where + ": bad number '" + s + "'");
  return v;
}

}  // namespace

Trace import_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  auto head = split(line);
  if (head.size() < 3 || head.front() != "k" || head.back() != "safe") {
    throw ConfigError(path.string() + ": header must start with k and end with safe");
  }
  int n = 0, m = 0;
  for (std::size_t c = 1; c + 1 < head.size(); ++c) {
    if (head[c].rfind("x", 0) == 0) ++n;
    else if (head[c].rfind("u", 0) == 0) ++m;
    else throw ConfigError(path.string() + ": unknown column " + head[c]);
  }
  Trace tr;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split(line);
    const std::string where = path.string() + " row " + std::to_string(row);
    if (cells.size() != head.size()) throw ConfigError(where + ": wrong number of columns");
    Step s;
    s.k = static_cast<int>(to_double(cells[0], where));
    s.x.resize(n);
    s.u.resize(m);
    for (int i = 0; i < n; ++i) s.x[i] = to_double(cells[1 + i], where);
    for (int q = 0; q < m; ++q) s.u[q] = to_double(cells[1 + n + q], where);
    s.safe = cells.back() == "1";
    if (!s.safe && !tr.first_violation && s.k > 0) tr.first_violation = s.k;
    tr.steps.push_back(std::move(s));
  }
  return tr;
}

}  // namespace tdsafe::sim
