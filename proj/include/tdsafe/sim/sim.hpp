#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "tdsafe/model/system.hpp"
#include "tdsafe/synth/certificate.hpp"

namespace tdsafe::sim {

// The last h+1 states, x_k first. push() evicts x_{k-h}.
class HistoryBuffer {
 public:
  // `states` lists x_0, x_{-1}, ..., x_{-h}.
  explicit HistoryBuffer(std::vector<Eigen::VectorXd> states);
  // Constant history.
  HistoryBuffer(int h, const Eigen::VectorXd& x);

  int h() const { return static_cast<int>(buf_.size()) - 1; }
  std::size_t size() const { return buf_.size(); }
  // x_{k-lag}, 0 <= lag <= h.
  const Eigen::VectorXd& at(int lag) const;
  const Eigen::VectorXd& current() const { return at(0); }
  const Eigen::VectorXd& delayed() const { return at(h()); }
  void push(Eigen::VectorXd x);

 private:
  std::vector<Eigen::VectorXd> buf_;
  std::size_t head_ = 0;  // slot of x_k
};

struct Step {
  int k = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd u;  // input computed at x_k (the last one is never applied)
  bool safe = true;
};

struct Trace {
  std::uint64_t seed = 0;
  std::vector<Step> steps;
  std::optional<int> first_violation;
  std::string diagnostic;  // overflow, or leaving X
};

// SplitMix64 output for state `x`; used to derive per-run seeds.
std::uint64_t splitmix64(std::uint64_t x);

// Runs x+ = A x + A1 xh + G u + E w for T steps with u from `ctrl` and
// w ~ N(0, I) drawn from a generator seeded with `seed`. Stops early if |x|
// exceeds 1e12. A step is unsafe when x_k lies in some Xb region.
Trace simulate(const model::System& sys, const synth::Controller& ctrl, HistoryBuffer history, int T,
               std::uint64_t seed);

struct MonteCarloOptions {
  int threads = 1;
  // Use this history for every run instead of sampling Xa per slot.
  std::optional<std::vector<Eigen::VectorXd>> fixed_history;
};

struct MonteCarloResult {
  int runs = 0;
  int unsafe = 0;
  double frequency = 0.0;
  double upper95 = 1.0;                // one-sided Clopper-Pearson bound
  std::vector<int> first_violation;    // -1 when the run stayed safe
  int diverged = 0;

  nlohmann::json to_json() const;
};

// Run r of a Monte Carlo batch. History and noise come from streams keyed by
// (seed, r), so a run can be replayed on its own.
Trace monte_carlo_run(const model::Problem& prob, const synth::Controller& ctrl, int r, std::uint64_t seed,
                      const MonteCarloOptions& opts = {});

MonteCarloResult monte_carlo_safety(const model::Problem& prob, const synth::Controller& ctrl, int runs,
                                    std::uint64_t seed, const MonteCarloOptions& opts = {});

// Upper end of the one-sided (1 - alpha) Clopper-Pearson interval.
double clopper_pearson_upper(int successes, int trials, double alpha = 0.05);

// CSV with header "k,x1..xn,u1..um,safe".
void export_trace(const Trace& trace, const std::filesystem::path& path);
void write_trace_csv(const Trace& trace, std::ostream& out);
// Reads the CSV back. Seed and diagnostic are not part of the format.
Trace import_trace(const std::filesystem::path& path);

}  // namespace tdsafe::sim
