// tdsafe: synthesise, check and simulate barrier certificates for delayed
// stochastic polynomial systems.
//
// Exit codes: 0 success, 1 check failed, 2 usage or configuration error,
// 3 solver failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "tdsafe/common/error.hpp"
#include "tdsafe/model/config.hpp"
#include "tdsafe/sim/sim.hpp"
#include "tdsafe/synth/bound.hpp"
#include "tdsafe/synth/certificate.hpp"
#include "tdsafe/synth/synthesis.hpp"
#include "tdsafe/verify/check.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tdsafe;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kUsage = 2, kSolver = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", message}, {"kind", kind}, {"exit_code", code}}.dump() << "\n";
  return code;
}

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct Args {
  std::string system, cert, out, alpha_grid;
  std::uint64_t seed = 1;
  int samples = 10000;
  int g_degree = 4, max_g_degree = 6;
  int ctrl_degree = -1, mult_degree = -1;
  int threads = 1;
  bool sos_recheck = false;
  int horizon = 0;  // 0: take T from the system or certificate
  int runs = 1000, traces = 10;
  double tolerance = 1e-6, decrease_tolerance = 1e-6;
  double gamma_b_cap = 100.0;
  bool sos_gammas = false;
};

fs::path out_dir(const Args& a) {
  if (!a.out.empty()) return a.out;
  if (const char* env = std::getenv("TDSAFE_OUT_DIR"); env && *env) return env;
  return fs::current_path();
}

void parse_alpha_grid(const std::string& s, synth::QcbcOptions& o) {
  std::stringstream ss(s);
  std::string lo, hi, pts;
  if (!std::getline(ss, lo, ':') || !std::getline(ss, hi, ':') || !std::getline(ss, pts) ||
      ss.rdbuf()->in_avail() != 0) {
    throw UsageError("--alpha-grid expects lo:hi:points, got '" + s + "'");
  }
  try {
    o.alpha_lo = std::stod(lo);
    o.alpha_hi = std::stod(hi);
    o.alpha_points = std::stoi(pts);
  } catch (const std::exception&) {
    throw UsageError("--alpha-grid expects numbers, got '" + s + "'");
  }
  if (!(o.alpha_lo > 0) || !(o.alpha_hi >= o.alpha_lo) || o.alpha_points < 1) {
    throw UsageError("--alpha-grid needs 0 < lo <= hi and points >= 1");
  }
}

model::Problem load_system(const Args& a) {
  if (a.system.empty()) throw UsageError("--system is required");
  if (!fs::exists(a.system)) throw UsageError("system file not found: " + a.system);
  auto p = model::load_problem_file(a.system);
  if (a.horizon > 0) p.spec.T = a.horizon;
  return p;
}

synth::CertificateBundle load_cert(const Args& a, const model::System& sys) {
  if (a.cert.empty()) throw UsageError("--cert is required");
  if (!fs::exists(a.cert)) throw UsageError("certificate file not found: " + a.cert);
  auto b = synth::load_bundle_file(a.cert, sys);
  if (!b.system_fingerprint.empty() && b.system_fingerprint != sys.fingerprint) {
    std::cerr << json{{"warning", "certificate was produced for a different system configuration"},
                      {"certificate_fingerprint", b.system_fingerprint},
                      {"system_fingerprint", sys.fingerprint}}
                     .dump()
              << "\n";
  }
  return b;
}

int finish_synthesis(const Args& a, const model::Problem& prob, synth::SynthesisReport rep, const json& cli) {
  json summary = {{"ok", rep.ok}, {"trace", rep.trace_json()}};
  if (!rep.ok) {
    summary["failure"] = rep.failure;
    std::cout << summary.dump(2) << "\n";
    return fail(kSolver, "solver", rep.failure);
  }
  auto& b = *rep.result;
  b.options["cli"] = cli;
  const fs::path path = out_dir(a) / (prob.system.name + "_" + b.mode + ".json");
  write_atomic(path, synth::to_json(b).dump(2) + "\n");
  summary["certificate"] = path.string();
  summary["bound"] = b.bound;
  summary["T"] = b.T;
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

json cli_echo(const Args& a, const std::string& cmd) {
  return {{"command", cmd},          {"system", a.system},       {"seed", a.seed},
          {"alpha_grid", a.alpha_grid}, {"g_degree", a.g_degree}, {"max_g_degree", a.max_g_degree},
          {"ctrl_degree", a.ctrl_degree}, {"mult_degree", a.mult_degree}, {"threads", a.threads},
          {"horizon", a.horizon},    {"gamma_b_cap", a.gamma_b_cap}, {"sos_gammas", a.sos_gammas}};
}

int run_synth_qcbc(const Args& a, bool constrained) {
  auto prob = load_system(a);
  synth::QcbcOptions o;
  if (!a.alpha_grid.empty()) parse_alpha_grid(a.alpha_grid, o);
  if (a.ctrl_degree >= 0) o.controller_degree = a.ctrl_degree;
  o.multiplier_degree = a.mult_degree;
  o.threads = a.threads;
  if (a.sos_gammas) o.gamma_mode = synth::GammaMode::kSos;
  auto rep = constrained ? synth::synth_qcbc_constrained(prob, o) : synth::synth_qcbc_unconstrained(prob, o);
  return finish_synthesis(a, prob, std::move(rep), cli_echo(a, constrained ? "synth-qcbc" : "synth-qcbc-free"));
}

int run_synth_pcbc(const Args& a) {
  auto prob = load_system(a);
  synth::PcbcOptions o;
  o.g_degree = a.g_degree;
  o.max_g_degree = std::max(a.g_degree, a.max_g_degree);
  if (a.ctrl_degree >= 0) o.controller_degree = a.ctrl_degree;
  o.multiplier_degree = a.mult_degree;
  o.threads = a.threads;
  o.gamma_b_cap = a.gamma_b_cap;
  return finish_synthesis(a, prob, synth::synth_pcbc(prob, o), cli_echo(a, "synth-pcbc"));
}

int run_check(const Args& a) {
  auto prob = load_system(a);
  auto b = load_cert(a, prob.system);
  verify::CheckOptions o;
  o.samples = a.samples;
  o.seed = a.seed;
  o.threads = a.threads;
  o.sos_recheck = a.sos_recheck;
  o.tolerance = a.tolerance;
  o.decrease_tolerance = a.decrease_tolerance;
  o.enforce_input = b.mode != "qcbc-free";
  auto rep = verify::check_certificate(prob, b.certificate, b.controller, o);
  json j = rep.to_json();
  j["T"] = prob.spec.T;
  if (!o.enforce_input) j["note"] = rep.note + "; input condition not enforced for an unconstrained synthesis";
  const std::string text = j.dump(2) + "\n";
  if (!a.out.empty() || std::getenv("TDSAFE_OUT_DIR")) write_atomic(out_dir(a) / "check_report.json", text);
  std::cout << text;
  return rep.pass ? kOk : kCheckFailed;
}

int run_simulate(const Args& a) {
  auto prob = load_system(a);
  std::optional<synth::CertificateBundle> b;
  synth::Controller ctrl = synth::Controller::zero(prob.system.space, prob.system.m);
  if (!a.cert.empty()) {
    b = load_cert(a, prob.system);
    ctrl = b->controller;
  }
  if (a.runs < 1) throw UsageError("--runs must be at least 1");
  auto mc = sim::monte_carlo_safety(prob, ctrl, a.runs, a.seed, sim::MonteCarloOptions{.threads = a.threads});
  json summary = mc.to_json();
  summary["T"] = prob.spec.T;
  summary["seed"] = a.seed;
  if (b) {
    const double mu = 1.0 - verify::recompute_bound(b->certificate, prob.spec.T);
    summary["mu_h"] = mu;
    summary["within_bound"] = mc.upper95 <= mu + 0.05;
  }
  const fs::path dir = out_dir(a);
  // The first few runs are replayed and exported.
  for (int r = 0; r < std::min(a.traces, a.runs); ++r) {
    auto tr = sim::monte_carlo_run(prob, ctrl, r, a.seed);
    std::ostringstream os;
    sim::write_trace_csv(tr, os);
    write_atomic(dir / ("trace_" + std::to_string(r) + ".csv"), os.str());
  }
  summary["trace_dir"] = dir.string();
  const std::string text = summary.dump(2) + "\n";
  write_atomic(dir / "simulation_summary.json", text);
  std::cout << text;
  return kOk;
}

int run_bound(const Args& a) {
  if (a.cert.empty()) throw UsageError("--cert is required");
  std::ifstream in(a.cert);
  if (!in) throw UsageError("certificate file not found: " + a.cert);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("certificate: ") + e.what());
  }
  const json& c = j.at("certificate");
  const int T = a.horizon > 0 ? a.horizon : j.value("T", 0);
  if (T < 1) throw UsageError("--horizon is required when the certificate has no T");
  const double gb = c.at("gamma_b").get<double>();
  if (!(gb > 0)) throw ConfigError("certificate gamma_b must be positive");
  const double v = synth::safety_bound(c.at("gamma_a").get<double>(), gb, c.at("eta").get<double>(), T);
  std::printf("%.4f\n", v);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barrier certificates for delayed stochastic polynomial systems"};
  app.require_subcommand(1, 1);
  Args a;

  auto add_system = [&](CLI::App* s) { s->add_option("--system", a.system, "System configuration (JSON)"); };
  auto add_common = [&](CLI::App* s) {
    s->add_option("--out", a.out, "Output directory (default $TDSAFE_OUT_DIR or the working directory)");
    s->add_option("--seed", a.seed, "Random seed");
    s->add_option("--threads", a.threads, "Worker threads")->check(CLI::PositiveNumber);
    s->add_option("--horizon", a.horizon, "Horizon T (overrides the configuration)")->check(CLI::NonNegativeNumber);
  };
  auto add_synth = [&](CLI::App* s) {
    add_system(s);
    add_common(s);
    s->add_option("--ctrl-degree", a.ctrl_degree, "Controller degree")->check(CLI::PositiveNumber);
    s->add_option("--mult-degree", a.mult_degree, "Multiplier degree (even; default derived)");
  };

  auto* sq = app.add_subcommand("synth-qcbc", "Quadratic certificate with input constraints");
  add_synth(sq);
  sq->add_option("--alpha-grid", a.alpha_grid, "alpha search grid lo:hi:points");
  sq->add_flag("--sos-gammas", a.sos_gammas, "Level sets as SDP unknowns instead of eigenvalues");
  auto* sf = app.add_subcommand("synth-qcbc-free", "Quadratic certificate without input constraints");
  add_synth(sf);
  sf->add_flag("--sos-gammas", a.sos_gammas, "Level sets as SDP unknowns instead of eigenvalues");
  auto* sp = app.add_subcommand("synth-pcbc", "Polynomial certificate");
  add_synth(sp);
  sp->add_option("--g-degree", a.g_degree, "Barrier degree (even)");
  sp->add_option("--max-g-degree", a.max_g_degree, "Largest barrier degree tried");
  sp->add_option("--gamma-b-cap", a.gamma_b_cap, "Value gamma_b is pinned to");

  auto* ck = app.add_subcommand("check", "Sampled check of a certificate");
  add_system(ck);
  add_common(ck);
  ck->add_option("--cert", a.cert, "Certificate file");
  ck->add_option("--samples", a.samples, "Random samples per condition")->check(CLI::PositiveNumber);
  ck->add_option("--tolerance", a.tolerance, "Tolerance on level-set and input conditions");
  ck->add_option("--decrease-tolerance", a.decrease_tolerance, "Tolerance on the decrease condition");
  ck->add_flag("--sos-recheck", a.sos_recheck, "Also verify the barrier is a sum of squares");

  auto* sm = app.add_subcommand("simulate", "Monte Carlo simulation of the closed loop");
  add_system(sm);
  add_common(sm);
  sm->add_option("--cert", a.cert, "Certificate file with the controller (default u = 0)");
  sm->add_option("--samples,--runs", a.runs, "Number of runs")->check(CLI::PositiveNumber);
  sm->add_option("--traces", a.traces, "Runs exported as CSV")->check(CLI::NonNegativeNumber);

  auto* bd = app.add_subcommand("bound", "Safety probability bound of a certificate");
  bd->add_option("--cert", a.cert, "Certificate file");
  bd->add_option("--horizon", a.horizon, "Horizon T")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  try {
    if (*sq) return run_synth_qcbc(a, true);
    if (*sf) return run_synth_qcbc(a, false);
    if (*sp) return run_synth_pcbc(a);
    if (*ck) return run_check(a);
    if (*sm) return run_simulate(a);
    if (*bd) return run_bound(a);
  } catch (const UsageError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const ConfigError& e) {
    return fail(kUsage, "config", e.what());
  } catch (const ParseError& e) {
    return fail(kUsage, "config", e.what());
  } catch (const ShapeError& e) {
    return fail(kUsage, "config", e.what());
  } catch (const PreconditionError& e) {
    return fail(kUsage, "precondition", e.what());
  } catch (const SolverError& e) {
    return fail(kSolver, "solver", e.what());
  } catch (const json::exception& e) {
    return fail(kUsage, "config", e.what());
  } catch (const std::exception& e) {
    return fail(kUsage, "error", e.what());
  }
  return kUsage;
}
