#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tdsafe/model/system.hpp"
#include "tdsafe/sdp/solver.hpp"
#include "tdsafe/synth/certificate.hpp"

namespace tdsafe::synth {

// How the level sets of a quadratic certificate are obtained.
enum class GammaMode {
  kEigen,  // eigenvalue formula after solving, surrogate objective in the SDP
  kSos,    // gamma_a, gamma_b as SDP unknowns, minimise gamma_a - c gamma_b
};

struct QcbcOptions {
  double alpha_lo = 1e-6;
  double alpha_hi = 1e2;
  int alpha_points = 12;
  bool refine = true;         // one geometric refinement around the best alpha
  int controller_degree = 2;  // total degree of u = F x + F1 xh
  int multiplier_degree = -1; // -1: derived from the target degree
  GammaMode gamma_mode = GammaMode::kEigen;
  double gamma_weight = 0.01;
  bool newton_prune = false;
  int threads = 1;
  sdp::SolveOptions sdp;
};

struct PcbcOptions {
  int g_degree = 4;
  int max_g_degree = 6;
  int controller_degree = 3;
  int multiplier_degree = -1;
  double gamma_weight = 0.01;
  double gamma_b_cap = 100.0;  // gamma_b is pinned to this value
  bool newton_prune = false;
  int threads = 1;
  sdp::SolveOptions sdp;
};

// One SDP solved during a search.
struct Attempt {
  std::string label;  // e.g. "alpha=1e-05" or "degree=4"
  double parameter = 0.0;
  std::string status;
  std::string message;
  int iterations = 0;
  double seconds = 0.0;
  std::optional<double> bound;
};

struct SynthesisReport {
  bool ok = false;
  std::string failure;  // set when !ok
  std::optional<CertificateBundle> result;
  std::vector<Attempt> trace;

  nlohmann::json trace_json() const;
};

// Input-constrained quadratic certificate with polynomial state feedback,
// searched over a logarithmic alpha grid. Throws PreconditionError when the
// system has no input polytope.
SynthesisReport synth_qcbc_constrained(const model::Problem& problem, const QcbcOptions& options = {});

// Quadratic certificate without input constraints, in the variables
// C = P^-1, P~1, Z = F C, Z1 = F1 C.
SynthesisReport synth_qcbc_unconstrained(const model::Problem& problem, const QcbcOptions& options = {});

// Polynomial certificate with explicit polynomial control laws. The degree of
// g is raised by 2 after an infeasible attempt, up to max_g_degree. Throws
// PreconditionError on an odd or too small g_degree.
SynthesisReport synth_pcbc(const model::Problem& problem, const PcbcOptions& options = {});

}  // namespace tdsafe::synth
