#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "tdsafe/model/system.hpp"
#include "tdsafe/synth/certificate.hpp"

namespace tdsafe::verify {

// E[B(x+) | x, xh, u] - B(x) in telescoped form, so only the current and the
// delayed state are needed. The closed-loop polynomial is built once.
class DecreaseOracle {
 public:
  DecreaseOracle(const model::System& sys, const synth::Certificate& cert, const synth::Controller& ctrl);

  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& xh) const;
  // The expectation as a polynomial in (x, xh).
  const poly::Polynomial& polynomial() const { return poly_; }

 private:
  const model::System* sys_;
  poly::Polynomial poly_;
};

// One-shot evaluation. If `warning` is given it receives a message when the
// point lies outside X; the value is computed regardless.
double decrease_oracle(const model::System& sys, const synth::Certificate& cert, const synth::Controller& ctrl,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& xh, std::string* warning = nullptr);

struct CheckOptions {
  int samples = 10000;
  int grid = 25;                 // points per axis, capped by max_grid_points
  long max_grid_points = 200000;
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  double decrease_tolerance = 1e-6;
  bool sos_recheck = false;
  int threads = 1;
  // When false the input condition is reported but does not affect the verdict
  // (certificates synthesised without input constraints).
  bool enforce_input = true;
};

// Worst sampled margin of one inequality. violation > 0 means it fails there.
struct ConditionReport {
  std::string name;
  double violation = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  Eigen::VectorXd x;   // witness
  Eigen::VectorXd xh;  // delayed witness, empty when not used
  long samples = 0;
  bool pass = true;
  bool enforced = true;  // counts towards the overall verdict
};

// Exact checks that do not need sampling (eigenvalues, scalar signs, SOS).
struct SideCondition {
  std::string name;
  double value = 0.0;
  bool pass = true;
  std::string detail;
};

struct CheckReport {
  std::vector<ConditionReport> conditions;
  std::vector<SideCondition> side;
  bool pass = false;
  double bound = 0.0;
  std::string note;

  const ConditionReport* find(const std::string& name) const;
  nlohmann::json to_json() const;
};

// Samples the level-set, unsafe, decrease and input conditions on random
// points and a regular grid, and checks the side conditions exactly.
// Throws ShapeError when the certificate or controller does not fit.
CheckReport check_certificate(const model::Problem& prob, const synth::Certificate& cert,
                              const synth::Controller& ctrl, const CheckOptions& opts = {});

double recompute_bound(const synth::Certificate& cert, int T);

// g(x) + h g~(xh) is a sum of squares (for a quadratic certificate: P and P1
// are PSD). For separable B this certifies B >= 0.
bool barrier_is_sos(const model::System& sys, const synth::Certificate& cert);

}  // namespace tdsafe::verify
