#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "tdsafe/model/system.hpp"
#include "tdsafe/poly/poly_matrix.hpp"

namespace tdsafe::synth {

// B = x^T P x + sum_i x_i^T P1 x_i.
struct QcbcCertificate {
  Eigen::MatrixXd P;
  Eigen::MatrixXd P1;
  double gamma_a = 0.0;
  double gamma_b = 0.0;
  double eta = 0.0;
  std::optional<double> alpha;          // input-constrained synthesis only
  std::optional<Eigen::MatrixXd> S;     // input-constrained synthesis only
};

// B = g(x) + sum_i g~(x_i). Both polynomials are stored in the x variables of
// the system space.
struct PcbcCertificate {
  poly::Polynomial g;
  poly::Polynomial g_tilde;
  double gamma_a = 0.0;
  double gamma_b = 0.0;
  double eta = 0.0;
};

using Certificate = std::variant<QcbcCertificate, PcbcCertificate>;

double gamma_a_of(const Certificate& c);
double gamma_b_of(const Certificate& c);
double eta_of(const Certificate& c);

// u = F(x, xh) x + F1(x, xh) xh, or explicit laws u_q = Y_q(x, xh).
class Controller {
 public:
  enum class Kind { kFeedback, kExplicit };

  static Controller feedback(poly::PolyMatrix F, poly::PolyMatrix F1);
  static Controller explicit_law(std::vector<poly::Polynomial> laws);
  static Controller zero(const poly::SpacePtr& space, int m);

  Kind kind() const { return kind_; }
  int m() const { return static_cast<int>(laws_.size()); }
  const std::vector<poly::Polynomial>& laws() const { return laws_; }
  const std::optional<poly::PolyMatrix>& F() const { return F_; }
  const std::optional<poly::PolyMatrix>& F1() const { return F1_; }

  // u at a full-length point of the system space.
  Eigen::VectorXd evaluate(std::span<const double> point) const;
  // Throws ShapeError/Error when the laws do not fit the system.
  void check(const model::System& sys) const;

 private:
  Controller(Kind kind, std::vector<poly::Polynomial> laws) : kind_(kind), laws_(std::move(laws)) {}
  Kind kind_;
  std::vector<poly::Polynomial> laws_;
  std::optional<poly::PolyMatrix> F_;
  std::optional<poly::PolyMatrix> F1_;
};

// Everything a synthesis run produces, as written to a certificate file.
struct CertificateBundle {
  std::string mode;  // "qcbc", "qcbc-free" or "pcbc"
  Certificate certificate;
  Controller controller;
  std::string system_fingerprint;
  int T = 1;
  double bound = 0.0;
  nlohmann::json options = nlohmann::json::object();
  nlohmann::json diagnostics = nlohmann::json::object();
};

nlohmann::json to_json(const CertificateBundle& b);
// Polynomials are parsed in the space of `sys`. Throws ConfigError.
CertificateBundle bundle_from_json(const nlohmann::json& j, const model::System& sys);
CertificateBundle load_bundle_file(const std::filesystem::path& path, const model::System& sys);

}  // namespace tdsafe::synth
