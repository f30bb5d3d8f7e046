#include "tdsafe/synth/certificate.hpp"

#include <fstream>

#include "tdsafe/common/error.hpp"
#include "tdsafe/poly/io.hpp"

namespace tdsafe::synth {

using nlohmann::json;
using Eigen::MatrixXd;

double gamma_a_of(const Certificate& c) {
  return std::visit([](const auto& v) { return v.gamma_a; }, c);
}
double gamma_b_of(const Certificate& c) {
  return std::visit([](const auto& v) { return v.gamma_b; }, c);
}
double eta_of(const Certificate& c) {
  return std::visit([](const auto& v) { return v.eta; }, c);
}

Controller Controller::feedback(poly::PolyMatrix F, poly::PolyMatrix F1) {
  if (F.rows() != F1.rows() || F.cols() != F1.cols()) throw ShapeError("F and F1 must have equal shape");
  const auto& sp = F.space();
  auto u = F * poly::group_vector<double>(sp, "x") + F1 * poly::group_vector<double>(sp, "xh");
  std::vector<poly::Polynomial> laws;
  for (int q = 0; q < u.rows(); ++q) laws.push_back(u(q, 0));
  Controller c(Kind::kFeedback, std::move(laws));
  c.F_ = std::move(F);
  c.F1_ = std::move(F1);
  return c;
}

Controller Controller::explicit_law(std::vector<poly::Polynomial> laws) {
  if (laws.empty()) throw ShapeError("controller needs at least one input");
  return Controller(Kind::kExplicit, std::move(laws));
}

Controller Controller::zero(const poly::SpacePtr& space, int m) {
  return explicit_law(std::vector<poly::Polynomial>(m, poly::Polynomial(space)));
}

Eigen::VectorXd Controller::evaluate(std::span<const double> point) const {
  Eigen::VectorXd u(m());
  for (int q = 0; q < m(); ++q) u[q] = poly::evaluate(laws_[q], point);
  return u;
}

void Controller::check(const model::System& sys) const {
  if (m() != sys.m) throw ShapeError("controller has " + std::to_string(m()) + " inputs, system has " + std::to_string(sys.m));
  for (const auto& p : laws_) {
    if (!poly::same_space(p.space(), sys.space)) throw SpaceMismatch("controller is not in the system space");
    for (const char* g : {"u", "w", "y"}) {
      if (p.degree_in_group(g) > 0) throw Error(std::string("controller law uses ") + g + " variables");
    }
  }
}

namespace {

json matrix_json(const MatrixXd& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    a.push_back(r);
  }
  return a;
}

json poly_matrix_json(const poly::PolyMatrix& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(poly::to_string(m(i, j)));
    a.push_back(r);
  }
  return a;
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("certificate: missing key " + where + key);
  return j.at(key);
}

double number(const json& j, const char* key, const std::string& where) {
  const json& v = need(j, key, where);
  if (!v.is_number()) throw ConfigError("certificate: " + where + key + " must be a number");
  return v.get<double>();
}

MatrixXd matrix(const json& j, int n, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw ConfigError("certificate: " + where + " must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != n) {
      throw ConfigError("certificate: " + where + " must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    for (int k = 0; k < n; ++k) {
      if (!j[i][k].is_number()) throw ConfigError("certificate: " + where + " entries must be numbers");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

// Parse and restrict to the allowed variable groups.
poly::Polynomial polynomial(const json& j, const poly::SpacePtr& sp, std::initializer_list<const char*> allowed,
                            const std::string& where) {
  if (!j.is_string()) throw ConfigError("certificate: " + where + " must be an expression string");
  poly::Polynomial p(sp);
  try {
    p = poly::parse(j.get<std::string>(), sp);
  } catch (const Error& e) {
    throw ConfigError("certificate: " + where + ": " + e.what());
  }
  for (const auto& g : sp->groups()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || g.name == a;
    if (!ok && p.degree_in_group(g.name) > 0) {
      throw ConfigError("certificate: " + where + " may not use " + g.name + " variables");
    }
  }
  return p;
}

poly::PolyMatrix poly_matrix(const json& j, const poly::SpacePtr& sp, int rows, int cols, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw ConfigError("certificate: " + where + " must have " + std::to_string(rows) + " rows");
  }
  poly::PolyMatrix m(sp, rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) {
      throw ConfigError("certificate: " + where + " must have " + std::to_string(cols) + " columns");
    }
    for (int k = 0; k < cols; ++k) m(i, k) = polynomial(j[i][k], sp, {"x", "xh"}, where);
  }
  return m;
}

}  // namespace

json to_json(const CertificateBundle& b) {
  json j;
  j["format"] = "tdsafe-certificate";
  j["version"] = 1;
  j["mode"] = b.mode;
  j["system_fingerprint"] = b.system_fingerprint;
  j["T"] = b.T;
  j["bound"] = b.bound;
  json c;
  if (const auto* q = std::get_if<QcbcCertificate>(&b.certificate)) {
    c["type"] = "quadratic";
    c["P"] = matrix_json(q->P);
    c["P1"] = matrix_json(q->P1);
    if (q->alpha) c["alpha"] = *q->alpha;
    if (q->S) c["S"] = matrix_json(*q->S);
    c["gamma_a"] = q->gamma_a;
    c["gamma_b"] = q->gamma_b;
    c["eta"] = q->eta;
  } else {
    const auto& p = std::get<PcbcCertificate>(b.certificate);
    c["type"] = "polynomial";
    c["g"] = poly::to_string(p.g);
    c["g_tilde"] = poly::to_string(p.g_tilde);
    c["gamma_a"] = p.gamma_a;
    c["gamma_b"] = p.gamma_b;
    c["eta"] = p.eta;
  }
  j["certificate"] = c;
  json k;
  k["kind"] = b.controller.kind() == Controller::Kind::kFeedback ? "feedback" : "explicit";
  if (b.controller.F()) {
    k["F"] = poly_matrix_json(*b.controller.F());
    k["F1"] = poly_matrix_json(*b.controller.F1());
  }
  json laws = json::array();
  for (const auto& p : b.controller.laws()) laws.push_back(poly::to_string(p));
  k["laws"] = laws;
  j["controller"] = k;
  j["options"] = b.options;
  j["diagnostics"] = b.diagnostics;
  return j;
}

CertificateBundle bundle_from_json(const json& j, const model::System& sys) {
  if (!j.is_object()) throw ConfigError("certificate: document must be an object");
  const int n = sys.n;
  const json& c = need(j, "certificate", "");
  const json& type = need(c, "type", "certificate.");
  Certificate cert = QcbcCertificate{};
  if (type == "quadratic") {
    QcbcCertificate q;
    q.P = matrix(need(c, "P", "certificate."), n, "certificate.P");
    q.P1 = matrix(need(c, "P1", "certificate."), n, "certificate.P1");
    if (c.contains("alpha")) q.alpha = number(c, "alpha", "certificate.");
    if (c.contains("S")) q.S = matrix(c.at("S"), n, "certificate.S");
    q.gamma_a = number(c, "gamma_a", "certificate.");
    q.gamma_b = number(c, "gamma_b", "certificate.");
    q.eta = number(c, "eta", "certificate.");
    cert = std::move(q);
  } else if (type == "polynomial") {
    cert = PcbcCertificate{polynomial(need(c, "g", "certificate."), sys.space, {"x"}, "certificate.g"),
                           polynomial(need(c, "g_tilde", "certificate."), sys.space, {"x"}, "certificate.g_tilde"),
                           number(c, "gamma_a", "certificate."), number(c, "gamma_b", "certificate."),
                           number(c, "eta", "certificate.")};
  } else {
    throw ConfigError("certificate: certificate.type must be \"quadratic\" or \"polynomial\"");
  }

  const json& k = need(j, "controller", "");
  const json& kind = need(k, "kind", "controller.");
  std::optional<Controller> ctrl;
  if (kind == "feedback") {
    ctrl = Controller::feedback(poly_matrix(need(k, "F", "controller."), sys.space, sys.m, n, "controller.F"),
                                poly_matrix(need(k, "F1", "controller."), sys.space, sys.m, n, "controller.F1"));
  } else if (kind == "explicit") {
    const json& laws = need(k, "laws", "controller.");
    if (!laws.is_array() || static_cast<int>(laws.size()) != sys.m) {
      throw ConfigError("certificate: controller.laws must list " + std::to_string(sys.m) + " expressions");
    }
    std::vector<poly::Polynomial> ps;
    for (const auto& l : laws) ps.push_back(polynomial(l, sys.space, {"x", "xh"}, "controller.laws"));
    ctrl = Controller::explicit_law(std::move(ps));
  } else {
    throw ConfigError("certificate: controller.kind must be \"feedback\" or \"explicit\"");
  }

  CertificateBundle b{j.value("mode", std::holds_alternative<QcbcCertificate>(cert) ? "qcbc" : "pcbc"),
                      std::move(cert), std::move(*ctrl), j.value("system_fingerprint", ""),
                      j.value("T", 1), j.value("bound", 0.0)};
  if (j.contains("options")) b.options = j.at("options");
  if (j.contains("diagnostics")) b.diagnostics = j.at("diagnostics");
  return b;
}

CertificateBundle load_bundle_file(const std::filesystem::path& path, const model::System& sys) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open certificate file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("certificate file " + path.string() + ": " + e.what());
  }
  return bundle_from_json(j, sys);
}

}  // namespace tdsafe::synth
