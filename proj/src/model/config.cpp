#include "tdsafe/model/config.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "tdsafe/common/error.hpp"
#include "tdsafe/poly/io.hpp"

namespace tdsafe::model {

using nlohmann::json;

namespace {

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("missing key " + where + "." + key);
  return j.at(key);
}

Eigen::VectorXd vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + " must be an array of numbers");
    v[static_cast<int>(i)] = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd numeric_matrix(const json& j, int rows, int cols, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw ConfigError(where + " must have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    Eigen::VectorXd r = vector_of(j[i], where);
    if (r.size() != cols) throw ConfigError(where + " must have " + std::to_string(cols) + " columns");
    m.row(i) = r.transpose();
  }
  return m;
}

poly::PolyMatrix poly_matrix(const json& j, const poly::SpacePtr& sp, int rows, int cols,
                             const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw ConfigError(where + " must have " + std::to_string(rows) + " rows");
  }
  poly::PolyMatrix m(sp, rows, cols);
  std::vector<int> state = poly::group_indices(*sp, {"x", "xh"});
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) {
      throw ConfigError(where + " must have " + std::to_string(cols) + " columns");
    }
    for (int c = 0; c < cols; ++c) {
      const json& e = j[i][c];
      if (e.is_number()) {
        m(i, c) = poly::Polynomial::constant(sp, e.get<double>());
      } else if (e.is_string()) {
        try {
          m(i, c) = poly::parse(e.get<std::string>(), sp);
        } catch (const ParseError& err) {
          throw ConfigError(where + "[" + std::to_string(i) + "][" + std::to_string(c) + "]: " + err.what());
        }
      } else {
        throw ConfigError(where + " entries must be numbers or polynomial strings");
      }
      if (m(i, c).degree_in(state) != m(i, c).degree()) {
        throw ConfigError(where + " may only depend on x and xh");
      }
    }
  }
  return m;
}

Box box_of(const json& j, int n, const std::string& where) {
  Box b{vector_of(need(j, "lo", where), where + ".lo"), vector_of(need(j, "hi", where), where + ".hi")};
  if (b.lo.size() != n || b.hi.size() != n) {
    throw ConfigError(where + " must have " + std::to_string(n) + " bounds per side");
  }
  return b;
}

SemialgebraicSet set_of(const json& j, const poly::SpacePtr& sp, int n, const std::string& where,
                        const Box* fallback) {
  if (j.contains("box")) return SemialgebraicSet::from_box(sp, box_of(j.at("box"), n, where + ".box"));
  if (j.contains("polys")) {
    std::vector<poly::Polynomial> ps;
    for (const auto& s : j.at("polys")) {
      if (!s.is_string()) throw ConfigError(where + ".polys entries must be strings");
      try {
        ps.push_back(poly::parse(s.get<std::string>(), sp));
      } catch (const ParseError& err) {
        throw ConfigError(where + ".polys: " + err.what());
      }
    }
    Box b;
    if (j.contains("bounds")) {
      b = box_of(j.at("bounds"), n, where + ".bounds");
    } else if (fallback) {
      b = *fallback;
    } else {
      throw ConfigError(where + " needs a bounds box for sampling");
    }
    return SemialgebraicSet(sp, std::move(ps), b, false);
  }
  throw ConfigError(where + " must define box or polys");
}

}  // namespace

std::string fingerprint_of(const json& doc) {
  std::string s = doc.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate(const System& sys) {
  const int n = sys.n;
  if (sys.h < 1) throw ConfigError("system.h must be >= 1");
  if (sys.A.rows() != n || sys.A.cols() != n) throw ConfigError("system.A must be n x n");
  if (sys.A1.rows() != n || sys.A1.cols() != n) throw ConfigError("system.A1 must be n x n");
  if (sys.G.rows() != n || sys.G.cols() != sys.m) throw ConfigError("system.G must be n x m");
  if (sys.E.rows() != n || sys.E.cols() != n) throw ConfigError("system.E must be n x n");
  if (!sys.U.unconstrained() && sys.U.rows.cols() != sys.m) throw ConfigError("input rows must have m columns");
  if (sys.Xb.empty()) throw ConfigError("sets.Xb must list at least one region");
  for (const auto& r : sys.Xb) {
    if (r.descriptors().size() != sys.X.descriptors().size()) {
      throw ConfigError("each Xb region needs as many descriptors as X");
    }
  }
  // Xa and Xb must be disjoint.
  for (const auto& r : sys.Xb) {
    if (sys.Xa.is_box() && r.is_box()) {
      if (sys.Xa.bounds().intersects(r.bounds())) throw ConfigError("sets.Xa overlaps sets.Xb");
      continue;
    }
    std::mt19937_64 rng(12345);
    for (const auto& x : sample_set(sys.Xa, 10000, rng)) {
      if (r.contains(x)) throw ConfigError("sets.Xa overlaps sets.Xb");
    }
  }
}

Problem load_problem(const json& cfg) {
  const json& js = need(cfg, "system", "");
  auto geti = [&](const char* k) {
    const json& v = need(js, k, "system");
    if (!v.is_number_integer()) throw ConfigError(std::string("system.") + k + " must be an integer");
    return v.get<int>();
  };
  const int n = geti("n"), m = geti("m"), h = geti("h");
  if (n < 1) throw ConfigError("system.n must be >= 1");
  if (m < 1) throw ConfigError("system.m must be >= 1");
  if (h < 1) throw ConfigError("system.h must be >= 1");
  auto sp = poly::VarSpace::standard(n, m, 3 * n);

  const json& sets = need(cfg, "sets", "");
  SemialgebraicSet X = set_of(need(sets, "X", "sets"), sp, n, "sets.X", nullptr);
  SemialgebraicSet Xa = set_of(need(sets, "Xa", "sets"), sp, n, "sets.Xa", &X.bounds());
  std::vector<SemialgebraicSet> Xb;
  const json& jb = need(sets, "Xb", "sets");
  if (!jb.is_array()) throw ConfigError("sets.Xb must be a list of regions");
  for (std::size_t i = 0; i < jb.size(); ++i) {
    Xb.push_back(set_of(jb[i], sp, n, "sets.Xb[" + std::to_string(i) + "]", &X.bounds()));
  }

  InputSet U;
  U.m = m;
  if (cfg.contains("input")) {
    const json& ji = cfg.at("input");
    if (ji.is_string() && ji.get<std::string>() == "unconstrained") {
    } else if (ji.is_object() && ji.contains("unconstrained")) {
    } else if (ji.is_object() && ji.contains("box")) {
      Box b{vector_of(need(ji.at("box"), "lo", "input.box"), "input.box.lo"),
            vector_of(need(ji.at("box"), "hi", "input.box"), "input.box.hi")};
      if (b.lo.size() != m || b.hi.size() != m) throw ConfigError("input.box must have m bounds per side");
      U = box_to_polytope(b.lo, b.hi);
    } else if (ji.is_object() && ji.contains("rows")) {
      const json& r = ji.at("rows");
      U.rows = numeric_matrix(r, static_cast<int>(r.size()), m, "input.rows");
    } else {
      throw ConfigError("input must be box, rows or unconstrained");
    }
  }

  System sys{
      .name = cfg.value("name", std::string("system")),
      .n = n,
      .m = m,
      .h = h,
      .space = sp,
      .A = poly_matrix(need(js, "A", "system"), sp, n, n, "system.A"),
      .A1 = poly_matrix(need(js, "A1", "system"), sp, n, n, "system.A1"),
      .G = poly_matrix(need(js, "G", "system"), sp, n, m, "system.G"),
      .E = numeric_matrix(need(js, "E", "system"), n, n, "system.E"),
      .X = std::move(X),
      .Xa = std::move(Xa),
      .Xb = std::move(Xb),
      .U = std::move(U),
      .fingerprint = fingerprint_of(cfg),
  };
  validate(sys);

  SafetySpec spec;
  if (cfg.contains("spec")) {
    const json& t = need(cfg.at("spec"), "T", "spec");
    if (!t.is_number_integer() || t.get<int>() < 1) throw ConfigError("spec.T must be a positive integer");
    spec.T = t.get<int>();
  }
  return Problem{std::move(sys), spec};
}

Problem load_problem_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return load_problem(j);
}

}  // namespace tdsafe::model
