#include "tdsafe/poly/var_space.hpp"

#include <set>

#include "tdsafe/common/error.hpp"

namespace tdsafe::poly {

VarSpace::VarSpace(const std::vector<std::pair<std::string, int>>& groups,
                   double prune_threshold)
    : prune_(prune_threshold) {
  std::set<std::string> seen;
  for (const auto& [name, dim] : groups) {
    if (name.empty()) throw Error("variable group with empty name");
    for (char c : name) {
      if (c < 'a' || c > 'z') throw Error("group names are lowercase letters: " + name);
    }
    if (dim < 1) throw Error("group " + name + " must have dimension >= 1");
    if (!seen.insert(name).second) throw Error("duplicate variable group " + name);
    groups_.push_back({name, dim, size_});
    size_ += dim;
  }
}

std::shared_ptr<const VarSpace> VarSpace::standard(int n, int m, int aux) {
  std::vector<std::pair<std::string, int>> g{{"x", n}, {"xh", n}, {"u", m}, {"w", n}};
  if (aux > 0) g.emplace_back("y", aux);
  return std::make_shared<const VarSpace>(g);
}

const VarSpace::Group* VarSpace::find(std::string_view name) const noexcept {
  for (const auto& g : groups_) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

const VarSpace::Group& VarSpace::group(std::string_view name) const {
  const Group* g = find(name);
  if (!g) throw Error("unknown variable group " + std::string(name));
  return *g;
}

int VarSpace::index(std::string_view name, int one_based) const {
  const Group& g = group(name);
  if (one_based < 1 || one_based > g.dim) {
    throw Error("unknown variable " + std::string(name) + std::to_string(one_based));
  }
  return g.offset + one_based - 1;
}

std::pair<const VarSpace::Group*, int> VarSpace::locate(int index) const {
  for (const auto& g : groups_) {
    if (index >= g.offset && index < g.offset + g.dim) return {&g, index - g.offset + 1};
  }
  throw Error("variable index out of range: " + std::to_string(index));
}

std::string VarSpace::name_of(int index) const {
  auto [g, k] = locate(index);
  return g->name + std::to_string(k);
}

bool VarSpace::operator==(const VarSpace& other) const {
  if (groups_.size() != other.groups_.size()) return false;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].name != other.groups_[i].name || groups_[i].dim != other.groups_[i].dim) {
      return false;
    }
  }
  return true;
}

}  // namespace tdsafe::poly
