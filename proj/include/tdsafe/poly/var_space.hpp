#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tdsafe::poly {

// Ordered list of named variable groups. Variable k of group "xh" is
// written xh<k> with k starting at 1.
class VarSpace {
 public:
  struct Group {
    std::string name;
    int dim = 0;
    int offset = 0;
  };

  explicit VarSpace(const std::vector<std::pair<std::string, int>>& groups,
                    double prune_threshold = 1e-12);

  // x(n), xh(n), u(m), w(n) and, when aux > 0, y(aux).
  static std::shared_ptr<const VarSpace> standard(int n, int m, int aux = 0);

  int size() const noexcept { return size_; }
  const std::vector<Group>& groups() const noexcept { return groups_; }
  const Group* find(std::string_view name) const noexcept;
  const Group& group(std::string_view name) const;
  bool has(std::string_view name) const noexcept { return find(name) != nullptr; }

  // Global index of `name<one_based>`; throws on unknown group or range.
  int index(std::string_view name, int one_based) const;
  std::string name_of(int index) const;
  // Group and 1-based position of a global index.
  std::pair<const Group*, int> locate(int index) const;

  double prune_threshold() const noexcept { return prune_; }

  bool operator==(const VarSpace& other) const;

 private:
  std::vector<Group> groups_;
  int size_ = 0;
  double prune_ = 1e-12;
};

using SpacePtr = std::shared_ptr<const VarSpace>;

inline bool same_space(const SpacePtr& a, const SpacePtr& b) {
  return a == b || (a && b && *a == *b);
}

}  // namespace tdsafe::poly
