#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tdsafe::sos {

// min  sum_k <C_k, X_k> + c^T f + offset
// s.t. sum_k <A_ik, X_k> + (B f)_i = b_i,   X_k PSD,  f free.
//
// Matrix coefficients are kept on the upper triangle with scalar-variable
// meaning: entry (k, r, c, v) contributes v * X_k[r][c], also when r < c.
struct SdpEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct SdpRow {
  std::vector<SdpEntry> entries;
  std::vector<std::pair<int, double>> free;
  double rhs = 0.0;
};

struct SdpProblem {
  std::vector<int> block_sizes;
  int num_free = 0;
  std::vector<SdpRow> rows;
  std::vector<SdpEntry> objective;
  std::vector<std::pair<int, double>> objective_free;
  double objective_offset = 0.0;

  int num_rows() const { return static_cast<int>(rows.size()); }
  bool has_objective() const { return !objective.empty() || !objective_free.empty(); }
  // Throws on indices out of range or entries below the diagonal.
  void validate() const;
  std::string summary() const;
};

// Line-based text format:
//   sdp 1
//   blocks <count> <size>...
//   free <count>
//   objective <offset>
//   B <block> <row> <col> <value>     (objective terms, then per row)
//   F <index> <value>
//   row <rhs>
//   end
std::string write_sdp_text(const SdpProblem& p);
SdpProblem read_sdp_text(std::string_view text);

}  // namespace tdsafe::sos
