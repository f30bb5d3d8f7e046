#include "tdsafe/sos/sdp_problem.hpp"

#include <charconv>
#include <sstream>

#include "tdsafe/common/error.hpp"
#include "tdsafe/poly/io.hpp"

namespace tdsafe::sos {

void SdpProblem::validate() const {
  auto check = [&](const SdpEntry& e) {
    if (e.block < 0 || e.block >= static_cast<int>(block_sizes.size())) throw Error("SDP entry block out of range");
    int s = block_sizes[e.block];
    if (e.row < 0 || e.col < e.row || e.col >= s) throw Error("SDP entry outside the upper triangle");
  };
  for (int s : block_sizes) {
    if (s < 1) throw Error("SDP block of size < 1");
  }
  for (const auto& e : objective) check(e);
  for (const auto& [i, v] : objective_free) {
    if (i < 0 || i >= num_free) throw Error("SDP free index out of range");
  }
  for (const auto& r : rows) {
    for (const auto& e : r.entries) check(e);
    for (const auto& [i, v] : r.free) {
      if (i < 0 || i >= num_free) throw Error("SDP free index out of range");
    }
  }
}

std::string SdpProblem::summary() const {
  std::ostringstream os;
  long psd_vars = 0;
  int largest = 0;
  for (int s : block_sizes) {
    psd_vars += static_cast<long>(s) * (s + 1) / 2;
    largest = std::max(largest, s);
  }
  os << block_sizes.size() << " PSD blocks (largest " << largest << ", " << psd_vars
     << " entries), " << num_free << " free variables, " << rows.size() << " equalities";
  return os.str();
}

std::string write_sdp_text(const SdpProblem& p) {
  std::ostringstream os;
  auto num = [](double v) { return poly::format_number(v); };
  os << "sdp 1\nblocks " << p.block_sizes.size();
  for (int s : p.block_sizes) os << ' ' << s;
  os << "\nfree " << p.num_free << "\nobjective " << num(p.objective_offset) << '\n';
  auto body = [&](const std::vector<SdpEntry>& es, const std::vector<std::pair<int, double>>& fs) {
    for (const auto& e : es) os << "B " << e.block << ' ' << e.row << ' ' << e.col << ' ' << num(e.value) << '\n';
    for (const auto& [i, v] : fs) os << "F " << i << ' ' << num(v) << '\n';
  };
  body(p.objective, p.objective_free);
  for (const auto& r : p.rows) {
    os << "row " << num(r.rhs) << '\n';
    body(r.entries, r.free);
  }
  os << "end\n";
  return os.str();
}

SdpProblem read_sdp_text(std::string_view text) {
  std::istringstream is{std::string(text)};
  SdpProblem p;
  std::string line;
  int line_no = 0;
  std::size_t offset = 0;
  bool header = false, ended = false;
  SdpRow* cur = nullptr;
  auto fail = [&](const std::string& msg) -> void {
    throw ParseError("line " + std::to_string(line_no) + ": " + msg, offset);
  };
  while (std::getline(is, line)) {
    ++line_no;
    std::size_t this_offset = offset;
    offset += line.size() + 1;
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    offset = this_offset;
    if (ended) fail("content after end");
    if (!header) {
      int version = 0;
      if (kw != "sdp" || !(ls >> version) || version != 1) fail("expected 'sdp 1' header");
      header = true;
    } else if (kw == "blocks") {
      int count = 0;
      if (!(ls >> count) || count < 0) fail("bad block count");
      p.block_sizes.resize(count);
      for (auto& s : p.block_sizes) {
        if (!(ls >> s)) fail("missing block size");
      }
    } else if (kw == "free") {
      if (!(ls >> p.num_free) || p.num_free < 0) fail("bad free count");
    } else if (kw == "objective") {
      if (!(ls >> p.objective_offset)) fail("bad objective offset");
    } else if (kw == "row") {
      p.rows.emplace_back();
      cur = &p.rows.back();
      if (!(ls >> cur->rhs)) fail("bad row right-hand side");
    } else if (kw == "B") {
      SdpEntry e;
      if (!(ls >> e.block >> e.row >> e.col >> e.value)) fail("bad B entry");
      (cur ? cur->entries : p.objective).push_back(e);
    } else if (kw == "F") {
      int i = 0;
      double v = 0;
      if (!(ls >> i >> v)) fail("bad F entry");
      (cur ? cur->free : p.objective_free).emplace_back(i, v);
    } else if (kw == "end") {
      ended = true;
    } else {
      fail("unknown keyword '" + kw + "'");
    }
    offset = this_offset + line.size() + 1;
  }
  if (!header) throw ParseError("empty SDP text", 0);
  if (!ended) throw ParseError("missing 'end'", offset);
  p.validate();
  return p;
}

}  // namespace tdsafe::sos
