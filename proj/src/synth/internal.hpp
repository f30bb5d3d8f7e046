#pragma once

// Shared pieces of the synthesis drivers. Not installed.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdsafe/model/system.hpp"
#include "tdsafe/sdp/solver.hpp"
#include "tdsafe/sos/program.hpp"
#include "tdsafe/synth/synthesis.hpp"

namespace tdsafe::synth::detail {

// The system in coordinates x = D x~ (D = half-widths of the X box). Set
// descriptors are substituted and normalised to unit max coefficient. Inputs
// keep their physical units.
struct ScaledSystem {
  model::System sys;
  Eigen::VectorXd d;
};

ScaledSystem scale_system(const model::System& sys);

// p(x~) -> p(x / d) in the original coordinates (x and xh both rescaled).
poly::Polynomial unscale(const poly::Polynomial& p, const Eigen::VectorXd& d);
// p(x) -> p(D x~), optionally divided by its largest coefficient magnitude.
poly::Polynomial rescale(const poly::Polynomial& p, const Eigen::VectorXd& d, bool normalise);

// Descriptors of a set with their variables renamed from x to `group`.
std::vector<sos::LinPolynomial> descriptors_in(const model::SemialgebraicSet& s, const std::string& group);

// sum_i Y_i J_i with fresh SOS multipliers Y_i over `groups`. `fixed_degree`
// overrides the degree rule when >= 0.
sos::LinPolynomial localise(sos::SosProgram& prog, const std::vector<sos::LinPolynomial>& J,
                            const std::vector<std::string>& groups, int target_degree, int fixed_degree,
                            const std::string& name);

int even_ceiling(int d);

// Fills the fields of an Attempt from a solver result.
Attempt attempt_of(const std::string& label, double parameter, const sdp::SdpSolution& s);

// Runs jobs[i]() with at most `threads` in flight; results keep job order.
template <class R>
std::vector<R> run_jobs(const std::vector<std::function<R()>>& jobs, int threads);

}  // namespace tdsafe::synth::detail

#include <future>

namespace tdsafe::synth::detail {

template <class R>
std::vector<R> run_jobs(const std::vector<std::function<R()>>& jobs, int threads) {
  std::vector<R> out;
  out.reserve(jobs.size());
  if (threads <= 1) {
    for (const auto& j : jobs) out.push_back(j());
    return out;
  }
  for (std::size_t start = 0; start < jobs.size(); start += threads) {
    std::vector<std::future<R>> batch;
    for (std::size_t i = start; i < std::min(jobs.size(), start + threads); ++i) {
      batch.push_back(std::async(std::launch::async, jobs[i]));
    }
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

}  // namespace tdsafe::synth::detail
