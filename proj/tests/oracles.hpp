#pragma once

#include <limits>

#include "ducsim/mip.hpp"

namespace oracles {

// Exhaustive enumeration over every binary fixing; deliberately independent of
// the branch-and-bound search it checks.
inline double enumerate_miqp(const ducsim::MIQPProblem& p, double qp_tol = 1e-8,
                             Eigen::VectorXd* best_x = nullptr) {
  const size_t k = p.binary_vars.size();
  ducsim::QPProblem scratch = p.base;
  const Eigen::VectorXd lo0 = p.base.lo;
  const Eigen::VectorXd hi0 = p.base.hi;
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
    scratch.lo = lo0;
    scratch.hi = hi0;
    for (size_t i = 0; i < k; ++i) {
      const double v = (mask >> i) & 1 ? 1.0 : 0.0;
      scratch.lo[p.binary_vars[i]] = v;
      scratch.hi[p.binary_vars[i]] = v;
    }
    const ducsim::QPSolution s = ducsim::solve_qp(scratch, qp_tol, 300);
    if (s.status != ducsim::QPStatus::optimal) continue;
    if (s.objective < best) {
      best = s.objective;
      if (best_x) *best_x = s.x;
    }
  }
  return best;
}

}  // namespace oracles
