#include "ducsim/mip.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <queue>
#include <stdexcept>

namespace ducsim {

namespace {
constexpr double kIntTol = 1e-6;

struct Node {
  int id = 0;
  double bound = 0.0;  // parent relaxation objective, a valid subtree bound
  std::vector<std::pair<int, double>> fixes;  // (binary var, fixed value)

  bool operator>(const Node& o) const {
    if (bound != o.bound) return bound > o.bound;
    return id > o.id;
  }
};
}  // namespace

void MIQPProblem::validate() const {
  base.validate();
  for (const int i : binary_vars) {
    if (i < 0 || i >= base.n)
      throw std::invalid_argument("MIQPProblem: binary index out of range");
    if (base.lo[i] < -kIntTol || base.hi[i] > 1.0 + kIntTol)
      throw std::invalid_argument("MIQPProblem: binary bounds must lie within [0,1]");
  }
}

namespace {

// Most fractional binary; ties to the lowest index.
int pick_branch_var(const Eigen::VectorXd& x, const std::vector<int>& binaries) {
  int var = -1;
  double best = kIntTol;
  for (const int v : binaries) {
    const double frac = std::abs(x[v] - std::round(x[v]));
    if (frac > best) {
      best = frac;
      var = v;
    }
  }
  return var;
}

}  // namespace

MIQPSolution solve_miqp(const MIQPProblem& problem, double mip_gap, int node_limit,
                        double qp_tol, QpSolver* solver) {
  problem.validate();
  QpSolver local;
  QpSolver& qp = solver ? *solver : local;

  QPProblem scratch = problem.base;
  const Eigen::VectorXd lo0 = problem.base.lo;
  const Eigen::VectorXd hi0 = problem.base.hi;

  MIQPSolution out;
  double incumbent = std::numeric_limits<double>::infinity();
  Eigen::VectorXd inc_x;
  double global_lb = -std::numeric_limits<double>::infinity();
  bool any_infeasible_leaf = false;

  auto rel_gap = [&](double lb) { return (incumbent - lb) / std::max(std::abs(lb), 1.0); };

  // Seed the incumbent with a deterministic rounding dive so the best-first
  // search can prune from the start; without it, flat penalty-dominated bound
  // landscapes exhaust any node budget before the first integral leaf.
  {
    std::vector<std::pair<int, double>> fixes;
    Eigen::VectorXd warm;
    for (size_t depth = 0; depth <= problem.binary_vars.size(); ++depth) {
      scratch.lo = lo0;
      scratch.hi = hi0;
      for (const auto& [v, val] : fixes) {
        scratch.lo[v] = val;
        scratch.hi[v] = val;
      }
      QPSolution relax = qp.solve(scratch, qp_tol, 200, warm.size() ? &warm : nullptr);
      if (relax.status == QPStatus::infeasible && !fixes.empty()) {
        fixes.back().second = 1.0 - fixes.back().second;  // flip the last fix once
        scratch.lo[fixes.back().first] = fixes.back().second;
        scratch.hi[fixes.back().first] = fixes.back().second;
        relax = qp.solve(scratch, qp_tol, 200, warm.size() ? &warm : nullptr);
      }
      if (relax.status != QPStatus::optimal) break;
      warm = relax.x;
      const int var = pick_branch_var(relax.x, problem.binary_vars);
      if (var < 0) {
        incumbent = relax.objective;
        inc_x = relax.x;
        break;
      }
      fixes.emplace_back(var, relax.x[var] > 0.5 ? 1.0 : 0.0);
    }
  }

  const bool dbg = std::getenv("DUCSIM_MIP_DEBUG") != nullptr;
  if (dbg)
    std::fprintf(stderr, "miqp: %zu binaries, dive incumbent=%.4f\n",
                 problem.binary_vars.size(), incumbent);

  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  int next_id = 0;
  open.push({next_id++, -std::numeric_limits<double>::infinity(), {}});

  while (!open.empty() && out.nodes < node_limit) {
    const Node node = open.top();
    open.pop();
    // Best-first order makes the popped bound the tightest over all open
    // nodes, so it advances the global bound monotonically.
    global_lb = std::max(global_lb, std::min(node.bound, incumbent));
    if (std::isfinite(incumbent) && rel_gap(global_lb) <= mip_gap) break;
    if (std::isfinite(incumbent) && node.bound >= incumbent - 1e-12) continue;  // dominated

    scratch.lo = lo0;
    scratch.hi = hi0;
    for (const auto& [v, val] : node.fixes) {
      scratch.lo[v] = val;
      scratch.hi[v] = val;
    }
    const QPSolution relax = qp.solve(scratch, qp_tol, 200);
    ++out.nodes;
    out.bound_trace.push_back(global_lb);

    if (relax.status == QPStatus::infeasible) {
      any_infeasible_leaf = true;
      continue;
    }
    if (relax.status == QPStatus::iteration_limit && relax.kkt_residual > 1e2 * qp_tol)
      continue;  // unresolved node: drop it, its parent bound already counted

    const double bound = relax.objective;
    if (std::isfinite(incumbent) && bound >= incumbent - 1e-12) continue;

    const int branch_var = pick_branch_var(relax.x, problem.binary_vars);

    if (branch_var < 0) {
      if (bound < incumbent - 1e-12) {
        incumbent = bound;
        inc_x = relax.x;
      }
      continue;
    }

    Node down{next_id++, bound, node.fixes};
    down.fixes.emplace_back(branch_var, 0.0);
    Node up{next_id++, bound, node.fixes};
    up.fixes.emplace_back(branch_var, 1.0);
    open.push(std::move(down));
    open.push(std::move(up));
  }

  if (!std::isfinite(incumbent)) {
    out.status = open.empty() && any_infeasible_leaf ? MIPStatus::infeasible
                                                     : MIPStatus::node_limit;
    out.objective = std::numeric_limits<double>::infinity();
    out.lower_bound = global_lb;
    out.gap = std::numeric_limits<double>::infinity();
    return out;
  }

  if (dbg)
    std::fprintf(stderr, "miqp done: nodes=%d lb=%.4f inc=%.4f gap=%.5f\n", out.nodes,
                 global_lb, incumbent, rel_gap(global_lb));
  double final_lb = open.empty() ? incumbent : std::max(global_lb, open.top().bound);
  final_lb = std::min(final_lb, incumbent);
  out.x = inc_x;
  out.objective = incumbent;
  out.lower_bound = final_lb;
  out.gap = rel_gap(final_lb);
  out.status = out.gap <= mip_gap + 1e-12 ? MIPStatus::optimal : MIPStatus::node_limit;
  return out;
}

}  // namespace ducsim
