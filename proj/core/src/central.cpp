#include <stdexcept>

#include "ducsim/mip.hpp"
#include "ducsim/subproblem.hpp"

namespace ducsim {

// The centralized solve is the one-region special case: no tie lines, no
// consensus penalties, no production coupling. Used as benchmark and oracle.
CentralResult solve_centralized(const PowerCase& c, const RunConfig& cfg) {
  const auto violations = validate_case(c);
  if (!violations.empty())
    throw std::invalid_argument("solve_centralized: case invalid: " + violations.front().str());

  Partition whole;
  whole.region_count = 1;
  whole.owner.assign(c.buses.size(), 0);
  const RegionView view = classify_region(c, whole, 0);
  const ConsensusState consensus = ConsensusState::init(view, c, c.horizon);

  BuildOptions opts;
  opts.production_coupling = false;
  MIQPProblem mp = build_binary(view, consensus, c, cfg, opts);

  QpSolver solver;
  CentralResult out;
  out.solution = solve_miqp(mp, cfg.mip_gap, cfg.node_limit, cfg.qp_tol, &solver);
  if (out.solution.status == MIPStatus::infeasible)
    throw std::runtime_error("solve_centralized: case is infeasible (demand unservable)");
  if (!std::isfinite(out.solution.objective))
    throw std::runtime_error("solve_centralized: no incumbent within node limit");

  const VarLayout layout = VarLayout::make(view, c.horizon, false);
  const LocalSolution sol = extract_solution(view, layout, out.solution.x);
  out.gamma_c = sol.obj_true;
  // The search bound applies to the regularized objective; cap it so it stays
  // a valid bound on the true cost.
  out.gamma_c_lb = std::min(out.solution.lower_bound, out.gamma_c);
  out.x = sol.x;
  out.y = sol.y;
  return out;
}

}  // namespace ducsim
