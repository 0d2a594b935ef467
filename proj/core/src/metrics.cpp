#include <algorithm>
#include <cmath>

#include "ducsim/runtime.hpp"

namespace ducsim {

Metrics compute_metrics(const RunResult& result,
                        std::optional<std::pair<double, double>> central) {
  Metrics m;
  if (!result.per_region.empty()) {
    int min_u = result.per_region.front().updates;
    int max_u = min_u;
    double compute = 0.0, comm = 0.0, idle = 0.0;
    for (const RegionTiming& rt : result.per_region) {
      min_u = std::min(min_u, rt.updates);
      max_u = std::max(max_u, rt.updates);
      compute += rt.compute_ms;
      comm += rt.comm_ms;
      idle += rt.idle_ms;
    }
    const double total = compute + comm + idle;
    m.async_degree = max_u > 0 ? static_cast<double>(min_u) / max_u : 1.0;
    if (total > 0) {
      m.compute_share = 100.0 * compute / total;
      m.comm_share = 100.0 * comm / total;
      m.idle_share = 100.0 * idle / total;
    }
  }
  m.total_ms = result.wall_clock_sim;

  std::optional<double> lb;
  if (central) lb = central->second;
  else if (result.central_lb) lb = result.central_lb;
  if (lb && *lb != 0.0)
    m.gap_percent = (result.final_objective - *lb) * 100.0 / *lb;
  return m;
}

MergeOutput merge_solution(const PowerCase& c, const std::vector<RegionView>& views,
                           const std::vector<const LocalSolution*>& solutions) {
  MergeOutput out;
  const int T = c.horizon;
  const int n_gens = static_cast<int>(c.generators.size());
  out.schedule.x = Eigen::MatrixXd::Zero(n_gens, T);
  out.schedule.y = Eigen::MatrixXd::Zero(n_gens, T);

  for (size_t r = 0; r < views.size(); ++r) {
    const RegionView& view = views[r];
    const LocalSolution& sol = *solutions[r];
    for (size_t g = 0; g < view.generators.size(); ++g) {
      const GenId id = view.generators[g].id;
      out.schedule.x.row(id) = sol.x.row(static_cast<Eigen::Index>(g));
      out.schedule.y.row(id) = sol.y.row(static_cast<Eigen::Index>(g));
    }
  }

  // Tie lines appear in exactly two regions; report the average and the
  // disagreement between the two local values.
  std::map<LineIdx, std::vector<const Eigen::VectorXd*>> by_line;
  for (size_t r = 0; r < views.size(); ++r)
    for (const auto& [line, f] : solutions[r]->flow) by_line[line].push_back(&f);

  for (const auto& [line, sides] : by_line) {
    if (sides.size() == 1) {
      out.schedule.tie_flow[line] = *sides[0];
      continue;
    }
    out.schedule.tie_flow[line] = 0.5 * (*sides[0] + *sides[1]);
    TieMismatch mm;
    mm.line = line;
    mm.max_abs = (*sides[0] - *sides[1]).cwiseAbs().maxCoeff();
    out.mismatches.push_back(mm);
  }
  return out;
}

}  // namespace ducsim
