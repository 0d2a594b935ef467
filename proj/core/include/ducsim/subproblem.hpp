#pragma once

#include <map>
#include <optional>

#include "ducsim/case_io.hpp"
#include "ducsim/consensus.hpp"
#include "ducsim/qp.hpp"

namespace ducsim {

struct MIQPProblem;  // mip.hpp

// Variable order: x | y | pi_up | pi_down (each gens x T), then theta
// (all region buses x T), tie flows (x T), and the production variable p.
struct VarLayout {
  int T = 0;
  int n_gens = 0;
  bool with_production = true;
  std::vector<BusId> bus_order;    // internal + boundary + foreign, ascending
  std::vector<LineIdx> tie_order;  // canonical lines, ascending index
  std::map<BusId, int> bus_pos;
  std::map<LineIdx, int> tie_pos;

  static VarLayout make(const RegionView& view, int T, bool with_production);

  int n() const {
    return T * (4 * n_gens + static_cast<int>(bus_order.size()) +
                static_cast<int>(tie_order.size()) + (with_production ? 1 : 0));
  }
  int ix_x(int g, int t) const { return g * T + t; }
  int ix_y(int g, int t) const { return (n_gens + g) * T + t; }
  int ix_pu(int g, int t) const { return (2 * n_gens + g) * T + t; }
  int ix_pd(int g, int t) const { return (3 * n_gens + g) * T + t; }
  int ix_theta(BusId b, int t) const { return (4 * n_gens + bus_pos.at(b)) * T + t; }
  int ix_flow(LineIdx l, int t) const {
    return (4 * n_gens + static_cast<int>(bus_order.size()) + tie_pos.at(l)) * T + t;
  }
  int ix_p(int t) const {
    return (4 * n_gens + static_cast<int>(bus_order.size()) +
            static_cast<int>(tie_order.size())) * T + t;
  }
};

struct BuildOptions {
  bool production_coupling = true;       // p variables, coupling row, eta penalty
  std::optional<BusId> reference_bus;    // defaults to bus 0 when the region owns it
};

struct LocalSolution {
  Eigen::MatrixXd x, y, pi_up, pi_down;    // gens x T
  std::map<BusId, Eigen::VectorXd> theta;  // all region buses
  std::map<LineIdx, Eigen::VectorXd> flow; // tie lines, canonical sign
  Eigen::VectorXd p;                       // regional production per period
  double obj_augmented = 0.0;
  double obj_true = 0.0;
};

// Region subproblem with consensus penalties, commitment relaxed to [0,1].
QPProblem build_convex(const RegionView& view, const ConsensusState& consensus,
                       const PowerCase& c, const RunConfig& cfg, BuildOptions opts = {});

// Same model with commitment variables marked binary.
MIQPProblem build_binary(const RegionView& view, const ConsensusState& consensus,
                         const PowerCase& c, const RunConfig& cfg, BuildOptions opts = {});

LocalSolution extract_solution(const RegionView& view, const VarLayout& layout,
                               const Eigen::VectorXd& x);

// Dispatch + commitment + startup + shutdown cost; no penalty terms.
double true_cost(const LocalSolution& sol, const RegionView& view);

}  // namespace ducsim
