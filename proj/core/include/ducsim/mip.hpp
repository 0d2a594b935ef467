#pragma once

#include <vector>

#include "ducsim/case_io.hpp"
#include "ducsim/qp.hpp"

namespace ducsim {

struct MIQPProblem {
  QPProblem base;
  std::vector<int> binary_vars;

  void validate() const;
};

enum class MIPStatus { optimal, infeasible, node_limit };

struct MIQPSolution {
  Eigen::VectorXd x;
  double objective = 0.0;    // incumbent
  double lower_bound = 0.0;  // best node bound
  double gap = 0.0;          // (objective - lower_bound) / max(|lower_bound|, 1)
  MIPStatus status = MIPStatus::node_limit;
  int nodes = 0;
  std::vector<double> bound_trace;  // global bound after each explored node
};

// Best-first branch and bound over the binary set; most-fractional branching,
// ties broken to the lowest index, down branch explored first.
MIQPSolution solve_miqp(const MIQPProblem& problem, double mip_gap, int node_limit = 50000,
                        double qp_tol = 1e-6, QpSolver* solver = nullptr);

struct CentralResult {
  MIQPSolution solution;
  double gamma_c = 0.0;     // true UC cost of the incumbent
  double gamma_c_lb = 0.0;  // centralized lower bound
  Eigen::MatrixXd x, y;     // gens x T schedule
};

// Whole-network unit commitment with no consensus terms; the benchmark oracle.
// Throws std::runtime_error when the case is infeasible.
CentralResult solve_centralized(const PowerCase& c, const RunConfig& cfg);

}  // namespace ducsim
