#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <optional>

namespace ducsim {

// min 1/2 x'Qx + q'x + objective_constant
// s.t. A x = b,  G x <= h,  lo <= x <= hi   (+/- infinity allowed in lo/hi)
struct QPProblem {
  int n = 0;
  Eigen::SparseMatrix<double> Q;  // symmetric PSD, full storage
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::SparseMatrix<double> G;
  Eigen::VectorXd h;
  Eigen::VectorXd lo, hi;
  double objective_constant = 0.0;

  void validate() const;  // throws std::invalid_argument on dimension mismatch
  double objective_at(const Eigen::VectorXd& x) const;
};

enum class QPStatus { optimal, infeasible, iteration_limit };

struct QPSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd duals_eq;      // convention: Qx + q + A'y + G'z + nu = 0
  Eigen::VectorXd duals_ineq;    // z >= 0 for Gx <= h
  Eigen::VectorXd duals_bounds;  // nu, signed: >0 upper bound active, <0 lower
  double objective = 0.0;
  double kkt_residual = 0.0;  // max-norm over stationarity, feasibility, complementarity
  double infeasibility = 0.0; // phase-1 certificate when status == infeasible
  QPStatus status = QPStatus::iteration_limit;
  int iterations = 0;
};

// Primal-dual interior point solver. One instance caches the KKT symbolic
// factorization, so repeated solves over structurally identical problems
// (consensus iterations, branch-and-bound nodes) skip the analysis phase.
class QpSolver {
 public:
  QPSolution solve(const QPProblem& p, double tol = 1e-6, int iter_limit = 200,
                   const Eigen::VectorXd* warm_start = nullptr);

  // Largest KKT residual over solves that reported optimal.
  double max_kkt_seen() const { return max_kkt_seen_; }

 private:
  double max_kkt_seen_ = 0.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
  bool analyzed_ = false;
  std::vector<int> pattern_outer_, pattern_inner_;

  bool same_pattern(const Eigen::SparseMatrix<double>& kkt) const;
  void remember_pattern(const Eigen::SparseMatrix<double>& kkt);
  QPSolution run_ipm(const QPProblem& p, double tol, int iter_limit,
                     const Eigen::VectorXd* warm_start, bool allow_phase1);
  friend QPSolution solve_qp(const QPProblem&, double, int, const Eigen::VectorXd*);
};

QPSolution solve_qp(const QPProblem& p, double tol = 1e-6, int iter_limit = 200,
                    const Eigen::VectorXd* warm_start = nullptr);

}  // namespace ducsim
