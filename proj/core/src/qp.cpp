#include "ducsim/qp.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ducsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// General rows first, then one row per finite upper bound (+x <= hi), then one
// per finite lower bound (-x <= -lo). Equal bounds are widened by a hair so an
// interior point exists; branch-and-bound fixes binaries this way.
struct FoldedIneq {
  SpMat C;
  Eigen::VectorXd d;
  std::vector<int> upper_var, lower_var;
  int m_gen = 0;
};

FoldedIneq fold_inequalities(const QPProblem& p) {
  constexpr double kWiden = 1e-9;
  FoldedIneq f;
  f.m_gen = static_cast<int>(p.G.rows());
  for (int i = 0; i < p.n; ++i) {
    const bool pinched = std::isfinite(p.lo[i]) && std::isfinite(p.hi[i]) &&
                         p.hi[i] - p.lo[i] <= 1e-12;
    if (std::isfinite(p.hi[i])) f.upper_var.push_back(i);
    if (std::isfinite(p.lo[i])) f.lower_var.push_back(i);
    (void)pinched;
  }
  const int m = f.m_gen + static_cast<int>(f.upper_var.size() + f.lower_var.size());
  f.C.resize(m, p.n);
  f.d.resize(m);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(p.G.nonZeros()) + f.upper_var.size() + f.lower_var.size());
  for (int k = 0; k < p.G.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.G, k); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  f.d.head(f.m_gen) = p.h;
  int row = f.m_gen;
  for (const int v : f.upper_var) {
    const bool pinched = std::isfinite(p.lo[v]) && p.hi[v] - p.lo[v] <= 1e-12;
    trip.emplace_back(row, v, 1.0);
    f.d[row] = p.hi[v] + (pinched ? kWiden : 0.0);
    ++row;
  }
  for (const int v : f.lower_var) {
    const bool pinched = std::isfinite(p.hi[v]) && p.hi[v] - p.lo[v] <= 1e-12;
    trip.emplace_back(row, v, -1.0);
    f.d[row] = -p.lo[v] + (pinched ? kWiden : 0.0);
    ++row;
  }
  f.C.setFromTriplets(trip.begin(), trip.end());
  return f;
}

// Exact KKT residual against the original problem data (max-norm over
// stationarity, primal feasibility and complementarity).
double exact_kkt_residual(const QPProblem& p, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& z_gen,
                          const Eigen::VectorXd& nu) {
  Eigen::VectorXd stat = p.Q * x + p.q + nu;
  if (p.A.rows() > 0) stat += p.A.transpose() * y;
  if (p.G.rows() > 0) stat += p.G.transpose() * z_gen;
  double r = stat.cwiseAbs().maxCoeff();

  if (p.A.rows() > 0) r = std::max(r, (p.A * x - p.b).cwiseAbs().maxCoeff());
  Eigen::VectorXd gslack;
  if (p.G.rows() > 0) {
    gslack = p.G * x - p.h;
    r = std::max(r, gslack.maxCoeff());
    r = std::max(r, (z_gen.array() * gslack.array()).abs().maxCoeff());
    r = std::max(r, -z_gen.minCoeff());
  }
  for (int i = 0; i < p.n; ++i) {
    if (std::isfinite(p.hi[i])) r = std::max(r, x[i] - p.hi[i]);
    if (std::isfinite(p.lo[i])) r = std::max(r, p.lo[i] - x[i]);
    if (nu[i] > 0 && std::isfinite(p.hi[i])) r = std::max(r, std::abs(nu[i] * (x[i] - p.hi[i])));
    if (nu[i] < 0 && std::isfinite(p.lo[i])) r = std::max(r, std::abs(nu[i] * (x[i] - p.lo[i])));
  }
  return r;
}

QPProblem build_phase1(const QPProblem& p, const FoldedIneq& f) {
  const int me = static_cast<int>(p.A.rows());
  const int mg = f.m_gen;
  const int n1 = p.n + 2 * me + mg;  // x, u+, u-, u_g
  QPProblem ph;
  ph.n = n1;
  std::vector<Triplet> qt;
  for (int i = 0; i < n1; ++i) qt.emplace_back(i, i, 1e-9);
  ph.Q.resize(n1, n1);
  ph.Q.setFromTriplets(qt.begin(), qt.end());
  ph.q = Eigen::VectorXd::Zero(n1);
  ph.q.segment(p.n, 2 * me + mg).setOnes();

  std::vector<Triplet> at;
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.A, k); it; ++it)
      at.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int i = 0; i < me; ++i) {
    at.emplace_back(i, p.n + i, 1.0);
    at.emplace_back(i, p.n + me + i, -1.0);
  }
  ph.A.resize(me, n1);
  ph.A.setFromTriplets(at.begin(), at.end());
  ph.b = p.b;

  std::vector<Triplet> gt;
  for (int k = 0; k < p.G.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.G, k); it; ++it)
      gt.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int i = 0; i < mg; ++i) gt.emplace_back(i, p.n + 2 * me + i, -1.0);
  ph.G.resize(mg, n1);
  ph.G.setFromTriplets(gt.begin(), gt.end());
  ph.h = p.h;

  ph.lo = Eigen::VectorXd::Constant(n1, 0.0);
  ph.hi = Eigen::VectorXd::Constant(n1, kInf);
  ph.lo.head(p.n) = p.lo;
  ph.hi.head(p.n) = p.hi;
  return ph;
}

}  // namespace

void QPProblem::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("QPProblem: " + msg); };
  if (n < 1) fail("n must be >= 1");
  if (Q.rows() != n || Q.cols() != n) fail("Q must be n x n");
  if (q.size() != n) fail("q must have length n");
  if (A.rows() != b.size()) fail("A/b row mismatch");
  if (A.rows() > 0 && A.cols() != n) fail("A column count mismatch");
  if (G.rows() != h.size()) fail("G/h row mismatch");
  if (G.rows() > 0 && G.cols() != n) fail("G column count mismatch");
  if (lo.size() != n || hi.size() != n) fail("bounds must have length n");
  for (int i = 0; i < n; ++i)
    if (lo[i] > hi[i]) fail("lo > hi for variable " + std::to_string(i));
}

double QPProblem::objective_at(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(Q * x) + q.dot(x) + objective_constant;
}

bool QpSolver::same_pattern(const SpMat& kkt) const {
  const int outer = static_cast<int>(kkt.outerSize());
  if (!analyzed_ || static_cast<int>(pattern_outer_.size()) != outer + 1 ||
      static_cast<int>(pattern_inner_.size()) != kkt.nonZeros())
    return false;
  return std::equal(pattern_outer_.begin(), pattern_outer_.end(), kkt.outerIndexPtr()) &&
         std::equal(pattern_inner_.begin(), pattern_inner_.end(), kkt.innerIndexPtr());
}

void QpSolver::remember_pattern(const SpMat& kkt) {
  pattern_outer_.assign(kkt.outerIndexPtr(), kkt.outerIndexPtr() + kkt.outerSize() + 1);
  pattern_inner_.assign(kkt.innerIndexPtr(), kkt.innerIndexPtr() + kkt.nonZeros());
  analyzed_ = true;
}

namespace {

// Variables with lo == hi are substituted out before the interior point loop;
// the opposing bound rows they would produce have no interior and stall it.
struct Reduction {
  std::vector<int> free_vars;          // reduced index -> original index
  std::vector<int> reduced_index;      // original index -> reduced or -1
  Eigen::VectorXd fixed_value;         // original length, 0 for free vars
  std::vector<int> eq_rows, ineq_rows; // surviving original rows
  bool trivially_infeasible = false;
  double worst_violation = 0.0;
};

QPProblem reduce_fixed(const QPProblem& p, Reduction& red) {
  red.reduced_index.assign(static_cast<size_t>(p.n), -1);
  red.fixed_value = Eigen::VectorXd::Zero(p.n);
  for (int i = 0; i < p.n; ++i) {
    if (std::isfinite(p.lo[i]) && std::isfinite(p.hi[i]) && p.hi[i] - p.lo[i] <= 1e-12) {
      red.fixed_value[i] = 0.5 * (p.lo[i] + p.hi[i]);
    } else {
      red.reduced_index[static_cast<size_t>(i)] = static_cast<int>(red.free_vars.size());
      red.free_vars.push_back(i);
    }
  }

  const int n2 = static_cast<int>(red.free_vars.size());
  QPProblem q;
  q.n = std::max(n2, 0);
  q.objective_constant = p.objective_constant;

  std::vector<Triplet> qt;
  Eigen::VectorXd qlin = Eigen::VectorXd::Zero(n2);
  for (int k = 0; k < p.Q.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.Q, k); it; ++it) {
      const int ri = red.reduced_index[static_cast<size_t>(it.row())];
      const int ci = red.reduced_index[static_cast<size_t>(it.col())];
      if (ri >= 0 && ci >= 0) {
        qt.emplace_back(ri, ci, it.value());
      } else if (ri >= 0) {
        qlin[ri] += it.value() * red.fixed_value[it.col()];
      } else if (ci < 0) {
        q.objective_constant +=
            0.5 * red.fixed_value[it.row()] * it.value() * red.fixed_value[it.col()];
      }
    }
  q.Q.resize(n2, n2);
  q.Q.setFromTriplets(qt.begin(), qt.end());
  q.q = qlin;
  for (int i = 0; i < p.n; ++i) {
    const int ri = red.reduced_index[static_cast<size_t>(i)];
    if (ri >= 0) q.q[ri] += p.q[i];
    else q.objective_constant += p.q[i] * red.fixed_value[i];
  }

  auto reduce_rows = [&](const SpMat& M, const Eigen::VectorXd& rhs, bool equality,
                         std::vector<int>& kept, SpMat& Mout, Eigen::VectorXd& rhs_out) {
    std::vector<Triplet> trip;
    std::vector<double> rvals;
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(M.rows());
    std::vector<bool> has_free(static_cast<size_t>(M.rows()), false);
    for (int k = 0; k < M.outerSize(); ++k)
      for (SpMat::InnerIterator it(M, k); it; ++it) {
        const int ci = red.reduced_index[static_cast<size_t>(it.col())];
        if (ci >= 0) has_free[static_cast<size_t>(it.row())] = true;
        else shift[it.row()] += it.value() * red.fixed_value[it.col()];
      }
    std::vector<int> row_map(static_cast<size_t>(M.rows()), -1);
    for (int r = 0; r < M.rows(); ++r) {
      const double resid = rhs[r] - shift[r];
      if (!has_free[static_cast<size_t>(r)]) {
        const double viol = equality ? std::abs(resid) : std::max(0.0, -resid);
        if (viol > 1e-9) {
          red.trivially_infeasible = true;
          red.worst_violation = std::max(red.worst_violation, viol);
        }
        continue;
      }
      row_map[static_cast<size_t>(r)] = static_cast<int>(rvals.size());
      kept.push_back(r);
      rvals.push_back(resid);
    }
    for (int k = 0; k < M.outerSize(); ++k)
      for (SpMat::InnerIterator it(M, k); it; ++it) {
        const int ci = red.reduced_index[static_cast<size_t>(it.col())];
        const int rr = row_map[static_cast<size_t>(it.row())];
        if (ci >= 0 && rr >= 0) trip.emplace_back(rr, ci, it.value());
      }
    Mout.resize(static_cast<Eigen::Index>(rvals.size()), n2);
    Mout.setFromTriplets(trip.begin(), trip.end());
    rhs_out = Eigen::Map<Eigen::VectorXd>(rvals.data(), static_cast<Eigen::Index>(rvals.size()));
  };

  reduce_rows(p.A, p.b, true, red.eq_rows, q.A, q.b);
  reduce_rows(p.G, p.h, false, red.ineq_rows, q.G, q.h);

  q.lo.resize(n2);
  q.hi.resize(n2);
  for (int j = 0; j < n2; ++j) {
    q.lo[j] = p.lo[red.free_vars[static_cast<size_t>(j)]];
    q.hi[j] = p.hi[red.free_vars[static_cast<size_t>(j)]];
  }
  return q;
}

}  // namespace

QPSolution QpSolver::solve(const QPProblem& p, double tol, int iter_limit,
                           const Eigen::VectorXd* warm_start) {
  p.validate();
  bool any_fixed = false;
  for (int i = 0; i < p.n && !any_fixed; ++i)
    any_fixed = std::isfinite(p.lo[i]) && std::isfinite(p.hi[i]) && p.hi[i] - p.lo[i] <= 1e-12;

  QPSolution sol;
  if (!any_fixed) {
    sol = run_ipm(p, tol, iter_limit, warm_start, /*allow_phase1=*/true);
  } else {
    Reduction red;
    const QPProblem reduced = reduce_fixed(p, red);
    if (red.trivially_infeasible) {
      sol.status = QPStatus::infeasible;
      sol.infeasibility = red.worst_violation;
      sol.x = red.fixed_value;
      sol.duals_eq = Eigen::VectorXd::Zero(p.A.rows());
      sol.duals_ineq = Eigen::VectorXd::Zero(p.G.rows());
      sol.duals_bounds = Eigen::VectorXd::Zero(p.n);
      sol.objective = p.objective_at(sol.x);
      return sol;
    }

    QPSolution inner;
    if (reduced.n == 0) {
      inner.status = QPStatus::optimal;
      inner.x.resize(0);
      inner.duals_eq = Eigen::VectorXd::Zero(reduced.A.rows());
      inner.duals_ineq = Eigen::VectorXd::Zero(reduced.G.rows());
    } else {
      std::optional<Eigen::VectorXd> warm2;
      if (warm_start && warm_start->size() == p.n) {
        warm2.emplace(reduced.n);
        for (int j = 0; j < reduced.n; ++j)
          (*warm2)[j] = (*warm_start)[red.free_vars[static_cast<size_t>(j)]];
      }
      QpSolver aux;  // pattern differs from the full problem's cache
      inner = aux.run_ipm(reduced, tol, iter_limit, warm2 ? &*warm2 : nullptr, true);
    }

    sol.status = inner.status;
    sol.infeasibility = inner.infeasibility;
    sol.iterations = inner.iterations;
    sol.x = red.fixed_value;
    for (int j = 0; j < reduced.n; ++j)
      sol.x[red.free_vars[static_cast<size_t>(j)]] = inner.x[j];
    sol.duals_eq = Eigen::VectorXd::Zero(p.A.rows());
    for (size_t r = 0; r < red.eq_rows.size(); ++r)
      sol.duals_eq[red.eq_rows[r]] = inner.duals_eq[static_cast<Eigen::Index>(r)];
    sol.duals_ineq = Eigen::VectorXd::Zero(p.G.rows());
    for (size_t r = 0; r < red.ineq_rows.size(); ++r)
      sol.duals_ineq[red.ineq_rows[r]] = inner.duals_ineq[static_cast<Eigen::Index>(r)];
    // Fixed variables absorb their stationarity residual through the bound
    // multiplier; both bound rows are active, so any sign is attainable.
    Eigen::VectorXd stat = p.Q * sol.x + p.q;
    if (p.A.rows() > 0) stat += p.A.transpose() * sol.duals_eq;
    if (p.G.rows() > 0) stat += p.G.transpose() * sol.duals_ineq;
    sol.duals_bounds = Eigen::VectorXd::Zero(p.n);
    for (int j = 0; j < reduced.n; ++j)
      sol.duals_bounds[red.free_vars[static_cast<size_t>(j)]] =
          inner.duals_bounds[j];
    for (int i = 0; i < p.n; ++i)
      if (red.reduced_index[static_cast<size_t>(i)] < 0) sol.duals_bounds[i] = -stat[i];
    sol.objective = p.objective_at(sol.x);
    sol.kkt_residual = exact_kkt_residual(p, sol.x, sol.duals_eq, sol.duals_ineq,
                                          sol.duals_bounds);
    if (sol.status == QPStatus::optimal && sol.kkt_residual > tol)
      sol.status = QPStatus::iteration_limit;
  }

  if (sol.status == QPStatus::optimal)
    max_kkt_seen_ = std::max(max_kkt_seen_, sol.kkt_residual);
  return sol;
}

QPSolution QpSolver::run_ipm(const QPProblem& p, double tol, int iter_limit,
                             const Eigen::VectorXd* warm_start, bool allow_phase1) {
  p.validate();
  const int n = p.n;
  const int me = static_cast<int>(p.A.rows());
  const FoldedIneq f = fold_inequalities(p);
  const int mc = static_cast<int>(f.C.rows());
  const int N = n + me + mc;

  double reg = 1e-8;

  // Starting point: strictly inside the box, unit slacks/duals elsewhere.
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    const bool flo = std::isfinite(p.lo[i]), fhi = std::isfinite(p.hi[i]);
    double v = 0.0;
    if (flo && fhi) v = 0.5 * (p.lo[i] + p.hi[i]);
    else if (flo) v = p.lo[i] + 1.0;
    else if (fhi) v = p.hi[i] - 1.0;
    if (warm_start && warm_start->size() == n) {
      v = (*warm_start)[i];
      const double margin = flo && fhi ? std::min(1e-3, 0.25 * (p.hi[i] - p.lo[i])) : 1e-3;
      if (flo) v = std::max(v, p.lo[i] + margin);
      if (fhi) v = std::min(v, p.hi[i] - margin);
    }
    x[i] = v;
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd s(mc), z(mc);
  if (mc > 0) {
    const Eigen::VectorXd slack0 = f.d - f.C * x;
    for (int i = 0; i < mc; ++i) s[i] = std::max(1.0, slack0[i]);
    z.setOnes();
  }

  // Structure triplets are fixed; only the slack diagonal changes per iteration.
  std::vector<Triplet> base;
  for (int k = 0; k < p.Q.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.Q, k); it; ++it)
      if (it.row() >= it.col())
        base.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.A, k); it; ++it)
      base.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < f.C.outerSize(); ++k)
    for (SpMat::InnerIterator it(f.C, k); it; ++it)
      base.emplace_back(n + me + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());

  SpMat kkt(N, N);
  auto assemble = [&](double regularization) {
    std::vector<Triplet> trip = base;
    trip.reserve(base.size() + static_cast<size_t>(N));
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, regularization);
    for (int i = 0; i < me; ++i) trip.emplace_back(n + i, n + i, -regularization);
    for (int i = 0; i < mc; ++i)
      trip.emplace_back(n + me + i, n + me + i, -(s[i] / z[i] + regularization));
    kkt.setFromTriplets(trip.begin(), trip.end());
  };

  auto factorize = [&]() -> bool {
    assemble(reg);
    if (!same_pattern(kkt)) {
      ldlt_.analyzePattern(kkt);
      remember_pattern(kkt);
    }
    ldlt_.factorize(kkt);
    int tries = 0;
    while (ldlt_.info() != Eigen::Success && tries < 3) {
      reg *= 100.0;
      assemble(reg);
      ldlt_.factorize(kkt);
      ++tries;
    }
    return ldlt_.info() == Eigen::Success;
  };

  double dbg_ap_ = 0, dbg_ad_ = 0, dbg_resid_ = 0;
  auto kkt_solve = [&](const Eigen::VectorXd& rhs) {
    Eigen::VectorXd sol = ldlt_.solve(rhs);
    Eigen::VectorXd resid = rhs - kkt.selfadjointView<Eigen::Lower>() * sol;
    sol += ldlt_.solve(resid);  // one refinement pass
    resid = rhs - kkt.selfadjointView<Eigen::Lower>() * sol;
    dbg_resid_ = resid.cwiseAbs().maxCoeff();
    return sol;
  };

  auto finish = [&](QPStatus status, int iters, double infeas) {
    QPSolution sol;
    sol.x = x;
    sol.duals_eq = y;
    sol.duals_ineq = mc > 0 ? Eigen::VectorXd(z.head(f.m_gen)) : Eigen::VectorXd(0);
    sol.duals_bounds = Eigen::VectorXd::Zero(n);
    int row = f.m_gen;
    for (const int v : f.upper_var) sol.duals_bounds[v] += z[row++];
    for (const int v : f.lower_var) sol.duals_bounds[v] -= z[row++];
    sol.objective = p.objective_at(x);
    sol.kkt_residual = exact_kkt_residual(p, x, y, sol.duals_ineq, sol.duals_bounds);
    sol.status = status;
    sol.iterations = iters;
    sol.infeasibility = infeas;
    return sol;
  };

  // Equality-only problems reduce to one symmetric solve.
  if (mc == 0) {
    if (!factorize()) return finish(QPStatus::iteration_limit, 0, 0.0);
    Eigen::VectorXd rhs(N);
    rhs.head(n) = -(p.Q * x + p.q);
    if (me > 0) rhs.segment(n, me) = p.b - p.A * x;
    const Eigen::VectorXd step = kkt_solve(rhs);
    x += step.head(n);
    y += step.segment(n, me);
    QPSolution sol = finish(QPStatus::optimal, 1, 0.0);
    if (sol.kkt_residual > tol) sol.status = QPStatus::iteration_limit;
    return sol;
  }

  int iter = 0;
  bool suspect_infeasible = false;
  int stall_count = 0;
  for (; iter < iter_limit; ++iter) {
    const Eigen::VectorXd rd = p.Q * x + p.q + (me > 0 ? (p.A.transpose() * y).eval()
                                                       : Eigen::VectorXd::Zero(n)) +
                               f.C.transpose() * z;
    const Eigen::VectorXd rp = me > 0 ? (p.A * x - p.b).eval() : Eigen::VectorXd(0);
    const Eigen::VectorXd rc = f.C * x + s - f.d;
    const Eigen::VectorXd cviol = f.C * x - f.d;
    const double mu = z.dot(s) / mc;

    const double stat = rd.cwiseAbs().maxCoeff();
    const double pfeas = std::max(me > 0 ? rp.cwiseAbs().maxCoeff() : 0.0,
                                  std::max(0.0, cviol.maxCoeff()));
    const double comp = (z.array() * cviol.array()).abs().maxCoeff();
    if (stat <= 0.5 * tol && pfeas <= 0.5 * tol && comp <= 0.5 * tol) break;
    if (const char* dbg = std::getenv("DUCSIM_IPM_DEBUG"); dbg && *dbg == '1')
      std::fprintf(stderr, "ipm %3d stat=%9.2e pfeas=%9.2e comp=%9.2e mu=%9.2e last_ap=%.2e last_ad=%.2e solve_resid=%.2e\n",
                   iter, stat, pfeas, comp, mu, dbg_ap_, dbg_ad_, dbg_resid_);

    if (z.cwiseAbs().maxCoeff() > 1e11 || (mu < 1e-12 && pfeas > 1e3 * tol)) {
      suspect_infeasible = true;
      break;
    }

    if (!factorize()) {
      suspect_infeasible = true;
      break;
    }

    Eigen::VectorXd rhs(N);
    rhs.head(n) = -rd;
    if (me > 0) rhs.segment(n, me) = -rp;
    rhs.tail(mc) = -rc + s;  // affine: Z^-1 (Z S e) = s

    Eigen::VectorXd step = kkt_solve(rhs);
    Eigen::VectorXd dx = step.head(n);
    Eigen::VectorXd dz = step.tail(mc);
    Eigen::VectorXd ds = -rc - f.C * dx;

    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i)
        if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
      return a;
    };
    const double ap_aff = max_step(s, ds);
    const double ad_aff = max_step(z, dz);
    const double mu_aff = (z + ad_aff * dz).dot(s + ap_aff * ds) / mc;
    double sigma = std::pow(mu_aff / mu, 3);
    sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);

    // Corrector reuses the factorization; only the last RHS block changes.
    rhs.tail(mc) = -rc + s - (sigma * mu) * z.cwiseInverse() +
                   (dz.array() * ds.array() / z.array()).matrix();
    step = kkt_solve(rhs);
    dx = step.head(n);
    const Eigen::VectorXd dy = me > 0 ? step.segment(n, me).eval() : Eigen::VectorXd(0);
    dz = step.tail(mc);
    ds = -rc - f.C * dx;

    const double tau = 0.995;
    double ap = std::min(1.0, tau * max_step(s, ds));
    double ad = std::min(1.0, tau * max_step(z, dz));

    if (const char* dbg2 = std::getenv("DUCSIM_IPM_DEBUG"); dbg2 && *dbg2 == '2' &&
        std::min(ap, ad) < 1e-3) {
      int argmin = -1; double best = 1.0;
      for (int i = 0; i < mc; ++i)
        if (ds[i] < 0 && -s[i] / ds[i] < best) { best = -s[i] / ds[i]; argmin = i; }
      int argmin_d = -1; double best_d = 1.0;
      for (int i = 0; i < mc; ++i)
        if (dz[i] < 0 && -z[i] / dz[i] < best_d) { best_d = -z[i] / dz[i]; argmin_d = i; }
      std::fprintf(stderr,
                   "stall iter=%d ap=%.1e ad=%.1e block_p=row %d (mgen=%d) s=%.2e ds=%.2e "
                   "block_d=row %d z=%.2e dz=%.2e\n",
                   iter, ap, ad, argmin, f.m_gen, argmin < 0 ? 0.0 : s[argmin],
                   argmin < 0 ? 0.0 : ds[argmin], argmin_d,
                   argmin_d < 0 ? 0.0 : z[argmin_d], argmin_d < 0 ? 0.0 : dz[argmin_d]);
    }
    if (std::min(ap, ad) < 1e-3) {
      // Pinned against the cone boundary. First try recentering toward a
      // larger barrier target; if that keeps failing, lift the iterate back
      // into the interior and let the infeasible-start machinery recover.
      ++stall_count;
      if (stall_count >= 8) break;
      if (stall_count >= 3) {
        const double lift = std::max(1e-4, 10.0 * mu);
        s.array() += lift;
        z.array() += lift;
        continue;
      }
      rhs.head(n).setZero();
      if (me > 0) rhs.segment(n, me).setZero();
      rhs.tail(mc) = s - (10.0 * mu) * z.cwiseInverse();
      step = kkt_solve(rhs);
      dx = step.head(n);
      dz = step.tail(mc);
      ds = -f.C * dx;
      ap = std::min(1.0, tau * max_step(s, ds));
      ad = std::min(1.0, tau * max_step(z, dz));
      x += ap * dx;
      s += ap * ds;
      if (me > 0) y += ad * step.segment(n, me);
      z += ad * dz;
      continue;
    }
    stall_count = 0;
    dbg_ap_ = ap; dbg_ad_ = ad;
    x += ap * dx;
    s += ap * ds;
    if (me > 0) y += ad * dy;
    z += ad * dz;
  }

  QPSolution sol = finish(QPStatus::optimal, iter, 0.0);
  if (sol.kkt_residual <= tol) return sol;

  if ((suspect_infeasible || iter >= iter_limit) && allow_phase1) {
    QpSolver aux;
    const QPProblem ph = build_phase1(p, f);
    const QPSolution p1 = aux.run_ipm(ph, std::min(tol, 1e-8), iter_limit, nullptr, false);
    // Certificate: the elastic slack mass alone, free of the tiny
    // regularization term that scales with the solution magnitude.
    const double viol = p1.x.size() == ph.n ? p1.x.tail(ph.n - p.n).sum() : p1.objective;
    if (p1.status == QPStatus::optimal && viol > 1e-6) {
      QPSolution out = finish(QPStatus::infeasible, iter, viol);
      return out;
    }
  }
  sol.status = QPStatus::iteration_limit;
  return sol;
}

QPSolution solve_qp(const QPProblem& p, double tol, int iter_limit,
                    const Eigen::VectorXd* warm_start) {
  QpSolver solver;
  return solver.solve(p, tol, iter_limit, warm_start);
}

}  // namespace ducsim
