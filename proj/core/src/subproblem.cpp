#include "ducsim/subproblem.hpp"

#include <limits>
#include <stdexcept>

#include "ducsim/mip.hpp"

namespace ducsim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDiagReg = 1e-9;  // keeps minimizers unique and runs reproducible

using Triplet = Eigen::Triplet<double>;
}  // namespace

VarLayout VarLayout::make(const RegionView& view, int T, bool with_production) {
  VarLayout l;
  l.T = T;
  l.n_gens = static_cast<int>(view.generators.size());
  l.with_production = with_production;
  l.bus_order = view.all_buses();
  l.tie_order = view.tie_lines;
  for (size_t i = 0; i < l.bus_order.size(); ++i) l.bus_pos[l.bus_order[i]] = static_cast<int>(i);
  for (size_t i = 0; i < l.tie_order.size(); ++i) l.tie_pos[l.tie_order[i]] = static_cast<int>(i);
  return l;
}

QPProblem build_convex(const RegionView& view, const ConsensusState& consensus,
                       const PowerCase& c, const RunConfig& cfg, BuildOptions opts) {
  const int T = c.horizon;
  if (consensus.T != T)
    throw std::invalid_argument("build_convex: consensus horizon mismatch");
  for (const LineIdx li : view.tie_lines) {
    bool found = false;
    for (const auto& fc : consensus.flows) found = found || fc.line == li;
    if (!found)
      throw std::invalid_argument("build_convex: consensus state missing tie line entry");
  }

  const VarLayout L = VarLayout::make(view, T, opts.production_coupling);
  const int n = L.n();
  const int G = L.n_gens;

  QPProblem p;
  p.n = n;
  p.q = Eigen::VectorXd::Zero(n);
  p.lo = Eigen::VectorXd::Constant(n, -kInf);
  p.hi = Eigen::VectorXd::Constant(n, kInf);

  std::vector<double> qdiag(static_cast<size_t>(n), 0.0);

  // True cost terms and variable boxes.
  for (int g = 0; g < G; ++g) {
    const Generator& gen = view.generators[static_cast<size_t>(g)];
    for (int t = 0; t < T; ++t) {
      p.q[L.ix_x(g, t)] += gen.cost_commit;
      p.q[L.ix_y(g, t)] += gen.cost_dispatch;
      p.q[L.ix_pu(g, t)] += gen.cost_startup;
      p.q[L.ix_pd(g, t)] += gen.cost_shutdown;
      p.lo[L.ix_x(g, t)] = 0.0;
      p.hi[L.ix_x(g, t)] = 1.0;
      p.lo[L.ix_y(g, t)] = 0.0;
      p.hi[L.ix_y(g, t)] = gen.p_max;
      p.lo[L.ix_pu(g, t)] = 0.0;
      p.hi[L.ix_pu(g, t)] = 1.0;
      p.lo[L.ix_pd(g, t)] = 0.0;
      p.hi[L.ix_pd(g, t)] = 1.0;
    }
  }

  // Phase angle consensus penalty, one term per (bus, neighbor) channel.
  for (const PhaseChannel& ch : consensus.channels) {
    if (!L.bus_pos.count(ch.bus))
      throw std::invalid_argument("build_convex: consensus channel bus not in view");
    for (int t = 0; t < T; ++t) {
      const int ix = L.ix_theta(ch.bus, t);
      const double lam = ch.lambda[t];
      const double bar = ch.theta_bar[t];
      qdiag[static_cast<size_t>(ix)] += cfg.rho_theta;
      p.q[ix] += lam - cfg.rho_theta * bar;
      p.objective_constant += -lam * bar + 0.5 * cfg.rho_theta * bar * bar;
    }
  }

  // Flow consensus penalty: dual term, drift to f_bar, drift to the neighbor
  // estimate f_tilde.
  for (const FlowChannel& fc : consensus.flows) {
    for (int t = 0; t < T; ++t) {
      const int ix = L.ix_flow(fc.line, t);
      const double phi = fc.phi[t];
      const double fbar = fc.f_bar[t];
      const double ftil = fc.f_tilde[t];
      qdiag[static_cast<size_t>(ix)] += 2.0 * cfg.rho_f;
      p.q[ix] += phi - cfg.rho_f * fbar - cfg.rho_f * ftil;
      p.objective_constant +=
          -phi * fbar + 0.5 * cfg.rho_f * (fbar * fbar + ftil * ftil);
    }
  }

  // Production target penalty.
  if (opts.production_coupling) {
    for (int t = 0; t < T; ++t) {
      const int ix = L.ix_p(t);
      const double eta = consensus.eta[t];
      const double pbar = consensus.p_bar[t];
      qdiag[static_cast<size_t>(ix)] += cfg.rho_p;
      p.q[ix] += eta - cfg.rho_p * pbar;
      p.objective_constant += -eta * pbar + 0.5 * cfg.rho_p * pbar * pbar;
    }
  }

  std::vector<Triplet> qt;
  for (int i = 0; i < n; ++i)
    qt.emplace_back(i, i, qdiag[static_cast<size_t>(i)] > 0 ? qdiag[static_cast<size_t>(i)]
                                                            : kDiagReg);
  p.Q.resize(n, n);
  p.Q.setFromTriplets(qt.begin(), qt.end());

  // Line parameters by bus pair, for balance and capacity rows.
  std::map<std::pair<BusId, BusId>, const TransmissionLine*> line_at;
  std::vector<LineIdx> region_lines = view.local_lines;
  region_lines.insert(region_lines.end(), view.tie_lines.begin(), view.tie_lines.end());
  for (const LineIdx li : region_lines) {
    const TransmissionLine& l = c.lines[static_cast<size_t>(li)];
    line_at[{l.from_bus, l.to_bus}] = &l;
    line_at[{l.to_bus, l.from_bus}] = &l;
  }

  const std::vector<BusId> owned = view.owned();
  std::vector<Triplet> at;
  std::vector<double> bvals;
  int eq = 0;

  // Reference pin: the region holding the globally lowest bus id fixes it.
  const BusId ref = opts.reference_bus.value_or(0);
  if (view.owns(ref)) {
    for (int t = 0; t < T; ++t) {
      at.emplace_back(eq, L.ix_theta(ref, t), 1.0);
      bvals.push_back(0.0);
      ++eq;
    }
  }

  // Tie flow definition: f = susceptance * (theta_from - theta_to).
  for (const LineIdx li : view.tie_lines) {
    const TransmissionLine& l = c.lines[static_cast<size_t>(li)];
    for (int t = 0; t < T; ++t) {
      at.emplace_back(eq, L.ix_theta(l.from_bus, t), l.susceptance);
      at.emplace_back(eq, L.ix_theta(l.to_bus, t), -l.susceptance);
      at.emplace_back(eq, L.ix_flow(li, t), -1.0);
      bvals.push_back(0.0);
      ++eq;
    }
  }

  // Nodal balance at every owned bus.
  for (const BusId u : owned) {
    for (int t = 0; t < T; ++t) {
      for (int g = 0; g < G; ++g)
        if (view.generators[static_cast<size_t>(g)].bus == u)
          at.emplace_back(eq, L.ix_y(g, t), 1.0);
      for (const BusId v : view.adjacency.at(u)) {
        const double gamma = line_at.at({u, v})->susceptance;
        at.emplace_back(eq, L.ix_theta(u, t), -gamma);
        at.emplace_back(eq, L.ix_theta(v, t), gamma);
      }
      bvals.push_back(c.demand(u, t));
      ++eq;
    }
  }

  // Regional production definition.
  if (opts.production_coupling) {
    for (int t = 0; t < T; ++t) {
      for (int g = 0; g < G; ++g) at.emplace_back(eq, L.ix_y(g, t), 1.0);
      at.emplace_back(eq, L.ix_p(t), -1.0);
      bvals.push_back(0.0);
      ++eq;
    }
  }

  p.A.resize(eq, n);
  p.A.setFromTriplets(at.begin(), at.end());
  p.b = Eigen::Map<Eigen::VectorXd>(bvals.data(), static_cast<Eigen::Index>(bvals.size()));

  std::vector<Triplet> gt;
  std::vector<double> hvals;
  int in = 0;

  for (int g = 0; g < G; ++g) {
    const Generator& gen = view.generators[static_cast<size_t>(g)];
    for (int t = 0; t < T; ++t) {
      // capacity: p_min x <= y <= p_max x
      gt.emplace_back(in, L.ix_y(g, t), 1.0);
      gt.emplace_back(in, L.ix_x(g, t), -gen.p_max);
      hvals.push_back(0.0);
      ++in;
      gt.emplace_back(in, L.ix_y(g, t), -1.0);
      gt.emplace_back(in, L.ix_x(g, t), gen.p_min);
      hvals.push_back(0.0);
      ++in;
      // start/stop linking; units are off before the horizon
      gt.emplace_back(in, L.ix_x(g, t), 1.0);
      if (t > 0) gt.emplace_back(in, L.ix_x(g, t - 1), -1.0);
      gt.emplace_back(in, L.ix_pu(g, t), -1.0);
      hvals.push_back(0.0);
      ++in;
      gt.emplace_back(in, L.ix_x(g, t), -1.0);
      if (t > 0) gt.emplace_back(in, L.ix_x(g, t - 1), 1.0);
      gt.emplace_back(in, L.ix_pd(g, t), -1.0);
      hvals.push_back(0.0);
      ++in;
      // ramping, from the second period on
      if (t > 0) {
        gt.emplace_back(in, L.ix_y(g, t), 1.0);
        gt.emplace_back(in, L.ix_y(g, t - 1), -1.0);
        hvals.push_back(gen.ramp);
        ++in;
        gt.emplace_back(in, L.ix_y(g, t), -1.0);
        gt.emplace_back(in, L.ix_y(g, t - 1), 1.0);
        hvals.push_back(gen.ramp);
        ++in;
      }
      // minimum up/down windows, clipped at the start of the horizon
      for (int i = std::max(0, t - gen.min_up + 1); i <= t; ++i)
        gt.emplace_back(in, L.ix_pu(g, i), 1.0);
      gt.emplace_back(in, L.ix_x(g, t), -1.0);
      hvals.push_back(0.0);
      ++in;
      gt.emplace_back(in, L.ix_x(g, t), 1.0);
      for (int i = std::max(0, t - gen.min_down + 1); i <= t; ++i)
        gt.emplace_back(in, L.ix_pd(g, i), 1.0);
      hvals.push_back(1.0);
      ++in;
    }
  }

  // Line capacity on every line incident to an owned bus.
  for (const LineIdx li : region_lines) {
    const TransmissionLine& l = c.lines[static_cast<size_t>(li)];
    for (int t = 0; t < T; ++t) {
      gt.emplace_back(in, L.ix_theta(l.from_bus, t), l.susceptance);
      gt.emplace_back(in, L.ix_theta(l.to_bus, t), -l.susceptance);
      hvals.push_back(l.f_max);
      ++in;
      gt.emplace_back(in, L.ix_theta(l.from_bus, t), -l.susceptance);
      gt.emplace_back(in, L.ix_theta(l.to_bus, t), l.susceptance);
      hvals.push_back(l.f_max);
      ++in;
    }
  }

  p.G.resize(in, n);
  p.G.setFromTriplets(gt.begin(), gt.end());
  p.h = Eigen::Map<Eigen::VectorXd>(hvals.data(), static_cast<Eigen::Index>(hvals.size()));
  p.validate();
  return p;
}

MIQPProblem build_binary(const RegionView& view, const ConsensusState& consensus,
                         const PowerCase& c, const RunConfig& cfg, BuildOptions opts) {
  MIQPProblem mp;
  mp.base = build_convex(view, consensus, c, cfg, opts);
  const VarLayout L = VarLayout::make(view, c.horizon, opts.production_coupling);
  for (int g = 0; g < L.n_gens; ++g)
    for (int t = 0; t < L.T; ++t) mp.binary_vars.push_back(L.ix_x(g, t));
  return mp;
}

LocalSolution extract_solution(const RegionView& view, const VarLayout& L,
                               const Eigen::VectorXd& v) {
  LocalSolution s;
  const int T = L.T;
  const int G = L.n_gens;
  s.x.resize(G, T);
  s.y.resize(G, T);
  s.pi_up.resize(G, T);
  s.pi_down.resize(G, T);
  for (int g = 0; g < G; ++g)
    for (int t = 0; t < T; ++t) {
      s.x(g, t) = v[L.ix_x(g, t)];
      s.y(g, t) = v[L.ix_y(g, t)];
      s.pi_up(g, t) = v[L.ix_pu(g, t)];
      s.pi_down(g, t) = v[L.ix_pd(g, t)];
    }
  for (const BusId b : L.bus_order) {
    Eigen::VectorXd th(T);
    for (int t = 0; t < T; ++t) th[t] = v[L.ix_theta(b, t)];
    s.theta[b] = th;
  }
  for (const LineIdx li : L.tie_order) {
    Eigen::VectorXd f(T);
    for (int t = 0; t < T; ++t) f[t] = v[L.ix_flow(li, t)];
    s.flow[li] = f;
  }
  if (L.with_production) {
    s.p.resize(T);
    for (int t = 0; t < T; ++t) s.p[t] = v[L.ix_p(t)];
  } else {
    s.p = s.y.colwise().sum().transpose();
  }
  s.obj_true = true_cost(s, view);
  return s;
}

double true_cost(const LocalSolution& sol, const RegionView& view) {
  double cost = 0.0;
  for (Eigen::Index g = 0; g < sol.x.rows(); ++g) {
    const Generator& gen = view.generators[static_cast<size_t>(g)];
    for (Eigen::Index t = 0; t < sol.x.cols(); ++t)
      cost += gen.cost_dispatch * sol.y(g, t) + gen.cost_commit * sol.x(g, t) +
              gen.cost_startup * sol.pi_up(g, t) + gen.cost_shutdown * sol.pi_down(g, t);
  }
  return cost;
}

}  // namespace ducsim
