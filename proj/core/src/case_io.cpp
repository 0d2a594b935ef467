#include "ducsim/case_io.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ducsim {

using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

const json& field(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(ctx + ": missing field \"" + key + "\"");
  return *it;
}

void throw_violations(const std::string& ctx, const std::vector<Violation>& v) {
  if (v.empty()) return;
  std::ostringstream os;
  os << ctx << ": validation failed";
  for (const auto& x : v) os << "\n  - " << x.str();
  throw std::runtime_error(os.str());
}

}  // namespace

RunMode parse_mode(const std::string& s) {
  if (s == "async") return RunMode::async;
  if (s == "sync") return RunMode::sync;
  if (s == "central") return RunMode::central;
  throw std::invalid_argument("unknown mode '" + s + "' (expected async|sync|central)");
}

std::string mode_name(RunMode m) {
  switch (m) {
    case RunMode::async: return "async";
    case RunMode::sync: return "sync";
    case RunMode::central: return "central";
  }
  return {};
}

double RunConfig::scale_for(RegionId r) const {
  auto it = compute_scale.find(r);
  return it == compute_scale.end() ? 1.0 : it->second;
}

void RunConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw std::invalid_argument(std::string(name) + " must be > 0");
  };
  positive(rho_theta, "rho_theta");
  positive(rho_f, "rho_f");
  positive(rho_p, "rho_p");
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(mip_gap, "mip_gap");
  positive(qp_tol, "qp_tol");
  if (zeta < 1) throw std::invalid_argument("zeta must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (node_limit < 1) throw std::invalid_argument("node_limit must be >= 1");
  DelayModel::parse(latency_model);
  if (!measured_compute()) DelayModel::parse(compute_model);
  if (backend != "sim" && backend != "threads")
    throw std::invalid_argument("backend must be sim|threads");
  if (theta_bar_rule != "pre" && theta_bar_rule != "post")
    throw std::invalid_argument("theta_bar_rule must be pre|post");
}

namespace {

std::string scale_to_string(const std::map<RegionId, double>& scale) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [r, f] : scale) {
    if (!first) os << ",";
    os << r << ":" << f;
    first = false;
  }
  return os.str();
}

std::map<RegionId, double> parse_scale(const std::string& s) {
  std::map<RegionId, double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("compute_scale entry '" + item + "': expected region:factor");
    out[std::stoi(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
  }
  return out;
}

}  // namespace

void apply_config_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config entry '" + assignment + "': expected key=value");
  std::string key = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);
  auto trim = [](std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
  };
  trim(key);
  trim(value);

  if (key == "rho_theta") cfg.rho_theta = std::stod(value);
  else if (key == "rho_f") cfg.rho_f = std::stod(value);
  else if (key == "rho_p") cfg.rho_p = std::stod(value);
  else if (key == "alpha") cfg.alpha = std::stod(value);
  else if (key == "beta") cfg.beta = std::stod(value);
  else if (key == "zeta") cfg.zeta = std::stoi(value);
  else if (key == "max_iters") cfg.max_iters = std::stoi(value);
  else if (key == "mip_gap") cfg.mip_gap = std::stod(value);
  else if (key == "qp_tol") cfg.qp_tol = std::stod(value);
  else if (key == "node_limit") cfg.node_limit = std::stoi(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "latency_model") cfg.latency_model = value;
  else if (key == "compute_model") cfg.compute_model = value;
  else if (key == "compute_scale") cfg.compute_scale = parse_scale(value);
  else if (key == "mode") cfg.mode = parse_mode(value);
  else if (key == "backend") cfg.backend = value;
  else if (key == "theta_bar_rule") cfg.theta_bar_rule = value;
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      apply_config_override(cfg, line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ostringstream os;
  os << "rho_theta=" << cfg.rho_theta << "\n"
     << "rho_f=" << cfg.rho_f << "\n"
     << "rho_p=" << cfg.rho_p << "\n"
     << "alpha=" << cfg.alpha << "\n"
     << "beta=" << cfg.beta << "\n"
     << "zeta=" << cfg.zeta << "\n"
     << "max_iters=" << cfg.max_iters << "\n"
     << "mip_gap=" << cfg.mip_gap << "\n"
     << "qp_tol=" << cfg.qp_tol << "\n"
     << "node_limit=" << cfg.node_limit << "\n"
     << "seed=" << cfg.seed << "\n"
     << "latency_model=" << cfg.latency_model << "\n"
     << "compute_model=" << cfg.compute_model << "\n";
  if (!cfg.compute_scale.empty()) os << "compute_scale=" << scale_to_string(cfg.compute_scale) << "\n";
  os << "mode=" << mode_name(cfg.mode) << "\n"
     << "backend=" << cfg.backend << "\n"
     << "theta_bar_rule=" << cfg.theta_bar_rule << "\n";
  write_text(path, os.str());
}

PowerCase load_case(const std::string& path) {
  const json j = read_json(path);
  PowerCase c;
  c.horizon = field(j, "horizon", path).get<int>();

  for (const auto& b : field(j, "buses", path)) c.buses.push_back(b.get<BusId>());
  std::sort(c.buses.begin(), c.buses.end());

  for (const auto& g : field(j, "generators", path)) {
    const std::string ctx = path + ": generator";
    Generator gen;
    gen.id = field(g, "id", ctx).get<GenId>();
    gen.bus = field(g, "bus", ctx).get<BusId>();
    gen.p_min = field(g, "p_min", ctx).get<double>();
    gen.p_max = field(g, "p_max", ctx).get<double>();
    gen.cost_dispatch = field(g, "cost_dispatch", ctx).get<double>();
    gen.cost_commit = field(g, "cost_commit", ctx).get<double>();
    gen.cost_startup = field(g, "cost_startup", ctx).get<double>();
    gen.cost_shutdown = field(g, "cost_shutdown", ctx).get<double>();
    gen.min_up = field(g, "min_up", ctx).get<int>();
    gen.min_down = field(g, "min_down", ctx).get<int>();
    gen.ramp = field(g, "ramp", ctx).get<double>();
    c.generators.push_back(gen);
  }
  std::sort(c.generators.begin(), c.generators.end(),
            [](const Generator& a, const Generator& b) { return a.id < b.id; });

  for (const auto& l : field(j, "lines", path)) {
    const std::string ctx = path + ": line";
    TransmissionLine line;
    line.from_bus = field(l, "from", ctx).get<BusId>();
    line.to_bus = field(l, "to", ctx).get<BusId>();
    if (line.from_bus > line.to_bus) std::swap(line.from_bus, line.to_bus);
    line.susceptance = field(l, "susceptance", ctx).get<double>();
    line.f_max = field(l, "f_max", ctx).get<double>();
    c.lines.push_back(line);
  }
  std::sort(c.lines.begin(), c.lines.end(), [](const auto& a, const auto& b) {
    return std::pair(a.from_bus, a.to_bus) < std::pair(b.from_bus, b.to_bus);
  });

  c.demand = Eigen::MatrixXd::Zero(c.bus_count(), c.horizon);
  const json& dm = field(j, "demand", path);
  for (auto it = dm.begin(); it != dm.end(); ++it) {
    const BusId b = std::stoi(it.key());
    if (b < 0 || b >= c.bus_count())
      throw std::runtime_error(path + ": demand references unknown bus " + it.key());
    if (static_cast<int>(it.value().size()) != c.horizon)
      throw std::runtime_error(path + ": demand row for bus " + it.key() +
                               " must have horizon entries");
    for (int t = 0; t < c.horizon; ++t) c.demand(b, t) = it.value()[static_cast<size_t>(t)].get<double>();
  }

  throw_violations(path, validate_case(c));
  return c;
}

void save_case(const PowerCase& c, const std::string& path) {
  json j;
  j["horizon"] = c.horizon;
  j["buses"] = c.buses;
  j["generators"] = json::array();
  for (const Generator& g : c.generators)
    j["generators"].push_back({{"id", g.id},
                               {"bus", g.bus},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"cost_dispatch", g.cost_dispatch},
                               {"cost_commit", g.cost_commit},
                               {"cost_startup", g.cost_startup},
                               {"cost_shutdown", g.cost_shutdown},
                               {"min_up", g.min_up},
                               {"min_down", g.min_down},
                               {"ramp", g.ramp}});
  j["lines"] = json::array();
  for (const TransmissionLine& l : c.lines)
    j["lines"].push_back({{"from", l.from_bus},
                          {"to", l.to_bus},
                          {"susceptance", l.susceptance},
                          {"f_max", l.f_max}});
  j["demand"] = json::object();
  for (BusId b = 0; b < c.bus_count(); ++b) {
    std::vector<double> row(static_cast<size_t>(c.horizon));
    for (int t = 0; t < c.horizon; ++t) row[static_cast<size_t>(t)] = c.demand(b, t);
    j["demand"][std::to_string(b)] = row;
  }
  write_text(path, j.dump(2) + "\n");
}

Partition load_partition(const std::string& path) {
  const json j = read_json(path);
  Partition p;
  p.region_count = field(j, "region_count", path).get<int>();
  const json& owner = field(j, "owner", path);
  std::map<BusId, RegionId> entries;
  for (auto it = owner.begin(); it != owner.end(); ++it) {
    const BusId b = std::stoi(it.key());
    if (!entries.emplace(b, it.value().get<RegionId>()).second)
      throw std::runtime_error(path + ": bus " + it.key() + " owned twice");
  }
  BusId expect = 0;
  for (const auto& [b, r] : entries) {
    if (b != expect)
      throw std::runtime_error(path + ": owner map is not a total map over dense bus ids (bus " +
                               std::to_string(expect) + " missing)");
    p.owner.push_back(r);
    ++expect;
  }
  for (const RegionId r : p.owner)
    if (r < 0 || r >= p.region_count)
      throw std::runtime_error(path + ": owner region out of range");
  return p;
}

void save_partition(const Partition& p, const std::string& path) {
  json j;
  j["region_count"] = p.region_count;
  j["owner"] = json::object();
  for (size_t b = 0; b < p.owner.size(); ++b) j["owner"][std::to_string(b)] = p.owner[b];
  write_text(path, j.dump(2) + "\n");
}

std::pair<PowerCase, Partition> gen_synthetic(int n_buses, int n_regions, int horizon,
                                              std::uint64_t seed) {
  if (n_buses < 1 || n_regions < 1 || n_regions > n_buses || horizon < 1)
    throw std::invalid_argument("gen_synthetic: need n_buses >= n_regions >= 1 and horizon >= 1");

  RngStream rng(mix_seed(seed, 0x67656e63617365ULL));  // case topology stream
  PowerCase c;
  c.horizon = horizon;
  for (BusId b = 0; b < n_buses; ++b) c.buses.push_back(b);

  // Spanning tree, then extra chords for meshing.
  std::set<std::pair<BusId, BusId>> pairs;
  std::vector<std::vector<BusId>> adj(static_cast<size_t>(n_buses));
  auto add_line = [&](BusId u, BusId v) {
    if (u > v) std::swap(u, v);
    if (u == v || !pairs.insert({u, v}).second) return false;
    adj[static_cast<size_t>(u)].push_back(v);
    adj[static_cast<size_t>(v)].push_back(u);
    return true;
  };
  for (BusId b = 1; b < n_buses; ++b) add_line(b, rng.uniform_int(0, b - 1));
  const int extra = n_buses / 3;
  for (int i = 0; i < extra; ++i)
    add_line(rng.uniform_int(0, n_buses - 1), rng.uniform_int(0, n_buses - 1));

  // Contiguous regions: multi-source BFS from distinct seeds, round-robin growth.
  Partition p;
  p.region_count = n_regions;
  p.owner.assign(static_cast<size_t>(n_buses), -1);
  std::vector<std::deque<BusId>> frontier(static_cast<size_t>(n_regions));
  {
    std::vector<BusId> order(c.buses);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    for (RegionId r = 0; r < n_regions; ++r) {
      p.owner[static_cast<size_t>(order[static_cast<size_t>(r)])] = r;
      frontier[static_cast<size_t>(r)].push_back(order[static_cast<size_t>(r)]);
    }
  }
  int assigned = n_regions;
  while (assigned < n_buses) {
    for (RegionId r = 0; r < n_regions && assigned < n_buses; ++r) {
      auto& q = frontier[static_cast<size_t>(r)];
      while (!q.empty()) {
        const BusId u = q.front();
        BusId pick = -1;
        for (const BusId v : adj[static_cast<size_t>(u)])
          if (p.owner[static_cast<size_t>(v)] < 0) { pick = v; break; }
        if (pick < 0) { q.pop_front(); continue; }
        p.owner[static_cast<size_t>(pick)] = r;
        q.push_back(pick);
        ++assigned;
        break;
      }
    }
    // A region whose frontier is exhausted simply stops growing; connectivity
    // of the whole graph guarantees global progress.
    bool any = false;
    for (const auto& q : frontier) any = any || !q.empty();
    if (!any) break;
  }
  for (BusId b = 0; b < n_buses; ++b)  // unreachable only if graph had isolated parts
    if (p.owner[static_cast<size_t>(b)] < 0) p.owner[static_cast<size_t>(b)] = 0;

  // Demand: smooth daily profile per bus.
  c.demand = Eigen::MatrixXd::Zero(n_buses, horizon);
  for (BusId b = 0; b < n_buses; ++b) {
    const double base = rng.uniform(2.0, 8.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double swing = rng.uniform(0.15, 0.35);
    for (int t = 0; t < horizon; ++t)
      c.demand(b, t) = base * (1.0 + swing * std::sin(2.0 * M_PI * t / std::max(horizon, 2) + phase));
  }

  // Generators: one per region seed bus for coverage, plus extras.
  const int n_gens = std::max(n_regions, n_buses / 3);
  std::vector<BusId> gen_bus;
  for (RegionId r = 0; r < n_regions; ++r) {
    for (BusId b = 0; b < n_buses; ++b)
      if (p.owner[static_cast<size_t>(b)] == r) { gen_bus.push_back(b); break; }
  }
  while (static_cast<int>(gen_bus.size()) < n_gens) gen_bus.push_back(rng.uniform_int(0, n_buses - 1));

  const double peak = c.demand.colwise().sum().maxCoeff();
  double cap_total = 0.0;
  for (size_t i = 0; i < gen_bus.size(); ++i) {
    Generator g;
    g.id = static_cast<GenId>(i);
    g.bus = gen_bus[i];
    g.p_max = rng.uniform(0.5, 1.5) * peak / static_cast<double>(gen_bus.size());
    g.p_min = rng.uniform(0.05, 0.15) * g.p_max;
    g.cost_dispatch = rng.uniform(1.0, 5.0);
    g.cost_commit = rng.uniform(0.5, 2.0);
    g.cost_startup = rng.uniform(0.5, 3.0);
    g.cost_shutdown = rng.uniform(0.2, 1.0);
    g.min_up = rng.uniform_int(1, 3);
    g.min_down = rng.uniform_int(1, 2);
    g.ramp = rng.uniform(0.4, 0.9) * g.p_max;
    cap_total += g.p_max;
    c.generators.push_back(g);
  }
  // Guarantee total capacity >= 1.3x peak demand by scaling capacities up.
  if (cap_total < 1.3 * peak) {
    const double k = 1.3 * peak / cap_total;
    for (Generator& g : c.generators) {
      g.p_max *= k;
      g.p_min *= k;
      g.ramp *= k;
    }
  }

  // Lines: generous capacities keep desk-scale cases feasible.
  for (const auto& [u, v] : pairs) {
    TransmissionLine l;
    l.from_bus = u;
    l.to_bus = v;
    l.susceptance = rng.uniform(5.0, 12.0);
    l.f_max = rng.uniform(0.5, 1.0) * peak;
    c.lines.push_back(l);
  }
  std::sort(c.lines.begin(), c.lines.end(), [](const auto& a, const auto& b) {
    return std::pair(a.from_bus, a.to_bus) < std::pair(b.from_bus, b.to_bus);
  });

  throw_violations("gen_synthetic", validate_case(c));
  throw_violations("gen_synthetic", validate_partition(c, p));
  return {std::move(c), std::move(p)};
}

}  // namespace ducsim
