#include "ducsim/case.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace ducsim {

namespace {
std::string bus_pair(BusId u, BusId v) {
  return "(" + std::to_string(u) + "," + std::to_string(v) + ")";
}

std::vector<BusId> sorted_union(const std::vector<BusId>& a, const std::vector<BusId>& b) {
  std::vector<BusId> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}
}  // namespace

std::vector<BusId> RegionView::owned() const { return sorted_union(internal, boundary); }

std::vector<BusId> RegionView::all_buses() const { return sorted_union(owned(), foreign); }

bool RegionView::owns(BusId b) const {
  return std::binary_search(internal.begin(), internal.end(), b) ||
         std::binary_search(boundary.begin(), boundary.end(), b);
}

std::vector<Violation> validate_case(const PowerCase& c) {
  std::vector<Violation> out;
  const int n = c.bus_count();

  for (int i = 0; i < n; ++i) {
    if (c.buses[static_cast<size_t>(i)] != i) {
      out.push_back({"buses", "bus ids must be dense 0..n-1 in ascending order"});
      break;
    }
  }
  if (c.horizon < 1) out.push_back({"case", "horizon must be >= 1"});

  auto known_bus = [&](BusId b) { return b >= 0 && b < n; };

  for (size_t i = 0; i < c.generators.size(); ++i) {
    const Generator& g = c.generators[i];
    const std::string name = "generator g" + std::to_string(g.id);
    if (g.id != static_cast<GenId>(i))
      out.push_back({name, "generator ids must be dense 0..m-1 in list order"});
    if (!known_bus(g.bus)) out.push_back({name, "bus not in case"});
    if (g.p_min < 0 || g.p_min > g.p_max) out.push_back({name, "p_min>p_max or p_min<0"});
    if (g.min_up < 1) out.push_back({name, "min_up must be >= 1"});
    if (g.min_down < 1) out.push_back({name, "min_down must be >= 1"});
    if (g.ramp < 0) out.push_back({name, "ramp must be >= 0"});
    if (g.cost_dispatch < 0 || g.cost_commit < 0 || g.cost_startup < 0 || g.cost_shutdown < 0)
      out.push_back({name, "costs must be >= 0"});
  }

  std::set<std::pair<BusId, BusId>> seen;
  for (const TransmissionLine& l : c.lines) {
    const std::string name = "line " + bus_pair(l.from_bus, l.to_bus);
    if (l.from_bus == l.to_bus) out.push_back({name, "self loop"});
    if (!known_bus(l.from_bus) || !known_bus(l.to_bus)) out.push_back({name, "endpoint not in case"});
    if (l.from_bus > l.to_bus) out.push_back({name, "must be stored with from_bus < to_bus"});
    if (l.susceptance <= 0) out.push_back({name, "susceptance must be > 0"});
    if (l.f_max <= 0) out.push_back({name, "f_max must be > 0"});
    const auto key = std::minmax(l.from_bus, l.to_bus);
    if (!seen.insert(key).second)
      out.push_back({"line " + bus_pair(key.first, key.second), "duplicate line between bus pair"});
  }

  if (c.demand.rows() != n || c.demand.cols() != c.horizon) {
    out.push_back({"demand", "matrix must be |buses| x horizon"});
  } else if ((c.demand.array() < 0).any()) {
    out.push_back({"demand", "demand must be >= 0"});
  }
  return out;
}

std::vector<Violation> validate_partition(const PowerCase& c, const Partition& p) {
  std::vector<Violation> out;
  if (p.region_count < 1) out.push_back({"partition", "region_count must be >= 1"});
  if (p.owner.size() != c.buses.size()) {
    out.push_back({"partition", "owner map must cover every bus exactly once (total map)"});
    return out;
  }
  std::vector<int> owned_count(static_cast<size_t>(std::max(p.region_count, 0)), 0);
  for (size_t b = 0; b < p.owner.size(); ++b) {
    const RegionId r = p.owner[b];
    if (r < 0 || r >= p.region_count) {
      out.push_back({"bus " + std::to_string(b), "owner region out of range"});
      continue;
    }
    ++owned_count[static_cast<size_t>(r)];
  }
  for (size_t r = 0; r < owned_count.size(); ++r)
    if (owned_count[r] == 0)
      out.push_back({"region " + std::to_string(r), "region owns no bus"});
  return out;
}

RegionView classify_region(const PowerCase& c, const Partition& p, RegionId r) {
  if (!validate_partition(c, p).empty())
    throw std::invalid_argument("classify_region: partition does not match case");
  if (r < 0 || r >= p.region_count)
    throw std::invalid_argument("classify_region: unknown region id " + std::to_string(r));

  RegionView view;
  view.region = r;

  std::set<BusId> boundary, foreign;
  std::set<RegionId> neighbors;
  for (LineIdx li = 0; li < static_cast<LineIdx>(c.lines.size()); ++li) {
    const TransmissionLine& l = c.lines[static_cast<size_t>(li)];
    const RegionId ru = p.owner_of(l.from_bus);
    const RegionId rv = p.owner_of(l.to_bus);
    if (ru == r && rv == r) {
      view.local_lines.push_back(li);
    } else if (ru == r || rv == r) {
      view.tie_lines.push_back(li);
      const BusId near = ru == r ? l.from_bus : l.to_bus;
      const BusId far = ru == r ? l.to_bus : l.from_bus;
      boundary.insert(near);
      foreign.insert(far);
      neighbors.insert(p.owner_of(far));
      view.neighbor_of_bus[near].push_back(p.owner_of(far));
      view.foreign_owner[far] = p.owner_of(far);
    }
    if (ru == r) view.adjacency[l.from_bus].push_back(l.to_bus);
    if (rv == r) view.adjacency[l.to_bus].push_back(l.from_bus);
  }

  for (BusId b = 0; b < c.bus_count(); ++b) {
    if (p.owner_of(b) != r) continue;
    if (!boundary.count(b)) view.internal.push_back(b);
    view.adjacency.try_emplace(b);  // isolated owned bus still appears
  }
  view.boundary.assign(boundary.begin(), boundary.end());
  view.foreign.assign(foreign.begin(), foreign.end());
  view.neighbors.assign(neighbors.begin(), neighbors.end());

  for (auto& [b, regions] : view.neighbor_of_bus) {
    std::sort(regions.begin(), regions.end());
    regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
  }
  for (auto& [b, adj] : view.adjacency) std::sort(adj.begin(), adj.end());

  for (const Generator& g : c.generators)
    if (p.owner_of(g.bus) == r) view.generators.push_back(g);

  return view;
}

}  // namespace ducsim
