#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

namespace ducsim {

using BusId = int;
using RegionId = int;
using GenId = int;
using LineIdx = int;  // index into PowerCase::lines

struct Generator {
  GenId id = 0;
  BusId bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost_dispatch = 0.0;  // $/MWh
  double cost_commit = 0.0;    // $/h while committed
  double cost_startup = 0.0;
  double cost_shutdown = 0.0;
  int min_up = 1;
  int min_down = 1;
  double ramp = 0.0;  // MW per period, both directions
};

// Stored canonically with from_bus < to_bus; positive flow runs from->to.
struct TransmissionLine {
  BusId from_bus = 0;
  BusId to_bus = 0;
  double susceptance = 1.0;  // MW per radian of angle difference
  double f_max = 0.0;        // MW
};

struct PowerCase {
  std::vector<BusId> buses;  // dense ids 0..n-1, ascending
  std::vector<Generator> generators;
  std::vector<TransmissionLine> lines;
  Eigen::MatrixXd demand;  // buses x horizon, MW
  int horizon = 0;

  int bus_count() const { return static_cast<int>(buses.size()); }
  double total_demand(int t) const { return demand.col(t).sum(); }
};

struct Partition {
  int region_count = 0;
  std::vector<RegionId> owner;  // indexed by bus id

  RegionId owner_of(BusId b) const { return owner.at(static_cast<size_t>(b)); }
};

// One region's slice of the network, as seen by its computing agent.
struct RegionView {
  RegionId region = 0;
  std::vector<BusId> internal;  // owned, no tie line
  std::vector<BusId> boundary;  // owned, at least one tie line
  std::vector<BusId> foreign;   // far endpoints of tie lines
  std::vector<Generator> generators;
  std::vector<LineIdx> tie_lines;    // exactly one endpoint owned
  std::vector<LineIdx> local_lines;  // both endpoints owned
  std::vector<RegionId> neighbors;
  std::map<BusId, std::vector<RegionId>> neighbor_of_bus;  // boundary bus -> regions
  std::map<BusId, RegionId> foreign_owner;                 // foreign bus -> owning region
  std::map<BusId, std::vector<BusId>> adjacency;           // owned bus -> adjacent buses

  std::vector<BusId> owned() const;      // internal + boundary, ascending
  std::vector<BusId> all_buses() const;  // owned + foreign, ascending
  bool owns(BusId b) const;
};

struct Violation {
  std::string entity;
  std::string rule;

  std::string str() const { return entity + ": " + rule; }
};

// Empty result iff every PowerCase/Generator/TransmissionLine invariant holds.
std::vector<Violation> validate_case(const PowerCase& c);
std::vector<Violation> validate_partition(const PowerCase& c, const Partition& p);

// Derives a region's bus classification and tie structure. Throws on an
// unknown region id or a partition that does not validate against the case.
RegionView classify_region(const PowerCase& c, const Partition& p, RegionId r);

}  // namespace ducsim
