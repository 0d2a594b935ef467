#pragma once

#include "ducsim/case_io.hpp"

namespace fixtures {

// Two buses, one tie line, one cheap and one expensive generator.
inline ducsim::PowerCase case_a() {
  ducsim::PowerCase c;
  c.buses = {0, 1};
  c.horizon = 2;
  c.generators = {
      {0, 0, 1.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1, 1, 10.0},
      {1, 1, 1.0, 10.0, 2.0, 1.0, 1.0, 1.0, 1, 1, 10.0},
  };
  c.lines = {{0, 1, 10.0, 5.0}};
  c.demand.resize(2, 2);
  c.demand << 2.0, 2.0, 3.0, 3.0;
  return c;
}

inline ducsim::Partition partition_a() {
  ducsim::Partition p;
  p.region_count = 2;
  p.owner = {0, 1};
  return p;
}

// Four-bus ring split into two two-bus regions; two tie lines.
inline ducsim::PowerCase case_b() {
  ducsim::PowerCase c;
  c.buses = {0, 1, 2, 3};
  c.horizon = 2;
  c.generators = {
      {0, 0, 1.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1, 1, 10.0},
      {1, 2, 1.0, 10.0, 2.0, 1.0, 1.0, 1.0, 1, 1, 10.0},
  };
  c.lines = {{0, 1, 10.0, 5.0}, {0, 3, 10.0, 5.0}, {1, 2, 10.0, 5.0}, {2, 3, 10.0, 5.0}};
  c.demand.resize(4, 2);
  c.demand << 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0;
  return c;
}

inline ducsim::Partition partition_b() {
  ducsim::Partition p;
  p.region_count = 2;
  p.owner = {0, 0, 1, 1};
  return p;
}

// Synthetic 14-bus, 3-region case used by the heavier checks.
inline std::pair<ducsim::PowerCase, ducsim::Partition> case_c() {
  return ducsim::gen_synthetic(14, 3, 24, 7);
}

}  // namespace fixtures
