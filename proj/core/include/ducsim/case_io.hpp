#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "ducsim/case.hpp"
#include "ducsim/rng.hpp"

namespace ducsim {

enum class RunMode { async, sync, central };

RunMode parse_mode(const std::string& s);
std::string mode_name(RunMode m);

struct RunConfig {
  double rho_theta = 2.0;
  double rho_f = 2.0;
  double rho_p = 2.0;
  double alpha = 1e-3;  // primal agreement tolerance, per-entry max-norm
  double beta = 1e-4;   // received-estimate drift tolerance
  int zeta = 3;         // consecutive converged iterations before the binary phase
  int max_iters = 500;  // per-region iteration cap
  double mip_gap = 1e-3;
  double qp_tol = 1e-6;
  int node_limit = 50000;
  std::uint64_t seed = 0;
  std::string latency_model = "constant:1";  // message delay, ms
  std::string compute_model = "measured";    // "measured" or a delay-model spec, ms
  std::map<RegionId, double> compute_scale;  // per-region multiplier, default 1
  RunMode mode = RunMode::async;
  std::string backend = "sim";  // "sim" (deterministic event loop) or "threads"
  // Which multiplier the intermediate-value formula reads: the pre-update one
  // ("pre") or the freshly assigned one ("post"). "post" damps the zero-cost
  // disagreement modes that meshed networks exhibit.
  std::string theta_bar_rule = "pre";

  DelayModel latency() const { return DelayModel::parse(latency_model); }
  bool measured_compute() const { return compute_model == "measured"; }
  double scale_for(RegionId r) const;
  void validate() const;  // throws on out-of-range values
};

// Flat key=value config file; '#' starts a comment. Unknown keys are rejected.
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);
// Applies one "key=value" override (CLI layer). Throws on unknown key.
void apply_config_override(RunConfig& cfg, const std::string& assignment);

PowerCase load_case(const std::string& path);
void save_case(const PowerCase& c, const std::string& path);
Partition load_partition(const std::string& path);
void save_partition(const Partition& p, const std::string& path);

// Seeded synthetic case: connected network, contiguous regions, total
// capacity >= 1.3x peak demand. Deterministic for fixed arguments.
std::pair<PowerCase, Partition> gen_synthetic(int n_buses, int n_regions, int horizon,
                                              std::uint64_t seed);

}  // namespace ducsim
