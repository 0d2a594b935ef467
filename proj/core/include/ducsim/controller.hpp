#pragma once

#include <Eigen/Core>
#include <deque>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "ducsim/case.hpp"

namespace ducsim {

// What a region discloses per iteration. Deliberately free of any
// infrastructural data: production difference, residual-cost statistic, flags.
struct RegionReport {
  RegionId region = 0;
  Eigen::VectorXd psi;
  Eigen::VectorXd s;
  int xi = 0;     // local convergence flag
  int kappa = 0;  // 0 convex phase, 1 binary phase
};

struct ControllerReply {
  Eigen::VectorXd sum_psi;
  Eigen::VectorXd sum_s;
  int sum_xi = 0;
  std::optional<RegionId> partner;  // absent for a region with no neighbors
};

// Matches regions pairwise on completion, keeps running global sums, and
// declares global convergence once every region is locally converged in the
// binary phase.
class Controller {
 public:
  Controller(int region_count, std::map<RegionId, std::vector<RegionId>> neighbors, int horizon);

  // Stores the report and either matches the reporter with the longest-pending
  // neighbor (two replies) or parks it. A region with no neighbors at all gets
  // an immediate partnerless reply.
  std::vector<std::pair<RegionId, ControllerReply>> on_report(const RegionReport& report);

  bool check_gc();
  bool gc() const { return gc_; }

  const Eigen::MatrixXd& psi_rows() const { return psi_; }
  const Eigen::MatrixXd& s_rows() const { return s_; }
  const std::vector<int>& xi_flags() const { return xi_; }
  const std::vector<int>& kappa_flags() const { return kappa_; }
  const std::deque<RegionId>& pending() const { return pending_; }

 private:
  ControllerReply make_reply(std::optional<RegionId> partner) const;

  int region_count_;
  int horizon_;
  std::map<RegionId, std::vector<RegionId>> neighbors_;
  Eigen::MatrixXd psi_, s_;  // one row per region, last report wins
  std::vector<int> xi_, kappa_;
  std::deque<RegionId> pending_;  // FIFO, longest-pending first
  bool gc_ = false;
};

}  // namespace ducsim
