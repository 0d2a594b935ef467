#include "ducsim/controller.hpp"

#include <algorithm>
#include <stdexcept>

namespace ducsim {

Controller::Controller(int region_count, std::map<RegionId, std::vector<RegionId>> neighbors,
                       int horizon)
    : region_count_(region_count), horizon_(horizon), neighbors_(std::move(neighbors)) {
  psi_ = Eigen::MatrixXd::Zero(region_count, horizon);
  s_ = Eigen::MatrixXd::Zero(region_count, horizon);
  xi_.assign(static_cast<size_t>(region_count), 0);
  kappa_.assign(static_cast<size_t>(region_count), 0);
}

ControllerReply Controller::make_reply(std::optional<RegionId> partner) const {
  ControllerReply reply;
  reply.sum_psi = psi_.colwise().sum().transpose();
  reply.sum_s = s_.colwise().sum().transpose();
  reply.sum_xi = 0;
  for (const int f : xi_) reply.sum_xi += f;
  reply.partner = partner;
  return reply;
}

std::vector<std::pair<RegionId, ControllerReply>> Controller::on_report(
    const RegionReport& report) {
  const RegionId r1 = report.region;
  if (r1 < 0 || r1 >= region_count_)
    throw std::invalid_argument("controller: unknown region " + std::to_string(r1));
  if (std::find(pending_.begin(), pending_.end(), r1) != pending_.end())
    throw std::logic_error("controller: duplicate report from pending region " +
                           std::to_string(r1));
  if (report.psi.size() != horizon_ || report.s.size() != horizon_)
    throw std::invalid_argument("controller: report not dimensioned to the horizon");

  psi_.row(r1) = report.psi.transpose();
  s_.row(r1) = report.s.transpose();
  xi_[static_cast<size_t>(r1)] = report.xi;
  kappa_[static_cast<size_t>(r1)] = report.kappa;

  std::vector<std::pair<RegionId, ControllerReply>> out;
  const auto& nbrs = neighbors_.at(r1);
  if (nbrs.empty()) {
    out.emplace_back(r1, make_reply(std::nullopt));
    return out;
  }

  // Longest-pending neighbor wins; FIFO order already encodes that, and equal
  // arrival is impossible since reports are serialized.
  for (auto it = pending_.begin(); it != pending_.end(); ++it) {
    const RegionId r2 = *it;
    if (std::find(nbrs.begin(), nbrs.end(), r2) == nbrs.end()) continue;
    pending_.erase(it);
    out.emplace_back(r1, make_reply(r2));
    out.emplace_back(r2, make_reply(r1));
    return out;
  }
  pending_.push_back(r1);
  return out;
}

bool Controller::check_gc() {
  bool all = true;
  for (int r = 0; r < region_count_; ++r)
    all = all && xi_[static_cast<size_t>(r)] == 1 && kappa_[static_cast<size_t>(r)] == 1;
  gc_ = gc_ || all;  // latched; late reports cannot revoke convergence
  return gc_;
}

}  // namespace ducsim
