#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mpcrrl/common.hpp"

namespace mpcrrl::sim {

// Reference trajectory: waypoints spaced ~1 m, last waypoint is the goal.
struct Route {
  std::vector<Eigen::Vector2d> waypoints;
  double target_speed = 5.0;

  const Eigen::Vector2d& goal() const {
    if (waypoints.empty()) throw ContractError("Route: no waypoints");
    return waypoints.back();
  }

  std::size_t nearest_index(const Eigen::Vector2d& pos) const {
    if (waypoints.empty()) throw ContractError("Route: no waypoints");
    std::size_t best = 0;
    double best_d2 = (waypoints[0] - pos).squaredNorm();
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      const double d2 = (waypoints[i] - pos).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    return best;
  }

  // Local tangent direction at a waypoint.
  double heading_at(std::size_t idx) const {
    if (waypoints.size() < 2) throw ContractError("Route: need >= 2 waypoints for heading");
    const std::size_t a = idx + 1 < waypoints.size() ? idx : waypoints.size() - 2;
    const Eigen::Vector2d d = waypoints[a + 1] - waypoints[a];
    return std::atan2(d.y(), d.x());
  }

  double length() const {
    double s = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i)
      s += (waypoints[i] - waypoints[i - 1]).norm();
    return s;
  }
};

inline constexpr int kRouteFamilies = 4;

// Procedural route families; higher ids carry more curvature. Deterministic
// in (seed, family).
Route generate_route(std::uint64_t seed, int family, double length_m = 60.0,
                     double target_speed = 5.0);

// One "x,y" row per waypoint.
void write_route_csv(const Route& route, const std::string& path);

}  // namespace mpcrrl::sim
