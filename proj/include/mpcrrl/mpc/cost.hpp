#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mpcrrl/dynamics/vehicle.hpp"
#include "mpcrrl/envsim/route.hpp"

namespace mpcrrl::mpc {

using dyn::Control;
using dyn::Mat53;
using dyn::Mat55;
using dyn::Vec3;
using dyn::Vec5;
using dyn::VehicleState;
using Mat33 = Eigen::Matrix3d;
using Mat35 = Eigen::Matrix<double, 3, 5>;

// Local slice of the reference trajectory the planner optimizes against.
struct ReferenceWindow {
  std::vector<Eigen::Vector2d> waypoints;
  double target_speed = 0.0;

  const Eigen::Vector2d& goal() const {
    if (waypoints.empty()) throw ContractError("ReferenceWindow: empty waypoint set");
    return waypoints.back();
  }
};

struct CostConfig {
  double c_position = 0.04;
  double c_speed = 0.002;
  double c_control = 0.0005;
};

// Smooth stand-in for the distance to the nearest waypoint:
//   -log( (1/|G|) sum_k exp(-||pos - g_k||) )
// Always within [d_min, d_min + log|G|].
double soft_distance(const VehicleState& x, const ReferenceWindow& window);

// Sine squashing that maps unconstrained raw controls into the control box:
// steering sin(r0), throttle and brake (sin(r)+1)/2.
Control squash(const Vec3& raw);
Vec3 squash_vec(const Vec3& raw);
Vec3 squash_derivative(const Vec3& raw);  // diagonal of d squash / d raw

// Neutral raw control (squashes to zero steering/throttle/brake).
inline Vec3 neutral_raw() { return Vec3(0.0, -M_PI / 2.0, -M_PI / 2.0); }

// Stage cost on (state, raw control); the control penalty applies to the
// squashed (physical) control.
double stage_cost(const VehicleState& x, const Vec3& raw_u, const ReferenceWindow& window,
                  const CostConfig& cfg);

double terminal_cost(const VehicleState& x, const ReferenceWindow& window);

// Quadratic expansion used by the backward pass. Gradients are exact;
// Hessians are Gauss-Newton style and positive semidefinite. The cost is
// separable in x and raw u, so the cross block is identically zero.
struct StageQuad {
  Vec5 lx = Vec5::Zero();
  Vec3 lu = Vec3::Zero();
  Mat55 lxx = Mat55::Zero();
  Mat33 luu = Mat33::Zero();
};
StageQuad stage_quadratic(const VehicleState& x, const Vec3& raw_u, const ReferenceWindow& window,
                          const CostConfig& cfg);

struct TerminalQuad {
  Vec5 phi_x = Vec5::Zero();
  Mat55 phi_xx = Mat55::Zero();
};
TerminalQuad terminal_quadratic(const VehicleState& x, const ReferenceWindow& window);

// K nearest-ahead waypoints starting at the closest one to `pos`.
ReferenceWindow extract_window(const sim::Route& route, const Eigen::Vector2d& pos,
                               std::size_t window_size);

}  // namespace mpcrrl::mpc
