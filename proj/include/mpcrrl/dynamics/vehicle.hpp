#pragma once

#include <Eigen/Dense>

#include "mpcrrl/common.hpp"

namespace mpcrrl::dyn {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec3 = Eigen::Matrix<double, 3, 1>;
using Mat55 = Eigen::Matrix<double, 5, 5>;
using Mat53 = Eigen::Matrix<double, 5, 3>;

// Observed vehicle state: planar position, heading, speed at the mass
// center, and velocity angle w.r.t. the longitudinal axis.
struct VehicleState {
  double p = 0.0;     // x position [m]
  double q = 0.0;     // y position [m]
  double psi = 0.0;   // heading [rad], unwrapped
  double v = 0.0;     // speed [m/s], >= 0
  double beta = 0.0;  // velocity angle [rad], in (-pi/2, pi/2)

  Vec5 to_vector() const {
    Vec5 x;
    x << p, q, psi, v, beta;
    return x;
  }
  static VehicleState from_vector(const Vec5& x) { return {x[0], x[1], x[2], x[3], x[4]}; }

  bool finite() const {
    return std::isfinite(p) && std::isfinite(q) && std::isfinite(psi) && std::isfinite(v) &&
           std::isfinite(beta);
  }
};

// Normalized actuator command: steering in [-1,1], throttle and brake in [0,1].
struct Control {
  double w = 0.0;  // steering
  double y = 0.0;  // throttle
  double z = 0.0;  // brake

  Vec3 to_vector() const {
    Vec3 u;
    u << w, y, z;
    return u;
  }
  static Control from_vector(const Vec3& u) { return {u[0], u[1], u[2]}; }

  bool in_box(double tol = 1e-9) const {
    return w >= -1.0 - tol && w <= 1.0 + tol && y >= -tol && y <= 1.0 + tol && z >= -tol &&
           z <= 1.0 + tol;
  }
  Control clamped() const {
    return {std::clamp(w, -1.0, 1.0), std::clamp(y, 0.0, 1.0), std::clamp(z, 0.0, 1.0)};
  }
};

// How normalized commands map onto physical actuation. Shared between the
// kinematic planning model and the kinematic simulator mode so that the two
// agree exactly.
struct KinematicActuation {
  double steer_max = 0.6;    // front wheel angle at |w|=1 [rad]
  double accel_gain = 5.0;   // acceleration at full throttle [m/s^2]
  double brake_gain = 8.0;   // deceleration at full brake [m/s^2]
};

}  // namespace mpcrrl::dyn
