#pragma once

#include <memory>

#include "mpcrrl/dynamics/vehicle.hpp"
#include "mpcrrl/nn/layers.hpp"
#include "mpcrrl/nn/tape.hpp"

namespace mpcrrl::dyn {

// Parameters of the planner's internal vehicle model:
//   pdot   = v cos(psi + beta)
//   qdot   = v sin(psi + beta)
//   psidot = v sin(beta) / theta0
//   vdot   = constrained symmetric form of an auxiliary net f1'
//   betadot= antisymmetric form of an auxiliary net f2'
// theta0 lives on a softplus channel so any real adaptation input maps to a
// strictly positive value. Both auxiliary nets are 5-32-32-1 tanh MLPs over
// (v, beta, w, y, z); only their output-row weights (32 each) plus the
// theta0 channel are adaptable, 65 scalars in total.
struct DynamicsParams {
  double theta0_raw = 0.0;
  nn::ParamSet f1;
  nn::ParamSet f2;

  double theta0() const;

  static const nn::MlpSpec& net_spec();
  static DynamicsParams make(double theta0_positive, nn::ParamSet f1_params,
                             nn::ParamSet f2_params);
  static DynamicsParams zeros(double theta0_positive = 1.5);
  static DynamicsParams random(double theta0_positive, Rng& rng);

  nn::ParamSet to_paramset() const;
  static DynamicsParams from_paramset(const nn::ParamSet& ps);
};

inline constexpr std::size_t kThetaDim = 65;
inline constexpr double kTheta0Floor = 1e-6;
inline constexpr double kSqrtSmoothing = 1e-4;  // v offset inside the sqrt channel
inline constexpr double kDefaultDt = 0.1;

double softplus(double x);
double softplus_inv(double y);

// Discrete-step Jacobians of the internal model.
struct DynamicsJacobians {
  Mat55 A = Mat55::Zero();
  Mat53 B = Mat53::Zero();
};

// Heading-rate channel: v sin(beta) / theta0.
double f0(double v, double beta, double theta0);

// Acceleration channel. Symmetric under (beta, w) -> (-beta, -w) and chosen
// so that v + dt * f1_sym(...) is a sum of squares, hence never negative.
double f1_sym(double v, double beta, double w, double y, double z, const nn::ParamSet& theta1,
              double dt);

// Slip-rate channel, antisymmetric under (beta, w) -> (-beta, -w).
double f2_sym(double v, double beta, double w, double y, double z, const nn::ParamSet& theta2);

VehicleState model_step(const VehicleState& x, const Control& u, const DynamicsParams& theta,
                        double dt = kDefaultDt);

DynamicsJacobians linearize(const VehicleState& x, const Control& u, const DynamicsParams& theta,
                            double dt = kDefaultDt);

// Adaptable-channel packing: [theta0_raw, f1 output row, f2 output row].
Eigen::VectorXd pack_theta(const DynamicsParams& theta);
DynamicsParams unpack_theta(const Eigen::VectorXd& packed, const DynamicsParams& tmpl);

// Tape handles for the pieces of theta the training objective differentiates
// through. Frozen layers are registered as constants by the caller.
struct ThetaNodes {
  nn::NodeId raw0;                                          // scalar
  std::vector<std::pair<nn::NodeId, nn::NodeId>> f1_layers;  // (W, b) per layer
  std::vector<std::pair<nn::NodeId, nn::NodeId>> f2_layers;
};

// Registers theta on a tape with every piece constant except the adaptable
// channels, which are provided by `packed65` (a 65-node built elsewhere).
ThetaNodes theta_nodes_from_packed(nn::Tape& tape, nn::NodeId packed65,
                                   const DynamicsParams& tmpl);

// All-constant registration (used for state/control Jacobians).
ThetaNodes theta_nodes_constant(nn::Tape& tape, const DynamicsParams& theta);

// Builds the one-step prediction x' on the tape; x and u are 5- and 3-nodes.
nn::NodeId model_step_tape(nn::Tape& tape, nn::NodeId x, nn::NodeId u, const ThetaNodes& theta,
                           double dt = kDefaultDt);

namespace detail {
// Raw-pointer view of a 5-32-32-1 net; valid while the owning ParamSet's
// tensors stay in place.
struct NetRef {
  const double* w0;
  const double* b0;
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;
};
}  // namespace detail

// Planner-facing model interface: one Euler step plus its linearization.
// Instances are pinned in memory (held via pointer) so the hot paths can
// keep resolved views into their parameters.
class VehicleModel {
 public:
  VehicleModel() = default;
  VehicleModel(const VehicleModel&) = delete;
  VehicleModel& operator=(const VehicleModel&) = delete;
  virtual ~VehicleModel() = default;

  virtual VehicleState step(const VehicleState& x, const Control& u) const = 0;
  virtual DynamicsJacobians linearize(const VehicleState& x, const Control& u) const = 0;
  virtual double dt() const = 0;
};

class NeuralVehicleModel final : public VehicleModel {
 public:
  explicit NeuralVehicleModel(DynamicsParams theta, double dt = kDefaultDt);

  VehicleState step(const VehicleState& x, const Control& u) const override;
  DynamicsJacobians linearize(const VehicleState& x, const Control& u) const override;
  double dt() const override { return dt_; }
  const DynamicsParams& params() const { return theta_; }

 private:
  DynamicsParams theta_;
  double dt_;
  double theta0_;
  detail::NetRef net1_;
  detail::NetRef net2_;
};

// Euler step of the kinematic bicycle with the shared actuation mapping.
// The slip angle is algebraic in the steering command, so the state's beta
// column never feeds back; it is carried for interface compatibility.
class KinematicVehicleModel final : public VehicleModel {
 public:
  KinematicVehicleModel(double l_f, double l_r, KinematicActuation act = {},
                        double dt = kDefaultDt)
      : l_f_(l_f), l_r_(l_r), act_(act), dt_(dt) {
    if (l_f <= 0.0 || l_r <= 0.0) throw DomainError("KinematicVehicleModel: axle distances must be positive");
  }

  VehicleState step(const VehicleState& x, const Control& u) const override;
  DynamicsJacobians linearize(const VehicleState& x, const Control& u) const override;
  double dt() const override { return dt_; }

 private:
  double l_f_;
  double l_r_;
  KinematicActuation act_;
  double dt_;
};

}  // namespace mpcrrl::dyn
