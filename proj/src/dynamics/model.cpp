#include "mpcrrl/dynamics/model.hpp"

#include <cmath>

namespace mpcrrl::dyn {

namespace detail {

constexpr std::size_t kHidden = 32;

using W0Map = Eigen::Map<const Eigen::Matrix<double, detail::kHidden, 5, Eigen::RowMajor>>;
using W1Map = Eigen::Map<const Eigen::Matrix<double, detail::kHidden, detail::kHidden, Eigen::RowMajor>>;
using VecH = Eigen::Matrix<double, detail::kHidden, 1>;
using RowMap = Eigen::Map<const Eigen::Matrix<double, 1, detail::kHidden>>;

NetRef net_ref_of(const nn::ParamSet& p) {
  return {p.get("W0").values().data(), p.get("b0").values().data(),
          p.get("W1").values().data(), p.get("b1").values().data(),
          p.get("W2").values().data(), p.get("b2").values().data()};
}

double net_eval(const NetRef& n, const Eigen::Matrix<double, 5, 1>& in) {
  VecH h1 = (W0Map(n.w0) * in + Eigen::Map<const VecH>(n.b0)).array().tanh();
  VecH h2 = (W1Map(n.w1) * h1 + Eigen::Map<const VecH>(n.b1)).array().tanh();
  return RowMap(n.w2) * h2 + n.b2[0];
}

// Value plus gradient w.r.t. the 5 inputs.
double net_eval_grad(const NetRef& n, const Eigen::Matrix<double, 5, 1>& in,
                     Eigen::Matrix<double, 5, 1>& grad) {
  VecH h1 = (W0Map(n.w0) * in + Eigen::Map<const VecH>(n.b0)).array().tanh();
  VecH h2 = (W1Map(n.w1) * h1 + Eigen::Map<const VecH>(n.b1)).array().tanh();
  const double out = RowMap(n.w2) * h2 + n.b2[0];

  VecH d2 = RowMap(n.w2).transpose().array() * (1.0 - h2.array().square());
  VecH d1 = (W1Map(n.w1).transpose() * d2).array() * (1.0 - h1.array().square());
  grad = W0Map(n.w0).transpose() * d1;
  return out;
}

Eigen::Matrix<double, 5, 1> net_input(double v, double beta, double w, double y, double z) {
  Eigen::Matrix<double, 5, 1> in;
  in << v, beta, w, y, z;
  return in;
}

void check_state(const VehicleState& x) {
  if (!x.finite()) throw DomainError("dynamics: non-finite state");
  if (x.v < 0.0) throw DomainError("dynamics: negative speed");
}

VehicleState step_impl(const VehicleState& x, const Control& u, const NetRef& net1,
                       const NetRef& net2, double theta0, double dt) {
  check_state(x);
  const double a = net_eval(net1, net_input(x.v, x.beta, u.w, u.y, u.z));
  const double b = net_eval(net1, net_input(x.v, -x.beta, -u.w, u.y, u.z));
  const double c = net_eval(net2, net_input(x.v, x.beta, u.w, u.y, u.z));
  const double d = net_eval(net2, net_input(x.v, -x.beta, -u.w, u.y, u.z));
  const double s = std::sqrt(x.v + kSqrtSmoothing);

  VehicleState next;
  next.p = x.p + dt * x.v * std::cos(x.psi + x.beta);
  next.q = x.q + dt * x.v * std::sin(x.psi + x.beta);
  next.psi = x.psi + dt * f0(x.v, x.beta, theta0);
  // Sum-of-squares form keeps the speed nonnegative in exact arithmetic and
  // in floating point alike.
  next.v = 0.5 * ((s + a) * (s + a) + (s + b) * (s + b));
  next.beta = x.beta + dt * 0.5 * (c - d);
  return next;
}

DynamicsJacobians linearize_impl(const VehicleState& x, const Control& u, const NetRef& net1,
                                 const NetRef& net2, double theta0, double dt) {
  check_state(x);
  using Vec5e = Eigen::Matrix<double, 5, 1>;
  Vec5e ga, gb, gc, gd;
  const double a = net_eval_grad(net1, net_input(x.v, x.beta, u.w, u.y, u.z), ga);
  const double b = net_eval_grad(net1, net_input(x.v, -x.beta, -u.w, u.y, u.z), gb);
  net_eval_grad(net2, net_input(x.v, x.beta, u.w, u.y, u.z), gc);
  net_eval_grad(net2, net_input(x.v, -x.beta, -u.w, u.y, u.z), gd);

  // Chain signs for the mirrored evaluation (inputs beta and w negated).
  auto mirror = [](const Vec5e& g) {
    Vec5e m = g;
    m[1] = -m[1];
    m[2] = -m[2];
    return m;
  };
  const Vec5e gbm = mirror(gb);
  const Vec5e gdm = mirror(gd);

  const double s = std::sqrt(x.v + kSqrtSmoothing);
  const double ds_dv = 0.5 / s;
  const double heading = x.psi + x.beta;
  const double sin_h = std::sin(heading);
  const double cos_h = std::cos(heading);

  DynamicsJacobians J;
  Mat55& A = J.A;
  Mat53& B = J.B;
  A.setIdentity();

  // Position rows.
  A(0, 2) = -dt * x.v * sin_h;
  A(0, 3) = dt * cos_h;
  A(0, 4) = -dt * x.v * sin_h;
  A(1, 2) = dt * x.v * cos_h;
  A(1, 3) = dt * sin_h;
  A(1, 4) = dt * x.v * cos_h;

  // Heading row.
  A(2, 3) = dt * std::sin(x.beta) / theta0;
  A(2, 4) = dt * x.v * std::cos(x.beta) / theta0;

  // Speed row: v' = ((s+a)^2 + (s+b)^2) / 2.
  const double pa = s + a;
  const double pb = s + b;
  A(3, 3) = pa * (ds_dv + ga[0]) + pb * (ds_dv + gbm[0]);
  A(3, 4) = pa * ga[1] + pb * gbm[1];
  B(3, 0) = pa * ga[2] + pb * gbm[2];
  B(3, 1) = pa * ga[3] + pb * gbm[3];
  B(3, 2) = pa * ga[4] + pb * gbm[4];

  // Slip row: beta' = beta + dt/2 * (c - d).
  A(4, 3) = 0.5 * dt * (gc[0] - gdm[0]);
  A(4, 4) = 1.0 + 0.5 * dt * (gc[1] - gdm[1]);
  B(4, 0) = 0.5 * dt * (gc[2] - gdm[2]);
  B(4, 1) = 0.5 * dt * (gc[3] - gdm[3]);
  B(4, 2) = 0.5 * dt * (gc[4] - gdm[4]);

  if (!J.A.allFinite() || !J.B.allFinite())
    throw NumericError("linearize: non-finite Jacobian entries");
  return J;
}

}  // namespace detail

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double softplus_inv(double y) {
  if (y <= 0.0) throw DomainError("softplus_inv: argument must be positive");
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

const nn::MlpSpec& DynamicsParams::net_spec() {
  static const nn::MlpSpec spec{{5, detail::kHidden, detail::kHidden, 1}};
  return spec;
}

double DynamicsParams::theta0() const { return softplus(theta0_raw) + kTheta0Floor; }

DynamicsParams DynamicsParams::make(double theta0_positive, nn::ParamSet f1_params,
                                    nn::ParamSet f2_params) {
  if (theta0_positive <= kTheta0Floor)
    throw DomainError("DynamicsParams: theta0 must exceed " + std::to_string(kTheta0Floor));
  DynamicsParams theta;
  theta.theta0_raw = softplus_inv(theta0_positive - kTheta0Floor);
  theta.f1 = std::move(f1_params);
  theta.f2 = std::move(f2_params);
  return theta;
}

DynamicsParams DynamicsParams::zeros(double theta0_positive) {
  return make(theta0_positive, nn::mlp_zeros(net_spec()), nn::mlp_zeros(net_spec()));
}

DynamicsParams DynamicsParams::random(double theta0_positive, Rng& rng) {
  return make(theta0_positive, nn::mlp_init(net_spec(), rng), nn::mlp_init(net_spec(), rng));
}

nn::ParamSet DynamicsParams::to_paramset() const {
  nn::ParamSet ps;
  ps.add("theta0_raw", nn::Tensor::scalar(theta0_raw));
  for (const auto& [name, t] : f1) ps.add("f1/" + name, t);
  for (const auto& [name, t] : f2) ps.add("f2/" + name, t);
  return ps;
}

DynamicsParams DynamicsParams::from_paramset(const nn::ParamSet& ps) {
  DynamicsParams theta;
  theta.theta0_raw = ps.get("theta0_raw").item();
  for (std::size_t l = 0; l < net_spec().layer_count(); ++l) {
    const std::string wl = "W" + std::to_string(l);
    const std::string bl = "b" + std::to_string(l);
    theta.f1.add(wl, ps.get("f1/" + wl));
    theta.f1.add(bl, ps.get("f1/" + bl));
    theta.f2.add(wl, ps.get("f2/" + wl));
    theta.f2.add(bl, ps.get("f2/" + bl));
  }
  return theta;
}

double f0(double v, double beta, double theta0) {
  if (theta0 <= 0.0) throw DomainError("f0: theta0 must be positive");
  return v * std::sin(beta) / theta0;
}

double f1_sym(double v, double beta, double w, double y, double z, const nn::ParamSet& theta1,
              double dt) {
  if (v < 0.0) throw DomainError("f1_sym: negative speed");
  if (dt <= 0.0) throw DomainError("f1_sym: dt must be positive");
  const detail::NetRef net = detail::net_ref_of(theta1);
  const double a = detail::net_eval(net, detail::net_input(v, beta, w, y, z));
  const double b = detail::net_eval(net, detail::net_input(v, -beta, -w, y, z));
  const double s = std::sqrt(v + kSqrtSmoothing);
  const double next_v = 0.5 * ((s + a) * (s + a) + (s + b) * (s + b));
  return (next_v - v) / dt;
}

double f2_sym(double v, double beta, double w, double y, double z, const nn::ParamSet& theta2) {
  const detail::NetRef net = detail::net_ref_of(theta2);
  const double c = detail::net_eval(net, detail::net_input(v, beta, w, y, z));
  const double d = detail::net_eval(net, detail::net_input(v, -beta, -w, y, z));
  return 0.5 * (c - d);
}

VehicleState model_step(const VehicleState& x, const Control& u, const DynamicsParams& theta,
                        double dt) {
  return detail::step_impl(x, u, detail::net_ref_of(theta.f1), detail::net_ref_of(theta.f2),
                           theta.theta0(), dt);
}

DynamicsJacobians linearize(const VehicleState& x, const Control& u, const DynamicsParams& theta,
                            double dt) {
  return detail::linearize_impl(x, u, detail::net_ref_of(theta.f1), detail::net_ref_of(theta.f2),
                                theta.theta0(), dt);
}

NeuralVehicleModel::NeuralVehicleModel(DynamicsParams theta, double dt)
    : theta_(std::move(theta)),
      dt_(dt),
      theta0_(theta_.theta0()),
      net1_(detail::net_ref_of(theta_.f1)),
      net2_(detail::net_ref_of(theta_.f2)) {}

VehicleState NeuralVehicleModel::step(const VehicleState& x, const Control& u) const {
  return detail::step_impl(x, u, net1_, net2_, theta0_, dt_);
}

DynamicsJacobians NeuralVehicleModel::linearize(const VehicleState& x, const Control& u) const {
  return detail::linearize_impl(x, u, net1_, net2_, theta0_, dt_);
}

Eigen::VectorXd pack_theta(const DynamicsParams& theta) {
  Eigen::VectorXd packed(kThetaDim);
  packed[0] = theta.theta0_raw;
  const nn::Tensor& w1 = theta.f1.get("W2");
  const nn::Tensor& w2 = theta.f2.get("W2");
  for (std::size_t i = 0; i < detail::kHidden; ++i) {
    packed[1 + static_cast<Eigen::Index>(i)] = w1[i];
    packed[1 + detail::kHidden + static_cast<Eigen::Index>(i)] = w2[i];
  }
  return packed;
}

DynamicsParams unpack_theta(const Eigen::VectorXd& packed, const DynamicsParams& tmpl) {
  if (packed.size() != static_cast<Eigen::Index>(kThetaDim))
    throw DimensionError("unpack_theta: expected 65 entries, got " + std::to_string(packed.size()));
  DynamicsParams theta = tmpl;
  theta.theta0_raw = packed[0];
  nn::Tensor& w1 = theta.f1.get("W2");
  nn::Tensor& w2 = theta.f2.get("W2");
  for (std::size_t i = 0; i < detail::kHidden; ++i) {
    w1[i] = packed[1 + static_cast<Eigen::Index>(i)];
    w2[i] = packed[1 + detail::kHidden + static_cast<Eigen::Index>(i)];
  }
  return theta;
}

ThetaNodes theta_nodes_constant(nn::Tape& tape, const DynamicsParams& theta) {
  ThetaNodes nodes;
  nodes.raw0 = tape.constant(nn::Tensor::scalar(theta.theta0_raw));
  nodes.f1_layers = nn::mlp_register(tape, DynamicsParams::net_spec(), theta.f1, "f1/", false);
  nodes.f2_layers = nn::mlp_register(tape, DynamicsParams::net_spec(), theta.f2, "f2/", false);
  return nodes;
}

ThetaNodes theta_nodes_from_packed(nn::Tape& tape, nn::NodeId packed65,
                                   const DynamicsParams& tmpl) {
  if (tape.value(packed65).size() != kThetaDim)
    throw DimensionError("theta_nodes_from_packed: node is not a 65-vector");
  ThetaNodes nodes = theta_nodes_constant(tape, tmpl);
  nodes.raw0 = tape.slice(packed65, 0, std::vector<std::size_t>{});
  nodes.f1_layers[2].first = tape.reshape(tape.slice(packed65, 1, detail::kHidden), {1, detail::kHidden});
  nodes.f2_layers[2].first = tape.reshape(tape.slice(packed65, 1 + detail::kHidden, detail::kHidden), {1, detail::kHidden});
  return nodes;
}

nn::NodeId model_step_tape(nn::Tape& tape, nn::NodeId x, nn::NodeId u, const ThetaNodes& theta,
                           double dt) {
  using nn::NodeId;
  NodeId p = tape.slice(x, 0, std::vector<std::size_t>{});
  NodeId q = tape.slice(x, 1, std::vector<std::size_t>{});
  NodeId psi = tape.slice(x, 2, std::vector<std::size_t>{});
  NodeId v = tape.slice(x, 3, std::vector<std::size_t>{});
  NodeId beta = tape.slice(x, 4, std::vector<std::size_t>{});
  NodeId w = tape.slice(u, 0, std::vector<std::size_t>{});
  NodeId y = tape.slice(u, 1, std::vector<std::size_t>{});
  NodeId z = tape.slice(u, 2, std::vector<std::size_t>{});

  NodeId in_fwd = tape.concat({v, beta, w, y, z});
  NodeId in_mir = tape.concat({v, tape.neg(beta), tape.neg(w), y, z});

  NodeId a = tape.reshape(nn::mlp_forward_tape(tape, theta.f1_layers, in_fwd), {});
  NodeId b = tape.reshape(nn::mlp_forward_tape(tape, theta.f1_layers, in_mir), {});
  NodeId c = tape.reshape(nn::mlp_forward_tape(tape, theta.f2_layers, in_fwd), {});
  NodeId d = tape.reshape(nn::mlp_forward_tape(tape, theta.f2_layers, in_mir), {});

  NodeId heading = tape.add(psi, beta);
  NodeId p_next = tape.add(p, tape.scale(tape.mul(v, tape.cos_(heading)), dt));
  NodeId q_next = tape.add(q, tape.scale(tape.mul(v, tape.sin_(heading)), dt));

  NodeId theta0 = tape.add_scalar(tape.softplus(theta.raw0), kTheta0Floor);
  NodeId inv_theta0 = tape.exp_(tape.neg(tape.log_(theta0)));
  NodeId psi_next =
      tape.add(psi, tape.scale(tape.mul(tape.mul(v, tape.sin_(beta)), inv_theta0), dt));

  NodeId s = tape.sqrt_(tape.add_scalar(v, kSqrtSmoothing));
  NodeId sa = tape.add(s, a);
  NodeId sb = tape.add(s, b);
  NodeId v_next = tape.scale(tape.add(tape.square(sa), tape.square(sb)), 0.5);

  NodeId beta_next = tape.add(beta, tape.scale(tape.sub(c, d), 0.5 * dt));

  return tape.concat({p_next, q_next, psi_next, v_next, beta_next});
}

VehicleState KinematicVehicleModel::step(const VehicleState& x, const Control& u) const {
  detail::check_state(x);
  const double delta_f = act_.steer_max * u.w;
  const double slip = std::atan(l_r_ / (l_f_ + l_r_) * std::tan(delta_f));
  const double accel = act_.accel_gain * u.y - act_.brake_gain * u.z;
  const double heading = x.psi + slip;

  VehicleState next;
  next.p = x.p + dt_ * x.v * std::cos(heading);
  next.q = x.q + dt_ * x.v * std::sin(heading);
  next.psi = x.psi + dt_ * x.v / l_r_ * std::sin(slip);
  next.v = std::max(x.v + dt_ * accel, 0.0);
  next.beta = slip;
  return next;
}

DynamicsJacobians KinematicVehicleModel::linearize(const VehicleState& x, const Control& u) const {
  detail::check_state(x);
  const double delta_f = act_.steer_max * u.w;
  const double k = l_r_ / (l_f_ + l_r_);
  const double t = std::tan(delta_f);
  const double slip = std::atan(k * t);
  // d slip / d w through delta_f = steer_max * w.
  const double sec2 = 1.0 + t * t;
  const double dslip_dw = act_.steer_max * k * sec2 / (1.0 + k * k * t * t);

  const double heading = x.psi + slip;
  const double sin_h = std::sin(heading);
  const double cos_h = std::cos(heading);
  const bool moving = x.v + dt_ * (act_.accel_gain * u.y - act_.brake_gain * u.z) > 0.0;

  DynamicsJacobians J;
  J.A.setIdentity();
  J.A(0, 2) = -dt_ * x.v * sin_h;
  J.A(0, 3) = dt_ * cos_h;
  J.A(1, 2) = dt_ * x.v * cos_h;
  J.A(1, 3) = dt_ * sin_h;
  J.A(2, 3) = dt_ * std::sin(slip) / l_r_;
  J.A(3, 3) = moving ? 1.0 : 0.0;
  J.A(4, 4) = 0.0;  // slip is algebraic in the steering command

  J.B(0, 0) = -dt_ * x.v * sin_h * dslip_dw;
  J.B(1, 0) = dt_ * x.v * cos_h * dslip_dw;
  J.B(2, 0) = dt_ * x.v / l_r_ * std::cos(slip) * dslip_dw;
  J.B(4, 0) = dslip_dw;
  if (moving) {
    J.B(3, 1) = dt_ * act_.accel_gain;
    J.B(3, 2) = -dt_ * act_.brake_gain;
  }
  return J;
}

}  // namespace mpcrrl::dyn
