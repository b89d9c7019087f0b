#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mpcrrl/dynamics/model.hpp"
#include "test_util.hpp"

using namespace mpcrrl;
using namespace mpcrrl::dyn;

namespace {

DynamicsParams random_theta(std::uint64_t seed, double spread = 1.0) {
  Rng rng(seed);
  DynamicsParams theta = DynamicsParams::random(1.5, rng);
  if (spread != 1.0) {
    for (auto& [name, t] : theta.f1) t.vec() *= spread;
    for (auto& [name, t] : theta.f2) t.vec() *= spread;
  }
  return theta;
}

VehicleState random_state(Rng& rng) {
  return {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-3, 3), rng.uniform(0.1, 10),
          rng.uniform(-1.2, 1.2)};
}

Control random_control(Rng& rng) {
  return {rng.uniform(-1, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
}

// Sets a net to a constant function by zeroing everything except the output bias.
nn::ParamSet constant_net(double value) {
  nn::ParamSet p = nn::mlp_zeros(DynamicsParams::net_spec());
  p.get("b2")[0] = value;
  return p;
}

}  // namespace

TEST_CASE("f0 basic values") {
  CHECK(f0(0.0, 0.7, 2.0) == 0.0);
  CHECK(f0(3.0, 0.0, 2.0) == 0.0);
  CHECK(f0(2.0, M_PI / 6.0, 2.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(f0(1.0, 0.1, 0.0), DomainError);
  CHECK_THROWS_AS(f0(1.0, 0.1, -2.0), DomainError);
}

TEST_CASE("f1_sym zero net gives (nearly) zero acceleration") {
  // The sqrt channel carries a small smoothing offset, so a zero net yields
  // exactly kSqrtSmoothing/dt instead of zero.
  nn::ParamSet zero = nn::mlp_zeros(DynamicsParams::net_spec());
  const double out = f1_sym(2.0, 0.3, 0.5, 0.7, 0.0, zero, 0.1);
  CHECK(std::abs(out) <= kSqrtSmoothing / 0.1 + 1e-12);
}

TEST_CASE("f1_sym positivity boundary hand evaluation") {
  // f1' == -2 everywhere, v = 4: the paper construction lands exactly on the
  // v' = 0 boundary.
  nn::ParamSet net = constant_net(-2.0);
  const double vdot = f1_sym(4.0, 0.2, -0.4, 0.9, 0.1, net, 0.1);
  CHECK(vdot == doctest::Approx(-40.0).epsilon(1e-6));
  const double v_next = 4.0 + 0.1 * vdot;
  CHECK(v_next >= -1e-15);
  CHECK(std::abs(v_next) <= 1e-8);
}

TEST_CASE("f1_sym symmetry oracle") {
  DynamicsParams theta = random_theta(3);
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.uniform(0, 10);
    const double beta = rng.uniform(-1.5, 1.5);
    const double w = rng.uniform(-1, 1);
    const double y = rng.uniform(0, 1);
    const double z = rng.uniform(0, 1);
    const double lhs = f1_sym(v, beta, w, y, z, theta.f1, 0.1);
    const double rhs = f1_sym(v, -beta, -w, y, z, theta.f1, 0.1);
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("f1_sym contract") {
  nn::ParamSet zero = nn::mlp_zeros(DynamicsParams::net_spec());
  CHECK_THROWS_AS(f1_sym(-0.5, 0, 0, 0, 0, zero, 0.1), DomainError);
}

TEST_CASE("f2_sym antisymmetry fixed point and constant net") {
  DynamicsParams theta = random_theta(5);
  CHECK(f2_sym(3.0, 0.0, 0.0, 0.4, 0.2, theta.f2) == 0.0);

  nn::ParamSet cnet = constant_net(2.7);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    CHECK(f2_sym(rng.uniform(0, 10), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 1),
                 rng.uniform(0, 1), cnet) == 0.0);
  }
}

TEST_CASE("f2_sym antisymmetry oracle") {
  DynamicsParams theta = random_theta(7);
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.uniform(0, 10);
    const double beta = rng.uniform(-1.5, 1.5);
    const double w = rng.uniform(-1, 1);
    const double y = rng.uniform(0, 1);
    const double z = rng.uniform(0, 1);
    const double lhs = f2_sym(v, beta, w, y, z, theta.f2);
    const double rhs = f2_sym(v, -beta, -w, y, z, theta.f2);
    CHECK(std::abs(lhs + rhs) <= 1e-12);
  }
}

TEST_CASE("model_step zero vector field at rest") {
  DynamicsParams theta = DynamicsParams::zeros();
  VehicleState x{2.0, -1.0, 0.8, 0.0, 0.0};
  VehicleState next = model_step(x, {0.3, 0.5, 0.1}, theta);
  CHECK(next.p == x.p);
  CHECK(next.q == x.q);
  CHECK(next.psi == x.psi);
}

TEST_CASE("model_step straight roll hand evaluation") {
  DynamicsParams theta = DynamicsParams::zeros();
  VehicleState x{0.0, 0.0, 0.0, 1.0, 0.0};
  VehicleState next = model_step(x, {0.0, 0.0, 0.0}, theta);
  CHECK(next.p == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(next.q == 0.0);
  CHECK(next.psi == 0.0);
  CHECK(next.v == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(next.beta == 0.0);
}

TEST_CASE("model_step speed never goes negative") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DynamicsParams theta = random_theta(seed, 2.0);
    Rng rng(100 + seed);
    for (int i = 0; i < 400; ++i) {
      VehicleState x = random_state(rng);
      x.v = rng.uniform(0, 0.5);  // stress the boundary
      VehicleState next = model_step(x, random_control(rng), theta);
      CHECK(next.v >= 0.0);
    }
  }
}

TEST_CASE("linearize zero-net rest point structure") {
  DynamicsParams theta = DynamicsParams::zeros();
  VehicleState x{1.0, 2.0, 0.7, 0.0, 0.0};
  DynamicsJacobians J = linearize(x, {0.0, 0.0, 0.0}, theta);
  // (p, q, psi) block is the identity at v = 0.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(J.A(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
  // No control coupling without networks.
  CHECK(J.B.norm() == doctest::Approx(0.0));
}

TEST_CASE("linearize matches finite differences") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    DynamicsParams theta = random_theta(seed);
    Rng rng(200 + seed);
    VehicleState x = random_state(rng);
    Control u = random_control(rng);
    DynamicsJacobians J = linearize(x, u, theta);

    auto step_vec = [&](const Vec5& xs, const Vec5& rest3) {
      VehicleState s = VehicleState::from_vector(xs);
      Control c = Control::from_vector(rest3.head<3>());
      return model_step(s, c, theta).to_vector();
    };

    const double h = 1e-6;
    for (int j = 0; j < 5; ++j) {
      Vec5 up = x.to_vector(), dn = x.to_vector();
      up[j] += h;
      dn[j] -= h;
      Vec5 col = (step_vec(up, u.to_vector().homogeneous().head<5>()) -
                  step_vec(dn, u.to_vector().homogeneous().head<5>())) /
                 (2 * h);
      for (int i = 0; i < 5; ++i)
        CHECK(std::abs(J.A(i, j) - col[i]) <=
              1e-4 * std::max({1.0, std::abs(J.A(i, j)), std::abs(col[i])}));
    }
    for (int j = 0; j < 3; ++j) {
      Vec3 up = u.to_vector(), dn = u.to_vector();
      up[j] += h;
      dn[j] -= h;
      Vec5 cup = model_step(x, Control::from_vector(up), theta).to_vector();
      Vec5 cdn = model_step(x, Control::from_vector(dn), theta).to_vector();
      Vec5 col = (cup - cdn) / (2 * h);
      for (int i = 0; i < 5; ++i)
        CHECK(std::abs(J.B(i, j) - col[i]) <=
              1e-4 * std::max({1.0, std::abs(J.B(i, j)), std::abs(col[i])}));
    }
  }
}

TEST_CASE("linearize agrees with the tape route") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DynamicsParams theta = random_theta(seed);
    Rng rng(300 + seed);
    VehicleState x = random_state(rng);
    Control u = random_control(rng);

    DynamicsJacobians analytic = linearize(x, u, theta);

    nn::Tape tape;
    nn::NodeId xn = tape.constant(nn::Tensor::vector(
        {x.p, x.q, x.psi, x.v, x.beta}));
    nn::NodeId un = tape.constant(nn::Tensor::vector({u.w, u.y, u.z}));
    ThetaNodes tn = theta_nodes_constant(tape, theta);
    nn::NodeId out = model_step_tape(tape, xn, un, tn);

    // Value agreement between the plain and tape evaluators.
    VehicleState plain = model_step(x, u, theta);
    for (int i = 0; i < 5; ++i)
      CHECK(tape.value(out)[static_cast<std::size_t>(i)] ==
            doctest::Approx(plain.to_vector()[i]).epsilon(1e-12));

    for (int i = 0; i < 5; ++i) {
      nn::Tensor seed_vec = nn::Tensor::zeros({5});
      seed_vec[static_cast<std::size_t>(i)] = 1.0;
      tape.backward_seed(out, seed_vec);
      const nn::Tensor& dx = tape.adjoint(xn);
      const nn::Tensor& du = tape.adjoint(un);
      for (int j = 0; j < 5; ++j)
        CHECK(analytic.A(i, j) == doctest::Approx(dx[static_cast<std::size_t>(j)]).epsilon(1e-9));
      for (int j = 0; j < 3; ++j)
        CHECK(analytic.B(i, j) == doctest::Approx(du[static_cast<std::size_t>(j)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("linearize Euler limit with zero networks") {
  DynamicsParams theta = DynamicsParams::zeros();
  VehicleState x{0.0, 0.0, 0.4, 3.0, 0.1};
  Control u{0.2, 0.5, 0.0};
  DynamicsJacobians J = linearize(x, u, theta, 1e-9);
  CHECK((J.A - Mat55::Identity()).norm() <= 1e-6);
  CHECK(J.B.norm() <= 1e-6);
}

TEST_CASE("pack/unpack round trip and write mask") {
  DynamicsParams theta = random_theta(42);
  Eigen::VectorXd packed = pack_theta(theta);
  CHECK(packed.size() == 65);

  DynamicsParams back = unpack_theta(packed, theta);
  CHECK(back.theta0_raw == theta.theta0_raw);
  CHECK(back.f1 == theta.f1);
  CHECK(back.f2 == theta.f2);

  // Only the designated 65 entries are writable.
  Rng rng(43);
  Eigen::VectorXd other(65);
  for (int i = 0; i < 65; ++i) other[i] = rng.normal();
  DynamicsParams changed = unpack_theta(other, theta);
  CHECK(changed.theta0_raw == other[0]);
  for (std::size_t i = 0; i < 32; ++i) {
    CHECK(changed.f1.get("W2")[i] == other[1 + static_cast<int>(i)]);
    CHECK(changed.f2.get("W2")[i] == other[33 + static_cast<int>(i)]);
  }
  CHECK(changed.f1.get("b2")[0] == theta.f1.get("b2")[0]);
  CHECK(changed.f1.get("W0") == theta.f1.get("W0"));
  CHECK(changed.f1.get("W1") == theta.f1.get("W1"));
  CHECK(changed.f2.get("b2")[0] == theta.f2.get("b2")[0]);

  CHECK_THROWS_AS(unpack_theta(Eigen::VectorXd::Zero(64), theta), DimensionError);
}

TEST_CASE("theta0 softplus channel stays positive") {
  DynamicsParams theta = DynamicsParams::zeros(1.5);
  CHECK(theta.theta0() == doctest::Approx(1.5).epsilon(1e-9));
  Eigen::VectorXd packed = pack_theta(theta);
  packed[0] = -100.0;
  DynamicsParams squeezed = unpack_theta(packed, theta);
  CHECK(squeezed.theta0() > 0.0);
  packed[0] = 100.0;
  DynamicsParams large = unpack_theta(packed, theta);
  CHECK(large.theta0() == doctest::Approx(100.0 + kTheta0Floor).epsilon(1e-9));
}

TEST_CASE("dynamics paramset round trip") {
  DynamicsParams theta = random_theta(77);
  nn::ParamSet ps = theta.to_paramset();
  DynamicsParams back = DynamicsParams::from_paramset(ps);
  CHECK(back.theta0_raw == theta.theta0_raw);
  CHECK(back.f1 == theta.f1);
  CHECK(back.f2 == theta.f2);
}

TEST_CASE("kinematic model slip angle and Jacobians") {
  KinematicVehicleModel model(1.4, 1.4);
  // l_r = l_f and delta_f = pi/4 gives slip atan(0.5); reach it with the
  // actuation mapping by scaling the command.
  KinematicActuation act;
  act.steer_max = M_PI / 4.0;
  KinematicVehicleModel model2(1.4, 1.4, act);
  VehicleState x{0, 0, 0, 2.0, 0};
  VehicleState next = model2.step(x, {1.0, 0.0, 0.0});
  CHECK(next.beta == doctest::Approx(std::atan(0.5)).epsilon(1e-12));

  // delta_f = 0 keeps slip and heading rate at zero.
  VehicleState straight = model.step(x, {0.0, 0.3, 0.0});
  CHECK(straight.beta == 0.0);
  CHECK(straight.psi == 0.0);

  // Jacobians vs finite differences away from the v=0 clamp.
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    VehicleState s{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-2, 2),
                   rng.uniform(1.0, 8.0), 0.0};
    Control c{rng.uniform(-0.9, 0.9), rng.uniform(0.1, 1.0), 0.0};
    DynamicsJacobians J = model.linearize(s, c);
    const double h = 1e-6;
    for (int j = 0; j < 5; ++j) {
      Vec5 up = s.to_vector(), dn = s.to_vector();
      up[j] += h;
      dn[j] -= h;
      Vec5 col = (model.step(VehicleState::from_vector(up), c).to_vector() -
                  model.step(VehicleState::from_vector(dn), c).to_vector()) /
                 (2 * h);
      for (int i = 0; i < 5; ++i) CHECK(std::abs(J.A(i, j) - col[i]) <= 1e-5);
    }
    for (int j = 0; j < 3; ++j) {
      Vec3 up = c.to_vector(), dn = c.to_vector();
      up[j] += h;
      dn[j] -= h;
      Vec5 col = (model.step(s, Control::from_vector(up)).to_vector() -
                  model.step(s, Control::from_vector(dn)).to_vector()) /
                 (2 * h);
      for (int i = 0; i < 5; ++i) CHECK(std::abs(J.B(i, j) - col[i]) <= 1e-5);
    }
  }
}
