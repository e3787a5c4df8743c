#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gramsyn/errors.hpp"
#include "gramsyn/gramian.hpp"
#include "gramsyn/rng.hpp"
#include "support.hpp"

using namespace gramsyn;
using testsupport::hopfield2;

namespace {

SystemModel planar_single_input() {
  ModelConfig cfg;
  cfg.dimension = 2;
  cfg.inputs = 1;
  cfg.t0 = 0.0;
  cfg.T = 1.0;
  cfg.drift = {"0", "0"};
  cfg.input_matrix = {{"1"}, {"0"}};
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 0.0;
  cfg.b_sup = 1.0;
  return build_model(cfg);
}

ControlGrid random_control(Rng& rng, double t0, double T, int nodes, int k, double amp) {
  ControlGrid u(t0, T, nodes, k);
  for (int j = 0; j < nodes; ++j)
    for (int c = 0; c < k; ++c) u.at(j, c) = rng.uniform(-amp, amp);
  return u;
}

}  // namespace

TEST_CASE("integrator gramian is the horizon length") {
  const SystemModel m = testsupport::integrator_model();
  const GramianReport rep = zero_reference_gramian(m, {0.0}, 1, 51, 1e-2);
  CHECK(rep.matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rep.coercive_for.has_value());

  const GramianReport rep2 = zero_reference_gramian(m, {0.0}, 2, 51, 1e-2);
  CHECK(rep2.matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("scalar linear gramian matches the closed form") {
  const SystemModel m = testsupport::scalar_linear_model(1.0);
  const GramianReport rep = zero_reference_gramian(m, {0.0}, 2, 201, 1e-3);
  const double expected = (std::exp(2.0) - 1.0) / 2.0;
  CHECK(std::abs(rep.matrix(0, 0) - expected) < 1e-6);
  CHECK(rep.matrix(0, 0) == doctest::Approx(3.194528).epsilon(1e-6));
}

TEST_CASE("rank-deficient gramian is flagged not coercive") {
  const SystemModel m = planar_single_input();
  const GramianReport rep = zero_reference_gramian(m, {0.0, 0.0}, 2, 51, 1e-2);
  CHECK(rep.matrix(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(rep.matrix(1, 1)) < 1e-14);
  CHECK(std::abs(rep.lambda_min) < 1e-12);
  CHECK_FALSE(rep.coercive_for.has_value());
  CHECK(rep.lambda_min_nonzero == doctest::Approx(1.0));
}

TEST_CASE("hopfield coupling decides zero-reference invertibility") {
  // w21 != 0 reaches the second coordinate through the first.
  const SystemModel coupled = hopfield2(1.0, 1.0, 0.4, 0.8, 0.0, 0.0, false);
  const GramianReport g1 = zero_reference_gramian(coupled, {0.1, -0.2}, 2, 101, 1e-2);
  CHECK(g1.lambda_min > 1e-4);

  // Diagonal W leaves the second coordinate unreachable.
  const SystemModel diag = hopfield2(1.0, 1.0, 0.0, 0.0, 0.5, 0.5, false);
  const GramianReport g0 = zero_reference_gramian(diag, {0.1, -0.2}, 2, 101, 1e-2);
  CHECK(std::abs(g0.lambda_min) < 1e-12);
}

TEST_CASE("lyapunov route to the anchor-T gramian") {
  const SystemModel integ = testsupport::integrator_model();
  CHECK(lyapunov_w2(integ, {0.0}, 1e-2)(0, 0) == doctest::Approx(1.0).epsilon(1e-13));

  const SystemModel lin = testsupport::scalar_linear_model(1.0);
  const double expected = (std::exp(2.0) - 1.0) / 2.0;
  CHECK(std::abs(lyapunov_w2(lin, {0.0}, 1e-3)(0, 0) - expected) < 1e-8);

  Rng rng(31);
  for (int trial = 0; trial < 4; ++trial) {
    const SystemModel m = hopfield2(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5),
                                    rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
    const Vec x0 = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    const Mat w_ode = lyapunov_w2(m, x0, 1e-3);
    const GramianReport w_quad = zero_reference_gramian(m, x0, 2, 201, 1e-3);
    const double rel = spectral_norm(w_ode - w_quad.matrix) / spectral_norm(w_quad.matrix);
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("congruence between the two anchors") {
  const SystemModel integ = testsupport::integrator_model();
  CHECK(congruence_check(integ, {0.0}, 51, 1e-2) < 1e-14);

  const SystemModel lin = testsupport::scalar_linear_model(1.0);
  CHECK(congruence_check(lin, {0.5}, 201, 1e-3) < 1e-6);

  const SystemModel m = hopfield2(1.1, 0.9, 0.6, -0.7);
  CHECK(congruence_check(m, {0.2, 0.3}, 201, 1e-3) < 1e-5);
}

TEST_CASE("operator application and its adjoint") {
  const SystemModel integ = testsupport::integrator_model();
  const ControlGrid zero = ControlGrid::zero(0.0, 1.0, 51, 1);
  const OperatorData data = build_operator_data(integ, zero, {0.0}, 2, 1e-2);

  ControlGrid ones(0.0, 1.0, 51, 1);
  for (int j = 0; j < 51; ++j) ones.at(j, 0) = 1.0;
  CHECK(apply_L(data, ones)[0] == doctest::Approx(1.0).epsilon(1e-14));

  // L L* y = N y within quadrature tolerance.
  const SystemModel m = hopfield2(1.0, 1.0, 0.5, -0.5);
  const ControlGrid z2 = ControlGrid::zero(0.0, 1.0, 101, 2);
  const OperatorData d2 = build_operator_data(m, z2, {0.1, 0.4}, 2, 1e-2);
  const Vec y = {0.7, -0.3};
  const Vec lhs = apply_L(d2, apply_L_adjoint(d2, y));
  const Vec rhs = mat_vec(d2.gramian, y);
  CHECK(norm2(vec_sub(lhs, rhs)) / norm2(rhs) < 1e-3);

  // Planar single input: v = 1 reaches (1, 0).
  const SystemModel planar = planar_single_input();
  const ControlGrid zp = ControlGrid::zero(0.0, 1.0, 51, 1);
  const OperatorData dp = build_operator_data(planar, zp, {0.0, 0.0}, 2, 1e-2);
  ControlGrid vp(0.0, 1.0, 51, 1);
  for (int j = 0; j < 51; ++j) vp.at(j, 0) = 1.0;
  const Vec out = apply_L(dp, vp);
  CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(out[1]) < 1e-14);
}

TEST_CASE("grid mismatch is rejected") {
  const SystemModel integ = testsupport::integrator_model();
  const ControlGrid zero = ControlGrid::zero(0.0, 1.0, 51, 1);
  const OperatorData data = build_operator_data(integ, zero, {0.0}, 2, 1e-2);
  const ControlGrid wrong = ControlGrid::zero(0.0, 1.0, 11, 1);
  CHECK_THROWS_AS(apply_L(data, wrong), Error);
}

TEST_CASE("min-norm control basics") {
  const SystemModel integ = testsupport::integrator_model();
  const ControlGrid zero = ControlGrid::zero(0.0, 1.0, 51, 1);
  const OperatorData data = build_operator_data(integ, zero, {0.0}, 2, 1e-2);
  const ControlGrid v = min_norm_control(data, {1.0});
  for (int j = 0; j < v.nodes(); ++j) CHECK(v.at(j, 0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(control_energy(v) == doctest::Approx(1.0).epsilon(1e-13));

  const SystemModel planar = planar_single_input();
  const ControlGrid zp = ControlGrid::zero(0.0, 1.0, 51, 1);
  const OperatorData dp = build_operator_data(planar, zp, {0.0, 0.0}, 2, 1e-2);
  const ControlGrid vp = min_norm_control(dp, {1.0, 0.0});
  for (int j = 0; j < vp.nodes(); ++j) CHECK(vp.at(j, 0) == doctest::Approx(1.0).epsilon(1e-12));

  try {
    min_norm_control(dp, {0.0, 1.0});
    FAIL("expected NotInRange");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotInRange);
  }
}

TEST_CASE("min-norm matches a dense least-norm solve") {
  const SystemModel m = testsupport::double_integrator_model();
  const ControlGrid zero = ControlGrid::zero(0.0, 1.0, 201, 1);
  const OperatorData data = build_operator_data(m, zero, {0.0, 0.0}, 2, 1e-3);
  const Vec y = {1.0, 0.0};
  const ControlGrid v = min_norm_control(data, y);

  // Dense weighted system over all quadrature samples, solved by QR.
  const int p = data.quad.samples();
  Mat g(2, p);
  for (int i = 0; i < p; ++i) {
    const double sw = std::sqrt(data.quad.weights[i]);
    for (int r = 0; r < 2; ++r) {
      double s = 0.0;
      for (int l = 0; l < 2; ++l) s += data.jac[i](r, l) * data.input[i](l, 0);
      g(r, i) = sw * s;
    }
  }
  const Vec dense = testsupport::least_norm_qr(g, y);
  // Compare at the control nodes (even sample indices), unweighted values.
  double worst = 0.0;
  for (int node = 0; node < v.nodes(); ++node) {
    const int i = 2 * node;
    const double vd = dense[i] / std::sqrt(data.quad.weights[i]);
    worst = std::max(worst, std::abs(vd - v.at(node, 0)));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("gramian quadratic form identity") {
  const SystemModel m = hopfield2(1.0, 0.8, 0.6, 0.4);
  Rng rng(5);
  const ControlGrid u = random_control(rng, 0.0, 1.0, 51, 2, 0.5);
  const OperatorData data = build_operator_data(m, u, {0.1, -0.1}, 1, 1e-2);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec y = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    double quad = 0.0;
    for (int i = 0; i < data.quad.samples(); ++i) {
      double s0 = 0.0;
      for (int r = 0; r < 2; ++r) {
        double kr = 0.0;
        for (int l = 0; l < 2; ++l) kr += data.jac[i](r, l) * data.input[i](l, 0);
        s0 += kr * y[r];
      }
      double s1 = 0.0;
      for (int r = 0; r < 2; ++r) {
        double kr = 0.0;
        for (int l = 0; l < 2; ++l) kr += data.jac[i](r, l) * data.input[i](l, 1);
        s1 += kr * y[r];
      }
      quad += data.quad.weights[i] * (s0 * s0 + s1 * s1);
    }
    const double through = dot(y, mat_vec(data.gramian, y));
    CHECK(through == doctest::Approx(quad).epsilon(1e-10));
    CHECK(through >= -1e-10 * spectral_norm(data.gramian));
  }
}

TEST_CASE("fully actuated coercivity floor") {
  // Scalar Hopfield with B = 1 and lower profile b = 1.
  testsupport::HopfieldSpec spec;
  spec.decay = {1.0};
  spec.connectivity = Mat(1, 1);
  spec.connectivity(0, 0) = 0.5;
  spec.input = {{"1"}};
  spec.b_lower = "1";
  const SystemModel m = hopfield_model(spec);
  const double l1 = m.bounds().lambda1;
  const double floor = std::exp(-2.0 * l1);  // ||b||_1 = dt = 1
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const ControlGrid u = random_control(rng, 0.0, 1.0, 51, 1, 1.0);
    const GramianReport rep = assemble_gramian(m, u, {rng.uniform(-1.0, 1.0)}, 2, 1e-2);
    CHECK(rep.lambda_min >= floor - 1e-9);
  }
}

TEST_CASE("alternative gramian from the controlled linearization") {
  // LTV: R_u coincides with the flow jacobian, so M(u) = N_2(u) exactly.
  const SystemModel rot = testsupport::rotation_model();
  Rng rng(13);
  const ControlGrid u = random_control(rng, 0.0, 1.0, 51, 1, 1.0);
  const Mat hcm = hcm_gramian(rot, u, {0.5, 0.0}, 1e-2);
  const GramianReport n2 = assemble_gramian(rot, u, {0.5, 0.0}, 2, 1e-2);
  CHECK(max_abs(hcm - n2.matrix) < 1e-10);

  // Zero control: M(0) = W_2.
  const SystemModel m = hopfield2(1.0, 1.0, 0.7, -0.3);
  const ControlGrid zero = ControlGrid::zero(0.0, 1.0, 101, 2);
  const Mat hcm0 = hcm_gramian(m, zero, {0.2, 0.1}, 1e-2);
  const GramianReport w2 = zero_reference_gramian(m, {0.2, 0.1}, 2, 101, 1e-2);
  CHECK(spectral_norm(hcm0 - w2.matrix) / spectral_norm(w2.matrix) < 1e-6);

  // Nonlinear scalar: invertible N_2 forces invertible M across random draws.
  const SystemModel th = testsupport::scalar_tanh_model();
  for (int trial = 0; trial < 5; ++trial) {
    const ControlGrid ur = random_control(rng, 0.0, 1.0, 51, 1, 0.8);
    const GramianReport n = assemble_gramian(th, ur, {0.1}, 2, 1e-2);
    const Mat mm = hcm_gramian(th, ur, {0.1}, 1e-2);
    if (n.lambda_min > 1e-10) CHECK(mm(0, 0) > 1e-10);
  }
}
