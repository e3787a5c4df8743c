#pragma once

// Shared builders and independent oracles for the test suites. Everything in
// here stays independent of the implementation paths it is used to check:
// finite differences instead of jets, Gram-Schmidt least squares instead of
// the eigen-pseudoinverse route, closed forms instead of quadrature.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gramsyn/certify.hpp"
#include "gramsyn/flow.hpp"
#include "gramsyn/freeze.hpp"
#include "gramsyn/gramian.hpp"
#include "gramsyn/model.hpp"
#include "gramsyn/rng.hpp"
#include "gramsyn/synthesis.hpp"

namespace testsupport {

using namespace gramsyn;

// --------------------------------------------------------------------------
// Model builders
// --------------------------------------------------------------------------

inline SystemModel integrator_model(double t0 = 0.0, double T = 1.0) {
  ModelConfig cfg;
  cfg.dimension = 1;
  cfg.inputs = 1;
  cfg.t0 = t0;
  cfg.T = T;
  cfg.drift = {"0"};
  cfg.input_matrix = {{"1"}};
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 0.0;
  cfg.b_sup = 1.0;
  return build_model(cfg);
}

// dx = a x + u
inline SystemModel scalar_linear_model(double a = 1.0) {
  ModelConfig cfg;
  cfg.dimension = 1;
  cfg.inputs = 1;
  cfg.t0 = 0.0;
  cfg.T = 1.0;
  cfg.drift = {"a*x1"};
  cfg.params = {{"a", a}};
  cfg.input_matrix = {{"1"}};
  cfg.lambda1 = std::abs(a);
  cfg.lambda2 = 0.0;
  cfg.b_sup = 1.0;
  return build_model(cfg);
}

// dx1 = x2, dx2 = u
inline SystemModel double_integrator_model() {
  ModelConfig cfg;
  cfg.dimension = 2;
  cfg.inputs = 1;
  cfg.t0 = 0.0;
  cfg.T = 1.0;
  cfg.drift = {"x2", "0"};
  cfg.input_matrix = {{"0"}, {"1"}};
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 0.0;
  cfg.b_sup = 1.0;
  return build_model(cfg);
}

// Planar rotation dx = [0 1; -1 0] x + (0,1)^T u
inline SystemModel rotation_model() {
  ModelConfig cfg;
  cfg.dimension = 2;
  cfg.inputs = 1;
  cfg.t0 = 0.0;
  cfg.T = 1.0;
  cfg.drift = {"x2", "-x1"};
  cfg.input_matrix = {{"0"}, {"1"}};
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 0.0;
  cfg.b_sup = 1.0;
  return build_model(cfg);
}

// dx = tanh(x) + u (scalar Hopfield with D = 1, W = 1 written explicitly)
inline SystemModel scalar_tanh_model() {
  ModelConfig cfg;
  cfg.dimension = 1;
  cfg.inputs = 1;
  cfg.t0 = 0.0;
  cfg.T = 1.0;
  cfg.drift = {"tanh(x1)"};
  cfg.input_matrix = {{"1"}};
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 4.0 / (3.0 * std::sqrt(3.0));
  cfg.b_sup = 1.0;
  return build_model(cfg);
}

struct HopfieldSpec {
  Vec decay;
  Mat connectivity;
  std::vector<std::vector<std::string>> input;  // d x k
  double b_sup = 1.0;
  double T = 1.0;
  std::optional<std::string> b_lower;
};

inline SystemModel hopfield_model(const HopfieldSpec& spec) {
  ModelConfig cfg;
  cfg.dimension = static_cast<int>(spec.decay.size());
  cfg.inputs = static_cast<int>(spec.input.front().size());
  cfg.t0 = 0.0;
  cfg.T = spec.T;
  cfg.input_matrix = spec.input;
  cfg.b_sup = spec.b_sup;
  cfg.l_b = 0.0;
  cfg.b_lower = spec.b_lower;
  HopfieldParams hp;
  hp.decay = spec.decay;
  hp.connectivity = spec.connectivity;
  cfg.hopfield = hp;
  return build_model(cfg);
}

inline SystemModel hopfield2(double d1, double d2, double w12, double w21, double w11 = 0.0,
                             double w22 = 0.0, bool full_input = true, double T = 1.0) {
  HopfieldSpec spec;
  spec.decay = {d1, d2};
  spec.connectivity = Mat(2, 2);
  spec.connectivity(0, 0) = w11;
  spec.connectivity(0, 1) = w12;
  spec.connectivity(1, 0) = w21;
  spec.connectivity(1, 1) = w22;
  spec.T = T;
  if (full_input)
    spec.input = {{"1", "0"}, {"0", "1"}};
  else
    spec.input = {{"1"}, {"0"}};
  return hopfield_model(spec);
}

// --------------------------------------------------------------------------
// Finite-difference oracles
// --------------------------------------------------------------------------

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double second_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// --------------------------------------------------------------------------
// Dense least-norm oracle via modified Gram-Schmidt QR (independent of the
// eigen-pseudoinverse route in the library).
// --------------------------------------------------------------------------

// Minimum-norm solution of G v = y for a wide full-row-rank G (rows x cols):
// v = Q R^{-T} y where G^T = Q R.
inline Vec least_norm_qr(const Mat& g, const Vec& y) {
  const int rows = g.rows();
  const int cols = g.cols();
  // Columns of G^T.
  std::vector<Vec> q(rows, Vec(cols, 0.0));
  Mat r(rows, rows);
  for (int j = 0; j < rows; ++j) {
    Vec v(cols);
    for (int i = 0; i < cols; ++i) v[i] = g(j, i);
    for (int l = 0; l < j; ++l) {
      double proj = 0.0;
      for (int i = 0; i < cols; ++i) proj += q[l][i] * v[i];
      r(l, j) = proj;
      for (int i = 0; i < cols; ++i) v[i] -= proj * q[l][i];
    }
    double nrm = 0.0;
    for (double t : v) nrm += t * t;
    nrm = std::sqrt(nrm);
    r(j, j) = nrm;
    for (int i = 0; i < cols; ++i) q[j][i] = v[i] / nrm;
  }
  // Solve R^T w = y (lower triangular forward substitution).
  Vec w(rows, 0.0);
  for (int i = 0; i < rows; ++i) {
    double s = y[i];
    for (int l = 0; l < i; ++l) s -= r(l, i) * w[l];
    w[i] = s / r(i, i);
  }
  Vec v(cols, 0.0);
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) v[i] += q[j][i] * w[j];
  return v;
}

// --------------------------------------------------------------------------
// Random expression generator for parser/derivative property tests.
// --------------------------------------------------------------------------

inline std::string random_expression(Rng& rng, int dimension, int depth) {
  const double pick = rng.uniform01();
  if (depth <= 0 || pick < 0.28) {
    const double leaf = rng.uniform01();
    if (leaf < 0.45) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.6g", rng.uniform(-2.0, 2.0));
      return buf;
    }
    if (leaf < 0.55) return "t";
    return "x" + std::to_string(1 + static_cast<int>(rng.uniform01() * dimension) % dimension);
  }
  if (pick < 0.52) {
    static const char* unary[] = {"sin", "cos", "tanh"};
    const int idx = static_cast<int>(rng.uniform01() * 3) % 3;
    return std::string(unary[idx]) + "(" + random_expression(rng, dimension, depth - 1) + ")";
  }
  if (pick < 0.62) return "-(" + random_expression(rng, dimension, depth - 1) + ")";
  static const char* binary[] = {"+", "-", "*"};
  const int idx = static_cast<int>(rng.uniform01() * 3) % 3;
  return "(" + random_expression(rng, dimension, depth - 1) + ")" + binary[idx] + "(" +
         random_expression(rng, dimension, depth - 1) + ")";
}

// --------------------------------------------------------------------------
// Closed forms
// --------------------------------------------------------------------------

// Minimum-energy control of the double integrator, [0,1], (0,0) -> (1,0).
inline double double_integrator_control(double t) { return 6.0 - 12.0 * t; }

constexpr double kDoubleIntegratorEnergy = 12.0;

inline double relative_l2_error(const ControlGrid& u, const std::function<double(double)>& ref) {
  // Cell-midpoint Simpson of (u - ref)^2 and ref^2.
  double num = 0.0, den = 0.0;
  const double dt = u.cell_width();
  for (int cell = 0; cell + 1 < u.nodes(); ++cell) {
    const double ta = u.node_time(cell);
    const double tm = ta + 0.5 * dt;
    const double tb = u.node_time(cell + 1);
    auto sq = [&](double t) {
      const double diff = u.eval(t)[0] - ref(t);
      return diff * diff;
    };
    auto rq = [&](double t) {
      const double r = ref(t);
      return r * r;
    };
    num += dt / 6.0 * (sq(ta) + 4.0 * sq(tm) + sq(tb));
    den += dt / 6.0 * (rq(ta) + 4.0 * rq(tm) + rq(tb));
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace testsupport
