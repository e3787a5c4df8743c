#include "gramsyn/gramian.hpp"

#include <cmath>

#include "gramsyn/errors.hpp"

namespace gramsyn {

QuadratureRule QuadratureRule::for_grid(double t0, double T, int nodes) {
  if (nodes < 2) fail(ErrorKind::GridMismatch, "quadrature needs at least two control nodes");
  QuadratureRule q;
  q.control_nodes = nodes;
  const int p = 2 * nodes - 1;
  const double dt = (T - t0) / (nodes - 1);
  q.times.resize(p);
  q.weights.assign(p, 0.0);
  for (int i = 0; i < p; ++i) q.times[i] = t0 + 0.5 * dt * i;
  q.times[p - 1] = T;
  for (int cell = 0; cell < nodes - 1; ++cell) {
    q.weights[2 * cell] += dt / 6.0;
    q.weights[2 * cell + 1] += 4.0 * dt / 6.0;
    q.weights[2 * cell + 2] += dt / 6.0;
  }
  return q;
}

OperatorData build_operator_data(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                                 int which, double step) {
  if (which != 1 && which != 2) fail(ErrorKind::Schema, "anchor index must be 1 or 2");
  OperatorData data;
  data.which = which;
  data.tau = which == 1 ? dyn.start_time() : dyn.end_time();
  data.d = dyn.dimension();
  data.k = dyn.inputs();
  data.control = u;
  data.quad = QuadratureRule::for_grid(u.t0(), u.T(), u.nodes());
  data.refined = integrate_controlled_refined(dyn, u, x0, step);

  const int p = data.quad.samples();
  data.jac.reserve(p);
  data.input.reserve(p);
  Mat g(data.d, data.d);
  for (int i = 0; i < p; ++i) {
    const double t = data.refined.times[i];
    const Vec x = data.refined.state(i);
    Mat j = flow_jacobian(dyn, t, data.tau, x, step);
    Mat b = dyn.input(t, x);
    // K = DPhi * B, then G += w K K^T.
    Mat kmat(data.d, data.k);
    for (int r = 0; r < data.d; ++r)
      for (int c = 0; c < data.k; ++c) {
        double s = 0.0;
        for (int l = 0; l < data.d; ++l) s += j(r, l) * b(l, c);
        kmat(r, c) = s;
      }
    const double w = data.quad.weights[i];
    for (int r = 0; r < data.d; ++r)
      for (int c = 0; c < data.d; ++c) {
        double s = 0.0;
        for (int l = 0; l < data.k; ++l) s += kmat(r, l) * kmat(c, l);
        g(r, c) += w * s;
      }
    data.jac.push_back(std::move(j));
    data.input.push_back(std::move(b));
  }
  // Symmetrize before any spectral analysis.
  Mat sym(data.d, data.d);
  for (int r = 0; r < data.d; ++r)
    for (int c = 0; c < data.d; ++c) sym(r, c) = 0.5 * (g(r, c) + g(c, r));
  data.gramian = std::move(sym);
  data.eigen = sym_eigen(data.gramian);
  return data;
}

GramianReport gramian_report(const OperatorData& data, double rank_tol) {
  GramianReport rep;
  rep.which = data.which;
  rep.matrix = data.gramian;
  rep.eigenvalues = data.eigen.values;
  rep.lambda_min = rep.eigenvalues.front();
  const double lmax = rep.eigenvalues.back();
  rep.lambda_min_nonzero = 0.0;
  for (double lam : rep.eigenvalues)
    if (lam > rank_tol * lmax) {
      rep.lambda_min_nonzero = lam;
      break;
    }
  rep.quadrature_rule = "cell-simpson";
  rep.sample_count = data.quad.samples();
  if (rep.lambda_min > rank_tol * lmax && rep.lambda_min > 0.0)
    rep.coercive_for = 1.0 / rep.lambda_min;
  return rep;
}

GramianReport assemble_gramian(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                               int which, double step) {
  return gramian_report(build_operator_data(dyn, u, x0, which, step));
}

GramianReport zero_reference_gramian(const Dynamics& dyn, const Vec& x0, int which, int nodes,
                                     double step) {
  const ControlGrid zero =
      ControlGrid::zero(dyn.start_time(), dyn.end_time(), nodes, dyn.inputs());
  return assemble_gramian(dyn, zero, x0, which, step);
}

Mat lyapunov_w2(const Dynamics& dyn, const Vec& x0, double step) {
  const int d = dyn.dimension();
  // Augmented (x, W); W rides along the uncontrolled flow.
  Vec z(static_cast<std::size_t>(d) + static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) z[i] = x0[i];

  auto f = [&](double t, const Vec& zz) {
    Vec x(zz.begin(), zz.begin() + d);
    Vec out(zz.size(), 0.0);
    const Vec dx = dyn.drift(t, x);
    for (int i = 0; i < d; ++i) out[i] = dx[i];
    const Mat b = dyn.input(t, x);
    const Mat jn = dyn.drift_jacobian(t, x);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int c = 0; c < dyn.inputs(); ++c) s += b(i, c) * b(j, c);
        for (int l = 0; l < d; ++l) {
          s += jn(i, l) * zz[static_cast<std::size_t>(d) + l * d + j];
          s += zz[static_cast<std::size_t>(d) + i * d + l] * jn(j, l);
        }
        out[static_cast<std::size_t>(d) + i * d + j] = s;
      }
    return out;
  };

  const double t0 = dyn.start_time();
  const double T = dyn.end_time();
  const int n = std::max(1, static_cast<int>(std::ceil((T - t0) / step - 1e-12)));
  const double h = (T - t0) / n;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * h;
    const Vec k1 = f(t, z);
    Vec tmp(z.size());
    for (std::size_t l = 0; l < z.size(); ++l) tmp[l] = z[l] + 0.5 * h * k1[l];
    const Vec k2 = f(t + 0.5 * h, tmp);
    for (std::size_t l = 0; l < z.size(); ++l) tmp[l] = z[l] + 0.5 * h * k2[l];
    const Vec k3 = f(t + 0.5 * h, tmp);
    for (std::size_t l = 0; l < z.size(); ++l) tmp[l] = z[l] + h * k3[l];
    const Vec k4 = f(t + h, tmp);
    for (std::size_t l = 0; l < z.size(); ++l)
      z[l] += h / 6.0 * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]);
  }
  Mat w(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double v = z[static_cast<std::size_t>(d) + i * d + j];
      if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "non-finite Lyapunov state");
      w(i, j) = v;
    }
  return w;
}

double congruence_check(const Dynamics& dyn, const Vec& x0, int nodes, double step) {
  const GramianReport w1 = zero_reference_gramian(dyn, x0, 1, nodes, step);
  const GramianReport w2 = zero_reference_gramian(dyn, x0, 2, nodes, step);
  const Mat s = flow_jacobian(dyn, dyn.start_time(), dyn.end_time(), x0, step);
  const Mat lhs = w2.matrix - s * w1.matrix * transpose(s);
  const double denom = spectral_norm(w2.matrix);
  if (denom == 0.0) return spectral_norm(lhs);
  return spectral_norm(lhs) / denom;
}

Vec apply_L(const OperatorData& data, const ControlGrid& v) {
  if (v.inputs() != data.k || v.nodes() != data.control.nodes())
    fail(ErrorKind::GridMismatch, "control grid does not match operator data");
  Vec out(data.d, 0.0);
  for (int p = 0; p < data.quad.samples(); ++p) {
    const Vec vv = v.eval(data.quad.times[p]);
    const double w = data.quad.weights[p];
    const Mat& j = data.jac[p];
    const Mat& b = data.input[p];
    for (int i = 0; i < data.d; ++i) {
      double s = 0.0;
      for (int c = 0; c < data.k; ++c) {
        double kb = 0.0;
        for (int l = 0; l < data.d; ++l) kb += j(i, l) * b(l, c);
        s += kb * vv[c];
      }
      out[i] += w * s;
    }
  }
  return out;
}

ControlGrid apply_L_adjoint(const OperatorData& data, const Vec& y) {
  ControlGrid out(data.control.t0(), data.control.T(), data.control.nodes(), data.k);
  for (int node = 0; node < out.nodes(); ++node) {
    const int p = 2 * node;  // node samples sit at even quadrature indices
    const Mat& j = data.jac[p];
    const Mat& b = data.input[p];
    for (int c = 0; c < data.k; ++c) {
      double s = 0.0;
      for (int i = 0; i < data.d; ++i) {
        double jy = 0.0;
        for (int l = 0; l < data.d; ++l) jy += j(l, i) * y[l];
        s += b(i, c) * jy;
      }
      out.at(node, c) = s;
    }
  }
  return out;
}

ControlGrid min_norm_control(const OperatorData& data, const Vec& y, double rank_tol) {
  const Vec c = psd_pinv_apply(data.eigen, y, rank_tol);
  // Range check in the spectral coordinates: N N^+ y is the projection of y
  // onto the numerical range of L.
  const Vec reached = mat_vec(data.gramian, c);
  const double resid = norm2(vec_sub(reached, y));
  if (resid > 1e-6 * (1.0 + norm2(y)))
    fail(ErrorKind::NotInRange, "target outside the numerical range of L (residual " +
                                    std::to_string(resid) + ")");
  return apply_L_adjoint(data, c);
}

Mat hcm_gramian(const Dynamics& dyn, const ControlGrid& u, const Vec& x0, double step) {
  const int d = dyn.dimension();
  const Trajectory traj = integrate_controlled_refined(dyn, u, x0, step);
  const QuadratureRule quad = QuadratureRule::for_grid(u.t0(), u.T(), u.nodes());
  Mat g(d, d);
  for (int p = 0; p < quad.samples(); ++p) {
    const double t = quad.times[p];
    const Mat r = linearized_transition(dyn, u, traj, t, dyn.end_time(), step);
    const Mat b = dyn.input(t, traj.state(p));
    Mat rb(d, dyn.inputs());
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < dyn.inputs(); ++c) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += r(i, l) * b(l, c);
        rb(i, c) = s;
      }
    const double w = quad.weights[p];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int c = 0; c < dyn.inputs(); ++c) s += rb(i, c) * rb(j, c);
        g(i, j) += w * s;
      }
  }
  Mat sym(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) sym(i, j) = 0.5 * (g(i, j) + g(j, i));
  return sym;
}

double control_energy(const ControlGrid& u) {
  // Exact integral of |pwl(u)|^2: per cell dt/3 (|a|^2 + a.b + |b|^2).
  const double dt = u.cell_width();
  double e = 0.0;
  for (int cell = 0; cell + 1 < u.nodes(); ++cell) {
    double aa = 0.0, ab = 0.0, bb = 0.0;
    for (int c = 0; c < u.inputs(); ++c) {
      const double a = u.at(cell, c);
      const double b = u.at(cell + 1, c);
      aa += a * a;
      ab += a * b;
      bb += b * b;
    }
    e += dt / 3.0 * (aa + ab + bb);
  }
  return e;
}

}  // namespace gramsyn
