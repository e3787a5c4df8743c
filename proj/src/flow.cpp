#include "gramsyn/flow.hpp"

#include <algorithm>
#include <cmath>

#include "gramsyn/errors.hpp"

namespace gramsyn {

namespace {

void check_finite(const Vec& x, const char* where) {
  for (double v : x)
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, std::string("non-finite state in ") + where);
}

int substep_count(double span, double step) {
  if (!(step > 0.0)) fail(ErrorKind::Schema, "integrator step must be positive");
  return std::max(1, static_cast<int>(std::ceil(std::abs(span) / step - 1e-12)));
}

// One RK4 step of dx/dt = f(t, x).
template <typename F>
Vec rk4_step(const F& f, double t, const Vec& x, double h) {
  const Vec k1 = f(t, x);
  Vec tmp(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  const Vec k2 = f(t + 0.5 * h, tmp);
  for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  const Vec k3 = f(t + 0.5 * h, tmp);
  for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + h * k3[i];
  const Vec k4 = f(t + h, tmp);
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

template <typename F>
Vec rk4_span(const F& f, double t_a, double t_b, Vec x, double step, const char* where) {
  const int n = substep_count(t_b - t_a, step);
  const double h = (t_b - t_a) / n;
  for (int i = 0; i < n; ++i) {
    x = rk4_step(f, t_a + i * h, x, h);
  }
  check_finite(x, where);
  return x;
}

}  // namespace

Vec ControlGrid::eval(double t) const {
  Vec u(k_, 0.0);
  if (nodes_ == 0) return u;
  const double dt = cell_width();
  double s = (t - t0_) / dt;
  if (s <= 0.0) {
    for (int c = 0; c < k_; ++c) u[c] = at(0, c);
    return u;
  }
  if (s >= nodes_ - 1) {
    for (int c = 0; c < k_; ++c) u[c] = at(nodes_ - 1, c);
    return u;
  }
  const int j = static_cast<int>(s);
  const double theta = s - j;
  for (int c = 0; c < k_; ++c) u[c] = (1.0 - theta) * at(j, c) + theta * at(j + 1, c);
  return u;
}

double ControlGrid::sup_norm() const {
  double m = 0.0;
  for (int j = 0; j < nodes_; ++j) {
    double row = 0.0;
    for (int c = 0; c < k_; ++c) row += at(j, c) * at(j, c);
    m = std::max(m, row);
  }
  return std::sqrt(m);
}

double sup_norm_diff(const ControlGrid& a, const ControlGrid& b) {
  if (!a.same_grid(b)) fail(ErrorKind::GridMismatch, "control grids differ");
  double m = 0.0;
  for (int j = 0; j < a.nodes(); ++j) {
    double row = 0.0;
    for (int c = 0; c < a.inputs(); ++c) {
      const double dv = a.at(j, c) - b.at(j, c);
      row += dv * dv;
    }
    m = std::max(m, row);
  }
  return std::sqrt(m);
}

ControlGrid grid_lincomb(double alpha, const ControlGrid& a, double beta, const ControlGrid& b) {
  if (!a.same_grid(b)) fail(ErrorKind::GridMismatch, "control grids differ");
  ControlGrid out = a;
  for (std::size_t i = 0; i < out.values().size(); ++i)
    out.values()[i] = alpha * a.values()[i] + beta * b.values()[i];
  return out;
}

Vec Trajectory::eval(double t) const {
  const int m = static_cast<int>(times.size());
  if (t <= times.front()) return state(0);
  if (t >= times.back()) return state(m - 1);
  // Uniform stamps; locate the cell directly.
  const double dt = (times.back() - times.front()) / (m - 1);
  int j = static_cast<int>((t - times.front()) / dt);
  j = std::clamp(j, 0, m - 2);
  const double theta = (t - times[j]) / (times[j + 1] - times[j]);
  Vec out(dimension);
  for (int i = 0; i < dimension; ++i)
    out[i] = (1.0 - theta) * states[static_cast<std::size_t>(j) * dimension + i] +
             theta * states[static_cast<std::size_t>(j + 1) * dimension + i];
  return out;
}

Vec integrate_flow(const Dynamics& dyn, double t_a, double t_b, const Vec& x_a, double step) {
  if (t_a == t_b) return x_a;
  auto f = [&](double t, const Vec& x) { return dyn.drift(t, x); };
  return rk4_span(f, t_a, t_b, x_a, step, "integrate_flow");
}

Mat flow_jacobian(const Dynamics& dyn, double t_a, double t_b, const Vec& x_a, double step) {
  const int d = dyn.dimension();
  if (t_a == t_b) return Mat::identity(d);
  // Augmented state (x, J) with dJ = DN_t(x) J.
  Vec z(static_cast<std::size_t>(d) + static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) z[i] = x_a[i];
  for (int i = 0; i < d; ++i) z[d + i * d + i] = 1.0;

  auto f = [&](double t, const Vec& zz) {
    Vec x(zz.begin(), zz.begin() + d);
    Vec out(zz.size(), 0.0);
    const Vec dx = dyn.drift(t, x);
    for (int i = 0; i < d; ++i) out[i] = dx[i];
    const Mat jn = dyn.drift_jacobian(t, x);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += jn(i, l) * zz[d + l * d + j];
        out[d + i * d + j] = s;
      }
    return out;
  };
  const Vec zf = rk4_span(f, t_a, t_b, z, step, "flow_jacobian");
  Mat jac(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) jac(i, j) = zf[d + i * d + j];
  return jac;
}

namespace {

Trajectory integrate_controlled_impl(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                                     double step, bool refined) {
  const int d = dyn.dimension();
  const int m = u.nodes();
  if (m < 2) fail(ErrorKind::GridMismatch, "control grid needs at least two nodes");

  auto f = [&](double t, const Vec& x) {
    Vec dx = dyn.drift(t, x);
    const Mat b = dyn.input(t, x);
    const Vec uu = u.eval(t);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int c = 0; c < u.inputs(); ++c) s += b(i, c) * uu[c];
      dx[i] += s;
    }
    return dx;
  };

  Trajectory traj;
  traj.dimension = d;
  Vec x = x0;
  check_finite(x, "integrate_controlled");
  auto push = [&](double t, const Vec& xx) {
    traj.times.push_back(t);
    traj.states.insert(traj.states.end(), xx.begin(), xx.end());
  };
  push(u.node_time(0), x);

  for (int cell = 0; cell < m - 1; ++cell) {
    const double ta = u.node_time(cell);
    const double tb = u.node_time(cell + 1);
    const double tm = 0.5 * (ta + tb);
    x = rk4_span(f, ta, tm, x, step, "integrate_controlled");
    if (refined) push(tm, x);
    x = rk4_span(f, tm, tb, x, step, "integrate_controlled");
    push(tb, x);
  }
  return traj;
}

}  // namespace

Trajectory integrate_controlled(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                                double step) {
  return integrate_controlled_impl(dyn, u, x0, step, false);
}

Trajectory integrate_controlled_refined(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                                        double step) {
  return integrate_controlled_impl(dyn, u, x0, step, true);
}

FlowJacobianSet jacobians_along(const Dynamics& dyn, const Trajectory& traj, double tau,
                                double step) {
  FlowJacobianSet set;
  set.anchor = tau;
  set.jacobians.reserve(traj.times.size());
  for (std::size_t j = 0; j < traj.times.size(); ++j)
    set.jacobians.push_back(flow_jacobian(dyn, traj.times[j], tau, traj.state(static_cast<int>(j)), step));
  return set;
}

Mat linearized_transition(const Dynamics& dyn, const ControlGrid& u, const Trajectory& traj,
                          double t_from, double t_to, double step) {
  const int d = dyn.dimension();
  if (t_from == t_to) return Mat::identity(d);

  // Augmented (x, Y): the controlled state is re-integrated so coefficient
  // evaluations stay on the trajectory between stored stamps.
  Vec z(static_cast<std::size_t>(d) + static_cast<std::size_t>(d) * d, 0.0);
  const Vec xa = traj.eval(t_from);
  for (int i = 0; i < d; ++i) z[i] = xa[i];
  for (int i = 0; i < d; ++i) z[d + i * d + i] = 1.0;

  auto f = [&](double t, const Vec& zz) {
    Vec x(zz.begin(), zz.begin() + d);
    Vec out(zz.size(), 0.0);
    Vec dx = dyn.drift(t, x);
    const Mat b = dyn.input(t, x);
    const Vec uu = u.eval(t);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int c = 0; c < u.inputs(); ++c) s += b(i, c) * uu[c];
      out[i] = dx[i] + s;
    }
    Mat coeff = dyn.drift_jacobian(t, x);
    if (dyn.bounds().l_b != 0.0) coeff = coeff + dyn.input_state_jacobian(t, x, uu);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += coeff(i, l) * zz[d + l * d + j];
        out[d + i * d + j] = s;
      }
    return out;
  };
  const Vec zf = rk4_span(f, t_from, t_to, z, step, "linearized_transition");
  Mat y(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) y(i, j) = zf[d + i * d + j];
  return y;
}

}  // namespace gramsyn
