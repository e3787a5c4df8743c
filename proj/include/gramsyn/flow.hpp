#pragma once

#include <vector>

#include "gramsyn/linalg.hpp"
#include "gramsyn/model.hpp"

namespace gramsyn {

// Piecewise-linear control signal on a uniform grid over [t0, T]; the
// universal representation of u. Sup-norm is the largest Euclidean row norm,
// matching the L-infinity norm of the interpolant.
class ControlGrid {
 public:
  ControlGrid() = default;
  ControlGrid(double t0, double T, int nodes, int k)
      : t0_(t0), T_(T), nodes_(nodes), k_(k),
        values_(static_cast<std::size_t>(nodes) * k, 0.0) {}

  static ControlGrid zero(double t0, double T, int nodes, int k) {
    return ControlGrid(t0, T, nodes, k);
  }

  double t0() const { return t0_; }
  double T() const { return T_; }
  int nodes() const { return nodes_; }
  int inputs() const { return k_; }
  double node_time(int j) const {
    return t0_ + (T_ - t0_) * static_cast<double>(j) / (nodes_ - 1);
  }
  double cell_width() const { return (T_ - t0_) / (nodes_ - 1); }

  double& at(int j, int channel) { return values_[static_cast<std::size_t>(j) * k_ + channel]; }
  double at(int j, int channel) const {
    return values_[static_cast<std::size_t>(j) * k_ + channel];
  }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  Vec eval(double t) const;
  double sup_norm() const;

  bool same_grid(const ControlGrid& other) const {
    return nodes_ == other.nodes_ && k_ == other.k_ && t0_ == other.t0_ && T_ == other.T_;
  }

 private:
  double t0_ = 0.0;
  double T_ = 1.0;
  int nodes_ = 0;
  int k_ = 0;
  std::vector<double> values_;
};

double sup_norm_diff(const ControlGrid& a, const ControlGrid& b);
ControlGrid grid_lincomb(double alpha, const ControlGrid& a, double beta, const ControlGrid& b);

struct Trajectory {
  std::vector<double> times;   // M stamps
  std::vector<double> states;  // M x d row-major
  int dimension = 0;

  Vec state(int j) const {
    return Vec(states.begin() + static_cast<std::ptrdiff_t>(j) * dimension,
               states.begin() + static_cast<std::ptrdiff_t>(j + 1) * dimension);
  }
  Vec back() const { return state(static_cast<int>(times.size()) - 1); }
  // Piecewise-linear evaluation between stamps.
  Vec eval(double t) const;
};

struct FlowJacobianSet {
  double anchor = 0.0;          // t0 or T
  std::vector<Mat> jacobians;   // per trajectory node
};

// Phi_{t_a,t_b}(x_a) by classical RK4 with uniform substeps of size <= step;
// t_b < t_a integrates backward.
Vec integrate_flow(const Dynamics& dyn, double t_a, double t_b, const Vec& x_a, double step);

// D Phi_{t_a,t_b}(x_a) through the variational equation, integrated together
// with the base trajectory.
Mat flow_jacobian(const Dynamics& dyn, double t_a, double t_b, const Vec& x_a, double step);

// Controlled trajectory of dx = N_t(x) + B(t,x) u(t) sampled at the control
// nodes. Substeps nest inside half-cells so midpoint states are exact grid
// points of the integration (the Gramian quadrature samples them).
Trajectory integrate_controlled(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                                double step);

// As above but sampled at nodes and cell midpoints (2M-1 stamps).
Trajectory integrate_controlled_refined(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                                        double step);

// D Phi_{t_j,tau}(x(t_j)) for every node of traj; one fresh augmented
// integration per node (the base point moves with the controlled trajectory,
// so no single matrix ODE propagates the set).
FlowJacobianSet jacobians_along(const Dynamics& dyn, const Trajectory& traj, double tau,
                                double step);

// State-transition matrix R_u(t_to, t_from) of the controlled linearization
// dy = [DN_t(x_u) + D_x B(t,x_u)[u,.]] y, integrated from identity alongside
// the controlled state.
Mat linearized_transition(const Dynamics& dyn, const ControlGrid& u, const Trajectory& traj,
                          double t_from, double t_to, double step);

}  // namespace gramsyn
