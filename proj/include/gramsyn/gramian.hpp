#pragma once

#include <optional>
#include <string>

#include "gramsyn/flow.hpp"
#include "gramsyn/linalg.hpp"
#include "gramsyn/model.hpp"

namespace gramsyn {

// Quadrature over the control grid: composite Simpson on the half-step
// refinement (nodes plus cell midpoints). Piecewise-linear controls are exact
// at midpoints, so the rule needs no interpolation of the control
// representation, and it integrates the LTV Gramian integrand to rounding.
struct QuadratureRule {
  std::vector<double> times;    // 2M-1 sample times
  std::vector<double> weights;  // positive, summing to T - t0
  int control_nodes = 0;

  static QuadratureRule for_grid(double t0, double T, int nodes);
  int samples() const { return static_cast<int>(times.size()); }
  bool is_node(int p) const { return p % 2 == 0; }
  int node_index(int p) const { return p / 2; }
};

// Trajectory, flow-Jacobian and input samples backing the input-output
// operator L and the Gramian at a fixed control.
struct OperatorData {
  int which = 2;       // anchor index: 1 -> t0, 2 -> T
  double tau = 0.0;
  int d = 0;
  int k = 0;
  ControlGrid control;
  QuadratureRule quad;
  Trajectory refined;        // states at every quadrature sample
  std::vector<Mat> jac;      // D Phi_{t_p, tau}(x(t_p)) per sample
  std::vector<Mat> input;    // B(t_p, x(t_p)) per sample
  Mat gramian;               // symmetrized quadrature of K K^T
  SymmetricEigen eigen;
};

struct GramianReport {
  int which = 2;
  Mat matrix;
  Vec eigenvalues;                  // ascending
  double lambda_min = 0.0;
  double lambda_min_nonzero = 0.0;  // smallest eigenvalue above the rank cutoff
  std::string quadrature_rule;
  int sample_count = 0;
  std::optional<double> coercive_for;  // C with lambda_min >= 1/C
};

OperatorData build_operator_data(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                                 int which, double step);

GramianReport gramian_report(const OperatorData& data, double rank_tol = 1e-12);

GramianReport assemble_gramian(const Dynamics& dyn, const ControlGrid& u, const Vec& x0,
                               int which, double step);

// Gramian of the zero control along the uncontrolled flow.
GramianReport zero_reference_gramian(const Dynamics& dyn, const Vec& x0, int which, int nodes,
                                     double step);

// W(T) from dW = B B^T + DN W + W DN^T along the uncontrolled flow, W(t0) = 0;
// an independent route to the anchor-T zero-reference Gramian.
Mat lyapunov_w2(const Dynamics& dyn, const Vec& x0, double step);

// || W2 - S W1 S^T || / ||W2|| with S = D Phi_{t0,T}(x0).
double congruence_check(const Dynamics& dyn, const Vec& x0, int nodes, double step);

// L v = integral of D Phi B v; quadrature-weighted application.
Vec apply_L(const OperatorData& data, const ControlGrid& v);

// Adjoint is the function t -> B^T DPhi^T y sampled at the control nodes (no
// weights; it is a signal, not a sum).
ControlGrid apply_L_adjoint(const OperatorData& data, const Vec& y);

// v = L* pinv(N) y; flags targets outside the numerical range of L.
ControlGrid min_norm_control(const OperatorData& data, const Vec& y, double rank_tol = 1e-12);

// Gramian built from the controlled linearization's transition matrices
// R_u(T, t) instead of flow differentials.
Mat hcm_gramian(const Dynamics& dyn, const ControlGrid& u, const Vec& x0, double step);

// L2 norm squared of the piecewise-linear interpolant (exact per cell).
double control_energy(const ControlGrid& u);

}  // namespace gramsyn
