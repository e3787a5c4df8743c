#pragma once

#include <optional>
#include <vector>

#include "gramsyn/gramian.hpp"

namespace gramsyn {

// Target displacement in the anchor's coordinates: y1 pulls the target back
// through the flow, y2 pushes the initial state forward.
struct TargetSpec {
  Vec x0;
  Vec x1;
  int which = 2;
  Vec y;
};

TargetSpec target_displacement(const Dynamics& dyn, const Vec& x0, const Vec& x1, int which,
                               double step);

// One application of the synthesis map: u -> B^T DPhi^T N(u)^{-1} y sampled at
// the control nodes. Throws SingularGramian when u has left the coercivity
// class (lambda_min below rank_tol * lambda_max).
ControlGrid synthesis_step(const Dynamics& dyn, const TargetSpec& spec, const ControlGrid& u,
                           double step, double rank_tol = 1e-12);

// Iterate-decay constants of the synthesis map on the feasibility ball,
// evaluated from the declared bounds: K = dt (alpha1 dt + alpha2) and the
// m-th iterate contracts by K^m / m!.
struct ContractionEstimate {
  double e0 = 1.0;      // e^{L_B zeta dt}
  double e1_inf = 1.0;  // e^{Lambda1 dt}
  double e2_inf = 0.0;  // e^{2 Lambda1 dt} - e^{Lambda1 dt}
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double k = 0.0;
};

ContractionEstimate contraction_constant(const ModelBounds& bounds, double dt0,
                                         double coercivity_c, double y_norm, double zeta);

struct PicardOptions {
  int max_iter = 100;
  double tol_fp = 1e-9;        // sup-norm iterate delta
  double tol_endpoint = 1e-6;  // |x_u(T) - x1|
  int nodes = 101;
  double step = 1e-3;
  double rank_tol = 1e-12;
  double theta = 0.5;  // feeds the attached contraction estimate
  std::optional<ControlGrid> u_init;
};

struct SynthesisResult {
  ControlGrid control;
  std::vector<double> iterate_deltas;  // sup-norm per iteration
  int iterations = 0;
  bool converged = false;
  Vec endpoint;
  double endpoint_residual = 0.0;
  // L2 cost of the delivered piecewise-linear control.
  double energy = 0.0;
  // Quadrature energy of the synthesized function B^T DPhi^T N^{-1} y itself
  // (sampled where the Gramian is sampled); the energy identity is checked on
  // this object, the PWL representation differs from it at second order in
  // the grid spacing.
  double energy_quadrature = 0.0;
  double energy_identity_residual = 0.0;  // |energy_quadrature - y' N(u)^{-1} y|
  double energy_identity_relative = 0.0;
  GramianReport gramian;  // at the final control
  ContractionEstimate contraction;
};

// Picard iteration of the synthesis map; the initial iterate defaults to the
// min-norm control of the zero-reference trajectory. Non-convergence within
// max_iter is reported through the converged flag and the delta history, not
// thrown; a singular Gramian mid-iteration is thrown.
SynthesisResult picard_synthesize(const Dynamics& dyn, const TargetSpec& spec,
                                  const PicardOptions& options);

Vec endpoint(const Dynamics& dyn, const ControlGrid& u, const Vec& x0, double step);

// A posteriori optimality check at a converged fixed point: the defect
// operator K = DG - L must annihilate ker L, and N^{-1} y must be orthogonal
// to (Id + A)^{-1} K (ker L).
struct AlignmentReport {
  int kernel_dimension = 0;
  double k_norm_on_kernel = 0.0;       // max |K h| over the orthonormal basis
  double orthogonality_residual = 0.0; // max |< N^{-1} y, (Id+A)^{-1} K h >|
  double tolerance = 0.0;
  bool pass = false;
};

struct AlignmentOptions {
  double fd_step = -1.0;  // <= 0: 1e-5 (1 + ||u||_inf)
  double tol = -1.0;      // <= 0: 1e-5 (1 + |y|)
  double step = 1e-3;
  double rank_tol = 1e-12;
};

AlignmentReport alignment_check(const Dynamics& dyn, const TargetSpec& spec,
                                const SynthesisResult& result, const AlignmentOptions& options);

}  // namespace gramsyn
