#pragma once

#include <vector>

#include "gramsyn/certify.hpp"
#include "gramsyn/synthesis.hpp"

namespace gramsyn {

// Baseline system obtained from a drift-modulated model by evaluating the
// state-dependent coefficients along a fixed trajectory z: drift
// A(t, z(t)) N_t(x), input B(t, z(t)). The frozen input matrix is
// state-independent by construction (L_B = 0) and the drift bounds scale by
// ||A||_inf.
class FrozenModel final : public Dynamics {
 public:
  FrozenModel(const SystemModel& source, Trajectory z);

  int dimension() const override { return source_->dimension(); }
  int inputs() const override { return source_->inputs(); }
  double start_time() const override { return source_->start_time(); }
  double end_time() const override { return source_->end_time(); }
  const ModelBounds& bounds() const override { return bounds_; }

  Vec drift(double t, const Vec& x) const override;
  Mat drift_jacobian(double t, const Vec& x) const override;
  Vec drift_second(double t, const Vec& x, const Vec& h, const Vec& w) const override;
  Mat input(double t, const Vec& x) const override;
  Mat input_state_jacobian(double t, const Vec& x, const Vec& u) const override;

  const Trajectory& frozen_trajectory() const { return z_; }

 private:
  const SystemModel* source_;
  Trajectory z_;
  ModelBounds bounds_;
};

FrozenModel frozen_model(const SystemModel& model, Trajectory z);

struct FreezeStepResult {
  ControlGrid control;      // u_z
  Trajectory trajectory;    // x_{u_z} under the frozen system
  SynthesisResult synthesis;
};

// Inner problem at a fixed z: synthesize toward x1 on the frozen system with
// the anchor at T. Throws NotConverged when the inner Picard iteration fails.
FreezeStepResult freeze_step(const SystemModel& model, const Trajectory& z, const Vec& x0,
                             const Vec& x1, const PicardOptions& inner);

struct FreezeOptions {
  int max_outer = 50;
  double tol_outer = 1e-6;
  double tol_endpoint_general = 1e-5;
  double damping = 1.0;  // falls back to 0.5 after 10 non-decreasing residuals
  double theta = 0.5;
  bool force = false;    // skip the initial admissibility gate
  PicardOptions inner;
};

struct FreezeResult {
  Trajectory z_star;
  ControlGrid control;
  std::vector<double> outer_residuals;
  int outer_iterations = 0;
  bool converged = false;
  Vec endpoint_general;
  double endpoint_residual_general = 0.0;
  double energy = 0.0;
  Certificate initial_certificate;
  SynthesisResult last_inner;
};

// Damped outer iteration z <- (1-alpha) z + alpha x_{u_z}, seeded from the
// uncontrolled trajectory of the full system; on convergence the control is
// replayed through the full dynamics to measure the true endpoint residual.
// Existence of a fixed point is guaranteed under uniform coercivity, but not
// convergence of this particular iteration, so non-convergence is a reported
// outcome.
FreezeResult freeze_iterate(const SystemModel& model, const Vec& x0, const Vec& x1,
                            const FreezeOptions& options);

}  // namespace gramsyn
