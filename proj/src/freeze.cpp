#include "gramsyn/freeze.hpp"

#include <cmath>

#include "gramsyn/errors.hpp"

namespace gramsyn {

FrozenModel::FrozenModel(const SystemModel& source, Trajectory z)
    : source_(&source), z_(std::move(z)) {
  if (!source.is_general())
    fail(ErrorKind::NotGeneralModel, "freezing needs a drift-modulated model");
  if (z_.times.empty() || z_.dimension != source.dimension())
    fail(ErrorKind::GridMismatch, "frozen trajectory does not match the model");
  bounds_ = source.bounds();
  const double a_sup = *source.bounds().a_sup;
  bounds_.lambda1 = source.bounds().lambda1 * a_sup;
  bounds_.lambda2 = source.bounds().lambda2 * a_sup;
  bounds_.l_b = 0.0;
  bounds_.a_sup.reset();
}

Vec FrozenModel::drift(double t, const Vec& x) const {
  const Mat a = source_->modulation(t, z_.eval(t));
  return mat_vec(a, source_->drift(t, x));
}

Mat FrozenModel::drift_jacobian(double t, const Vec& x) const {
  const Mat a = source_->modulation(t, z_.eval(t));
  return a * source_->drift_jacobian(t, x);
}

Vec FrozenModel::drift_second(double t, const Vec& x, const Vec& h, const Vec& w) const {
  const Mat a = source_->modulation(t, z_.eval(t));
  return mat_vec(a, source_->drift_second(t, x, h, w));
}

Mat FrozenModel::input(double t, const Vec& x) const {
  (void)x;
  return source_->input(t, z_.eval(t));
}

Mat FrozenModel::input_state_jacobian(double t, const Vec& x, const Vec& u) const {
  (void)t;
  (void)x;
  (void)u;
  return Mat(dimension(), dimension());
}

FrozenModel frozen_model(const SystemModel& model, Trajectory z) {
  return FrozenModel(model, std::move(z));
}

FreezeStepResult freeze_step(const SystemModel& model, const Trajectory& z, const Vec& x0,
                             const Vec& x1, const PicardOptions& inner) {
  const FrozenModel frozen = frozen_model(model, z);
  const TargetSpec spec = target_displacement(frozen, x0, x1, 2, inner.step);
  FreezeStepResult out;
  out.synthesis = picard_synthesize(frozen, spec, inner);
  if (!out.synthesis.converged)
    fail(ErrorKind::NotConverged, "inner synthesis on the frozen system did not converge");
  out.control = out.synthesis.control;
  out.trajectory = integrate_controlled(frozen, out.control, x0, inner.step);
  return out;
}

FreezeResult freeze_iterate(const SystemModel& model, const Vec& x0, const Vec& x1,
                            const FreezeOptions& options) {
  const auto general = general_dynamics(model);
  const ControlGrid zero = ControlGrid::zero(model.start_time(), model.end_time(),
                                             options.inner.nodes, model.inputs());

  FreezeResult result;
  Trajectory z = integrate_controlled(*general, zero, x0, options.inner.step);

  {
    const FrozenModel frozen0 = frozen_model(model, z);
    result.initial_certificate = zero_reference_certificate(
        frozen0, x0, x1, 2, options.theta, options.inner.nodes, options.inner.step);
    if (!result.initial_certificate.admissible && !options.force)
      fail(ErrorKind::NotAdmissible,
           "target outside the certified radius of the initial frozen system (radius " +
               std::to_string(result.initial_certificate.radius) + ")");
  }

  double alpha = options.damping;
  int non_decreasing = 0;
  double prev_residual = std::numeric_limits<double>::infinity();
  bool outer_converged = false;

  for (int outer = 0; outer < options.max_outer; ++outer) {
    FreezeStepResult step = freeze_step(model, z, x0, x1, options.inner);
    result.last_inner = step.synthesis;
    result.control = step.control;

    Trajectory z_next = z;
    double residual = 0.0;
    for (std::size_t i = 0; i < z.states.size(); ++i) {
      const double blended = (1.0 - alpha) * z.states[i] + alpha * step.trajectory.states[i];
      residual = std::max(residual, std::abs(blended - z.states[i]));
      z_next.states[i] = blended;
    }
    result.outer_residuals.push_back(residual);
    result.outer_iterations = outer + 1;
    z = std::move(z_next);

    if (residual <= options.tol_outer) {
      outer_converged = true;
      break;
    }
    if (residual >= prev_residual) {
      if (++non_decreasing >= 10 && alpha > 0.5) {
        alpha = 0.5;
        non_decreasing = 0;
      }
    } else {
      non_decreasing = 0;
    }
    prev_residual = residual;
  }

  result.z_star = z;
  result.energy = control_energy(result.control);

  // Replay through the full dynamics: the certificate of success is the true
  // endpoint, not the frozen one.
  const Trajectory replay = integrate_controlled(*general, result.control, x0, options.inner.step);
  result.endpoint_general = replay.back();
  result.endpoint_residual_general = norm2(vec_sub(result.endpoint_general, x1));
  result.converged = outer_converged &&
                     result.endpoint_residual_general <= options.tol_endpoint_general;
  return result;
}

}  // namespace gramsyn
