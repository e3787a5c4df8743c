#include "gramsyn/synthesis.hpp"

#include <cmath>

#include "gramsyn/errors.hpp"

namespace gramsyn {

namespace {

// expm1(z)/z with the z -> 0 limit.
double em1x(double z) {
  if (z == 0.0) return 1.0;
  return std::expm1(z) / z;
}

void require_coercive(const SymmetricEigen& eigen, double rank_tol, const char* where) {
  const double lmin = eigen.values.front();
  const double lmax = eigen.values.back();
  if (!(lmin > rank_tol * lmax) || !(lmin > 0.0))
    fail(ErrorKind::SingularGramian,
         std::string(where) + ": Gramian lambda_min " + std::to_string(lmin) +
             " below threshold (lambda_max " + std::to_string(lmax) + ")");
}

}  // namespace

TargetSpec target_displacement(const Dynamics& dyn, const Vec& x0, const Vec& x1, int which,
                               double step) {
  TargetSpec spec;
  spec.x0 = x0;
  spec.x1 = x1;
  spec.which = which;
  if (which == 1) {
    const Vec pulled = integrate_flow(dyn, dyn.end_time(), dyn.start_time(), x1, step);
    spec.y = vec_sub(pulled, x0);
  } else if (which == 2) {
    const Vec pushed = integrate_flow(dyn, dyn.start_time(), dyn.end_time(), x0, step);
    spec.y = vec_sub(x1, pushed);
  } else {
    fail(ErrorKind::Schema, "anchor index must be 1 or 2");
  }
  return spec;
}

ControlGrid synthesis_step(const Dynamics& dyn, const TargetSpec& spec, const ControlGrid& u,
                           double step, double rank_tol) {
  const OperatorData data = build_operator_data(dyn, u, spec.x0, spec.which, step);
  require_coercive(data.eigen, rank_tol, "synthesis_step");
  const Vec c = sym_solve(data.eigen, spec.y);
  return apply_L_adjoint(data, c);
}

ContractionEstimate contraction_constant(const ModelBounds& bounds, double dt0,
                                         double coercivity_c, double y_norm, double zeta) {
  ContractionEstimate est;
  est.e0 = std::exp(bounds.l_b * zeta * dt0);
  est.e1_inf = std::exp(bounds.lambda1 * dt0);
  est.e2_inf = est.e1_inf * (est.e1_inf - 1.0);
  // lambda2 ||B|| E2/Lambda1 + L_B E1, with the Lambda1 -> 0 limit of the
  // first ratio equal to dt0.
  const double e2_over_l1 = est.e1_inf * dt0 * em1x(bounds.lambda1 * dt0);
  const double inner = bounds.lambda2 * bounds.b_sup * e2_over_l1 + bounds.l_b * est.e1_inf;
  est.alpha2 = est.e0 * coercivity_c * bounds.b_sup * est.e1_inf * inner * y_norm;
  est.alpha1 = 2.0 * est.e0 * coercivity_c * coercivity_c * bounds.b_sup * bounds.b_sup *
               bounds.b_sup * est.e1_inf * est.e1_inf * inner * y_norm;
  est.k = dt0 * (est.alpha1 * dt0 + est.alpha2);
  return est;
}

SynthesisResult picard_synthesize(const Dynamics& dyn, const TargetSpec& spec,
                                  const PicardOptions& options) {
  SynthesisResult result;

  ControlGrid u = [&] {
    if (options.u_init) {
      if (options.u_init->nodes() != options.nodes)
        fail(ErrorKind::GridMismatch, "u_init does not match the configured grid");
      return *options.u_init;
    }
    const ControlGrid zero =
        ControlGrid::zero(dyn.start_time(), dyn.end_time(), options.nodes, dyn.inputs());
    const OperatorData data0 =
        build_operator_data(dyn, zero, spec.x0, spec.which, options.step);
    require_coercive(data0.eigen, options.rank_tol, "picard_synthesize(init)");
    return min_norm_control(data0, spec.y, options.rank_tol);
  }();

  bool fp_reached = false;
  for (int iter = 0; iter < options.max_iter; ++iter) {
    const ControlGrid next = synthesis_step(dyn, spec, u, options.step, options.rank_tol);
    const double delta = sup_norm_diff(next, u);
    result.iterate_deltas.push_back(delta);
    u = next;
    result.iterations = iter + 1;
    if (delta <= options.tol_fp) {
      fp_reached = true;
      break;
    }
  }

  result.control = u;
  const OperatorData data = build_operator_data(dyn, u, spec.x0, spec.which, options.step);
  result.gramian = gramian_report(data, options.rank_tol);
  result.endpoint = data.refined.back();
  result.endpoint_residual = norm2(vec_sub(result.endpoint, spec.x1));
  result.energy = control_energy(u);

  require_coercive(data.eigen, options.rank_tol, "picard_synthesize(final)");
  const Vec c = sym_solve(data.eigen, spec.y);
  const double quadratic = dot(spec.y, c);
  result.energy_quadrature = 0.0;
  for (int p = 0; p < data.quad.samples(); ++p) {
    double row = 0.0;
    for (int ch = 0; ch < data.k; ++ch) {
      double s = 0.0;
      for (int i = 0; i < data.d; ++i) {
        double jy = 0.0;
        for (int l = 0; l < data.d; ++l) jy += data.jac[p](l, i) * c[l];
        s += data.input[p](i, ch) * jy;
      }
      row += s * s;
    }
    result.energy_quadrature += data.quad.weights[p] * row;
  }
  result.energy_identity_residual = std::abs(result.energy_quadrature - quadratic);
  result.energy_identity_relative =
      result.energy_identity_residual / std::max(result.energy_quadrature, 1e-300);

  const double lmin = data.eigen.values.front();
  const double coercivity = (1.0 + options.theta) / lmin;
  const double zeta = coercivity * dyn.bounds().b_sup *
                      std::exp(dyn.bounds().lambda1 * dyn.delta_t()) * norm2(spec.y);
  result.contraction =
      contraction_constant(dyn.bounds(), dyn.delta_t(), coercivity, norm2(spec.y), zeta);

  result.converged = fp_reached && result.endpoint_residual <= options.tol_endpoint;
  return result;
}

Vec endpoint(const Dynamics& dyn, const ControlGrid& u, const Vec& x0, double step) {
  return integrate_controlled(dyn, u, x0, step).back();
}

AlignmentReport alignment_check(const Dynamics& dyn, const TargetSpec& spec,
                                const SynthesisResult& result, const AlignmentOptions& options) {
  if (!result.converged)
    fail(ErrorKind::NotConverged, "alignment check needs a converged synthesis");

  const ControlGrid& u = result.control;
  const int m = u.nodes();
  const int k = u.inputs();
  const int d = dyn.dimension();
  const int n = m * k;

  const double fd_step =
      options.fd_step > 0.0 ? options.fd_step : 1e-5 * (1.0 + u.sup_norm());
  const double tol = options.tol > 0.0 ? options.tol : 1e-5 * (1.0 + norm2(spec.y));

  const OperatorData data = build_operator_data(dyn, u, spec.x0, spec.which, options.step);
  require_coercive(data.eigen, options.rank_tol, "alignment_check");

  // Discretized L as a d x (k M) matrix acting on node values: column (j,c)
  // applies L to the hat function of node j in channel c.
  Mat lmat(d, n);
  for (int p = 0; p < data.quad.samples(); ++p) {
    const double w = data.quad.weights[p];
    const Mat& jp = data.jac[p];
    const Mat& bp = data.input[p];
    Mat kp(d, k);
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < k; ++c) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) s += jp(i, l) * bp(l, c);
        kp(i, c) = s;
      }
    if (data.quad.is_node(p)) {
      const int node = data.quad.node_index(p);
      for (int i = 0; i < d; ++i)
        for (int c = 0; c < k; ++c) lmat(i, node * k + c) += w * kp(i, c);
    } else {
      const int left = (p - 1) / 2;
      for (int i = 0; i < d; ++i)
        for (int c = 0; c < k; ++c) {
          lmat(i, left * k + c) += 0.5 * w * kp(i, c);
          lmat(i, (left + 1) * k + c) += 0.5 * w * kp(i, c);
        }
    }
  }

  // Node-space inner product: trapezoid weights omega_j. The kernel basis is
  // computed for L scaled by omega^{-1/2} so the returned directions are
  // orthonormal in the weighted inner product.
  const double dt = u.cell_width();
  Vec omega(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < m; ++j) {
    const double wj = (j == 0 || j == m - 1) ? 0.5 * dt : dt;
    for (int c = 0; c < k; ++c) omega[static_cast<std::size_t>(j) * k + c] = wj;
  }
  Mat lmat_scaled(d, n);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < n; ++j) lmat_scaled(i, j) = lmat(i, j) / std::sqrt(omega[j]);
  const Mat kernel_scaled = kernel_basis(lmat_scaled, options.rank_tol);
  const int kdim = kernel_scaled.cols();

  const Vec base_endpoint = endpoint(dyn, u, spec.x0, options.step);
  const Mat pull = spec.which == 1
                       ? flow_jacobian(dyn, dyn.end_time(), dyn.start_time(), base_endpoint,
                                       options.step)
                       : Mat();

  // K h = DG[h] - L h with DG from central differences of the endpoint map
  // (the anchor-t0 variant pulls the endpoint derivative back through the
  // flow).
  auto defect = [&](const ControlGrid& h) {
    ControlGrid up = grid_lincomb(1.0, u, fd_step, h);
    ControlGrid um = grid_lincomb(1.0, u, -fd_step, h);
    const Vec ep = endpoint(dyn, up, spec.x0, options.step);
    const Vec em = endpoint(dyn, um, spec.x0, options.step);
    Vec dg(d, 0.0);
    for (int i = 0; i < d; ++i) dg[i] = (ep[i] - em[i]) / (2.0 * fd_step);
    if (spec.which == 1) dg = mat_vec(pull, dg);
    Vec hflat(h.values().begin(), h.values().end());
    const Vec lh = mat_vec(lmat, hflat);
    return vec_sub(dg, lh);
  };

  AlignmentReport rep;
  rep.kernel_dimension = kdim;
  rep.tolerance = tol;

  // A = K o R with R e = L* N^{-1} e; assembled column by column.
  Mat amat(d, d);
  for (int col = 0; col < d; ++col) {
    Vec e(d, 0.0);
    e[col] = 1.0;
    const Vec c = sym_solve(data.eigen, e);
    const ControlGrid g = apply_L_adjoint(data, c);
    const Vec kg = defect(g);
    for (int i = 0; i < d; ++i) amat(i, col) = kg[i];
  }
  Mat id_plus_a = Mat::identity(d) + amat;
  const Vec ny = sym_solve(data.eigen, spec.y);

  for (int j = 0; j < kdim; ++j) {
    ControlGrid h(u.t0(), u.T(), m, k);
    for (int idx = 0; idx < n; ++idx)
      h.values()[idx] = kernel_scaled(idx, j) / std::sqrt(omega[idx]);
    const Vec kh = defect(h);
    rep.k_norm_on_kernel = std::max(rep.k_norm_on_kernel, norm2(kh));
    const Vec z = lu_solve(id_plus_a, kh);
    rep.orthogonality_residual = std::max(rep.orthogonality_residual, std::abs(dot(ny, z)));
  }

  rep.pass = rep.k_norm_on_kernel <= tol && rep.orthogonality_residual <= tol;
  return rep;
}

}  // namespace gramsyn
