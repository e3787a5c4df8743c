#include "gramsyn/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gramsyn/errors.hpp"
#include "gramsyn/rng.hpp"

namespace gramsyn {

namespace {

constexpr double kRankTol = 1e-12;

double em1x(double z) {
  if (z == 0.0) return 1.0;
  return std::expm1(z) / z;
}

// (e^{a dt} - e^{b dt}) / (a - b), continuous across a == b.
double expdiff(double a, double b, double dt) {
  return std::exp(b * dt) * dt * em1x((a - b) * dt);
}

double resolve_lipschitz(const Dynamics& dyn, double zeta, int which) {
  if (const HopfieldParams* hp = dyn.hopfield(); hp != nullptr && dyn.bounds().l_b == 0.0)
    return hopfield_lipschitz(hopfield_rates(*hp), dyn.bounds().b_sup, dyn.delta_t(), which);
  return generic_lipschitz(dyn.bounds(), dyn.delta_t(), zeta, which);
}

bool lipschitz_is_refined(const Dynamics& dyn) {
  return dyn.hopfield() != nullptr && dyn.bounds().l_b == 0.0;
}

// theta-weighted radius: lam/((1+theta) b e^{L1 dt}) (theta lam/((1+theta)L) - u_sup).
double radius_formula(double lambda_min, double theta, double b_sup, double lambda1, double dt0,
                      double lipschitz, double u_sup, std::string* note) {
  const double margin_cap = theta * lambda_min / (1.0 + theta);
  const double front = lambda_min / ((1.0 + theta) * b_sup * std::exp(lambda1 * dt0));
  if (lipschitz == 0.0) return std::numeric_limits<double>::infinity();
  const double margin = margin_cap / lipschitz - u_sup;
  if (margin <= 0.0) {
    if (note)
      *note = "reference amplitude violates ||u_ref|| < theta lambda_min / ((1+theta) L)";
    return 0.0;
  }
  return front * margin;
}

}  // namespace

double generic_lipschitz(const ModelBounds& bounds, double dt0, double zeta, int which) {
  const double l1 = bounds.lambda1;
  const double l2 = bounds.lambda2;
  const double lb = bounds.l_b;
  const double bs = bounds.b_sup;
  if (which != 1 && which != 2) fail(ErrorKind::Schema, "anchor index must be 1 or 2");
  if (l2 == 0.0 && lb == 0.0) return 0.0;

  if (lb == 0.0) {
    // State-independent input matrix: the constants lose the zeta dependence.
    const double cube = dt0 * em1x(l1 * dt0);
    if (which == 2) return l2 * bs * bs * bs / 3.0 * cube * cube * cube;
    return l2 * bs * bs * bs / 6.0 * (3.0 * std::exp(l1 * dt0) + 1.0) * cube * cube * cube;
  }

  if (l1 == 0.0)
    fail(ErrorKind::UndefinedBound,
         "Lipschitz constant undefined at lambda1 = 0 with a state-dependent input matrix");

  if (zeta < 0.0) fail(ErrorKind::Schema, "zeta must be nonnegative");
  const double b = lb * zeta;
  const double e1 = std::exp(l1 * dt0);
  if (which == 2) {
    const double term_lb =
        lb * bs * bs * e1 / l1 * (expdiff(l1, b, dt0) - expdiff(b, -l1, dt0));
    const double term_l2 = 2.0 * bs * bs * bs * l2 * e1 / (l1 * (l1 + b)) *
                           (expdiff(2.0 * l1, b, dt0) - expdiff(l1, b, dt0) +
                            expdiff(l1, -l1, dt0) - expdiff(2.0 * l1, -l1, dt0));
    return term_lb + term_l2;
  }
  const double term_lb = lb * bs * bs * e1 / l1 *
                         (expdiff(2.0 * l1 + b, l1, dt0) + expdiff(2.0 * l1 + b, -l1, dt0));
  const double term_l2 = 2.0 * bs * bs * bs * l2 * e1 / (l1 * (l1 + b)) *
                         (expdiff(3.0 * l1 + b, -l1, dt0) - expdiff(2.0 * l1 + b, -l1, dt0) +
                          expdiff(l1, -l1, dt0) - expdiff(2.0 * l1, -l1, dt0));
  return term_lb + term_l2;
}

double hopfield_lipschitz(const HopfieldRates& rates, double b_sup, double dt0, int which) {
  if (which != 1 && which != 2) fail(ErrorKind::Schema, "anchor index must be 1 or 2");
  const double bs3 = b_sup * b_sup * b_sup;
  if (which == 2) {
    // The Gamma = 0 expression is exactly the limit of the Gamma != 0 one.
    const double cube = dt0 * em1x(rates.gamma * dt0);
    return rates.gamma2 * bs3 / 3.0 * cube * cube * cube;
  }
  const double cube = dt0 * em1x(rates.gamma1 * dt0);
  return rates.gamma2 * bs3 / 6.0 * (3.0 * std::exp(rates.gamma1 * dt0) + 1.0) * cube * cube *
         cube;
}

CoercivityResult uniform_coercivity(const SystemModel& model, int probes, const Vec& box_lo,
                                    const Vec& box_hi, std::uint64_t seed) {
  CoercivityResult result;
  if (!model.bounds().b_lower) return result;
  if (model.dimension() != model.inputs()) return result;

  const double t0 = model.start_time();
  const double tend = model.end_time();
  const expr::Expr& profile = *model.bounds().b_lower;
  const Vec no_state;

  // ||b||_1 by composite Simpson on a fixed fine grid.
  const int cells = 4096;
  const double h = (tend - t0) / cells;
  double l1 = 0.0;
  auto b_at = [&](double t) {
    const double v = profile.eval(t, no_state);
    if (!(v >= 0.0)) fail(ErrorKind::Domain, "lower profile b(t) must be nonnegative");
    return v;
  };
  for (int i = 0; i < cells; ++i) {
    const double a = t0 + i * h;
    l1 += h / 6.0 * (b_at(a) + 4.0 * b_at(a + 0.5 * h) + b_at(a + h));
  }
  result.b_l1 = l1;

  const int d = model.dimension();
  Rng rng(seed);
  for (int s = 0; s < probes; ++s) {
    const double t = rng.uniform(t0, tend);
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(box_lo[i], box_hi[i]);
    const Mat b = model.input(t, x);
    const double required = b_at(t);
    auto check = [&](const Vec& y) {
      const Vec bty = tmat_vec(b, y);
      const double observed = norm2(bty);
      if (observed < required * (1.0 - 1e-12)) {
        result.failing = CoercivityProbe{t, x, y, observed, required};
        return false;
      }
      return true;
    };
    for (int l = 0; l < d; ++l) {
      Vec y(d, 0.0);
      y[l] = 1.0;
      if (!check(y)) return result;
    }
    Vec y(d);
    double n = 0.0;
    for (int i = 0; i < d; ++i) {
      y[i] = rng.normal();
      n += y[i] * y[i];
    }
    if (n > 0.0) {
      n = std::sqrt(n);
      for (int i = 0; i < d; ++i) y[i] /= n;
      if (!check(y)) return result;
    }
  }

  const double dt0 = tend - t0;
  if (l1 <= 0.0) return result;
  result.c = dt0 * std::exp(2.0 * model.bounds().lambda1 * dt0) / (l1 * l1);
  return result;
}

namespace {

Certificate build_certificate(const Dynamics& dyn, const ControlGrid& u_ref, const Vec& x0,
                              int which, double theta, double step, const Vec* y,
                              bool zero_reference) {
  if (!(theta > 0.0 && theta < 1.0)) fail(ErrorKind::Schema, "theta must lie in (0, 1)");

  Certificate cert;
  cert.which = which;
  cert.theta = theta;
  cert.reference = u_ref;
  cert.reference_sup = u_ref.sup_norm();
  cert.lambda1 = dyn.bounds().lambda1;
  cert.lambda2 = dyn.bounds().lambda2;
  cert.l_b = dyn.bounds().l_b;
  cert.b_sup = dyn.bounds().b_sup;
  cert.dt0 = dyn.delta_t();
  cert.lipschitz_kind = lipschitz_is_refined(dyn) ? "hopfield" : "generic";

  const OperatorData data = build_operator_data(dyn, u_ref, x0, which, step);
  const double lmin = data.eigen.values.front();
  const double lmax = data.eigen.values.back();
  if (!(lmin > kRankTol * lmax) || !(lmin > 0.0))
    fail(ErrorKind::SingularGramian,
         "reference Gramian is singular (lambda_min " + std::to_string(lmin) + ")");
  cert.lambda_min_ref = lmin;
  cert.coercivity_c = (1.0 + theta) / lmin;

  const double amp = cert.coercivity_c * cert.b_sup * std::exp(cert.lambda1 * cert.dt0);

  if (y != nullptr) {
    const double ynorm = norm2(*y);
    cert.target_norm = ynorm;
    cert.zeta = amp * ynorm;
    cert.lipschitz = resolve_lipschitz(dyn, cert.zeta, which);
    cert.radius = radius_formula(lmin, theta, cert.b_sup, cert.lambda1, cert.dt0, cert.lipschitz,
                                 cert.reference_sup, &cert.note);
    cert.admissible = ynorm <= cert.radius;
    if (zero_reference) cert.energy_bound = (1.0 + theta) * ynorm * ynorm / lmin;
    return cert;
  }

  // Target-free radius.
  const bool zeta_free = lipschitz_is_refined(dyn) || dyn.bounds().l_b == 0.0;
  if (zeta_free) {
    cert.lipschitz = resolve_lipschitz(dyn, 0.0, which);
    cert.radius = radius_formula(lmin, theta, cert.b_sup, cert.lambda1, cert.dt0, cert.lipschitz,
                                 cert.reference_sup, &cert.note);
    cert.zeta = std::isfinite(cert.radius) ? amp * cert.radius : 0.0;
    return cert;
  }

  // The constant grows with zeta = amp * r, so r -> radius(zeta(r)) is
  // decreasing; bisect its fixed point.
  auto radius_at = [&](double r) {
    const double lip = resolve_lipschitz(dyn, amp * r, which);
    return radius_formula(lmin, theta, cert.b_sup, cert.lambda1, cert.dt0, lip,
                          cert.reference_sup, nullptr);
  };
  const double r0 = radius_at(0.0);
  if (r0 == 0.0) {
    cert.lipschitz = resolve_lipschitz(dyn, 0.0, which);
    cert.radius = 0.0;
    radius_formula(lmin, theta, cert.b_sup, cert.lambda1, cert.dt0, cert.lipschitz,
                   cert.reference_sup, &cert.note);
    return cert;
  }
  if (radius_at(r0) - r0 > 0.0) {
    // Cannot happen for a constant nondecreasing in zeta; report rather than
    // guess.
    cert.self_consistent = false;
    cert.note = "no self-consistent radius bracket";
    cert.radius = 0.0;
    cert.lipschitz = resolve_lipschitz(dyn, 0.0, which);
    return cert;
  }
  double lo = 0.0, hi = r0;
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (radius_at(mid) - mid >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  cert.radius = lo;
  cert.zeta = amp * lo;
  cert.lipschitz = resolve_lipschitz(dyn, cert.zeta, which);
  return cert;
}

}  // namespace

Certificate admissible_radius(const Dynamics& dyn, const ControlGrid& u_ref, const Vec& x0,
                              int which, double theta, double step) {
  return build_certificate(dyn, u_ref, x0, which, theta, step, nullptr, false);
}

Certificate certify_target(const Dynamics& dyn, const ControlGrid& u_ref, const TargetSpec& spec,
                           double theta, double step, bool zero_reference) {
  return build_certificate(dyn, u_ref, spec.x0, spec.which, theta, step, &spec.y,
                           zero_reference);
}

Certificate zero_reference_certificate(const Dynamics& dyn, const Vec& x0, const Vec& x1,
                                       int which, double theta, int nodes, double step) {
  const TargetSpec spec = target_displacement(dyn, x0, x1, which, step);
  const ControlGrid zero =
      ControlGrid::zero(dyn.start_time(), dyn.end_time(), nodes, dyn.inputs());
  return certify_target(dyn, zero, spec, theta, step, true);
}

namespace {

struct NmPoint {
  Vec coeffs;
  double value = 0.0;  // minimized: -radius (or penalty)
};

}  // namespace

std::pair<ControlGrid, Certificate> optimize_reference(const Dynamics& dyn, const Vec& x0,
                                                       const ReferenceSearchSpec& search,
                                                       int which, double theta, double step) {
  if (search.basis.empty()) fail(ErrorKind::Schema, "reference search needs a basis");
  const int m = static_cast<int>(search.basis.size());
  const ControlGrid& proto = search.basis.front();
  for (const ControlGrid& phi : search.basis)
    if (!phi.same_grid(proto)) fail(ErrorKind::GridMismatch, "basis grids differ");

  // Linear independence on the grid: Gram matrix of the stacked node values.
  Mat gram(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      gram(i, j) = dot(search.basis[i].values(), search.basis[j].values());
  const SymmetricEigen geig = sym_eigen(gram);
  if (!(geig.values.front() > 1e-12 * std::max(geig.values.back(), 1e-300)))
    fail(ErrorKind::Schema, "basis functions are linearly dependent on the grid");

  // The zero reference must be workable at all, otherwise the admissible set
  // cannot be probed from the simplex.
  {
    const GramianReport w = zero_reference_gramian(dyn, x0, which, proto.nodes(), step);
    if (!w.coercive_for)
      fail(ErrorKind::EmptyAdmissibleSet,
           "zero-reference Gramian is singular; admissible set is empty");
  }

  auto assemble = [&](const Vec& coeffs) {
    ControlGrid u = ControlGrid::zero(proto.t0(), proto.T(), proto.nodes(), proto.inputs());
    for (int j = 0; j < m; ++j)
      for (std::size_t i = 0; i < u.values().size(); ++i)
        u.values()[i] += coeffs[j] * search.basis[j].values()[i];
    return u;
  };

  double best_radius = -1.0;
  Vec best_coeffs(m, 0.0);

  int evals = 0;
  auto objective = [&](const Vec& coeffs) -> double {
    ++evals;
    const ControlGrid u = assemble(coeffs);
    Certificate cert;
    try {
      cert = admissible_radius(dyn, u, x0, which, theta, step);
    } catch (const Error&) {
      return 1e15;  // singular reference Gramian: hard penalty
    }
    const double margin = theta * cert.lambda_min_ref / (1.0 + theta) -
                          (cert.lipschitz == 0.0
                               ? -1.0  // g(u) >= 0 trivially when L = 0
                               : cert.lipschitz * cert.reference_sup);
    if (margin < 0.0) return 1e9 * (1.0 - margin);
    if (cert.radius > best_radius) {
      best_radius = cert.radius;
      best_coeffs = coeffs;
    }
    return -cert.radius;
  };

  // Deterministic simplex around the zero control, scaled by the coefficient
  // box; the seed only jitters the initial spread.
  Rng rng(search.seed);
  std::vector<NmPoint> simplex(m + 1);
  simplex[0].coeffs.assign(m, 0.0);
  simplex[0].value = objective(simplex[0].coeffs);
  for (int j = 1; j <= m; ++j) {
    simplex[j].coeffs.assign(m, 0.0);
    simplex[j].coeffs[j - 1] = 0.25 * search.coeff_box * rng.uniform(0.9, 1.1);
    simplex[j].value = objective(simplex[j].coeffs);
  }

  auto order = [&] {
    std::stable_sort(simplex.begin(), simplex.end(),
                     [](const NmPoint& a, const NmPoint& b) { return a.value < b.value; });
  };
  order();

  while (evals < search.budget) {
    Vec centroid(m, 0.0);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) centroid[i] += simplex[j].coeffs[i] / m;

    auto affine = [&](double c) {
      Vec p(m);
      for (int i = 0; i < m; ++i)
        p[i] = centroid[i] + c * (centroid[i] - simplex[m].coeffs[i]);
      return p;
    };

    NmPoint reflected{affine(1.0), 0.0};
    reflected.value = objective(reflected.coeffs);
    if (reflected.value < simplex[0].value) {
      NmPoint expanded{affine(2.0), 0.0};
      expanded.value = objective(expanded.coeffs);
      simplex[m] = expanded.value < reflected.value ? expanded : reflected;
    } else if (reflected.value < simplex[m - 1].value) {
      simplex[m] = reflected;
    } else {
      NmPoint contracted{affine(-0.5), 0.0};
      contracted.value = objective(contracted.coeffs);
      if (contracted.value < simplex[m].value) {
        simplex[m] = contracted;
      } else {
        for (int j = 1; j <= m; ++j) {
          for (int i = 0; i < m; ++i)
            simplex[j].coeffs[i] =
                simplex[0].coeffs[i] + 0.5 * (simplex[j].coeffs[i] - simplex[0].coeffs[i]);
          simplex[j].value = objective(simplex[j].coeffs);
          if (evals >= search.budget) break;
        }
      }
    }
    order();
  }

  const ControlGrid u_best = assemble(best_coeffs);
  Certificate cert = admissible_radius(dyn, u_best, x0, which, theta, step);
  return {u_best, cert};
}

}  // namespace gramsyn
