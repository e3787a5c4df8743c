#include "gramsyn/model.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "gramsyn/errors.hpp"
#include "gramsyn/rng.hpp"

namespace gramsyn {

using expr::Expr;

namespace {

std::string format_coeff(double c) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", c);
  return buf;
}

// "-d_i*xi + sum_j w_ij*tanh(xj)" with unit coefficients written plainly and
// zero couplings dropped.
std::string hopfield_drift_row(const HopfieldParams& p, int i, int d) {
  std::ostringstream os;
  const double di = p.decay[i];
  if (di == 1.0)
    os << "-x" << (i + 1);
  else
    os << "-" << format_coeff(di) << "*x" << (i + 1);
  for (int j = 0; j < d; ++j) {
    const double w = p.connectivity(i, j);
    if (w == 0.0) continue;
    if (w == 1.0)
      os << " + tanh(x" << (j + 1) << ")";
    else if (w == -1.0)
      os << " - tanh(x" << (j + 1) << ")";
    else if (w > 0.0)
      os << " + " << format_coeff(w) << "*tanh(x" << (j + 1) << ")";
    else
      os << " - " << format_coeff(-w) << "*tanh(x" << (j + 1) << ")";
  }
  return os.str();
}

std::vector<Expr> parse_resolved(const std::vector<std::string>& texts, int dimension,
                                 const std::map<std::string, double>& params,
                                 const char* what) {
  std::vector<Expr> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    Expr e = Expr::parse(text, dimension).resolve(params);
    for (const std::string& name : e.parameter_names())
      fail(ErrorKind::UnknownIdentifier,
           std::string(what) + ": parameter '" + name + "' has no value");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

Vec SystemModel::drift(double t, const Vec& x) const { return expr::eval_field(drift_, t, x); }

Mat SystemModel::drift_jacobian(double t, const Vec& x) const {
  return expr::jacobian(drift_, t, x);
}

Vec SystemModel::drift_second(double t, const Vec& x, const Vec& h, const Vec& w) const {
  return expr::second_directional(drift_, t, x, h, w);
}

Mat SystemModel::input(double t, const Vec& x) const {
  const Vec flat = expr::eval_field(input_, t, x);
  Mat b(d_, k_);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < k_; ++j) b(i, j) = flat[static_cast<std::size_t>(i) * k_ + j];
  return b;
}

Mat SystemModel::input_state_jacobian(double t, const Vec& x, const Vec& u) const {
  Mat m(d_, d_);
  if (bounds_.l_b == 0.0) return m;
  // Column l of the result is (dB/dx_l) * u.
  Vec seed(x.size(), 0.0);
  for (int l = 0; l < d_; ++l) {
    seed[l] = 1.0;
    for (int i = 0; i < d_; ++i) {
      double s = 0.0;
      for (int j = 0; j < k_; ++j)
        s += input_[static_cast<std::size_t>(i) * k_ + j].eval_dual(t, x, seed).first * u[j];
      m(i, l) = s;
    }
    seed[l] = 0.0;
  }
  return m;
}

Mat SystemModel::modulation(double t, const Vec& x) const {
  if (!is_general()) fail(ErrorKind::NotGeneralModel, "model has no drift modulation");
  const Vec flat = expr::eval_field(modulation_, t, x);
  Mat a(d_, d_);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) a(i, j) = flat[static_cast<std::size_t>(i) * d_ + j];
  return a;
}

SystemModel build_model(const ModelConfig& config) {
  if (config.dimension < 1) fail(ErrorKind::Schema, "dimension must be >= 1");
  if (config.inputs < 1) fail(ErrorKind::Schema, "inputs must be >= 1");
  if (!(config.T > config.t0)) fail(ErrorKind::Schema, "horizon requires T > t0");

  SystemModel m;
  m.d_ = config.dimension;
  m.k_ = config.inputs;
  m.t0_ = config.t0;
  m.T_ = config.T;

  std::vector<std::string> drift_texts = config.drift;
  if (config.hopfield) {
    if (!drift_texts.empty())
      fail(ErrorKind::Schema, "give either a drift block or a hopfield block, not both");
    const HopfieldParams& p = *config.hopfield;
    if (static_cast<int>(p.decay.size()) != m.d_ || p.connectivity.rows() != m.d_ ||
        p.connectivity.cols() != m.d_)
      fail(ErrorKind::InconsistentDimensions, "hopfield D/W sizes must match dimension");
    for (double di : p.decay)
      if (!(di > 0.0)) fail(ErrorKind::Schema, "hopfield decay entries must be positive");
    for (int i = 0; i < m.d_; ++i) drift_texts.push_back(hopfield_drift_row(p, i, m.d_));
    m.hopfield_ = p;
  }

  if (static_cast<int>(drift_texts.size()) != m.d_)
    fail(ErrorKind::InconsistentDimensions, "drift must have exactly dimension entries");
  m.drift_ = parse_resolved(drift_texts, m.d_, config.params, "drift");

  if (static_cast<int>(config.input_matrix.size()) != m.d_)
    fail(ErrorKind::InconsistentDimensions, "input_matrix must have dimension rows");
  std::vector<std::string> input_texts;
  for (const auto& row : config.input_matrix) {
    if (static_cast<int>(row.size()) != m.k_)
      fail(ErrorKind::InconsistentDimensions, "input_matrix rows must have inputs columns");
    for (const auto& s : row) input_texts.push_back(s);
  }
  m.input_ = parse_resolved(input_texts, m.d_, config.params, "input_matrix");

  if (!config.modulation.empty()) {
    if (static_cast<int>(config.modulation.size()) != m.d_)
      fail(ErrorKind::InconsistentDimensions, "modulation must be dimension x dimension");
    std::vector<std::string> mod_texts;
    for (const auto& row : config.modulation) {
      if (static_cast<int>(row.size()) != m.d_)
        fail(ErrorKind::InconsistentDimensions, "modulation must be dimension x dimension");
      for (const auto& s : row) mod_texts.push_back(s);
    }
    m.modulation_ = parse_resolved(mod_texts, m.d_, config.params, "modulation");
  }

  ModelBounds b;
  if (config.lambda1) {
    b.lambda1 = *config.lambda1;
  } else if (m.hopfield_) {
    b.lambda1 = hopfield_rates(*m.hopfield_).gamma1;
  } else {
    fail(ErrorKind::Schema, "bounds.lambda1 is required");
  }
  if (config.lambda2) {
    b.lambda2 = *config.lambda2;
  } else if (m.hopfield_) {
    b.lambda2 = hopfield_rates(*m.hopfield_).gamma2;
  } else {
    fail(ErrorKind::Schema, "bounds.lambda2 is required");
  }
  if (b.lambda1 < 0.0 || b.lambda2 < 0.0) fail(ErrorKind::Schema, "bounds must be nonnegative");

  bool state_dependent_input = false;
  for (const Expr& e : m.input_) state_dependent_input = state_dependent_input || e.uses_state();
  if (config.l_b) {
    b.l_b = *config.l_b;
    if (b.l_b < 0.0) fail(ErrorKind::Schema, "bounds.l_b must be nonnegative");
  } else if (state_dependent_input) {
    fail(ErrorKind::Schema, "bounds.l_b is required for a state-dependent input matrix");
  }
  if (!config.b_sup || !(*config.b_sup > 0.0))
    fail(ErrorKind::Schema, "bounds.b_sup must be declared positive");
  b.b_sup = *config.b_sup;

  if (!config.modulation.empty()) {
    if (!config.a_sup || !(*config.a_sup > 0.0))
      fail(ErrorKind::Schema, "bounds.a_sup is required for drift-modulated models");
    b.a_sup = *config.a_sup;
  }
  if (config.b_lower) {
    // Profile of t only; parsing at dimension 0 rejects state variables.
    b.b_lower =
        Expr::parse(*config.b_lower, 0).resolve(config.params);
    for (const std::string& name : b.b_lower->parameter_names())
      fail(ErrorKind::UnknownIdentifier, "b_lower: parameter '" + name + "' has no value");
  }
  m.bounds_ = b;
  return m;
}

namespace {

class GeneralDynamics final : public Dynamics {
 public:
  explicit GeneralDynamics(const SystemModel& model) : model_(model) {
    if (!model.is_general())
      fail(ErrorKind::NotGeneralModel, "general dynamics need a modulation block");
    bounds_ = model.bounds();
    bounds_.lambda1 = model.bounds().lambda1 * *model.bounds().a_sup;
    bounds_.lambda2 = model.bounds().lambda2 * *model.bounds().a_sup;
  }

  int dimension() const override { return model_.dimension(); }
  int inputs() const override { return model_.inputs(); }
  double start_time() const override { return model_.start_time(); }
  double end_time() const override { return model_.end_time(); }
  const ModelBounds& bounds() const override { return bounds_; }

  Vec drift(double t, const Vec& x) const override {
    const Mat a = model_.modulation(t, x);
    return mat_vec(a, model_.drift(t, x));
  }

  // D(A N)[y] = (D_x A [y]) N + A DN y, assembled from per-entry jets.
  Mat drift_jacobian(double t, const Vec& x) const override {
    const int d = model_.dimension();
    Mat j(d, d);
    Vec seed(x.size(), 0.0);
    const auto& a_exprs = model_.modulation_exprs();
    const auto& n_exprs = model_.drift_exprs();
    for (int col = 0; col < d; ++col) {
      seed[col] = 1.0;
      std::vector<expr::DualValue> n(d);
      for (int i = 0; i < d; ++i) n[i] = n_exprs[i].eval_dual(t, x, seed);
      for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) {
          const expr::DualValue a =
              a_exprs[static_cast<std::size_t>(i) * d + l].eval_dual(t, x, seed);
          s += a.first * n[l].value + a.value * n[l].first;
        }
        j(i, col) = s;
      }
      seed[col] = 0.0;
    }
    return j;
  }

  Vec drift_second(double t, const Vec& x, const Vec& h, const Vec& w) const override {
    // Polarization of the jet second derivative of the product A N.
    Vec plus(x.size()), minus(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      plus[i] = h[i] + w[i];
      minus[i] = h[i] - w[i];
    }
    const Vec a = second_along(t, x, plus);
    const Vec b = second_along(t, x, minus);
    Vec out(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 0.25 * (a[i] - b[i]);
    return out;
  }

  Mat input(double t, const Vec& x) const override { return model_.input(t, x); }
  Mat input_state_jacobian(double t, const Vec& x, const Vec& u) const override {
    return model_.input_state_jacobian(t, x, u);
  }

 private:
  Vec second_along(double t, const Vec& x, const Vec& dir) const {
    const int d = model_.dimension();
    const auto& a_exprs = model_.modulation_exprs();
    const auto& n_exprs = model_.drift_exprs();
    std::vector<expr::DualValue> n(d);
    for (int i = 0; i < d; ++i) n[i] = n_exprs[i].eval_dual(t, x, dir);
    Vec out(d, 0.0);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int l = 0; l < d; ++l) {
        const expr::DualValue a =
            a_exprs[static_cast<std::size_t>(i) * d + l].eval_dual(t, x, dir);
        s += a.second * n[l].value + 2.0 * a.first * n[l].first + a.value * n[l].second;
      }
      out[i] = s;
    }
    return out;
  }

  const SystemModel& model_;
  ModelBounds bounds_;
};

}  // namespace

std::unique_ptr<Dynamics> general_dynamics(const SystemModel& model) {
  return std::make_unique<GeneralDynamics>(model);
}

BoundReport validate_bounds(const SystemModel& model, int samples, const Vec& box_lo,
                            const Vec& box_hi, std::uint64_t seed) {
  if (samples < 1) fail(ErrorKind::Schema, "validate_bounds needs samples >= 1");
  const int d = model.dimension();
  Rng rng(seed);
  BoundReport report;
  report.ok = true;

  const ModelBounds& b = model.bounds();
  auto random_unit = [&](Vec& y) {
    double n = 0.0;
    for (int i = 0; i < d; ++i) {
      y[i] = rng.normal();
      n += y[i] * y[i];
    }
    n = std::sqrt(n);
    if (n == 0.0) {
      y[0] = 1.0;
      return;
    }
    for (int i = 0; i < d; ++i) y[i] /= n;
  };

  for (int s = 0; s < samples; ++s) {
    const double t = rng.uniform(model.start_time(), model.end_time());
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(box_lo[i], box_hi[i]);

    const double dn = spectral_norm(model.drift_jacobian(t, x));
    if (dn > report.max_dn) {
      report.max_dn = dn;
      report.worst_dn = {t, x, dn};
    }

    // Second derivative observed through its contraction with unit
    // directions: axis directions plus one random draw.
    auto probe_second = [&](const Vec& h) {
      Mat d2(d, d);
      for (int col = 0; col < d; ++col) {
        Vec e(d, 0.0);
        e[col] = 1.0;
        const Vec v = model.drift_second(t, x, h, e);
        for (int i = 0; i < d; ++i) d2(i, col) = v[i];
      }
      const double d2n = spectral_norm(d2);
      if (d2n > report.max_d2n) {
        report.max_d2n = d2n;
        report.worst_d2n = {t, x, d2n};
      }
    };
    for (int l = 0; l < d; ++l) {
      Vec h(d, 0.0);
      h[l] = 1.0;
      probe_second(h);
    }
    Vec h(d);
    random_unit(h);
    probe_second(h);

    // ||D_x B|| observed through the d x k slice y -> dB/dy.
    auto probe_input = [&](const Vec& y) {
      Mat dby(d, model.inputs());
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < model.inputs(); ++j) {
          const auto& e = model.input_exprs()[static_cast<std::size_t>(i) * model.inputs() + j];
          dby(i, j) = e.eval_dual(t, x, y).first;
        }
      const double n = spectral_norm(dby);
      if (n > report.max_dxb) {
        report.max_dxb = n;
        report.worst_dxb = {t, x, n};
      }
    };
    for (int l = 0; l < d; ++l) {
      Vec y(d, 0.0);
      y[l] = 1.0;
      probe_input(y);
    }
    Vec y(d);
    random_unit(y);
    probe_input(y);
  }

  const double slack = 1.0 + 1e-9;
  report.ok = report.max_dn <= b.lambda1 * slack && report.max_d2n <= b.lambda2 * slack &&
              report.max_dxb <= b.l_b * slack;
  return report;
}

HopfieldRates hopfield_rates(const HopfieldParams& params) {
  double dmin = params.decay[0];
  double dmax = params.decay[0];
  for (double v : params.decay) {
    dmin = std::min(dmin, v);
    dmax = std::max(dmax, v);
  }
  const double wnorm = spectral_norm(params.connectivity);
  // max |tanh''| = max |2u(1-u^2)| over u in (-1,1), attained at u = 1/sqrt(3).
  const double max_tanh_second = 4.0 / (3.0 * std::sqrt(3.0));
  HopfieldRates r;
  r.sigma_rate = wnorm;
  r.gamma = -dmin + wnorm;
  r.gamma1 = dmax + wnorm;
  r.gamma2 = wnorm * max_tanh_second;
  return r;
}

}  // namespace gramsyn
