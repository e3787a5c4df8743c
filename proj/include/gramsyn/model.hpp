#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gramsyn/expr.hpp"
#include "gramsyn/linalg.hpp"

namespace gramsyn {

// Declared global bounds; certificates consume these as inputs. A sampled
// check can falsify them but never prove them (suprema over all of state
// space are not computable from samples).
struct ModelBounds {
  double lambda1 = 0.0;  // global bound on ||DN_t||
  double lambda2 = 0.0;  // global bound on ||D^2 N_t||
  double l_b = 0.0;      // global bound on ||D_x B||
  double b_sup = 0.0;    // ||B||_inf > 0
  std::optional<double> a_sup;       // ||A||_inf for drift-modulated models
  std::optional<expr::Expr> b_lower; // integrable profile b(t) >= 0, fully actuated test
};

struct HopfieldParams {
  Vec decay;        // diagonal of D, entries > 0
  Mat connectivity; // W
};

// Growth / curvature rates of the Hopfield field N(x) = -D x + W tanh(x).
struct HopfieldRates {
  double gamma;       // -lambda_min(D) + sigma_rate  (can be negative)
  double gamma1;      //  lambda_max(D) + sigma_rate
  double gamma2;      //  sup ||W D^2 sigma|| = ||W|| * max|tanh''|
  double sigma_rate;  //  sup ||W D sigma(x)|| = ||W||
};

// Evaluation interface shared by expression-backed models, the drift-modulated
// composition A(t,x) N_t(x), and trajectory-frozen coefficients. All methods
// are pure; implementations are immutable after construction and safe to use
// from several threads at once.
class Dynamics {
 public:
  virtual ~Dynamics() = default;

  virtual int dimension() const = 0;
  virtual int inputs() const = 0;
  virtual double start_time() const = 0;
  virtual double end_time() const = 0;
  double delta_t() const { return end_time() - start_time(); }

  virtual const ModelBounds& bounds() const = 0;
  virtual const HopfieldParams* hopfield() const { return nullptr; }

  virtual Vec drift(double t, const Vec& x) const = 0;
  virtual Mat drift_jacobian(double t, const Vec& x) const = 0;
  virtual Vec drift_second(double t, const Vec& x, const Vec& h, const Vec& w) const = 0;

  virtual Mat input(double t, const Vec& x) const = 0;  // d x k
  // The d x d matrix y -> D_x B(t,x)[u, y]; zero when B is state-independent.
  virtual Mat input_state_jacobian(double t, const Vec& x, const Vec& u) const = 0;
};

// Parsed, language-neutral model description (the JSON front end fills this).
struct ModelConfig {
  int dimension = 0;
  int inputs = 0;
  double t0 = 0.0;
  double T = 1.0;
  std::vector<std::string> drift;                      // d expressions
  std::vector<std::vector<std::string>> input_matrix;  // d rows x k cols
  std::vector<std::vector<std::string>> modulation;    // optional d x d
  std::map<std::string, double> params;
  std::optional<double> lambda1, lambda2, l_b, b_sup, a_sup;
  std::optional<std::string> b_lower;
  std::optional<HopfieldParams> hopfield;
};

class SystemModel : public Dynamics {
 public:
  int dimension() const override { return d_; }
  int inputs() const override { return k_; }
  double start_time() const override { return t0_; }
  double end_time() const override { return T_; }
  const ModelBounds& bounds() const override { return bounds_; }
  const HopfieldParams* hopfield() const override {
    return hopfield_ ? &*hopfield_ : nullptr;
  }

  // Baseline vector field N_t; for drift-modulated models this is the
  // unmodulated factor (see general_dynamics()).
  Vec drift(double t, const Vec& x) const override;
  Mat drift_jacobian(double t, const Vec& x) const override;
  Vec drift_second(double t, const Vec& x, const Vec& h, const Vec& w) const override;
  Mat input(double t, const Vec& x) const override;
  Mat input_state_jacobian(double t, const Vec& x, const Vec& u) const override;

  bool is_general() const { return !modulation_.empty(); }
  Mat modulation(double t, const Vec& x) const;  // A(t,x), general models only

  const std::vector<expr::Expr>& drift_exprs() const { return drift_; }
  const std::vector<expr::Expr>& input_exprs() const { return input_; }
  const std::vector<expr::Expr>& modulation_exprs() const { return modulation_; }

  friend SystemModel build_model(const ModelConfig& config);

 private:
  int d_ = 0;
  int k_ = 0;
  double t0_ = 0.0;
  double T_ = 1.0;
  std::vector<expr::Expr> drift_;       // d
  std::vector<expr::Expr> input_;       // d*k row-major
  std::vector<expr::Expr> modulation_;  // d*d row-major or empty
  ModelBounds bounds_;
  std::optional<HopfieldParams> hopfield_;
};

// Validates, parses and resolves a configuration into an immutable model.
// Hopfield blocks are expanded into explicit drift expressions and, when the
// bounds are not declared, lambda1/lambda2 default to the analytic rates.
SystemModel build_model(const ModelConfig& config);

// The full right-hand side A(t,x) N_t(x) of a drift-modulated model, exposed
// through the same evaluation interface (used to simulate the true system and
// to seed the freezing loop).
std::unique_ptr<Dynamics> general_dynamics(const SystemModel& model);

struct BoundSample {
  double t = 0.0;
  Vec x;
  double observed = 0.0;
};

struct BoundReport {
  double max_dn = 0.0;
  double max_d2n = 0.0;
  double max_dxb = 0.0;
  BoundSample worst_dn, worst_d2n, worst_dxb;
  bool ok = true;
};

// Draws (t, x) uniformly from [t0, T] x box and compares sampled operator
// norms against the declared bounds; verdict "violated" when any observed
// value exceeds declared * (1 + 1e-9).
BoundReport validate_bounds(const SystemModel& model, int samples, const Vec& box_lo,
                            const Vec& box_hi, std::uint64_t seed);

HopfieldRates hopfield_rates(const HopfieldParams& params);

}  // namespace gramsyn
