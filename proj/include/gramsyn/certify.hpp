#pragma once

#include <optional>
#include <string>
#include <utility>

#include "gramsyn/gramian.hpp"
#include "gramsyn/synthesis.hpp"

namespace gramsyn {

// Closed-form Lipschitz constant of the Gramian map u -> N_i(u) on the ball
// ||u||_inf <= zeta, from the declared global bounds. When the input matrix is
// state-independent (L_B = 0) the simplified zeta-free constants apply; all
// removable singularities are evaluated by limit.
double generic_lipschitz(const ModelBounds& bounds, double dt0, double zeta, int which);

// Refined constants for Hopfield fields, using the network's own growth rates
// (the anchor-T constant carries the possibly negative rate Gamma).
double hopfield_lipschitz(const HopfieldRates& rates, double b_sup, double dt0, int which);

struct CoercivityProbe {
  double t = 0.0;
  Vec x, y;
  double observed = 0.0;
  double required = 0.0;
};

struct CoercivityResult {
  std::optional<double> c;  // C_i with lambda_min(N_i(u)) >= 1/C_i for all u
  double b_l1 = 0.0;        // integral of the declared lower profile
  std::optional<CoercivityProbe> failing;
};

// Fully actuated test: d = k and |B(t,x)^T y| >= b(t) |y| (checked on a
// randomized probe set) give the uniform constant C = dt e^{2 L1 dt}/||b||_1^2.
CoercivityResult uniform_coercivity(const SystemModel& model, int probes, const Vec& box_lo,
                                    const Vec& box_hi, std::uint64_t seed);

struct Certificate {
  int which = 2;
  double theta = 0.5;
  double lipschitz = 0.0;
  std::string lipschitz_kind;  // "generic" or "hopfield"
  double zeta = 0.0;           // control-amplitude ball backing the constant
  double lambda_min_ref = 0.0;
  double reference_sup = 0.0;
  double radius = 0.0;  // admissible |y|; may be +infinity
  bool self_consistent = true;
  std::optional<double> target_norm;
  bool admissible = false;
  std::optional<double> energy_bound;  // zero-reference certificates only
  std::string note;
  // Every constant that entered the radius, for auditability.
  double lambda1 = 0.0, lambda2 = 0.0, l_b = 0.0, b_sup = 0.0, dt0 = 0.0;
  double coercivity_c = 0.0;  // (1 + theta) / lambda_min_ref
  ControlGrid reference;
};

// Target-free admissible radius around a reference control. With a
// state-dependent input matrix the constant depends on the target through
// zeta, so the radius is the fixed point of r -> radius(zeta(r)), found by
// monotone bisection.
Certificate admissible_radius(const Dynamics& dyn, const ControlGrid& u_ref, const Vec& x0,
                              int which, double theta, double step);

// Certificate for a concrete displacement; zeta comes from the target itself.
Certificate certify_target(const Dynamics& dyn, const ControlGrid& u_ref, const TargetSpec& spec,
                           double theta, double step, bool zero_reference);

Certificate zero_reference_certificate(const Dynamics& dyn, const Vec& x0, const Vec& x1,
                                       int which, double theta, int nodes, double step);

struct ReferenceSearchSpec {
  std::vector<ControlGrid> basis;  // linearly independent on the grid
  double coeff_box = 1.0;          // half-width of the coefficient search box
  int budget = 500;                // objective evaluations
  std::uint64_t seed = 0;
};

// Derivative-free maximization of the admissible radius over the span of the
// basis; the zero control sits in the initial simplex so the result is never
// worse than the zero reference.
std::pair<ControlGrid, Certificate> optimize_reference(const Dynamics& dyn, const Vec& x0,
                                                       const ReferenceSearchSpec& search,
                                                       int which, double theta, double step);

}  // namespace gramsyn
