#pragma once

#include "safecl/geometry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <optional>
#include <vector>

namespace safecl {

// Below this inscribed radius the shifted safe set is numerically useless as
// a gauge-map target and callers must take the fallback path.
inline constexpr double kRadiusMin = 1e-6;

/// Extended class-Kinfty gain: strictly increasing with alpha(0) = 0.
struct AlphaFn {
  enum class Kind { Linear, Cubic };
  Kind kind = Kind::Linear;
  double kappa = 1.0;

  double operator()(double h) const {
    return kind == Kind::Linear ? kappa * h : kappa * h * h * h;
  }
  double derivative(double h) const {
    return kind == Kind::Linear ? kappa : 3.0 * kappa * h * h;
  }
  static AlphaFn linear(double kappa) { return {Kind::Linear, kappa}; }
  static AlphaFn cubic(double kappa) { return {Kind::Cubic, kappa}; }
};

/// Chebyshev center of a control polytope together with its inscribed radius.
struct InteriorPoint {
  Vec u;
  double radius = 0.0;
};

/// Control-affine system xdot = f(x) + g(x) u with barrier h and polytopic
/// input set U. Everything needed to assemble the pointwise safe control set.
struct CbfSystem {
  int state_dim = 0;
  int input_dim = 0;
  std::function<Vec(const Vec&)> drift;                     // f(x)
  std::function<Mat(const Vec&)> input_matrix;              // g(x), n x m
  std::function<double(const Vec&)> barrier;                // h(x)
  std::function<Vec(const Vec&)> barrier_grad;              // dh/dx
  // d/dx [f(x) + g(x) u], needed to differentiate through rollouts.
  std::function<Mat(const Vec&, const Vec&)> dynamics_jac_state;
  AlphaFn alpha;
  Polytope input_set;
  std::optional<Box> domain_hint;

  // Derived at construction (make_cbf_system): row norms of U, the U-only
  // Chebyshev center, and U's bounding box.
  Vec input_row_norms;
  InteriorPoint input_chebyshev;
  Box input_bbox;
};

/// Validates U (bounded, nonempty interior) and fills the derived fields.
CbfSystem make_cbf_system(CbfSystem sys);

struct LieDerivatives {
  double lf = 0.0;  // grad_h . f
  Vec lg;           // grad_h^T g, length m
};

LieDerivatives lie_derivatives(const CbfSystem& sys, const Vec& x);

/// K_cbf(x): the CBF row -Lg u <= Lf + alpha(h) stacked on U. A vanishing Lg
/// with nonnegative right-hand side makes the row vacuous (set = U); with a
/// negative right-hand side the set is empty and no row is stacked (the
/// polytope field then holds U and `feasible` carries the emptiness).
struct SafeControlSet {
  Polytope polytope;
  Vec cbf_normal;          // -Lg
  double cbf_offset = 0.0; // Lf + alpha(h)
  bool cbf_row_stacked = false;
  bool feasible = false;
  std::optional<Vec> witness;  // a feasible point from the phase-1 LP
};

SafeControlSet safe_control_set(const CbfSystem& sys, const Vec& x);

struct FilterResult {
  Vec u;
  bool fallback = false;  // least-violation path taken (K_cbf empty)
};

/// CBF-QP filter: Euclidean projection of u_ref onto K_cbf(x). When the set
/// is empty, applies the least-violation fallback and flags the step.
FilterResult safety_filter(const CbfSystem& sys, const Vec& x, const Vec& u_ref);

/// Fallback control for empty K_cbf(x): minimize the CBF-row violation over
/// U, then break ties by distance to u_ref (pass zeros for a plain
/// minimal-norm choice).
Vec least_violation_control(const CbfSystem& sys, const Vec& x, const Vec& u_ref);

/// Chebyshev center of K_cbf(x) with every row inflated by R times its
/// Euclidean row norm; the implicit interior safe policy. Returns nullopt
/// (DegenerateInterior) when the set is empty or its radius is <= kRadiusMin.
std::optional<InteriorPoint> interior_policy(const CbfSystem& sys, const Vec& x);

struct ShiftedSafeSet {
  Polytope polytope;     // K_cbf(x) - u_int, a C-set when radius > kRadiusMin
  InteriorPoint center;
};

std::optional<ShiftedSafeSet> shifted_safe_set(const CbfSystem& sys, const Vec& x);

struct FeasibilityReport {
  int samples = 0;
  int infeasible = 0;   // K_cbf(x) empty
  int degenerate = 0;   // nonempty but radius <= kRadiusMin
  double infeasible_fraction = 0.0;
  double degenerate_fraction = 0.0;

  nlohmann::json to_json() const;
};

FeasibilityReport feasibility_scan(const CbfSystem& sys, const std::vector<Vec>& states);

namespace detail {
// Rows of K_cbf(x) without the phase-1 LP; shared by the set, filter and
// interior-policy paths. Returns false when the vacuous-row case makes the
// set empty outright.
struct KcbfRows {
  Mat F;
  Vec g;
  Vec cbf_normal;
  double cbf_offset = 0.0;
  bool cbf_row_stacked = false;
  bool empty = false;
};
KcbfRows assemble_kcbf_rows(const CbfSystem& sys, const Vec& x);
}  // namespace detail

}  // namespace safecl
