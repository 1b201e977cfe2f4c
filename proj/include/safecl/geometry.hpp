#pragma once

#include "safecl/common.hpp"

#include <nlohmann/json_fwd.hpp>

namespace safecl {

inline constexpr double kMembershipTol = 1e-9;
inline constexpr double kCsetTol = 1e-9;

/// Halfspace polytope {w in R^m : F_i^T w <= g_i, i = 1..r}.
struct Polytope {
  Mat F;
  Vec g;

  Polytope(Mat F_in, Vec g_in);

  int dim() const { return static_cast<int>(F.cols()); }
  int rows() const { return static_cast<int>(F.rows()); }

  /// F w - g, one entry per row; <= 0 means the row is satisfied.
  Vec residuals(const Vec& w) const { return F * w - g; }
  bool contains(const Vec& w, double tol = kMembershipTol) const {
    return residuals(w).maxCoeff() <= tol;
  }

  nlohmann::json to_json() const;
  static Polytope from_json(const nlohmann::json& j);
};

struct CsetCertificate {
  bool is_cset = false;
  double origin_margin = 0.0;  // min_i g_i, the slack of the origin
  bool bounded = false;
};

/// Decides whether P is a C-set: compact, convex (always), origin interior.
/// Boundedness is decided by support LPs along every +-coordinate direction.
CsetCertificate check_cset(const Polytope& p, double tol = kCsetTol);

/// Closed-form gauge (Minkowski) function max_i F_i^T v / g_i, clamped at 0.
/// Requires positive offsets (origin strictly inside); throws NotCset
/// otherwise, or when v lies in an unbounded recession direction of P.
double gauge_function(const Polytope& p, const Vec& v);

/// Maps the unit inf-ball onto P: v -> (||v||_inf / gauge(v)) * v, with the
/// 0 -> 0 limit. Requires ||v||_inf <= 1 + tol (OutOfBall otherwise).
Vec gauge_map(const Polytope& p, const Vec& v, double tol = kMembershipTol);

/// Inverse map P -> inf-ball: w -> (gauge(w) / ||w||_inf) * w.
/// Requires w in P (NotMember otherwise).
Vec gauge_map_inverse(const Polytope& p, const Vec& w, double tol = kMembershipTol);

/// Directional derivative of gauge_map at v along dv, using the closed form
/// of the active piece (both norms are piecewise linear). Ties between
/// active pieces select the lexicographically-first piece. At v = 0 the map
/// has no linear derivative; the one-sided directional derivative
/// (||dv||_inf / gauge(dv)) * dv is returned.
Vec gauge_map_jvp(const Polytope& p, const Vec& v, const Vec& dv);

/// Full m x m Jacobian of gauge_map at v with the same piece selection.
/// At v = 0, columns are the one-sided axis derivatives diag(1/gauge(e_k)).
Mat gauge_map_jacobian(const Polytope& p, const Vec& v);

}  // namespace safecl
