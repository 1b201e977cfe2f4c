#include "safecl/cbf.hpp"

#include "safecl/solvers.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace safecl {
namespace {

constexpr double kVacuousTol = 1e-14;

// Chebyshev LP over rows (F, g): maximize R s.t. F_i u + R ||F_i|| <= g_i,
// R >= 0. Variables (u, R).
SolveResult chebyshev_lp(const Mat& F, const Vec& g) {
  const int m = static_cast<int>(F.cols());
  const int r = static_cast<int>(F.rows());
  Mat A(r + 1, m + 1);
  Vec b(r + 1);
  for (int i = 0; i < r; ++i) {
    A.row(i).head(m) = F.row(i);
    A(i, m) = F.row(i).norm();
    b[i] = g[i];
  }
  A.row(r).setZero();
  A(r, m) = -1.0;  // R >= 0
  b[r] = 0.0;
  Vec c = Vec::Zero(m + 1);
  c[m] = 1.0;
  return solve_lp({c, A, b});
}

}  // namespace

CbfSystem make_cbf_system(CbfSystem sys) {
  const int m = sys.input_dim;
  if (sys.input_set.dim() != m)
    throw Error(ErrorKind::DimensionMismatch, "input set dimension mismatch");

  sys.input_row_norms.resize(sys.input_set.rows());
  for (int i = 0; i < sys.input_set.rows(); ++i)
    sys.input_row_norms[i] = sys.input_set.F.row(i).norm();

  // Bounding box of U via support LPs; also certifies boundedness.
  sys.input_bbox.lo.resize(m);
  sys.input_bbox.hi.resize(m);
  for (int j = 0; j < m; ++j) {
    for (double sgn : {1.0, -1.0}) {
      Vec c = Vec::Zero(m);
      c[j] = sgn;
      const SolveResult r = solve_lp({c, sys.input_set.F, sys.input_set.g});
      if (r.status != SolveStatus::Optimal)
        throw Error(ErrorKind::InvalidArgument,
                    "input set must be a nonempty bounded polytope");
      (sgn > 0 ? sys.input_bbox.hi[j] : sys.input_bbox.lo[j]) = r.z[j];
    }
  }

  const SolveResult che = chebyshev_lp(sys.input_set.F, sys.input_set.g);
  if (che.status != SolveStatus::Optimal || che.z[m] <= kRadiusMin)
    throw Error(ErrorKind::InvalidArgument, "input set must have nonempty interior");
  sys.input_chebyshev = {che.z.head(m), che.z[m]};
  return sys;
}

LieDerivatives lie_derivatives(const CbfSystem& sys, const Vec& x) {
  const Vec grad = sys.barrier_grad(x);
  LieDerivatives out;
  out.lf = grad.dot(sys.drift(x));
  out.lg = sys.input_matrix(x).transpose() * grad;
  return out;
}

namespace detail {

KcbfRows assemble_kcbf_rows(const CbfSystem& sys, const Vec& x) {
  KcbfRows rows;
  const LieDerivatives lie = lie_derivatives(sys, x);
  rows.cbf_normal = -lie.lg;
  rows.cbf_offset = lie.lf + sys.alpha(sys.barrier(x));
  const bool vacuous = lie.lg.lpNorm<Eigen::Infinity>() <= kVacuousTol;
  if (vacuous) {
    rows.F = sys.input_set.F;
    rows.g = sys.input_set.g;
    rows.empty = rows.cbf_offset < 0.0;
    return rows;
  }
  const int r = sys.input_set.rows();
  const int m = sys.input_set.dim();
  rows.F.resize(r + 1, m);
  rows.g.resize(r + 1);
  rows.F.topRows(r) = sys.input_set.F;
  rows.g.head(r) = sys.input_set.g;
  rows.F.row(r) = rows.cbf_normal.transpose();
  rows.g[r] = rows.cbf_offset;
  rows.cbf_row_stacked = true;
  return rows;
}

}  // namespace detail

SafeControlSet safe_control_set(const CbfSystem& sys, const Vec& x) {
  const detail::KcbfRows rows = detail::assemble_kcbf_rows(sys, x);
  SafeControlSet out{Polytope(rows.F, rows.g), rows.cbf_normal, rows.cbf_offset,
                     rows.cbf_row_stacked, false, std::nullopt};
  if (rows.empty) return out;
  if (!rows.cbf_row_stacked) {
    // Vacuous CBF row: the set is exactly U, nonempty by construction.
    out.feasible = true;
    out.witness = sys.input_chebyshev.u;
    return out;
  }
  const SolveResult ph1 = solve_lp({Vec::Zero(rows.F.cols()), rows.F, rows.g});
  out.feasible = ph1.status == SolveStatus::Optimal;
  if (out.feasible) out.witness = ph1.z;
  return out;
}

Vec least_violation_control(const CbfSystem& sys, const Vec& x, const Vec& u_ref) {
  const LieDerivatives lie = lie_derivatives(sys, x);
  const double rhs = lie.lf + sys.alpha(sys.barrier(x));
  if (lie.lg.lpNorm<Eigen::Infinity>() <= kVacuousTol) {
    // Violation is u-independent; just stay closest to the reference in U.
    const SolveResult qp = solve_qp_projection(
        {u_ref, sys.input_set.F, sys.input_set.g, sys.input_chebyshev.u});
    return qp.z;
  }
  // Step 1: minimize the CBF-row violation max(0, -Lg u - rhs) over U.
  const SolveResult lp = solve_lp({lie.lg, sys.input_set.F, sys.input_set.g});
  const double min_violation = std::max(0.0, -lp.z.dot(lie.lg) - rhs);
  // Step 2: among minimizers, stay closest to the reference.
  const int r = sys.input_set.rows();
  const int m = sys.input_set.dim();
  Mat F(r + 1, m);
  Vec g(r + 1);
  F.topRows(r) = sys.input_set.F;
  g.head(r) = sys.input_set.g;
  F.row(r) = -lie.lg.transpose();
  g[r] = rhs + min_violation + 1e-12;
  const SolveResult qp = solve_qp_projection({u_ref, F, g, lp.z});
  return qp.z;
}

FilterResult safety_filter(const CbfSystem& sys, const Vec& x, const Vec& u_ref) {
  const SafeControlSet set = safe_control_set(sys, x);
  if (!set.feasible) return {least_violation_control(sys, x, u_ref), true};
  const SolveResult qp =
      solve_qp_projection({u_ref, set.polytope.F, set.polytope.g, set.witness});
  if (qp.status != SolveStatus::Optimal)
    return {least_violation_control(sys, x, u_ref), true};
  return {qp.z, false};
}

std::optional<InteriorPoint> interior_policy(const CbfSystem& sys, const Vec& x) {
  const detail::KcbfRows rows = detail::assemble_kcbf_rows(sys, x);
  if (rows.empty) return std::nullopt;
  if (!rows.cbf_row_stacked) return sys.input_chebyshev;
  // The U-only center stays optimal whenever it satisfies the inflated CBF
  // row: the full feasible set is contained in the U-only one, so attaining
  // the U-only optimum certifies optimality. Skips the LP on the (common)
  // states where the CBF row is slack.
  const InteriorPoint& cached = sys.input_chebyshev;
  const double inflated = rows.cbf_normal.dot(cached.u) +
                          cached.radius * rows.cbf_normal.norm();
  if (inflated <= rows.cbf_offset) return cached;
  const SolveResult che = chebyshev_lp(rows.F, rows.g);
  const int m = sys.input_dim;
  if (che.status != SolveStatus::Optimal || che.z[m] <= kRadiusMin)
    return std::nullopt;
  return InteriorPoint{che.z.head(m), che.z[m]};
}

std::optional<ShiftedSafeSet> shifted_safe_set(const CbfSystem& sys, const Vec& x) {
  const std::optional<InteriorPoint> ip = interior_policy(sys, x);
  if (!ip) return std::nullopt;
  const detail::KcbfRows rows = detail::assemble_kcbf_rows(sys, x);
  return ShiftedSafeSet{Polytope(rows.F, rows.g - rows.F * ip->u), *ip};
}

FeasibilityReport feasibility_scan(const CbfSystem& sys, const std::vector<Vec>& states) {
  FeasibilityReport rep;
  rep.samples = static_cast<int>(states.size());
  for (const Vec& x : states) {
    const SafeControlSet set = safe_control_set(sys, x);
    if (!set.feasible) {
      ++rep.infeasible;
      continue;
    }
    const auto ip = interior_policy(sys, x);
    if (!ip) ++rep.degenerate;
  }
  if (rep.samples > 0) {
    rep.infeasible_fraction = static_cast<double>(rep.infeasible) / rep.samples;
    rep.degenerate_fraction = static_cast<double>(rep.degenerate) / rep.samples;
  }
  return rep;
}

nlohmann::json FeasibilityReport::to_json() const {
  return nlohmann::json{{"samples", samples},
                        {"infeasible", infeasible},
                        {"degenerate", degenerate},
                        {"infeasible_fraction", infeasible_fraction},
                        {"degenerate_fraction", degenerate_fraction}};
}

}  // namespace safecl
