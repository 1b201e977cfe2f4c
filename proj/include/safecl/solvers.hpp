#pragma once

#include "safecl/common.hpp"

#include <optional>
#include <vector>

namespace safecl {

// Dense small-scale LP/QP with optimality certificates. All feasible regions
// are inequality-only polytopes {z : A z <= b} with free variables z.

inline constexpr double kFeasTol = 1e-8;
inline constexpr double kKktTol = 1e-7;
inline constexpr double kStrictTol = 1e-8;

enum class SolveStatus { Optimal, Infeasible, Unbounded };

/// maximize c^T z  subject to  A z <= b.
struct LpProblem {
  Vec c;
  Mat A;
  Vec b;
};

/// minimize ||z - target||^2  subject to  A z <= b.
struct QpProblem {
  Vec target;
  Mat A;
  Vec b;
  // Optional known-feasible point; skips the phase-1 LP when the target
  // itself is infeasible. Supplied by callers that hold one structurally.
  std::optional<Vec> feasible_start;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  Vec z;
  std::vector<int> active_set;  // row indices tight at the solution
  Vec lambda;                   // QP multipliers, full length, 0 off the active set
  // For QPs: max of stationarity, primal/dual violation and complementarity.
  // For LPs: max primal violation (vertex optimality is certified by the
  // simplex termination rule; tests cross-check against enumeration).
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Two-phase dense simplex with Bland's rule; deterministic for fixed input.
/// Throws Error(IterationLimit) if the pivot cap is exceeded.
SolveResult solve_lp(const LpProblem& p);

/// Primal active-set projection seeded from the unconstrained minimizer.
/// Returns Infeasible when the polytope is empty; never returns Unbounded.
SolveResult solve_qp_projection(const QpProblem& p);

/// Exact local Jacobian d z*/d target of the projection: the orthogonal
/// projector onto the nullspace of the strictly-active rows. Weakly active
/// rows (lambda <= strict_tol) are dropped; rank-deficient row sets are
/// pruned by column-pivoted QR.
Mat qp_projection_jacobian(const QpProblem& p, const SolveResult& sol);

}  // namespace safecl
