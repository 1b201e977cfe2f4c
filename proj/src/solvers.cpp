#include "safecl/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace safecl {
namespace {

constexpr double kPivotEps = 1e-11;
constexpr double kReducedCostTol = 1e-9;
constexpr int kMaxPivots = 20000;
constexpr int kMaxQpIters = 10000;

// Tableau simplex over nonnegative variables. The free original variables
// are split z = zp - zm before entry. Bland's rule throughout: entering
// column = lowest index with improving reduced cost, leaving row = lowest
// basic-variable index among the minimum-ratio ties.
class Tableau {
 public:
  Tableau(const Mat& A, const Vec& b) : rows_(static_cast<int>(A.rows())) {
    const int n = static_cast<int>(A.cols());
    nstruct_ = 2 * n + rows_;
    // Count artificials: one per row with negative rhs.
    nart_ = 0;
    for (int i = 0; i < rows_; ++i)
      if (b[i] < 0) ++nart_;
    cols_ = nstruct_ + nart_;
    T_.setZero(rows_, cols_ + 1);
    basis_.resize(rows_);
    int art = 0;
    for (int i = 0; i < rows_; ++i) {
      const double sgn = b[i] < 0 ? -1.0 : 1.0;
      for (int j = 0; j < n; ++j) {
        T_(i, j) = sgn * A(i, j);
        T_(i, n + j) = -sgn * A(i, j);
      }
      T_(i, 2 * n + i) = sgn;  // slack
      T_(i, cols_) = sgn * b[i];
      if (b[i] < 0) {
        const int acol = nstruct_ + art++;
        T_(i, acol) = 1.0;
        basis_[i] = acol;
      } else {
        basis_[i] = 2 * n + i;
      }
    }
  }

  int pivots() const { return pivots_; }
  int struct_cols() const { return nstruct_; }
  int art_cols() const { return nart_; }

  // maximize obj over the current feasible dictionary. obj has one entry per
  // column (structural + artificial). Returns false if unbounded.
  bool maximize(Vec obj, bool allow_art_entering) {
    // Reduced costs: price out the basic columns.
    Vec red = obj;
    for (int i = 0; i < rows_; ++i) {
      const double cb = obj[basis_[i]];
      if (cb == 0.0) continue;
      for (int j = 0; j < cols_; ++j) red[j] -= cb * T_(i, j);
    }
    for (;;) {
      int enter = -1;
      const int limit = allow_art_entering ? cols_ : nstruct_;
      for (int j = 0; j < limit; ++j) {
        if (red[j] > kReducedCostTol) {
          enter = j;
          break;  // Bland: lowest index
        }
      }
      if (enter < 0) return true;  // optimal
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows_; ++i) {
        const double a = T_(i, enter);
        if (a > kPivotEps) {
          const double ratio = T_(i, cols_) / a;
          if (ratio < best_ratio - 1e-12 ||
              (ratio < best_ratio + 1e-12 &&
               (leave < 0 || basis_[i] < basis_[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(leave, enter);
      // Update reduced costs incrementally.
      const double re = red[enter];
      for (int j = 0; j < cols_; ++j) red[j] -= re * T_(leave, j);
      red[enter] = 0.0;
      if (++pivots_ > kMaxPivots)
        throw Error(ErrorKind::IterationLimit, "simplex pivot cap exceeded");
    }
  }

  // Phase 1: drive artificials to zero. Returns residual infeasibility.
  double phase1() {
    if (nart_ == 0) return 0.0;
    Vec obj = Vec::Zero(cols_);
    for (int j = nstruct_; j < cols_; ++j) obj[j] = -1.0;
    if (!maximize(obj, true))
      throw Error(ErrorKind::IterationLimit, "phase-1 unbounded (internal)");
    double infeas = 0.0;
    for (int i = 0; i < rows_; ++i)
      if (basis_[i] >= nstruct_) infeas += T_(i, cols_);
    // Pivot out any degenerate basic artificials so phase 2 never touches them.
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] >= nstruct_ && T_(i, cols_) <= kFeasTol) {
        int enter = -1;
        for (int j = 0; j < nstruct_; ++j) {
          if (std::abs(T_(i, j)) > 1e-9) {
            enter = j;
            break;
          }
        }
        if (enter >= 0) pivot(i, enter);
        // else: redundant row; harmless to leave the zero-valued artificial.
      }
    }
    return infeas;
  }

  Vec solution(int n) const {
    Vec z = Vec::Zero(n);
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < n)
        z[basis_[i]] += T_(i, cols_);
      else if (basis_[i] < 2 * n)
        z[basis_[i] - n] -= T_(i, cols_);
    }
    return z;
  }

 private:
  void pivot(int r, int c) {
    const double inv = 1.0 / T_(r, c);
    T_.row(r) *= inv;
    T_(r, c) = 1.0;
    for (int i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double f = T_(i, c);
      if (f != 0.0) {
        T_.row(i) -= f * T_.row(r);
        T_(i, c) = 0.0;
      }
    }
    basis_[r] = c;
  }

  int rows_, nstruct_ = 0, nart_ = 0, cols_ = 0;
  Mat T_;
  std::vector<int> basis_;
  int pivots_ = 0;
};

std::vector<int> tight_rows(const Mat& A, const Vec& b, const Vec& z) {
  std::vector<int> act;
  const Vec res = A * z - b;
  for (int i = 0; i < res.size(); ++i)
    if (std::abs(res[i]) <= kFeasTol * std::max(1.0, std::abs(b[i]))) act.push_back(i);
  return act;
}

double primal_violation(const Mat& A, const Vec& b, const Vec& z) {
  if (A.rows() == 0) return 0.0;
  return std::max(0.0, (A * z - b).maxCoeff());
}

}  // namespace

SolveResult solve_lp(const LpProblem& p) {
  const int n = static_cast<int>(p.c.size());
  const int r = static_cast<int>(p.A.rows());
  if (p.A.cols() != n || p.b.size() != r || n < 1 || r < 1)
    throw Error(ErrorKind::DimensionMismatch, "solve_lp: inconsistent dimensions");

  Tableau tab(p.A, p.b);
  SolveResult out;
  if (tab.phase1() > 1e-8) {
    out.status = SolveStatus::Infeasible;
    out.z = Vec::Zero(n);
    out.iterations = tab.pivots();
    return out;
  }
  Vec obj = Vec::Zero(tab.struct_cols() + tab.art_cols());
  for (int j = 0; j < n; ++j) {
    obj[j] = p.c[j];
    obj[n + j] = -p.c[j];
  }
  const bool bounded = tab.maximize(obj, false);
  out.iterations = tab.pivots();
  if (!bounded) {
    out.status = SolveStatus::Unbounded;
    out.z = Vec::Zero(n);
    return out;
  }
  out.status = SolveStatus::Optimal;
  out.z = tab.solution(n);
  out.active_set = tight_rows(p.A, p.b, out.z);
  out.lambda = Vec::Zero(r);
  out.kkt_residual = primal_violation(p.A, p.b, out.z);
  return out;
}

SolveResult solve_qp_projection(const QpProblem& p) {
  const int n = static_cast<int>(p.target.size());
  const int r = static_cast<int>(p.A.rows());
  if (p.A.cols() != n || p.b.size() != r)
    throw Error(ErrorKind::DimensionMismatch, "solve_qp_projection: inconsistent dimensions");

  SolveResult out;
  auto feasible = [&](const Vec& z) { return primal_violation(p.A, p.b, z) <= kFeasTol; };

  Vec z = p.target;  // seed: unconstrained minimizer
  int lp_iters = 0;
  if (!feasible(z)) {
    if (p.feasible_start && feasible(*p.feasible_start)) {
      z = *p.feasible_start;
    } else {
      LpProblem ph1{Vec::Zero(n), p.A, p.b};
      SolveResult lp = solve_lp(ph1);
      lp_iters = lp.iterations;
      if (lp.status != SolveStatus::Optimal) {
        out.status = SolveStatus::Infeasible;
        out.z = Vec::Zero(n);
        out.iterations = lp_iters;
        return out;
      }
      z = lp.z;
    }
  }

  std::vector<int> W;  // working set, sorted
  Vec mu;              // multipliers for W
  int iters = 0;
  for (;;) {
    if (++iters > kMaxQpIters)
      throw Error(ErrorKind::IterationLimit, "active-set QP iteration cap exceeded");
    // Equality-constrained subproblem on W.
    Vec zeq;
    if (W.empty()) {
      zeq = p.target;
      mu.resize(0);
    } else {
      const int k = static_cast<int>(W.size());
      Mat Aw(k, n);
      Vec bw(k);
      for (int i = 0; i < k; ++i) {
        Aw.row(i) = p.A.row(W[i]);
        bw[i] = p.b[W[i]];
      }
      Mat M = Aw * Aw.transpose();
      mu = M.ldlt().solve(Aw * p.target - bw);
      zeq = p.target - Aw.transpose() * mu;
    }

    if ((zeq - z).lpNorm<Eigen::Infinity>() <= 1e-12) {
      // Stationary on W: check multiplier signs.
      int drop = -1;
      for (int i = 0; i < static_cast<int>(W.size()); ++i) {
        if (mu[i] < -1e-9) {
          drop = i;
          break;  // lowest row index (W sorted)
        }
      }
      if (drop < 0) break;  // KKT satisfied
      W.erase(W.begin() + drop);
      continue;
    }

    const Vec d = zeq - z;
    double alpha = 1.0;
    int blocker = -1;
    for (int i = 0; i < r; ++i) {
      if (std::binary_search(W.begin(), W.end(), i)) continue;
      const double ad = p.A.row(i).dot(d);
      if (ad > kPivotEps) {
        const double ratio = (p.b[i] - p.A.row(i).dot(z)) / ad;
        if (ratio < alpha - 1e-15) {
          alpha = std::max(ratio, 0.0);
          blocker = i;
        }
      }
    }
    z += alpha * d;
    if (blocker >= 0) {
      W.insert(std::lower_bound(W.begin(), W.end(), blocker), blocker);
    }
  }

  out.status = SolveStatus::Optimal;
  out.z = z;
  out.iterations = iters + lp_iters;
  out.active_set = W;
  out.lambda = Vec::Zero(r);
  for (int i = 0; i < static_cast<int>(W.size()); ++i) out.lambda[W[i]] = mu.size() ? mu[i] : 0.0;

  // KKT residual: stationarity, primal/dual feasibility, complementarity.
  Vec stat = z - p.target;
  for (int i = 0; i < r; ++i) stat += out.lambda[i] * p.A.row(i).transpose();
  double res = stat.lpNorm<Eigen::Infinity>();
  res = std::max(res, primal_violation(p.A, p.b, z));
  if (r > 0) {
    res = std::max(res, std::max(0.0, -out.lambda.minCoeff()));
    for (int i = 0; i < r; ++i)
      res = std::max(res, std::abs(out.lambda[i] * (p.A.row(i).dot(z) - p.b[i])));
  }
  out.kkt_residual = res;
  return out;
}

Mat qp_projection_jacobian(const QpProblem& p, const SolveResult& sol) {
  const int n = static_cast<int>(p.target.size());
  if (sol.status != SolveStatus::Optimal)
    throw Error(ErrorKind::InvalidArgument, "qp_projection_jacobian: solution not optimal");

  std::vector<int> strict;
  for (int i : sol.active_set)
    if (sol.lambda[i] > kStrictTol) strict.push_back(i);
  if (strict.empty()) return Mat::Identity(n, n);

  Mat Aact(static_cast<int>(strict.size()), n);
  for (int i = 0; i < static_cast<int>(strict.size()); ++i) Aact.row(i) = p.A.row(strict[i]);

  // Prune to a row basis via column-pivoted QR of Aact^T.
  Eigen::ColPivHouseholderQR<Mat> qr(Aact.transpose());
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  if (rank == 0)
    throw Error(ErrorKind::DegenerateActiveSet, "active rows numerically zero");
  Mat B(rank, n);
  const auto& perm = qr.colsPermutation().indices();
  for (int i = 0; i < rank; ++i) B.row(i) = Aact.row(perm[i]);

  Mat M = B * B.transpose();
  Eigen::LDLT<Mat> ldlt(M);
  if (ldlt.info() != Eigen::Success)
    throw Error(ErrorKind::DegenerateActiveSet, "active-row Gram matrix not factorizable");
  return Mat::Identity(n, n) - B.transpose() * ldlt.solve(B);
}

}  // namespace safecl
