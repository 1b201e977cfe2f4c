#include "safecl/mpc.hpp"

#include "safecl/solvers.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace safecl {

MpcResult mpc_control(const CbfSystem& sys, const StageCost& cost, const Vec& x0,
                      const MpcConfig& cfg, std::vector<Vec>& warm, const Vec& prev_u) {
  const int N = cfg.horizon_steps;
  const int n = sys.state_dim;
  const int m = sys.input_dim;
  const int nv = N * m;
  const double dt = cfg.dt;
  const QuadCost& qc = cost.quadratic;

  std::vector<Vec> useq = warm;
  if (static_cast<int>(useq.size()) != N)
    useq.assign(N, sys.input_chebyshev.u);

  const Mat& Au = sys.input_set.F;
  const Vec& bu = sys.input_set.g;
  const int ru = static_cast<int>(Au.rows());

  auto fallback = [&]() -> MpcResult {
    warm.clear();
    return {safety_filter(sys, x0, prev_u).u, true};
  };

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    // Nominal rollout and sensitivities S_k = dx_k / d(deltaU).
    std::vector<Vec> xs(N + 1);
    std::vector<Mat> S(N + 1, Mat::Zero(n, nv));
    xs[0] = x0;
    for (int k = 0; k < N; ++k) {
      const Vec fx = sys.drift(xs[k]);
      const Mat gx = sys.input_matrix(xs[k]);
      xs[k + 1] = xs[k] + dt * (fx + gx * useq[k]);
      const Mat Ak = Mat::Identity(n, n) + dt * sys.dynamics_jac_state(xs[k], useq[k]);
      S[k + 1] = Ak * S[k];
      S[k + 1].middleCols(k * m, m) += dt * gx;
    }

    // Condensed quadratic objective in deltaU.
    Mat H = Mat::Zero(nv, nv);
    Vec q = Vec::Zero(nv);
    for (int k = 0; k < N; ++k) {
      H += 2.0 * dt * (S[k].transpose() * qc.Q * S[k]);
      q += 2.0 * dt * (S[k].transpose() * (qc.Q * (xs[k] - qc.x_ref)));
      H.block(k * m, k * m, m, m) += 2.0 * dt * qc.R;
      q.segment(k * m, m) += 2.0 * dt * (qc.R * (useq[k] - qc.u_ref));
    }
    H += 2.0 * dt * cfg.terminal_weight * (S[N].transpose() * qc.Q * S[N]);
    q += 2.0 * dt * cfg.terminal_weight * (S[N].transpose() * (qc.Q * (xs[N] - qc.x_ref)));
    H = 0.5 * (H + H.transpose());

    // Constraint rows over deltaU.
    std::vector<Vec> rows;
    std::vector<double> rhs;
    rows.reserve(N * (ru + 1) + 2 * nv);
    for (int k = 0; k < N; ++k) {
      for (int i = 0; i < ru; ++i) {
        Vec row = Vec::Zero(nv);
        row.segment(k * m, m) = Au.row(i);
        rows.push_back(std::move(row));
        rhs.push_back(bu[i] - Au.row(i).dot(useq[k]));
      }
      const double hk = sys.barrier(xs[k]);
      const double hk1 = sys.barrier(xs[k + 1]);
      const Vec gk = sys.barrier_grad(xs[k]);
      const Vec gk1 = sys.barrier_grad(xs[k + 1]);
      Vec row = -(S[k + 1].transpose() * gk1) +
                (1.0 - dt * sys.alpha.derivative(hk)) * (S[k].transpose() * gk);
      const double r = hk1 - hk + dt * sys.alpha(hk);
      if (row.lpNorm<Eigen::Infinity>() < 1e-12) {
        if (r < -1e-10) return fallback();
      } else {
        rows.push_back(std::move(row));
        rhs.push_back(r);
      }
    }
    for (int j = 0; j < nv; ++j) {
      Vec row = Vec::Zero(nv);
      row[j] = 1.0;
      rows.push_back(row);
      rhs.push_back(cfg.trust_radius);
      row[j] = -1.0;
      rows.push_back(std::move(row));
      rhs.push_back(cfg.trust_radius);
    }
    Mat A(static_cast<int>(rows.size()), nv);
    Vec b(static_cast<int>(rows.size()));
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
      A.row(i) = rows[i].transpose();
      b[i] = rhs[i];
    }

    // Convert min 0.5 d'Hd + q'd to projection form via H = LL'.
    Eigen::LLT<Mat> llt(H);
    if (llt.info() != Eigen::Success) return fallback();
    const Mat L = llt.matrixL();
    const Vec target = -L.triangularView<Eigen::Lower>().solve(q);
    Mat Ay = L.triangularView<Eigen::Lower>().solve(A.transpose()).transpose();

    QpProblem qp{target, std::move(Ay), b, std::nullopt};
    if (b.minCoeff() >= 0.0) qp.feasible_start = Vec::Zero(nv);  // deltaU = 0
    const SolveResult sol = solve_qp_projection(qp);
    if (sol.status != SolveStatus::Optimal) return fallback();
    const Vec delta = L.transpose().triangularView<Eigen::Upper>().solve(sol.z);

    for (int k = 0; k < N; ++k) useq[k] += delta.segment(k * m, m);
    if (delta.lpNorm<Eigen::Infinity>() < 1e-6) break;
  }

  warm.resize(N);
  for (int k = 0; k + 1 < N; ++k) warm[k] = useq[k + 1];
  warm[N - 1] = useq[N - 1];
  return {useq[0], false};
}

}  // namespace safecl
