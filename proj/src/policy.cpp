#include "safecl/policy.hpp"

#include "safecl/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace safecl {
namespace {

Vec tape_values(const Tape& tape, std::span<const int> nodes) {
  Vec v(static_cast<int>(nodes.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = tape.value(nodes[i]);
  return v;
}

// Margin by which the active pieces of the gauge map at v are isolated:
// runner-up gaps of both the inf-norm coordinate and the gauge row, and the
// distance of v from the center kink.
double gauge_piece_margin(const Polytope& p, const Vec& v) {
  const Vec a = v.cwiseAbs();
  const double linf = a.maxCoeff();
  double margin = linf;
  if (a.size() > 1) {
    double top = -1.0, second = -1.0;
    for (int i = 0; i < a.size(); ++i) {
      if (a[i] > top) {
        second = top;
        top = a[i];
      } else if (a[i] > second) {
        second = a[i];
      }
    }
    margin = std::min(margin, top - second);
  }
  const Vec ratios = (p.F * v).cwiseQuotient(p.g);
  if (ratios.size() > 1) {
    double top = -std::numeric_limits<double>::infinity(), second = top;
    for (int i = 0; i < ratios.size(); ++i) {
      if (ratios[i] > top) {
        second = top;
        top = ratios[i];
      } else if (ratios[i] > second) {
        second = ratios[i];
      }
    }
    margin = std::min(margin, top - second);
  }
  return margin;
}

// Shared QP-filter path for DiffQp (and the gauge fallback) on the tape.
TapeEval tape_filter_path(const Mlp& net, Tape& tape, std::span<const int> theta_nodes,
                          std::span<const int> x_nodes, const CbfSystem& sys,
                          bool flag_as_fallback) {
  TapeEval out;
  out.fallback = flag_as_fallback;
  const Vec x = tape_values(tape, x_nodes);
  const std::vector<int> phi = net.forward_tape(tape, theta_nodes, x_nodes);
  const int m = sys.input_dim;
  std::vector<int> ref(m);
  for (int j = 0; j < m; ++j) {
    const double c = 0.5 * (sys.input_bbox.hi[j] + sys.input_bbox.lo[j]);
    const double half = 0.5 * (sys.input_bbox.hi[j] - sys.input_bbox.lo[j]);
    ref[j] = tape.shift(tape.scale(phi[j], half), c);
  }
  const Vec ref_val = tape_values(tape, ref);

  const SafeControlSet set = safe_control_set(sys, x);
  if (!set.feasible) {
    // Least-violation fallback: not differentiated (flagged, gradient cut).
    const Vec u = least_violation_control(sys, x, ref_val);
    out.fallback = true;
    out.margins.set_constancy = -std::numeric_limits<double>::infinity();
    out.margins.piece_stability = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) out.u_nodes.push_back(tape.leaf(u[j]));
    return out;
  }

  QpProblem qp{ref_val, set.polytope.F, set.polytope.g, set.witness};
  const SolveResult sol = solve_qp_projection(qp);
  const Mat J = qp_projection_jacobian(qp, sol);

  // Margins: the frozen-set Jacobian is exact only while the CBF row stays
  // out of the strictly-active set and the active set itself is stable.
  const int cbf_row = set.cbf_row_stacked ? set.polytope.rows() - 1 : -1;
  double stability = std::numeric_limits<double>::infinity();
  const Vec slack = set.polytope.g - set.polytope.F * sol.z;
  for (int i = 0; i < set.polytope.rows(); ++i) {
    const bool active =
        std::find(sol.active_set.begin(), sol.active_set.end(), i) != sol.active_set.end();
    if (active) {
      if (i == cbf_row && sol.lambda[i] > kStrictTol)
        out.margins.set_constancy = std::min(out.margins.set_constancy, -1.0);
      stability = std::min(stability, std::abs(sol.lambda[i]) - kStrictTol);
    } else {
      stability = std::min(stability, slack[i]);
      if (i == cbf_row)
        out.margins.set_constancy = std::min(out.margins.set_constancy, slack[i]);
    }
  }
  out.margins.piece_stability = std::min(out.margins.piece_stability, stability);

  for (int i = 0; i < m; ++i) {
    std::vector<double> partials(J.row(i).begin(), J.row(i).end());
    out.u_nodes.push_back(tape.nary(ref, partials, sol.z[i]));
  }
  return out;
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Plain: return "plain";
    case Variant::FilteredQp: return "filtered_qp";
    case Variant::DiffQp: return "diff_qp";
    case Variant::Gauge: return "gauge";
    case Variant::InteriorOnly: return "interior";
    case Variant::Mpc: return "mpc";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "plain") return Variant::Plain;
  if (s == "filtered_qp") return Variant::FilteredQp;
  if (s == "diff_qp") return Variant::DiffQp;
  if (s == "gauge") return Variant::Gauge;
  if (s == "interior") return Variant::InteriorOnly;
  if (s == "mpc") return Variant::Mpc;
  throw Error(ErrorKind::Config, "unknown policy variant: '" + s + "'");
}

bool is_trainable(Variant v) {
  return v == Variant::Plain || v == Variant::DiffQp || v == Variant::Gauge;
}

Vec scale_to_box(const CbfSystem& sys, const Vec& v) {
  const Vec center = 0.5 * (sys.input_bbox.hi + sys.input_bbox.lo);
  const Vec half = 0.5 * (sys.input_bbox.hi - sys.input_bbox.lo);
  return center + half.cwiseProduct(v);
}

EvalResult evaluate_plain(const Mlp& net, const CbfSystem& sys, const Vec& x) {
  return {scale_to_box(sys, net.forward(x)), false};
}

EvalResult evaluate_filtered(const Mlp& net, const CbfSystem& sys, const Vec& x) {
  const FilterResult f = safety_filter(sys, x, scale_to_box(sys, net.forward(x)));
  return {f.u, f.fallback};
}

EvalResult evaluate_diff_qp(const Mlp& net, const CbfSystem& sys, const Vec& x) {
  return evaluate_filtered(net, sys, x);
}

EvalResult evaluate_gauge(const Mlp& net, const CbfSystem& sys, const Vec& x) {
  const std::optional<InteriorPoint> ip = interior_policy(sys, x);
  if (!ip) {
    const FilterResult f = safety_filter(sys, x, scale_to_box(sys, net.forward(x)));
    return {f.u, true};
  }
  const detail::KcbfRows rows = detail::assemble_kcbf_rows(sys, x);
  const Polytope shifted(rows.F, rows.g - rows.F * ip->u);
  const Vec v = net.forward(x);
  return {gauge_map(shifted, v) + ip->u, false};
}

EvalResult evaluate_interior(const CbfSystem& sys, const Vec& x) {
  const std::optional<InteriorPoint> ip = interior_policy(sys, x);
  if (!ip) return {least_violation_control(sys, x, Vec::Zero(sys.input_dim)), true};
  return {ip->u, false};
}

TapeEval policy_tape_eval(Variant variant, const Mlp& net, Tape& tape,
                          std::span<const int> theta_nodes,
                          std::span<const int> x_nodes, const CbfSystem& sys) {
  const int m = sys.input_dim;
  switch (variant) {
    case Variant::Plain: {
      TapeEval out;
      const std::vector<int> phi = net.forward_tape(tape, theta_nodes, x_nodes);
      for (int j = 0; j < m; ++j) {
        const double c = 0.5 * (sys.input_bbox.hi[j] + sys.input_bbox.lo[j]);
        const double half = 0.5 * (sys.input_bbox.hi[j] - sys.input_bbox.lo[j]);
        out.u_nodes.push_back(tape.shift(tape.scale(phi[j], half), c));
      }
      return out;
    }
    case Variant::DiffQp:
      return tape_filter_path(net, tape, theta_nodes, x_nodes, sys, false);
    case Variant::Gauge: {
      const Vec x = tape_values(tape, x_nodes);
      const std::optional<InteriorPoint> ip = interior_policy(sys, x);
      if (!ip) return tape_filter_path(net, tape, theta_nodes, x_nodes, sys, true);

      TapeEval out;
      const detail::KcbfRows rows = detail::assemble_kcbf_rows(sys, x);
      const Polytope shifted(rows.F, rows.g - rows.F * ip->u);
      const std::vector<int> phi = net.forward_tape(tape, theta_nodes, x_nodes);
      const Vec v = tape_values(tape, phi);
      const Vec w = gauge_map(shifted, v) + ip->u;
      const Mat J = gauge_map_jacobian(shifted, v);
      for (int i = 0; i < m; ++i) {
        std::vector<double> partials(J.row(i).begin(), J.row(i).end());
        out.u_nodes.push_back(tape.nary(phi, partials, w[i]));
      }
      if (rows.cbf_row_stacked) {
        // Margin by which the cached U-center certificate holds, i.e. how far
        // the CBF row is from entering the local geometry.
        const double inflated = rows.cbf_normal.dot(sys.input_chebyshev.u) +
                                sys.input_chebyshev.radius * rows.cbf_normal.norm();
        out.margins.set_constancy = rows.cbf_offset - inflated;
      }
      out.margins.piece_stability = gauge_piece_margin(shifted, v);
      return out;
    }
    default:
      throw Error(ErrorKind::InvalidArgument,
                  "policy_tape_eval: variant is not trainable");
  }
}

EvalResult Policy::evaluate(const Vec& x) const {
  switch (variant) {
    case Variant::Plain: return evaluate_plain(net, env->sys, x);
    case Variant::FilteredQp: return evaluate_filtered(net, env->sys, x);
    case Variant::DiffQp: return evaluate_diff_qp(net, env->sys, x);
    case Variant::Gauge: return evaluate_gauge(net, env->sys, x);
    case Variant::InteriorOnly: return evaluate_interior(env->sys, x);
    case Variant::Mpc: {
      if (mpc_prev_u_.size() == 0) mpc_prev_u_ = env->sys.input_chebyshev.u;
      const MpcResult r = mpc_control(env->sys, env->cost, x, mpc_cfg, mpc_warm_, mpc_prev_u_);
      mpc_prev_u_ = r.u;
      return {r.u, r.fallback};
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown policy variant");
}

Policy make_policy(Variant variant, const Env& env, Mlp net, MpcConfig mpc_cfg) {
  Policy p;
  p.variant = variant;
  p.net = std::move(net);
  p.env = &env;
  p.mpc_cfg = mpc_cfg;
  return p;
}

}  // namespace safecl
