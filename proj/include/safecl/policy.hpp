#pragma once

#include "safecl/autodiff.hpp"
#include "safecl/envs.hpp"
#include "safecl/mpc.hpp"

#include <limits>
#include <span>
#include <string>
#include <vector>

namespace safecl {

enum class Variant { Plain, FilteredQp, DiffQp, Gauge, InteriorOnly, Mpc };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
bool is_trainable(Variant v);

struct EvalResult {
  Vec u;
  bool fallback = false;
};

/// Affine map of the tanh output (-1,1)^m onto U's bounding box.
Vec scale_to_box(const CbfSystem& sys, const Vec& v);

/// Gauge-layer policy: G(net(x) | K_cbf(x) - u_int) + u_int. Falls back to
/// the QP filter on the box-scaled net output when the interior is
/// degenerate, flagging the step.
EvalResult evaluate_gauge(const Mlp& net, const CbfSystem& sys, const Vec& x);

/// Projection-layer policy: QP filter applied to the box-scaled net output.
EvalResult evaluate_diff_qp(const Mlp& net, const CbfSystem& sys, const Vec& x);

/// Unfiltered baseline: box-scaled net output (may violate the CBF row).
EvalResult evaluate_plain(const Mlp& net, const CbfSystem& sys, const Vec& x);

/// Post-hoc filtered baseline; identical to evaluate_diff_qp at evaluation
/// time (the variants differ only in how the net was trained).
EvalResult evaluate_filtered(const Mlp& net, const CbfSystem& sys, const Vec& x);

EvalResult evaluate_interior(const CbfSystem& sys, const Vec& x);

/// Smallest margins encountered while recording a rollout on the tape. The
/// frozen-set differentiation is exact only where the safety layer's set is
/// locally constant in x and the active pieces are stable; finite-difference
/// oracles sample where both margins are comfortably positive.
struct SmoothnessMargins {
  double set_constancy = std::numeric_limits<double>::infinity();
  double piece_stability = std::numeric_limits<double>::infinity();

  void merge(const SmoothnessMargins& o) {
    set_constancy = std::min(set_constancy, o.set_constancy);
    piece_stability = std::min(piece_stability, o.piece_stability);
  }
};

struct TapeEval {
  std::vector<int> u_nodes;
  bool fallback = false;
  SmoothnessMargins margins;
};

/// Records one policy evaluation on the tape. Safety layers enter as custom
/// nodes differentiated w.r.t. the net output only: the safe set and its
/// Chebyshev center depend on x alone, not on theta, so they are held
/// constant by the layer's local Jacobian (gauge piece Jacobian, or the
/// active-set projector for the QP layer).
TapeEval policy_tape_eval(Variant variant, const Mlp& net, Tape& tape,
                          std::span<const int> theta_nodes,
                          std::span<const int> x_nodes, const CbfSystem& sys);

/// Uniform controller handle. MPC keeps its warm-started sequence here, so
/// use one Policy instance per simulated trajectory and reset() between runs.
struct Policy {
  Variant variant = Variant::Plain;
  Mlp net;
  const Env* env = nullptr;
  MpcConfig mpc_cfg;

  EvalResult evaluate(const Vec& x) const;
  void reset() const {
    mpc_warm_.clear();
    mpc_prev_u_.resize(0);
  }

 private:
  mutable std::vector<Vec> mpc_warm_;
  mutable Vec mpc_prev_u_;
};

Policy make_policy(Variant variant, const Env& env, Mlp net = {}, MpcConfig mpc_cfg = {});

}  // namespace safecl
