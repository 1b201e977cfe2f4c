#pragma once

#include "safecl/envs.hpp"

#include <vector>

namespace safecl {

struct MpcConfig {
  int horizon_steps = 10;
  double dt = 0.1;
  int max_iterations = 10;     // outer relinearization passes
  double trust_radius = 1.0;   // inf-norm bound on each control correction
  double terminal_weight = 10.0;
};

struct MpcResult {
  Vec u;
  bool fallback = false;  // QP infeasible; safety filter applied to prev_u
};

/// Shooting MPC by iterated linearization: linearize the Euler-discretized
/// dynamics about the current control sequence, solve the condensed convex
/// QP with per-step discrete CBF rows h_{k+1} >= h_k - dt*alpha(h_k) and
/// input/trust-region boxes, and repeat to a fixed point. `warm` carries the
/// shifted sequence between calls (one owner per trajectory).
MpcResult mpc_control(const CbfSystem& sys, const StageCost& cost, const Vec& x0,
                      const MpcConfig& cfg, std::vector<Vec>& warm, const Vec& prev_u);

}  // namespace safecl
