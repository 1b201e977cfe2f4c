#pragma once

#include "safecl/policy.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace safecl {

enum class Integrator { Euler, Rk4 };

struct RolloutConfig {
  double dt = 0.1;
  double horizon = 20.0;  // seconds; must be a multiple of dt
  Integrator integrator = Integrator::Rk4;
};

/// One zero-order-hold step of xdot = f(x) + g(x) u.
/// Throws Error(NonFinite) when the state leaves floating-point range.
Vec integrate_step(const CbfSystem& sys, const Vec& x, const Vec& u, double dt,
                   Integrator method);

/// Closed-loop record: K steps, K+1 states. total_cost = sum c*dt matches the
/// experiment tables; average_cost carries the 1/T normalization of the
/// control objective.
struct Trajectory {
  std::vector<double> times;       // K+1
  std::vector<Vec> states;         // K+1
  std::vector<Vec> controls;       // K
  std::vector<double> stage_costs; // K, c(x_k, u_k)
  std::vector<double> h_values;    // K+1
  std::vector<bool> filter_flags;  // K, fallback fired
  std::vector<double> solve_times; // K, seconds per control evaluation
  double total_cost = 0.0;
  double average_cost = 0.0;
};

Trajectory rollout(const Policy& policy, const Env& env, const Vec& x0,
                   const RolloutConfig& cfg);

struct SafetyReport {
  double min_h = 0.0;
  std::optional<double> first_violation_time;
  int fallback_steps = 0;
};

SafetyReport safety_metrics(const Trajectory& traj);

double median_solve_time(const Trajectory& traj);

/// CSV rows t, x..., u..., h, cost, flag; one row per step plus a final row
/// for the terminal state (u repeated, zero cost) so plots cover [0, T].
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

nlohmann::json trajectory_summary(const Trajectory& traj);

}  // namespace safecl
