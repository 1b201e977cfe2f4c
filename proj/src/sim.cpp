#include "safecl/sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace safecl {
namespace {

Vec dynamics(const CbfSystem& sys, const Vec& x, const Vec& u) {
  return sys.drift(x) + sys.input_matrix(x) * u;
}

}  // namespace

Vec integrate_step(const CbfSystem& sys, const Vec& x, const Vec& u, double dt,
                   Integrator method) {
  Vec next;
  if (method == Integrator::Euler) {
    next = x + dt * dynamics(sys, x, u);
  } else {
    const Vec k1 = dynamics(sys, x, u);
    const Vec k2 = dynamics(sys, x + 0.5 * dt * k1, u);
    const Vec k3 = dynamics(sys, x + 0.5 * dt * k2, u);
    const Vec k4 = dynamics(sys, x + dt * k3, u);
    next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!is_finite(next))
    throw Error(ErrorKind::NonFinite, "integrate_step: state left floating-point range");
  return next;
}

Trajectory rollout(const Policy& policy, const Env& env, const Vec& x0,
                   const RolloutConfig& cfg) {
  if (!(cfg.dt > 0.0))
    throw Error(ErrorKind::InvalidArgument, "rollout: dt must be positive");
  const int steps = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  if (std::abs(steps * cfg.dt - cfg.horizon) > 1e-9 * std::max(1.0, cfg.horizon))
    throw Error(ErrorKind::InvalidArgument, "rollout: horizon must be a multiple of dt");
  if (!is_finite(x0)) throw Error(ErrorKind::NonFinite, "rollout: x0 not finite");

  policy.reset();
  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.controls.reserve(steps);
  traj.stage_costs.reserve(steps);
  traj.h_values.reserve(steps + 1);
  traj.filter_flags.reserve(steps);
  traj.solve_times.reserve(steps);

  Vec x = x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.h_values.push_back(env.sys.barrier(x));
  for (int k = 0; k < steps; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const EvalResult ev = policy.evaluate(x);
    const auto t1 = std::chrono::steady_clock::now();
    traj.solve_times.push_back(std::chrono::duration<double>(t1 - t0).count());
    traj.controls.push_back(ev.u);
    traj.filter_flags.push_back(ev.fallback);
    traj.stage_costs.push_back(env.cost.value(x, ev.u));
    x = integrate_step(env.sys, x, ev.u, cfg.dt, cfg.integrator);
    traj.times.push_back((k + 1) * cfg.dt);
    traj.states.push_back(x);
    traj.h_values.push_back(env.sys.barrier(x));
  }
  for (double c : traj.stage_costs) traj.total_cost += c * cfg.dt;
  traj.average_cost = traj.total_cost / cfg.horizon;
  return traj;
}

SafetyReport safety_metrics(const Trajectory& traj) {
  SafetyReport rep;
  rep.min_h = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.h_values.size(); ++i) {
    rep.min_h = std::min(rep.min_h, traj.h_values[i]);
    if (!rep.first_violation_time && traj.h_values[i] < 0.0)
      rep.first_violation_time = traj.times[i];
  }
  for (bool f : traj.filter_flags) rep.fallback_steps += f ? 1 : 0;
  return rep;
}

double median_solve_time(const Trajectory& traj) {
  if (traj.solve_times.empty()) return 0.0;
  std::vector<double> t = traj.solve_times;
  const std::size_t mid = t.size() / 2;
  std::nth_element(t.begin(), t.begin() + mid, t.end());
  return t[mid];
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open for writing: " + path);
  const int n = static_cast<int>(traj.states.front().size());
  const int m = traj.controls.empty() ? 0 : static_cast<int>(traj.controls.front().size());
  f << "t";
  for (int i = 0; i < n; ++i) f << ",x" << i;
  for (int j = 0; j < m; ++j) f << ",u" << j;
  f << ",h,cost,flag\n";
  f.precision(12);
  const std::size_t K = traj.controls.size();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const bool step = k < K;
    f << traj.times[k];
    for (int i = 0; i < n; ++i) f << ',' << traj.states[k][i];
    const Vec& u = traj.controls[step ? k : K - 1];
    for (int j = 0; j < m; ++j) f << ',' << u[j];
    f << ',' << traj.h_values[k] << ',' << (step ? traj.stage_costs[k] : 0.0) << ','
      << (step ? (traj.filter_flags[k] ? 1 : 0) : 0) << '\n';
  }
}

nlohmann::json trajectory_summary(const Trajectory& traj) {
  const SafetyReport rep = safety_metrics(traj);
  nlohmann::json j;
  j["steps"] = traj.controls.size();
  j["total_cost"] = traj.total_cost;
  j["average_cost"] = traj.average_cost;
  j["min_h"] = rep.min_h;
  if (rep.first_violation_time)
    j["first_violation_time"] = *rep.first_violation_time;
  else
    j["first_violation_time"] = nullptr;
  j["fallback_steps"] = rep.fallback_steps;
  j["median_solve_time_s"] = median_solve_time(traj);
  return j;
}

}  // namespace safecl
