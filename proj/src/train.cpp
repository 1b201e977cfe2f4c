#include "safecl/train.hpp"

#include "safecl/sim.hpp"

#include <chrono>
#include <cmath>

namespace safecl {
namespace {

constexpr double kPilotHorizon = 1.0;
constexpr double kPilotDt = 0.1;

bool pilot_feasible(const Env& env, const Vec& x0) {
  if (env.sys.barrier(x0) < 0.0) return false;
  Vec x = x0;
  const int steps = static_cast<int>(kPilotHorizon / kPilotDt);
  for (int k = 0; k < steps; ++k) {
    const EvalResult ev = evaluate_interior(env.sys, x);
    if (ev.fallback) return false;
    x = integrate_step(env.sys, x, ev.u, kPilotDt, Integrator::Euler);
  }
  return true;
}

}  // namespace

std::vector<Vec> sample_initial_states(const Env& env, int count, Rng& rng) {
  std::vector<Vec> out;
  out.reserve(count);
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 1000 * std::max(count, 1))
      throw Error(ErrorKind::InvalidArgument,
                  "initial-state sampling: feasible region too small");
    Vec x = sample_candidate_initial_state(env, rng);
    if (pilot_feasible(env, x)) out.push_back(std::move(x));
  }
  return out;
}

LossInfo loss_with_grad(Variant variant, const Mlp& net, const Env& env,
                        const std::vector<Vec>& batch, const TrainConfig& cfg) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "loss: empty batch");
  if (!is_trainable(variant))
    throw Error(ErrorKind::InvalidArgument, "loss: variant is not trainable");
  const int steps = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
  const int n = env.sys.state_dim;
  const int P = static_cast<int>(net.theta.size());

  LossInfo info;
  info.grad = Vec::Zero(P);
  std::vector<double> adjoint;
  Tape tape;

  for (const Vec& x0 : batch) {
    tape.clear();
    std::vector<int> theta_nodes(P);
    for (int i = 0; i < P; ++i) theta_nodes[i] = tape.leaf(net.theta[i]);
    std::vector<int> x_nodes(n);
    for (int i = 0; i < n; ++i) x_nodes[i] = tape.leaf(x0[i]);

    std::vector<int> cost_nodes;
    std::vector<int> penalty_nodes;
    for (int k = 0; k < steps; ++k) {
      const TapeEval pe =
          policy_tape_eval(variant, net, tape, theta_nodes, x_nodes, env.sys);
      info.any_fallback = info.any_fallback || pe.fallback;
      info.margins.merge(pe.margins);

      Vec x(n), u(env.sys.input_dim);
      for (int i = 0; i < n; ++i) x[i] = tape.value(x_nodes[i]);
      for (int j = 0; j < u.size(); ++j) u[j] = tape.value(pe.u_nodes[j]);

      // Stage cost node c(x_k, u_k).
      {
        const Vec gx = env.cost.grad_x(x, u);
        const Vec gu = env.cost.grad_u(x, u);
        std::vector<int> parents(x_nodes);
        parents.insert(parents.end(), pe.u_nodes.begin(), pe.u_nodes.end());
        std::vector<double> partials(gx.begin(), gx.end());
        partials.insert(partials.end(), gu.begin(), gu.end());
        cost_nodes.push_back(tape.nary(parents, partials, env.cost.value(x, u)));
      }

      // Euler dynamics node: x_{k+1} = x_k + dt (f + g u).
      const Vec fx = env.sys.drift(x);
      const Mat gxm = env.sys.input_matrix(x);
      const Vec xnext = x + cfg.dt * (fx + gxm * u);
      const Mat jx =
          Mat::Identity(n, n) + cfg.dt * env.sys.dynamics_jac_state(x, u);
      const Mat ju = cfg.dt * gxm;
      std::vector<int> parents(x_nodes);
      parents.insert(parents.end(), pe.u_nodes.begin(), pe.u_nodes.end());
      std::vector<int> xn(n);
      std::vector<double> partials(parents.size());
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < n; ++c) partials[c] = jx(i, c);
        for (int c = 0; c < ju.cols(); ++c) partials[n + c] = ju(i, c);
        xn[i] = tape.nary(parents, partials, xnext[i]);
      }
      x_nodes = std::move(xn);

      if (variant == Variant::Plain && cfg.penalty_mu > 0.0) {
        // relu(-h(x_{k+1}))^2 over visited states.
        const Vec xv = xnext;
        const Vec gh = env.sys.barrier_grad(xv);
        std::vector<double> hpart(gh.begin(), gh.end());
        const int h_node = tape.nary(x_nodes, hpart, env.sys.barrier(xv));
        penalty_nodes.push_back(tape.square(tape.relu(tape.scale(h_node, -1.0))));
      }
    }

    int loss_node = tape.scale(tape.sum(cost_nodes), 1.0 / steps);
    if (!penalty_nodes.empty()) {
      const int pen = tape.scale(tape.sum(penalty_nodes), cfg.penalty_mu / steps);
      loss_node = tape.add(loss_node, pen);
    }
    cost_nodes.clear();
    penalty_nodes.clear();

    info.value += tape.value(loss_node);
    tape.backward(loss_node, adjoint);
    for (int i = 0; i < P; ++i) info.grad[i] += adjoint[theta_nodes[i]];
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  info.value *= inv_b;
  info.grad *= inv_b;
  info.finite = std::isfinite(info.value) && is_finite(info.grad);
  return info;
}

double loss_value(const Policy& policy, const Env& env, const std::vector<Vec>& batch,
                  const TrainConfig& cfg) {
  RolloutConfig rc{cfg.dt, cfg.horizon, Integrator::Euler};
  double total = 0.0;
  for (const Vec& x0 : batch) total += rollout(policy, env, x0, rc).average_cost;
  return total / static_cast<double>(batch.size());
}

TrainResult train(Variant variant, Mlp net, const Env& env, const TrainConfig& cfg,
                  const EpochCallback& callback) {
  if (!is_trainable(variant))
    throw Error(ErrorKind::InvalidArgument,
                "train: variant '" + to_string(variant) + "' is not trainable");
  TrainResult result;
  result.loss_curve.reserve(cfg.epochs);
  result.epoch_seconds.reserve(cfg.epochs);
  Rng rng(cfg.seed);
  AdamState adam = AdamState::create(static_cast<int>(net.theta.size()), cfg.lr);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Vec> batch = sample_initial_states(env, cfg.batch, rng);
    const LossInfo info = loss_with_grad(variant, net, env, batch, cfg);
    if (!info.finite)
      throw Error(ErrorKind::NonFinite,
                  "train: non-finite loss at epoch " + std::to_string(epoch));
    adam_step(adam, net.theta, info.grad);
    const auto t1 = std::chrono::steady_clock::now();
    result.loss_curve.push_back(info.value);
    result.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    if (callback) callback(epoch, info.value, net);
  }
  result.net = std::move(net);
  return result;
}

}  // namespace safecl
