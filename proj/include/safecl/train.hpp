#pragma once

#include "safecl/policy.hpp"

#include <functional>
#include <vector>

namespace safecl {

struct TrainConfig {
  int epochs = 200;
  int batch = 64;
  double horizon = 1.0;  // training horizon T_train (s)
  double dt = 0.1;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double penalty_mu = 10.0;  // safety penalty weight, Plain only
};

/// Initial states for training/evaluation: uniform candidates from the env's
/// sampling box, kept only if they lie in C and a short pilot rollout under
/// the interior policy stays feasible (no fallback).
std::vector<Vec> sample_initial_states(const Env& env, int count, Rng& rng);

struct LossInfo {
  double value = 0.0;
  Vec grad;                  // d loss / d theta
  bool finite = true;
  bool any_fallback = false;
  SmoothnessMargins margins;
};

/// Discretized control objective: mean over the batch of (1/T) sum c dt
/// along an Euler rollout under the tape-recorded policy; Plain adds
/// mu * mean relu(-h)^2 over the visited states. Differentiable end to end.
LossInfo loss_with_grad(Variant variant, const Mlp& net, const Env& env,
                        const std::vector<Vec>& batch, const TrainConfig& cfg);

/// Same objective without building gradients (for non-trainable baselines).
double loss_value(const Policy& policy, const Env& env, const std::vector<Vec>& batch,
                  const TrainConfig& cfg);

struct TrainResult {
  Mlp net;
  std::vector<double> loss_curve;     // one entry per epoch
  std::vector<double> epoch_seconds;  // wall time per epoch
};

using EpochCallback = std::function<void(int epoch, double loss, const Mlp& net)>;

/// Adam loop over seeded minibatches; bit-deterministic for a fixed config.
/// Throws Error(NonFinite) if a loss or gradient leaves floating-point range.
TrainResult train(Variant variant, Mlp net, const Env& env, const TrainConfig& cfg,
                  const EpochCallback& callback = {});

}  // namespace safecl
