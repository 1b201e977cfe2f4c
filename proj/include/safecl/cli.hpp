#pragma once

#include "safecl/sim.hpp"
#include "safecl/train.hpp"

#include <optional>
#include <string>
#include <vector>

namespace safecl {

/// One run configuration, loaded from a JSON file. Every field has a
/// default; unknown keys are rejected with field-level messages.
struct RunConfig {
  std::string name = "run";
  std::string env_id = "acc";
  EnvOptions env_opts;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {32, 32};

  Variant train_variant = Variant::Gauge;  // `variant` key, cmd_train only
  TrainConfig train;

  std::vector<Variant> variants;  // cmd_compare
  RolloutConfig eval;
  int eval_num_initial_states = 5;
  std::vector<Vec> eval_initial_states;  // explicit states, used first

  MpcConfig mpc;
  int scan_samples = 2000;

  std::string out_dir = "runs/run";
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const nlohmann::json& j);

/// Trains the configured variant; writes checkpoint_<variant>.bin and
/// loss_<variant>.csv under the output directory.
int cmd_train(const RunConfig& cfg);

/// Rolls out every configured variant from the shared evaluation states and
/// writes compare.csv / compare.json plus per-trajectory CSVs.
int cmd_compare(const RunConfig& cfg);

/// Feasibility scan over the env's domain within C; writes scan.json.
int cmd_scan(const RunConfig& cfg);

}  // namespace safecl
