#pragma once
#include <functional>
#include <optional>

#include "policy.hpp"
#include "rules.hpp"

namespace polo {

struct RewardConfig {
  enum class BMode { Always, OnCorrect };
  double lambda = 1.0;  // weight of the rule bonus; 0 disables it entirely
  BMode b_mode = BMode::Always;
  void validate() const;
};

// Terminal reward of a finished walk toward target:
//   1{arrived} + b * lambda * score(matched rule)
// where b is 1 always or 1{arrived} depending on the mode, and rule matching
// collapses stay-in-place steps first. With lambda = 0 this is exactly the
// 0/1 correctness indicator.
double compute_reward(const Graph& graph, const Rollout& walk, EntityId target,
                      const RuleSet& rules, const RewardConfig& cfg);

// Exponential moving average used as the advantage baseline.
double update_baseline(double prev, double batch_mean_reward, double decay);

struct TrainConfig {
  double learning_rate = 0.001;
  double entropy_beta = 0.05;
  int epochs = 30;
  int batch_size = 64;
  double baseline_decay = 0.95;
  double grad_clip_norm = 5.0;  // global norm cap; 0 disables clipping
  uint64_t seed = 42;
  void validate() const;
};

struct EpochDiagnostics {
  int epoch = 0;
  double mean_reward = 0.0;
  double rule_match_rate = 0.0;
  std::optional<double> rule_accuracy;  // absent when no rollout matched
  double val_hits1_pruned = 0.0;
};

struct TrainResult {
  PolicyParams params;  // best validation checkpoint (final params if no valid split)
  std::vector<EpochDiagnostics> history;
  int best_epoch = 0;  // 1-based; 0 when nothing was trained
  double best_val_hits1 = 0.0;
};

// REINFORCE over the training split: every epoch shuffles the queries, walks
// train_rollouts paths per query, and ascends
//   mean[(R - baseline) * sum log pi + beta * sum entropy]
// with Adam, clipping the global gradient norm first. Every step of a walk
// receives the full terminal reward. The per-epoch validation metric is
// pruned hits@1, and the best epoch's parameters are kept. Non-finite
// rewards, gradients or parameters abort with a runtime error.
TrainResult train(const Dataset& ds, const RuleSet& rules, const PolicyConfig& pcfg,
                  const RewardConfig& rcfg, const TrainConfig& tcfg, int threads = 1,
                  const PolicyParams* initial = nullptr,
                  const std::function<void(const EpochDiagnostics&)>& on_epoch = {});

}  // namespace polo
