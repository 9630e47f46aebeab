#include "training.hpp"

#include <cmath>

#include "eval.hpp"
#include "parallel.hpp"

namespace polo {

void RewardConfig::validate() const {
  if (lambda < 0.0) throw_usage("lambda must be >= 0");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw_usage("learning_rate must be > 0");
  if (entropy_beta < 0.0) throw_usage("entropy_beta must be >= 0");
  if (epochs < 0) throw_usage("epochs must be >= 0");
  if (batch_size < 1) throw_usage("batch_size must be >= 1");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw_usage("baseline_decay must be in [0, 1)");
  }
  if (grad_clip_norm < 0.0) throw_usage("grad_clip_norm must be >= 0");
}

double compute_reward(const Graph& graph, const Rollout& walk, EntityId target,
                      const RuleSet& rules, const RewardConfig& cfg) {
  bool correct = walk.entities.back() == target;
  double reward = correct ? 1.0 : 0.0;
  if (cfg.lambda > 0.0 && !rules.empty()) {
    bool b = (cfg.b_mode == RewardConfig::BMode::Always) || correct;
    if (b) {
      auto match = match_rules(graph, walk.entities, walk.relations, rules);
      if (match) reward += cfg.lambda * rules.rules[*match].score;
    }
  }
  return reward;
}

double update_baseline(double prev, double batch_mean_reward, double decay) {
  return decay * prev + (1.0 - decay) * batch_mean_reward;
}

namespace {

// Adam over all parameter blocks, stepping in the ascent direction. Moments
// are dense; sparse embedding gradients touch only their rows when moments
// absorb new gradient, while the decay applies everywhere.
class AdamOptimizer {
public:
  AdamOptimizer(const PolicyParams& params, double lr) : lr_(lr) {
    for (const auto& [name, m] : param_blocks(params)) {
      (void)name;
      m_.push_back(Eigen::MatrixXd::Zero(m->rows(), m->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(m->rows(), m->cols()));
    }
  }

  void step(PolicyParams& params, const GradBuffer& grads) {
    ++t_;
    auto blocks = param_blocks(params);
    // Blocks 0 and 1 are the embedding tables with sparse gradients; the
    // rest are dense and aligned with the GradBuffer fields in order.
    std::vector<const Eigen::MatrixXd*> dense(blocks.size(), nullptr);
    size_t idx = 2;
    for (const auto& layer : grads.d_lstm) {
      dense[idx++] = &layer.w_input;
      dense[idx++] = &layer.w_recurrent;
      dense[idx++] = &layer.bias;
    }
    dense[idx++] = &grads.d_w1;
    dense[idx++] = &grads.d_w2;

    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      Eigen::MatrixXd& m = m_[bi];
      Eigen::MatrixXd& v = v_[bi];
      m *= beta1_;
      v *= beta2_;
      if (bi == 0) {
        for (const auto& [row, g] : grads.d_entity) {
          m.row(row) += (1.0 - beta1_) * g.transpose();
          v.row(row) += (1.0 - beta2_) * g.array().square().matrix().transpose();
        }
      } else if (bi == 1) {
        for (const auto& [row, g] : grads.d_relation) {
          m.row(row) += (1.0 - beta1_) * g.transpose();
          v.row(row) += (1.0 - beta2_) * g.array().square().matrix().transpose();
        }
      } else {
        m += (1.0 - beta1_) * (*dense[bi]);
        v += (1.0 - beta2_) * dense[bi]->array().square().matrix();
      }
      double bc1 = 1.0 - std::pow(beta1_, t_);
      double bc2 = 1.0 - std::pow(beta2_, t_);
      blocks[bi].second->array() +=
          lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
    }
  }

private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

void fisher_yates(std::vector<int32_t>& order, Rng& rng) {
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
}

}  // namespace

TrainResult train(const Dataset& ds, const RuleSet& rules, const PolicyConfig& pcfg,
                  const RewardConfig& rcfg, const TrainConfig& tcfg, int threads,
                  const PolicyParams* initial, const std::function<void(const EpochDiagnostics&)>& on_epoch) {
  pcfg.validate();
  rcfg.validate();
  tcfg.validate();
  if (ds.train.empty() && tcfg.epochs > 0) throw_data("training requires a nonempty train split");

  PolicyParams params;
  if (initial) {
    params = *initial;
    if (params.entity_embeddings.rows() != static_cast<Eigen::Index>(ds.entities.size()) ||
        params.relation_embeddings.rows() != static_cast<Eigen::Index>(ds.relations.size())) {
      throw_runtime("initial parameters do not match the dataset's entity/relation counts");
    }
  } else {
    Rng init_rng = Rng::derive(tcfg.seed, "init");
    params = PolicyParams::init(pcfg, ds.entities.size(), ds.relations.size(), init_rng);
  }

  TrainResult result;
  result.best_val_hits1 = -1.0;
  AdamOptimizer opt(params, tcfg.learning_rate);
  double baseline = 0.0;
  const int K = pcfg.train_rollouts;

  std::vector<int32_t> order(ds.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int32_t>(i);

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::derive(tcfg.seed, "shuffle", static_cast<uint64_t>(epoch));
    fisher_yates(order, shuffle_rng);

    double epoch_reward_sum = 0.0;
    int64_t epoch_rollouts = 0, epoch_matched = 0, epoch_matched_correct = 0;

    for (size_t batch_start = 0; batch_start < order.size(); batch_start += tcfg.batch_size) {
      size_t batch_end = std::min(order.size(), batch_start + tcfg.batch_size);
      int64_t tasks = static_cast<int64_t>(batch_end - batch_start) * K;
      double normalizer = static_cast<double>(tasks);

      int workers = std::max(1, std::min<int>(threads, static_cast<int>(tasks)));
      std::vector<GradBuffer> buffers(workers, GradBuffer(pcfg));
      std::vector<double> reward_sums(workers, 0.0);
      std::vector<int64_t> matched(workers, 0), matched_correct(workers, 0);

      parallel_chunks(tasks, threads, [&](int64_t begin, int64_t end, int w) {
        GradBuffer& gbuf = buffers[w];
        for (int64_t task = begin; task < end; ++task) {
          int32_t qpos = order[batch_start + static_cast<size_t>(task / K)];
          int k = static_cast<int>(task % K);
          const Triple& query = ds.train[qpos];
          Rng walk_rng = Rng::derive(tcfg.seed, "rollout", static_cast<uint64_t>(epoch),
                                     static_cast<uint64_t>(qpos) * K + k);
          RolloutTrace trace;
          Rollout walk = rollout(ds.graph, pcfg, params, query.head, walk_rng, false, &trace);

          bool correct = walk.entities.back() == query.tail;
          auto match = match_rules(ds.graph, walk.entities, walk.relations, rules);
          double reward = correct ? 1.0 : 0.0;
          if (rcfg.lambda > 0.0 && match &&
              ((rcfg.b_mode == RewardConfig::BMode::Always) || correct)) {
            reward += rcfg.lambda * rules.rules[*match].score;
          }
          walk.reward = reward;
          reward_sums[w] += reward;
          if (match) {
            ++matched[w];
            if (correct) ++matched_correct[w];
          }
          double advantage = reward - baseline;
          accumulate_policy_gradient(pcfg, params, trace, advantage / normalizer,
                                     tcfg.entropy_beta / normalizer, gbuf);
        }
      });

      GradBuffer grads = std::move(buffers[0]);
      double batch_reward_sum = reward_sums[0];
      for (int w = 1; w < workers; ++w) {
        grads.merge(std::move(buffers[w]));
        batch_reward_sum += reward_sums[w];
      }
      for (int w = 0; w < workers; ++w) {
        epoch_matched += matched[w];
        epoch_matched_correct += matched_correct[w];
      }
      epoch_reward_sum += batch_reward_sum;
      epoch_rollouts += tasks;

      double norm2 = grads.squared_norm();
      if (!std::isfinite(norm2) || !std::isfinite(batch_reward_sum)) {
        throw_runtime("training diverged at epoch " + std::to_string(epoch) +
                      ": non-finite loss or gradient");
      }
      if (tcfg.grad_clip_norm > 0.0) {
        double norm = std::sqrt(norm2);
        if (norm > tcfg.grad_clip_norm) grads.scale(tcfg.grad_clip_norm / norm);
      }
      opt.step(params, grads);
      baseline = update_baseline(baseline, batch_reward_sum / normalizer, tcfg.baseline_decay);
    }

    if (!params.all_finite()) {
      throw_runtime("training diverged at epoch " + std::to_string(epoch) +
                    ": non-finite parameters");
    }

    EpochDiagnostics diag;
    diag.epoch = epoch;
    diag.mean_reward = epoch_rollouts ? epoch_reward_sum / static_cast<double>(epoch_rollouts) : 0.0;
    diag.rule_match_rate =
        epoch_rollouts ? static_cast<double>(epoch_matched) / static_cast<double>(epoch_rollouts)
                       : 0.0;
    if (epoch_matched > 0) {
      diag.rule_accuracy =
          static_cast<double>(epoch_matched_correct) / static_cast<double>(epoch_matched);
    }
    if (!ds.valid.empty()) {
      SplitEvaluation ev = evaluate_split(ds, rules, pcfg, params, ds.valid, threads, false);
      diag.val_hits1_pruned = ev.pruned.hits1;
    }
    result.history.push_back(diag);
    if (on_epoch) on_epoch(diag);

    if (ds.valid.empty()) {
      result.params = params;  // keep the final epoch when there is no signal
      result.best_epoch = epoch;
    } else if (diag.val_hits1_pruned > result.best_val_hits1) {
      result.best_val_hits1 = diag.val_hits1_pruned;
      result.params = params;
      result.best_epoch = epoch;
    }
  }

  if (result.best_epoch == 0) {
    result.params = params;  // zero epochs: hand back the initial parameters
    result.best_val_hits1 = 0.0;
  }
  if (result.best_val_hits1 < 0.0) result.best_val_hits1 = 0.0;
  return result;
}

}  // namespace polo
