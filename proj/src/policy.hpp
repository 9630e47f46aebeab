#pragma once
#include <Eigen/Dense>
#include <limits>
#include <span>

#include "kg.hpp"
#include "rng.hpp"

namespace polo {

struct PolicyConfig {
  int embedding_dim = 64;  // d; also the LSTM hidden size (see below)
  int lstm_layers = 1;
  int hidden_dim = 128;  // width of the feed-forward layer between W1 and W2
  int path_length = 3;   // L, steps per walk
  int train_rollouts = 30;
  int test_rollouts = 100;  // also the beam width at evaluation time
  int max_actions = 400;    // out-degree cap before the trailing self-loop
  void validate() const;
};

struct LstmLayer {
  // Gate order input, forget, candidate, output, stacked into 4d rows.
  Eigen::MatrixXd w_input;      // 4d x in_dim (in_dim = 2d on layer 0, d above)
  Eigen::MatrixXd w_recurrent;  // 4d x d
  Eigen::MatrixXd bias;         // 4d x 1
};

// All trainable state. The walk history is encoded by an LSTM whose hidden
// size equals the embedding size d: the scorer consumes [h; e] through
// W1 (hidden x 2d) and W2 (2d x hidden), and the result is dotted against
// action rows [relation; tail] which are also 2d.
struct PolicyParams {
  Eigen::MatrixXd entity_embeddings;    // |E| x d
  Eigen::MatrixXd relation_embeddings;  // |R| x d, NO_OP included
  std::vector<LstmLayer> lstm;
  Eigen::MatrixXd w1;  // hidden x 2d
  Eigen::MatrixXd w2;  // 2d x hidden

  // Embeddings uniform in [-0.01, 0.01], weights Xavier-uniform, biases zero
  // except the forget gate at 1.
  static PolicyParams init(const PolicyConfig& cfg, size_t num_entities, size_t num_relations,
                           Rng& rng);
  bool all_finite() const;
};

// Named views over every parameter matrix, in a fixed order shared by the
// optimizer, gradient clipping, checkpoints and the finite-difference tests.
std::vector<std::pair<std::string, Eigen::MatrixXd*>> param_blocks(PolicyParams& p);
std::vector<std::pair<std::string, const Eigen::MatrixXd*>> param_blocks(const PolicyParams& p);

// Agent state mid-walk: current location, per-layer LSTM state, and the
// embedding of the previous action (zero before the first step). The target
// entity is deliberately absent; the walker never observes it.
struct WalkState {
  EntityId entity;
  EntityId source;
  std::vector<Eigen::VectorXd> h, c;
  Eigen::VectorXd prev_action;
};

struct Rollout {
  std::vector<EntityId> entities;     // e_1 = source .. e_{L+1}
  std::vector<RelationId> relations;  // r_1 .. r_L
  std::vector<double> log_probs;      // of the chosen action, per step
  std::vector<double> entropies;      // of the step's action distribution
  double reward = 0.0;
};

// Intermediates stashed by the forward pass for backpropagation through the
// unrolled walk.
struct LayerTrace {
  Eigen::VectorXd in, h_prev, c_prev;
  Eigen::VectorXd gate_i, gate_f, gate_g, gate_o;
  Eigen::VectorXd c, tanh_c, h;
};
struct StepTrace {
  EntityId entity;
  std::vector<Action> actions;
  int chosen;
  Eigen::VectorXd x;  // LSTM input, the previous action embedding
  std::vector<LayerTrace> layers;
  Eigen::VectorXd u, v, relu_v, z;
  Eigen::VectorXd log_probs;  // over all actions
  Eigen::VectorXd probs;
  double entropy;
};
struct RolloutTrace {
  EntityId source;
  std::vector<StepTrace> steps;
  // Smallest |pre-activation| seen at the ReLU; lets gradient checks detect
  // instances that sit numerically on the kink.
  double min_abs_pre_relu = std::numeric_limits<double>::infinity();
};

WalkState init_walk(const PolicyConfig& cfg, const PolicyParams& params, EntityId source);

// One recurrence update: feeds the previous action embedding through every
// LSTM layer, updating hidden and cell states in place.
void lstm_step(const PolicyConfig& cfg, const PolicyParams& params, WalkState& state,
               const Eigen::VectorXd& action_embedding, std::vector<LayerTrace>* trace = nullptr);

// Action distribution for the current step: softmax of A [W2 relu(W1 [h; e])]
// over the available actions. Always a proper distribution; the action set is
// never empty because every entity has its self-loop.
Eigen::VectorXd score_actions(const PolicyConfig& cfg, const PolicyParams& params,
                              const Eigen::VectorXd& h_top, EntityId entity,
                              std::span<const Action> actions, StepTrace* trace = nullptr);

// Samples an index from the distribution; greedy takes the argmax with ties
// resolved toward the lowest index.
int sample_action(const Eigen::VectorXd& probs, Rng& rng, bool greedy = false);

// Out-edges capped at max_actions (keeping the first ones in adjacency
// order), always followed by the self-loop. Uses scratch as backing storage
// when a cap applies.
std::span<const Action> truncated_actions(const Graph& graph, const PolicyConfig& cfg,
                                          EntityId entity, std::vector<Action>& scratch);

// Samples an L-step walk from source. Never observes the query target.
Rollout rollout(const Graph& graph, const PolicyConfig& cfg, const PolicyParams& params,
                EntityId source, Rng& rng, bool greedy = false, RolloutTrace* trace = nullptr);

// Recomputes log-probs and entropies along a fixed action sequence (the
// relations/entities of an existing rollout).
Rollout replay_rollout(const Graph& graph, const PolicyConfig& cfg, const PolicyParams& params,
                       EntityId source, std::span<const RelationId> relations,
                       std::span<const EntityId> entities, RolloutTrace* trace = nullptr);

// Gradient accumulator. Embedding gradients are kept as sparse rows because a
// rollout touches a tiny fraction of the tables.
struct GradBuffer {
  std::unordered_map<EntityId, Eigen::VectorXd> d_entity;
  std::unordered_map<RelationId, Eigen::VectorXd> d_relation;
  std::vector<LstmLayer> d_lstm;
  Eigen::MatrixXd d_w1, d_w2;

  GradBuffer(const PolicyConfig& cfg);
  Eigen::VectorXd& entity_row(EntityId e);
  Eigen::VectorXd& relation_row(RelationId r);
  void merge(GradBuffer&& other);
  // Sum of squares over all entries; sparse rows are visited in sorted key
  // order so the result is reproducible.
  double squared_norm() const;
  void scale(double s);

private:
  int dim_;
};

// Accumulates the gradient of
//   logprob_coef * sum_l log pi(a_l) + entropy_coef * sum_l H_l
// into grads, by reverse accumulation through the unrolled walk.
void accumulate_policy_gradient(const PolicyConfig& cfg, const PolicyParams& params,
                                const RolloutTrace& trace, double logprob_coef,
                                double entropy_coef, GradBuffer& grads);

}  // namespace polo
