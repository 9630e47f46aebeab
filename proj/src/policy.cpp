#include "policy.hpp"

#include <algorithm>
#include <cmath>

namespace polo {
namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

void xavier_fill(Eigen::MatrixXd& m, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rng.uniform(-limit, limit);
    }
  }
}

void uniform_fill(Eigen::MatrixXd& m, Rng& rng, double limit) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rng.uniform(-limit, limit);
    }
  }
}

}  // namespace

void PolicyConfig::validate() const {
  if (embedding_dim < 1) throw_usage("embedding_dim must be >= 1");
  if (lstm_layers < 1) throw_usage("lstm_layers must be >= 1");
  if (hidden_dim < 1) throw_usage("hidden_dim must be >= 1");
  if (path_length < 1) throw_usage("path_length must be >= 1");
  if (train_rollouts < 1) throw_usage("train_rollouts must be >= 1");
  if (test_rollouts < 1) throw_usage("test_rollouts must be >= 1");
  if (max_actions < 1) throw_usage("max_actions must be >= 1");
}

PolicyParams PolicyParams::init(const PolicyConfig& cfg, size_t num_entities,
                                size_t num_relations, Rng& rng) {
  cfg.validate();
  const int d = cfg.embedding_dim;
  PolicyParams p;
  p.entity_embeddings.resize(static_cast<Eigen::Index>(num_entities), d);
  uniform_fill(p.entity_embeddings, rng, 0.01);
  p.relation_embeddings.resize(static_cast<Eigen::Index>(num_relations), d);
  uniform_fill(p.relation_embeddings, rng, 0.01);
  for (int k = 0; k < cfg.lstm_layers; ++k) {
    LstmLayer layer;
    int in_dim = (k == 0) ? 2 * d : d;
    layer.w_input.resize(4 * d, in_dim);
    xavier_fill(layer.w_input, rng);
    layer.w_recurrent.resize(4 * d, d);
    xavier_fill(layer.w_recurrent, rng);
    layer.bias = Eigen::MatrixXd::Zero(4 * d, 1);
    layer.bias.block(d, 0, d, 1).setOnes();  // forget gate starts open
    p.lstm.push_back(std::move(layer));
  }
  p.w1.resize(cfg.hidden_dim, 2 * d);
  xavier_fill(p.w1, rng);
  p.w2.resize(2 * d, cfg.hidden_dim);
  xavier_fill(p.w2, rng);
  return p;
}

bool PolicyParams::all_finite() const {
  for (const auto& [name, m] : param_blocks(*this)) {
    (void)name;
    if (!m->allFinite()) return false;
  }
  return true;
}

std::vector<std::pair<std::string, Eigen::MatrixXd*>> param_blocks(PolicyParams& p) {
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> blocks;
  blocks.emplace_back("entity_embeddings", &p.entity_embeddings);
  blocks.emplace_back("relation_embeddings", &p.relation_embeddings);
  for (size_t k = 0; k < p.lstm.size(); ++k) {
    std::string prefix = "lstm" + std::to_string(k);
    blocks.emplace_back(prefix + ".w_input", &p.lstm[k].w_input);
    blocks.emplace_back(prefix + ".w_recurrent", &p.lstm[k].w_recurrent);
    blocks.emplace_back(prefix + ".bias", &p.lstm[k].bias);
  }
  blocks.emplace_back("w1", &p.w1);
  blocks.emplace_back("w2", &p.w2);
  return blocks;
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> param_blocks(const PolicyParams& p) {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> blocks;
  for (auto& [name, m] : param_blocks(const_cast<PolicyParams&>(p))) {
    blocks.emplace_back(name, m);
  }
  return blocks;
}

WalkState init_walk(const PolicyConfig& cfg, const PolicyParams& params, EntityId source) {
  const int d = cfg.embedding_dim;
  WalkState st;
  st.entity = source;
  st.source = source;
  // The history starts as the source entity: hidden state seeded with its
  // embedding, cell state zero, and a zero vector standing in for the
  // nonexistent previous action.
  st.h.assign(cfg.lstm_layers, params.entity_embeddings.row(source).transpose());
  st.c.assign(cfg.lstm_layers, Eigen::VectorXd::Zero(d));
  st.prev_action = Eigen::VectorXd::Zero(2 * d);
  return st;
}

void lstm_step(const PolicyConfig& cfg, const PolicyParams& params, WalkState& state,
               const Eigen::VectorXd& action_embedding, std::vector<LayerTrace>* trace) {
  const int d = cfg.embedding_dim;
  Eigen::VectorXd in = action_embedding;
  for (int k = 0; k < cfg.lstm_layers; ++k) {
    const LstmLayer& layer = params.lstm[k];
    Eigen::VectorXd z4 = layer.w_input * in + layer.w_recurrent * state.h[k] + layer.bias.col(0);
    Eigen::VectorXd i = sigmoid(z4.head(d));
    Eigen::VectorXd f = sigmoid(z4.segment(d, d));
    Eigen::VectorXd g = z4.segment(2 * d, d).array().tanh().matrix();
    Eigen::VectorXd o = sigmoid(z4.tail(d));
    Eigen::VectorXd c_new = f.cwiseProduct(state.c[k]) + i.cwiseProduct(g);
    Eigen::VectorXd tanh_c = c_new.array().tanh().matrix();
    Eigen::VectorXd h_new = o.cwiseProduct(tanh_c);
    if (trace) {
      trace->push_back({in, state.h[k], state.c[k], std::move(i), std::move(f), std::move(g),
                        std::move(o), c_new, tanh_c, h_new});
    }
    state.c[k] = std::move(c_new);
    state.h[k] = h_new;
    in = std::move(h_new);
  }
}

Eigen::VectorXd score_actions(const PolicyConfig& cfg, const PolicyParams& params,
                              const Eigen::VectorXd& h_top, EntityId entity,
                              std::span<const Action> actions, StepTrace* trace) {
  const int d = cfg.embedding_dim;
  Eigen::VectorXd u(2 * d);
  u.head(d) = h_top;
  u.tail(d) = params.entity_embeddings.row(entity).transpose();
  Eigen::VectorXd v = params.w1 * u;
  Eigen::VectorXd relu_v = v.cwiseMax(0.0);
  Eigen::VectorXd z = params.w2 * relu_v;

  const Eigen::Index n = static_cast<Eigen::Index>(actions.size());
  Eigen::VectorXd logits(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    logits(k) = params.relation_embeddings.row(actions[k].relation).dot(z.head(d)) +
                params.entity_embeddings.row(actions[k].entity).dot(z.tail(d));
  }
  double max_logit = logits.maxCoeff();
  Eigen::VectorXd shifted = logits.array() - max_logit;
  double log_sum = std::log(shifted.array().exp().sum());
  Eigen::VectorXd log_probs = shifted.array() - log_sum;
  Eigen::VectorXd probs = log_probs.array().exp();

  if (trace) {
    trace->u = std::move(u);
    trace->relu_v = std::move(relu_v);
    trace->z = std::move(z);
    trace->log_probs = log_probs;
    trace->probs = probs;
    trace->entropy = -(probs.array() * log_probs.array()).sum();
    trace->v = std::move(v);
  }
  return probs;
}

int sample_action(const Eigen::VectorXd& probs, Rng& rng, bool greedy) {
  if (greedy) {
    Eigen::Index best = 0;
    probs.maxCoeff(&best);  // first occurrence wins on ties
    return static_cast<int>(best);
  }
  double u = rng.uniform();
  double cum = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    cum += probs(k);
    if (u < cum) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size() - 1);  // rounding runoff
}

std::span<const Action> truncated_actions(const Graph& graph, const PolicyConfig& cfg,
                                          EntityId entity, std::vector<Action>& scratch) {
  std::span<const Action> all = graph.actions(entity);
  size_t num_edges = all.size() - 1;
  if (num_edges <= static_cast<size_t>(cfg.max_actions)) return all;
  scratch.assign(all.begin(), all.begin() + cfg.max_actions);
  scratch.push_back(all.back());  // keep the self-loop
  return {scratch.data(), scratch.size()};
}

namespace {

Rollout walk_impl(const Graph& graph, const PolicyConfig& cfg, const PolicyParams& params,
                  EntityId source, Rng* rng, bool greedy,
                  std::span<const RelationId> forced_relations,
                  std::span<const EntityId> forced_entities, RolloutTrace* trace) {
  const int d = cfg.embedding_dim;
  WalkState st = init_walk(cfg, params, source);
  Rollout out;
  out.entities.push_back(source);
  if (trace) trace->source = source;
  std::vector<Action> scratch;
  for (int step = 0; step < cfg.path_length; ++step) {
    std::span<const Action> acts = truncated_actions(graph, cfg, st.entity, scratch);
    StepTrace* st_trace = nullptr;
    if (trace) {
      trace->steps.emplace_back();
      st_trace = &trace->steps.back();
      st_trace->entity = st.entity;
      st_trace->actions.assign(acts.begin(), acts.end());
      st_trace->x = st.prev_action;
    }
    lstm_step(cfg, params, st, st.prev_action, st_trace ? &st_trace->layers : nullptr);
    Eigen::VectorXd probs = score_actions(cfg, params, st.h.back(), st.entity, acts, st_trace);
    if (st_trace) {
      trace->min_abs_pre_relu =
          std::min(trace->min_abs_pre_relu, st_trace->v.cwiseAbs().minCoeff());
    }

    int idx;
    if (!forced_relations.empty()) {
      idx = -1;
      for (size_t k = 0; k < acts.size(); ++k) {
        if (acts[k].relation == forced_relations[step] && acts[k].entity == forced_entities[step + 1]) {
          idx = static_cast<int>(k);
          break;
        }
      }
      if (idx < 0) {
        throw_runtime("path is not replayable: step " + std::to_string(step + 1) +
                      " is not an available action");
      }
    } else {
      idx = sample_action(probs, *rng, greedy);
    }

    double log_prob, entropy;
    if (st_trace) {
      st_trace->chosen = idx;
      log_prob = st_trace->log_probs(idx);
      entropy = st_trace->entropy;
    } else {
      log_prob = std::log(probs(idx));
      Eigen::ArrayXd p = probs.array();
      // Guard 0 * log(0) for probabilities that underflowed to zero.
      entropy = -((p > 0.0).select(p * p.log(), Eigen::ArrayXd::Zero(p.size()))).sum();
    }

    Action a = acts[idx];
    st.prev_action.head(d) = params.relation_embeddings.row(a.relation).transpose();
    st.prev_action.tail(d) = params.entity_embeddings.row(a.entity).transpose();
    st.entity = a.entity;
    out.entities.push_back(a.entity);
    out.relations.push_back(a.relation);
    out.log_probs.push_back(log_prob);
    out.entropies.push_back(entropy);
  }
  return out;
}

}  // namespace

Rollout rollout(const Graph& graph, const PolicyConfig& cfg, const PolicyParams& params,
                EntityId source, Rng& rng, bool greedy, RolloutTrace* trace) {
  return walk_impl(graph, cfg, params, source, &rng, greedy, {}, {}, trace);
}

Rollout replay_rollout(const Graph& graph, const PolicyConfig& cfg, const PolicyParams& params,
                       EntityId source, std::span<const RelationId> relations,
                       std::span<const EntityId> entities, RolloutTrace* trace) {
  if (relations.size() != static_cast<size_t>(cfg.path_length) ||
      entities.size() != relations.size() + 1 || entities[0] != source) {
    throw_runtime("replay path does not match the configured walk length");
  }
  return walk_impl(graph, cfg, params, source, nullptr, false, relations, entities, trace);
}

GradBuffer::GradBuffer(const PolicyConfig& cfg) : dim_(cfg.embedding_dim) {
  const int d = cfg.embedding_dim;
  for (int k = 0; k < cfg.lstm_layers; ++k) {
    LstmLayer layer;
    int in_dim = (k == 0) ? 2 * d : d;
    layer.w_input = Eigen::MatrixXd::Zero(4 * d, in_dim);
    layer.w_recurrent = Eigen::MatrixXd::Zero(4 * d, d);
    layer.bias = Eigen::MatrixXd::Zero(4 * d, 1);
    d_lstm.push_back(std::move(layer));
  }
  d_w1 = Eigen::MatrixXd::Zero(cfg.hidden_dim, 2 * d);
  d_w2 = Eigen::MatrixXd::Zero(2 * d, cfg.hidden_dim);
}

Eigen::VectorXd& GradBuffer::entity_row(EntityId e) {
  auto [it, inserted] = d_entity.try_emplace(e);
  if (inserted) it->second = Eigen::VectorXd::Zero(dim_);
  return it->second;
}

Eigen::VectorXd& GradBuffer::relation_row(RelationId r) {
  auto [it, inserted] = d_relation.try_emplace(r);
  if (inserted) it->second = Eigen::VectorXd::Zero(dim_);
  return it->second;
}

void GradBuffer::merge(GradBuffer&& other) {
  for (auto& [e, row] : other.d_entity) entity_row(e) += row;
  for (auto& [r, row] : other.d_relation) relation_row(r) += row;
  for (size_t k = 0; k < d_lstm.size(); ++k) {
    d_lstm[k].w_input += other.d_lstm[k].w_input;
    d_lstm[k].w_recurrent += other.d_lstm[k].w_recurrent;
    d_lstm[k].bias += other.d_lstm[k].bias;
  }
  d_w1 += other.d_w1;
  d_w2 += other.d_w2;
}

double GradBuffer::squared_norm() const {
  double total = 0.0;
  auto sparse_norm = [&](const auto& map) {
    std::vector<int32_t> keys;
    keys.reserve(map.size());
    for (const auto& [k, row] : map) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (int32_t k : keys) total += map.at(k).squaredNorm();
  };
  sparse_norm(d_entity);
  sparse_norm(d_relation);
  for (const auto& layer : d_lstm) {
    total += layer.w_input.squaredNorm() + layer.w_recurrent.squaredNorm() +
             layer.bias.squaredNorm();
  }
  total += d_w1.squaredNorm() + d_w2.squaredNorm();
  return total;
}

void GradBuffer::scale(double s) {
  for (auto& [e, row] : d_entity) row *= s;
  for (auto& [r, row] : d_relation) row *= s;
  for (auto& layer : d_lstm) {
    layer.w_input *= s;
    layer.w_recurrent *= s;
    layer.bias *= s;
  }
  d_w1 *= s;
  d_w2 *= s;
}

void accumulate_policy_gradient(const PolicyConfig& cfg, const PolicyParams& params,
                                const RolloutTrace& trace, double logprob_coef,
                                double entropy_coef, GradBuffer& grads) {
  const int d = cfg.embedding_dim;
  const int K = cfg.lstm_layers;
  const int L = static_cast<int>(trace.steps.size());
  std::vector<Eigen::VectorXd> dh_next(K, Eigen::VectorXd::Zero(d));
  std::vector<Eigen::VectorXd> dc_next(K, Eigen::VectorXd::Zero(d));

  for (int l = L - 1; l >= 0; --l) {
    const StepTrace& s = trace.steps[l];
    const Eigen::Index n = static_cast<Eigen::Index>(s.actions.size());

    // d loss / d logits. For the chosen log-prob the softmax gives
    // (indicator - p); for the entropy it gives -p (log p + H).
    Eigen::VectorXd dlogits(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      double dl = logprob_coef * ((k == s.chosen ? 1.0 : 0.0) - s.probs(k));
      dl += entropy_coef * (-s.probs(k) * (s.log_probs(k) + s.entropy));
      dlogits(k) = dl;
    }

    // Back through the action rows [relation; tail] . z.
    Eigen::VectorXd dz = Eigen::VectorXd::Zero(2 * d);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Action& a = s.actions[k];
      double dl = dlogits(k);
      dz.head(d) += dl * params.relation_embeddings.row(a.relation).transpose();
      dz.tail(d) += dl * params.entity_embeddings.row(a.entity).transpose();
      grads.relation_row(a.relation) += dl * s.z.head(d);
      grads.entity_row(a.entity) += dl * s.z.tail(d);
    }

    // Back through the two-layer scorer.
    grads.d_w2.noalias() += dz * s.relu_v.transpose();
    Eigen::VectorXd drelu = params.w2.transpose() * dz;
    Eigen::VectorXd dv =
        (s.v.array() > 0.0).select(drelu.array(), Eigen::ArrayXd::Zero(drelu.size())).matrix();
    grads.d_w1.noalias() += dv * s.u.transpose();
    Eigen::VectorXd du = params.w1.transpose() * dv;
    grads.entity_row(s.entity) += du.tail(d);

    // Back through the LSTM stack, top layer first.
    Eigen::VectorXd dh_cur = du.head(d) + dh_next[K - 1];
    Eigen::VectorXd dx;
    for (int k = K - 1; k >= 0; --k) {
      const LayerTrace& t = s.layers[k];
      Eigen::VectorXd do_ = dh_cur.cwiseProduct(t.tanh_c);
      Eigen::VectorXd dc = dh_cur.cwiseProduct(t.gate_o).cwiseProduct(
                               (1.0 - t.tanh_c.array().square()).matrix()) +
                           dc_next[k];
      Eigen::VectorXd dzi = dc.cwiseProduct(t.gate_g)
                                .cwiseProduct(t.gate_i)
                                .cwiseProduct((1.0 - t.gate_i.array()).matrix());
      Eigen::VectorXd dzf = dc.cwiseProduct(t.c_prev)
                                .cwiseProduct(t.gate_f)
                                .cwiseProduct((1.0 - t.gate_f.array()).matrix());
      Eigen::VectorXd dzg =
          dc.cwiseProduct(t.gate_i).cwiseProduct((1.0 - t.gate_g.array().square()).matrix());
      Eigen::VectorXd dzo =
          do_.cwiseProduct(t.gate_o).cwiseProduct((1.0 - t.gate_o.array()).matrix());
      Eigen::VectorXd dz4(4 * d);
      dz4 << dzi, dzf, dzg, dzo;

      grads.d_lstm[k].w_input.noalias() += dz4 * t.in.transpose();
      grads.d_lstm[k].w_recurrent.noalias() += dz4 * t.h_prev.transpose();
      grads.d_lstm[k].bias.col(0) += dz4;

      Eigen::VectorXd d_in = params.lstm[k].w_input.transpose() * dz4;
      dh_next[k] = params.lstm[k].w_recurrent.transpose() * dz4;
      dc_next[k] = dc.cwiseProduct(t.gate_f);
      if (k > 0) {
        dh_cur = dh_next[k - 1] + d_in;
      } else {
        dx = std::move(d_in);
      }
    }

    // The step's LSTM input is the previous step's chosen action embedding
    // (for l = 0 it is the constant zero vector).
    if (l > 0) {
      const StepTrace& prev = trace.steps[l - 1];
      const Action& a = prev.actions[prev.chosen];
      grads.relation_row(a.relation) += dx.head(d);
      grads.entity_row(a.entity) += dx.tail(d);
    }
  }

  // Initial hidden states were seeded with the source embedding.
  Eigen::VectorXd dh0 = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < K; ++k) dh0 += dh_next[k];
  grads.entity_row(trace.source) += dh0;
}

}  // namespace polo
