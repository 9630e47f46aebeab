#include "eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "parallel.hpp"
#include "render.hpp"

namespace polo {
namespace {

struct Beam {
  WalkState state;
  double log_prob = 0.0;
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
};

struct Candidate {
  double log_prob;
  RelationId relation;
  EntityId entity;
  int parent;
  int action_index;
};

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.relation != b.relation) return a.relation < b.relation;
  if (a.entity != b.entity) return a.entity < b.entity;
  return a.parent < b.parent;
}

// Final presentation order: log-prob descending, then the step sequence
// lexicographically. Total because two distinct paths differ somewhere.
bool path_less(const ScoredPath& a, const ScoredPath& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  for (size_t i = 0; i < a.relations.size(); ++i) {
    if (a.relations[i] != b.relations[i]) return a.relations[i] < b.relations[i];
    if (a.entities[i + 1] != b.entities[i + 1]) return a.entities[i + 1] < b.entities[i + 1];
  }
  return false;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string fmt_optional(const std::optional<double>& x) {
  return x ? fmt_double(*x) : std::string();
}

}  // namespace

std::vector<ScoredPath> beam_search(const Graph& graph, const PolicyConfig& cfg,
                                    const PolicyParams& params, EntityId source, int beam_width,
                                    int path_length) {
  if (beam_width < 1) throw_usage("beam width must be >= 1");
  const int d = cfg.embedding_dim;
  std::vector<Beam> beams(1);
  beams[0].state = init_walk(cfg, params, source);
  beams[0].entities.push_back(source);

  std::vector<Action> scratch;
  for (int level = 0; level < path_length; ++level) {
    std::vector<std::vector<Action>> actions_of(beams.size());
    std::vector<Candidate> candidates;
    for (size_t bi = 0; bi < beams.size(); ++bi) {
      Beam& b = beams[bi];
      lstm_step(cfg, params, b.state, b.state.prev_action);
      std::span<const Action> acts = truncated_actions(graph, cfg, b.state.entity, scratch);
      actions_of[bi].assign(acts.begin(), acts.end());
      Eigen::VectorXd probs = score_actions(cfg, params, b.state.h.back(), b.state.entity, acts);
      for (Eigen::Index k = 0; k < probs.size(); ++k) {
        candidates.push_back({b.log_prob + std::log(probs(k)), acts[k].relation, acts[k].entity,
                              static_cast<int>(bi), static_cast<int>(k)});
      }
    }
    std::sort(candidates.begin(), candidates.end(), candidate_less);
    size_t keep = std::min<size_t>(beam_width, candidates.size());
    std::vector<Beam> next;
    next.reserve(keep);
    for (size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Beam nb = beams[c.parent];  // copies the advanced LSTM state
      nb.log_prob = c.log_prob;
      nb.state.prev_action.head(d) = params.relation_embeddings.row(c.relation).transpose();
      nb.state.prev_action.tail(d) = params.entity_embeddings.row(c.entity).transpose();
      nb.state.entity = c.entity;
      nb.entities.push_back(c.entity);
      nb.relations.push_back(c.relation);
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }

  std::vector<ScoredPath> paths;
  paths.reserve(beams.size());
  for (Beam& b : beams) {
    paths.push_back({std::move(b.entities), std::move(b.relations), b.log_prob, std::nullopt});
  }
  std::sort(paths.begin(), paths.end(), path_less);
  return paths;
}

void annotate_rule_matches(const Graph& graph, const RuleSet& rules,
                           std::vector<ScoredPath>& paths) {
  for (ScoredPath& p : paths) {
    p.rule_index = match_rules(graph, p.entities, p.relations, rules);
  }
}

std::vector<RankedTail> rank_targets(std::span<const ScoredPath> paths, bool prune_to_rules) {
  std::unordered_map<EntityId, double> best;
  for (const ScoredPath& p : paths) {
    if (prune_to_rules && !p.rule_index) continue;
    EntityId terminal = p.entities.back();
    auto [it, inserted] = best.try_emplace(terminal, p.log_prob);
    if (!inserted && p.log_prob > it->second) it->second = p.log_prob;
  }
  std::vector<RankedTail> out;
  out.reserve(best.size());
  for (const auto& [e, s] : best) out.push_back({e, s});
  std::sort(out.begin(), out.end(), [](const RankedTail& a, const RankedTail& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
  return out;
}

EvalReport filtered_metrics(std::vector<QueryRanking> rankings, const KnownTails& known) {
  EvalReport report;
  report.num_queries = rankings.size();
  double h1 = 0, h3 = 0, h10 = 0, rr = 0;
  for (QueryRanking& qr : rankings) {
    const EntityId t = qr.query.tail;
    const EntityId h = qr.query.head;
    std::optional<double> target_score;
    for (const RankedTail& c : qr.ranked) {
      if (c.entity == t) {
        target_score = c.score;
        break;
      }
    }
    if (target_score) {
      int above = 0;
      for (const RankedTail& c : qr.ranked) {
        if (c.entity == t) continue;
        if (known.contains(h, c.entity)) continue;  // filter other true tails
        if (c.score > *target_score) ++above;
      }
      int rank = 1 + above;
      qr.filtered_rank = rank;
      if (rank <= 1) h1 += 1;
      if (rank <= 3) h3 += 1;
      if (rank <= 10) h10 += 1;
      rr += 1.0 / rank;
    }
  }
  if (!rankings.empty()) {
    double n = static_cast<double>(rankings.size());
    report.hits1 = h1 / n;
    report.hits3 = h3 / n;
    report.hits10 = h10 / n;
    report.mrr = rr / n;
  }
  report.rankings = std::move(rankings);
  return report;
}

RuleDiagnostics rule_diagnostics(std::span<const ScoredPath> paths,
                                 std::span<const EntityId> targets) {
  if (paths.size() != targets.size()) throw_runtime("one target per path required");
  RuleDiagnostics diag;
  if (paths.empty()) return diag;
  int64_t matched = 0, matched_correct = 0;
  for (size_t i = 0; i < paths.size(); ++i) {
    if (!paths[i].rule_index) continue;
    ++matched;
    if (paths[i].entities.back() == targets[i]) ++matched_correct;
  }
  diag.match_rate = static_cast<double>(matched) / static_cast<double>(paths.size());
  if (matched > 0) {
    diag.accuracy = static_cast<double>(matched_correct) / static_cast<double>(matched);
  }
  return diag;
}

SplitEvaluation evaluate_split(const Dataset& ds, const RuleSet& rules, const PolicyConfig& cfg,
                               const PolicyParams& params, std::span<const Triple> queries,
                               int threads, bool keep_paths) {
  SplitEvaluation ev;
  size_t n = queries.size();
  std::vector<QueryRanking> standard(n), pruned(n);
  std::vector<std::vector<ScoredPath>> all_paths(n);

  parallel_chunks(static_cast<int64_t>(n), threads, [&](int64_t begin, int64_t end, int) {
    for (int64_t i = begin; i < end; ++i) {
      const Triple& q = queries[i];
      std::vector<ScoredPath> paths =
          beam_search(ds.graph, cfg, params, q.head, cfg.test_rollouts, cfg.path_length);
      annotate_rule_matches(ds.graph, rules, paths);
      standard[i] = {q, rank_targets(paths, false), std::nullopt};
      pruned[i] = {q, rank_targets(paths, true), std::nullopt};
      all_paths[i] = std::move(paths);
    }
  });

  int64_t total_paths = 0, matched = 0, matched_correct = 0;
  for (size_t i = 0; i < n; ++i) {
    total_paths += static_cast<int64_t>(all_paths[i].size());
    for (const ScoredPath& p : all_paths[i]) {
      if (p.rule_index) {
        ++matched;
        if (p.entities.back() == queries[i].tail) ++matched_correct;
      }
    }
  }

  ev.standard = filtered_metrics(std::move(standard), ds.all_known);
  ev.pruned = filtered_metrics(std::move(pruned), ds.all_known);
  for (EvalReport* r : {&ev.standard, &ev.pruned}) {
    r->rule_match_rate =
        total_paths ? static_cast<double>(matched) / static_cast<double>(total_paths) : 0.0;
    if (matched > 0) {
      r->rule_accuracy = static_cast<double>(matched_correct) / static_cast<double>(matched);
    }
  }
  if (keep_paths) ev.paths = std::move(all_paths);
  return ev;
}

void write_eval_csv(const std::filesystem::path& path, const SplitEvaluation& ev) {
  std::ofstream out(path);
  if (!out) throw_runtime("cannot write " + path.string());
  out << "variant,n_queries,hits1,hits3,hits10,mrr,rule_match_rate,rule_accuracy\n";
  auto row = [&](const char* variant, const EvalReport& r) {
    out << variant << ',' << r.num_queries << ',' << fmt_double(r.hits1) << ','
        << fmt_double(r.hits3) << ',' << fmt_double(r.hits10) << ',' << fmt_double(r.mrr) << ','
        << fmt_double(r.rule_match_rate) << ',' << fmt_optional(r.rule_accuracy) << '\n';
  };
  row("standard", ev.standard);
  row("pruned", ev.pruned);
}

void write_rankings_jsonl(const std::filesystem::path& path, const Dataset& ds,
                          std::span<const Triple> queries, const SplitEvaluation& ev,
                          const RuleSet& rules, int top_k) {
  if (ev.paths.size() != queries.size()) {
    throw_runtime("per-query paths were not kept; cannot write rankings");
  }
  std::ofstream out(path);
  if (!out) throw_runtime("cannot write " + path.string());

  for (size_t i = 0; i < queries.size(); ++i) {
    const Triple& q = queries[i];
    for (const char* variant : {"standard", "pruned"}) {
      bool pruned = std::string_view(variant) == "pruned";
      const QueryRanking& qr = pruned ? ev.pruned.rankings[i] : ev.standard.rankings[i];
      nlohmann::json rec;
      rec["query"] = {{"head", ds.entities.name(q.head)},
                      {"relation", ds.relations.name(q.relation)},
                      {"tail", ds.entities.name(q.tail)}};
      rec["variant"] = variant;
      if (qr.filtered_rank) rec["filtered_rank"] = *qr.filtered_rank;
      nlohmann::json cands = nlohmann::json::array();
      int emitted = 0;
      for (const RankedTail& c : qr.ranked) {
        if (emitted >= top_k) break;
        // Best path for this candidate under the active variant.
        const ScoredPath* best = nullptr;
        for (const ScoredPath& p : ev.paths[i]) {
          if (p.entities.back() != c.entity) continue;
          if (pruned && !p.rule_index) continue;
          if (!best || p.log_prob > best->log_prob) best = &p;
        }
        nlohmann::json jc;
        jc["entity"] = ds.entities.name(c.entity);
        jc["score"] = c.score;
        if (best) {
          jc["path"] = format_instance_path(ds.entities, ds.relations, best->entities,
                                            best->relations);
          if (best->rule_index) {
            jc["rule"] = format_metapath(ds.types, ds.relations,
                                         rules.rules[*best->rule_index].body);
          }
        }
        cands.push_back(std::move(jc));
        ++emitted;
      }
      rec["candidates"] = std::move(cands);
      out << rec.dump() << '\n';
    }
  }
}

}  // namespace polo
