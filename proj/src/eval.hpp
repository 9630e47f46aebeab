#pragma once
#include <filesystem>
#include <optional>

#include "policy.hpp"
#include "rules.hpp"

namespace polo {

struct ScoredPath {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
  double log_prob = 0.0;
  std::optional<int32_t> rule_index;  // filled by annotate_rule_matches
};

// Deterministic beam search over full action sets (self-loop included).
// Candidates tie-break by (relation id, entity id), then by parent beam
// index; the returned paths are sorted by descending log-probability with
// ties resolved lexicographically on the (relation, entity) step sequence.
std::vector<ScoredPath> beam_search(const Graph& graph, const PolicyConfig& cfg,
                                    const PolicyParams& params, EntityId source, int beam_width,
                                    int path_length);

void annotate_rule_matches(const Graph& graph, const RuleSet& rules,
                           std::vector<ScoredPath>& paths);

struct RankedTail {
  EntityId entity;
  double score;  // best log-probability among paths ending at the entity
};

// Candidate tails ordered by (score desc, entity id asc). With prune_to_rules
// only paths that matched a rule contribute; an all-pruned set yields an
// empty ranking.
std::vector<RankedTail> rank_targets(std::span<const ScoredPath> paths, bool prune_to_rules);

struct QueryRanking {
  Triple query;
  std::vector<RankedTail> ranked;
  std::optional<int> filtered_rank;  // unset when the true tail never appears
};

struct EvalReport {
  size_t num_queries = 0;
  double hits1 = 0.0, hits3 = 0.0, hits10 = 0.0, mrr = 0.0;
  double rule_match_rate = 0.0;
  std::optional<double> rule_accuracy;
  std::vector<QueryRanking> rankings;
};

// Tail-sided filtered ranking. For each query (h, r, t), every known true
// tail other than t is removed from the candidates, and
//   rank(t) = 1 + #candidates scored strictly above t.
// A query whose true tail never appears contributes 0 to hits@k and MRR.
EvalReport filtered_metrics(std::vector<QueryRanking> rankings, const KnownTails& known);

struct RuleDiagnostics {
  double match_rate = 0.0;
  std::optional<double> accuracy;  // absent when nothing matched
};

// Share of paths whose metapath matched a rule, and among those the share
// that ended at the query's true tail.
RuleDiagnostics rule_diagnostics(std::span<const ScoredPath> paths,
                                 std::span<const EntityId> targets);

struct SplitEvaluation {
  EvalReport standard;
  EvalReport pruned;
  // Per-query beam paths, kept only when requested (report writing).
  std::vector<std::vector<ScoredPath>> paths;
};

// Beam search + both ranking variants + filtered metrics over a query list.
// The beam width is the test rollout budget. Queries evaluate independently,
// so the result does not depend on the thread count.
SplitEvaluation evaluate_split(const Dataset& ds, const RuleSet& rules, const PolicyConfig& cfg,
                               const PolicyParams& params, std::span<const Triple> queries,
                               int threads, bool keep_paths);

// "variant,n_queries,hits1,hits3,hits10,mrr,rule_match_rate,rule_accuracy"
// with one row per ranking variant.
void write_eval_csv(const std::filesystem::path& path, const SplitEvaluation& ev);

// One JSON object per query and variant: the query, the top-k candidates
// with scores, and for each candidate its best path rendered as
// "(E1 —r1→ E2 —r2→ ...)" plus the matched rule body, if any.
void write_rankings_jsonl(const std::filesystem::path& path, const Dataset& ds,
                          std::span<const Triple> queries, const SplitEvaluation& ev,
                          const RuleSet& rules, int top_k = 10);

}  // namespace polo
