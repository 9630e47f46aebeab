#pragma once
#include <filesystem>
#include <optional>
#include <span>

#include "kg.hpp"

namespace polo {

// Alternating type/relation sequence: types has exactly one more element than
// relations. A metapath of length 0 is a single type.
struct Metapath {
  std::vector<TypeId> types;
  std::vector<RelationId> relations;
  bool operator==(const Metapath&) const = default;
};

// Cyclic rule: when the body metapath connects X to Y, the head relation is
// predicted to hold between X and Y. The body's first/last types equal the
// head relation's domain/range.
struct Rule {
  RelationId head_relation = -1;
  TypeId head_source_type = -1;
  TypeId head_target_type = -1;
  Metapath body;
  double score = 0.0;
};

struct RuleSet {
  std::vector<Rule> rules;
  RelationId head_relation = -1;  // -1 when empty
  size_t max_body_length = 0;
  bool empty() const { return rules.empty(); }
  size_t size() const { return rules.size(); }
};

// Parses "score<TAB>head_relation<TAB>T1<TAB>r1<TAB>T2...<TAB>Tn+1" lines.
// Validation: score in (0, 1], known relations and types, one shared head
// relation equal to the dataset's query relation, body endpoints matching the
// query relation's domain/range, and pairwise distinct bodies.
RuleSet parse_rules(const std::filesystem::path& path, const Dataset& ds);

// Metapath of an instance path. With collapse_no_op, (NO_OP, same entity)
// steps are dropped first so a shorter rule body can match a fixed-length
// walk that idles on some steps.
Metapath path_metapath(const Graph& graph, std::span<const EntityId> entities,
                       std::span<const RelationId> relations, bool collapse_no_op);

// Index of the rule whose body equals the collapsed metapath of the walk, if
// any. Bodies are pairwise distinct, so at most one rule can match.
std::optional<int32_t> match_rules(const Graph& graph, std::span<const EntityId> entities,
                                   std::span<const RelationId> relations, const RuleSet& rules);

struct ConfidenceEstimate {
  double score;          // satisfied / completed
  int64_t body_support;  // completed samples
};

// Monte Carlo confidence: samples body-matching instance paths by uniform
// typed walks (uniform start among entities of the body's first type, then a
// uniform choice among type/relation-compatible edges at every step,
// restarting on dead ends, at most 100 restarts per sample), and reports the
// fraction whose endpoints satisfy the head relation in the graph. Samples
// draw from per-index RNG streams, so the result is independent of the
// degree of parallelism. Zero completed samples is a runtime error.
ConfidenceEstimate estimate_confidence(const Graph& graph, const Rule& rule, int64_t num_samples,
                                       uint64_t seed, int threads = 1);

}  // namespace polo
