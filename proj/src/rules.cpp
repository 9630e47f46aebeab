#include "rules.hpp"

#include <atomic>
#include <fstream>

#include "parallel.hpp"
#include "rng.hpp"

namespace polo {
namespace {

void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

RuleSet parse_rules(const std::filesystem::path& path, const Dataset& ds) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open rules file: " + path.string());

  RuleSet out;
  std::string line;
  size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw_data(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    auto f = split_tabs(line);
    // score, head, then an alternating T r T ... T sequence: 2n+3 fields.
    if (f.size() < 5 || f.size() % 2 == 0) {
      fail("expected 'score, head relation, T1, r1, ..., Tn+1' (odd field count >= 5), got " +
           std::to_string(f.size()) + " fields");
    }
    Rule rule;
    try {
      size_t used = 0;
      rule.score = std::stod(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument(f[0]);
    } catch (const std::exception&) {
      fail("cannot parse score '" + f[0] + "'");
    }
    if (!(rule.score > 0.0 && rule.score <= 1.0)) {
      fail("score must be in (0, 1], got " + f[0]);
    }
    auto head = ds.relations.find(f[1]);
    if (!head) fail("unknown head relation '" + f[1] + "'");
    rule.head_relation = *head;
    if (rule.head_relation != ds.query_relation) {
      fail("head relation '" + f[1] + "' does not match the dataset's query relation '" +
           ds.relations.name(ds.query_relation) + "'");
    }
    if (!ds.query_domain || !ds.query_range) {
      fail("cannot validate rule endpoints: the dataset has no query triples to "
           "establish the query relation's domain and range");
    }
    rule.head_source_type = *ds.query_domain;
    rule.head_target_type = *ds.query_range;

    for (size_t i = 2; i < f.size(); ++i) {
      if ((i - 2) % 2 == 0) {
        auto type = ds.types.find(f[i]);
        if (!type) fail("unknown type '" + f[i] + "'");
        rule.body.types.push_back(*type);
      } else {
        auto rel = ds.relations.find(f[i]);
        if (!rel) fail("unknown relation '" + f[i] + "'");
        rule.body.relations.push_back(*rel);
      }
    }
    if (rule.body.types.front() != rule.head_source_type ||
        rule.body.types.back() != rule.head_target_type) {
      fail("rule is not cyclic: body runs " + ds.types.name(rule.body.types.front()) + " -> " +
           ds.types.name(rule.body.types.back()) + " but the head relation connects " +
           ds.types.name(rule.head_source_type) + " -> " + ds.types.name(rule.head_target_type));
    }
    for (const Rule& prev : out.rules) {
      if (prev.body == rule.body) fail("duplicate rule body");
    }
    out.max_body_length = std::max(out.max_body_length, rule.body.relations.size());
    out.rules.push_back(std::move(rule));
  }
  if (!out.rules.empty()) out.head_relation = out.rules.front().head_relation;
  return out;
}

Metapath path_metapath(const Graph& graph, std::span<const EntityId> entities,
                       std::span<const RelationId> relations, bool collapse_no_op) {
  if (entities.size() != relations.size() + 1) {
    throw_runtime("instance path must have one more entity than relations");
  }
  Metapath mp;
  mp.types.push_back(graph.type_of(entities[0]));
  for (size_t i = 0; i < relations.size(); ++i) {
    if (collapse_no_op && relations[i] == RelationDict::kNoOp && entities[i + 1] == entities[i]) {
      continue;
    }
    mp.relations.push_back(relations[i]);
    mp.types.push_back(graph.type_of(entities[i + 1]));
  }
  return mp;
}

std::optional<int32_t> match_rules(const Graph& graph, std::span<const EntityId> entities,
                                   std::span<const RelationId> relations, const RuleSet& rules) {
  if (rules.empty()) return std::nullopt;
  Metapath mp = path_metapath(graph, entities, relations, /*collapse_no_op=*/true);
  for (size_t i = 0; i < rules.rules.size(); ++i) {
    if (rules.rules[i].body == mp) return static_cast<int32_t>(i);
  }
  return std::nullopt;
}

ConfidenceEstimate estimate_confidence(const Graph& graph, const Rule& rule, int64_t num_samples,
                                       uint64_t seed, int threads) {
  if (num_samples < 1) throw_usage("confidence estimation needs at least one sample");
  const Metapath& body = rule.body;

  std::vector<EntityId> starts;
  for (size_t e = 0; e < graph.num_entities(); ++e) {
    if (graph.type_of(static_cast<EntityId>(e)) == body.types.front()) {
      starts.push_back(static_cast<EntityId>(e));
    }
  }

  constexpr int kRestartsPerSample = 100;
  std::atomic<int64_t> completed{0}, satisfied{0};
  parallel_chunks(num_samples, threads, [&](int64_t begin, int64_t end, int) {
    std::vector<EntityId> candidates;
    for (int64_t s = begin; s < end; ++s) {
      if (starts.empty()) break;
      Rng rng = Rng::derive(seed, "confidence", static_cast<uint64_t>(s));
      for (int attempt = 0; attempt <= kRestartsPerSample; ++attempt) {
        EntityId first = starts[rng.below(starts.size())];
        EntityId cur = first;
        bool dead = false;
        for (size_t step = 0; step < body.relations.size(); ++step) {
          candidates.clear();
          for (const Action& a : graph.out_edges(cur)) {
            if (a.relation == body.relations[step] &&
                graph.type_of(a.entity) == body.types[step + 1]) {
              candidates.push_back(a.entity);
            }
          }
          if (candidates.empty()) {
            dead = true;
            break;
          }
          cur = candidates[rng.below(candidates.size())];
        }
        if (!dead) {
          completed.fetch_add(1, std::memory_order_relaxed);
          if (graph.has_edge(first, rule.head_relation, cur)) {
            satisfied.fetch_add(1, std::memory_order_relaxed);
          }
          break;
        }
      }
    }
  });

  int64_t done = completed.load();
  if (done == 0) {
    throw_runtime("no body-matching path found within the restart budget; body support is zero");
  }
  return {static_cast<double>(satisfied.load()) / static_cast<double>(done), done};
}

}  // namespace polo
