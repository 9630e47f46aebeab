#pragma once
#include <filesystem>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "errors.hpp"
#include "ids.hpp"

namespace polo {

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  auto operator<=>(const Triple&) const = default;
};

// One traversable move: follow `relation` to `entity`.
struct Action {
  RelationId relation;
  EntityId entity;
  auto operator<=>(const Action&) const = default;
};

// Reads "head<TAB>relation<TAB>tail" lines, interning names as it goes.
// Returns triples in file order. A line with the wrong field count is a data
// error that names the file and 1-based line number.
std::vector<Triple> load_triples(const std::filesystem::path& path, NameDict& entities,
                                 RelationDict& relations);

// Reads a two-column "entity<TAB>type" file into an explicit typing map.
std::unordered_map<std::string, std::string> load_type_map(const std::filesystem::path& path);

// Resolves one type per entity. The primary source is the "Type::Local" name
// prefix; the explicit map overrides entities without a prefix and must agree
// with the prefix when both are present. Failure to derive a type is an error
// naming the entity.
std::vector<TypeId> resolve_types(const NameDict& entities, NameDict& types,
                                  const std::unordered_map<std::string, std::string>& explicit_map);

// Immutable directed multigraph over dense entity ids. Adjacency is stored in
// CSR form; each entity's segment holds its out-edges sorted by (relation id,
// tail id) with duplicates removed, followed by exactly one (NO_OP, self)
// entry so that the action set of every entity is its edges plus a stay-put
// move in a stable order.
class Graph {
public:
  Graph() = default;
  Graph(size_t num_entities, std::span<const Triple> base_triples, const RelationDict& relations,
        std::vector<TypeId> type_of, bool add_inverses,
        const std::unordered_set<RelationId>& no_inverse = {});

  // Out-edges plus the trailing self-loop.
  std::span<const Action> actions(EntityId e) const;
  // Out-edges only.
  std::span<const Action> out_edges(EntityId e) const;
  bool has_edge(EntityId head, RelationId relation, EntityId tail) const;
  TypeId type_of(EntityId e) const { return type_of_.at(e); }

  size_t num_entities() const { return type_of_.size(); }
  size_t num_base_triples() const { return num_base_triples_; }
  size_t num_directed_edges() const { return num_directed_; }
  // Undirected degree (in + out) counted over base triples only; inverse
  // edges and self-loops do not contribute.
  int64_t base_degree(EntityId e) const { return base_out_.at(e) + base_in_.at(e); }

private:
  std::vector<int64_t> offsets_;
  std::vector<Action> edges_;
  std::vector<TypeId> type_of_;
  std::vector<int32_t> base_out_;
  std::vector<int32_t> base_in_;
  size_t num_base_triples_ = 0;
  size_t num_directed_ = 0;
};

Graph build_graph(std::span<const Triple> base_triples, size_t num_entities,
                  const RelationDict& relations, std::vector<TypeId> type_of, bool add_inverses,
                  const std::unordered_set<RelationId>& no_inverse = {});

struct TypeStat {
  TypeId type;
  int64_t entity_count;
  double avg_degree;
};

// Entity count and average undirected base degree per type, ordered by type
// id. Empty graph yields an empty table.
std::vector<TypeStat> type_statistics(const Graph& graph);

// Set of (head, tail) pairs of the query relation across all splits; used for
// filtered ranking.
class KnownTails {
public:
  void add(EntityId h, EntityId t) { set_.insert(key(h, t)); }
  bool contains(EntityId h, EntityId t) const { return set_.count(key(h, t)) > 0; }
  size_t size() const { return set_.size(); }

private:
  static uint64_t key(EntityId h, EntityId t) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(h)) << 32) | static_cast<uint32_t>(t);
  }
  std::unordered_set<uint64_t> set_;
};

// A loaded benchmark directory: dictionaries, the rollout graph, and the
// query-relation splits. The rollout graph is built from graph.txt plus the
// train split; valid/test query triples are excluded from it by construction
// so evaluation answers are never directly reachable as edges.
struct Dataset {
  NameDict entities;
  RelationDict relations;
  NameDict types;
  Graph graph;
  std::vector<Triple> train, valid, test;
  RelationId query_relation = -1;
  std::optional<TypeId> query_domain;
  std::optional<TypeId> query_range;
  KnownTails all_known;

  // dir must contain train.txt; valid.txt, test.txt, graph.txt and types.tsv
  // are optional. Split files may only contain the target relation.
  static Dataset load(const std::filesystem::path& dir, const std::string& target_relation);
};

}  // namespace polo
