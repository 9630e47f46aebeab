#include "kg.hpp"

#include <algorithm>
#include <fstream>

namespace polo {
namespace {

// Splits a line on TAB, enforcing the exact field count.
std::vector<std::string_view> split_fields(std::string_view line, size_t expected,
                                           const std::filesystem::path& path, size_t line_no) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (fields.size() != expected) {
    throw_data(path.string() + ":" + std::to_string(line_no) + ": expected " +
               std::to_string(expected) + " tab-separated fields, got " +
               std::to_string(fields.size()));
  }
  for (auto f : fields) {
    if (f.empty()) {
      throw_data(path.string() + ":" + std::to_string(line_no) + ": empty field");
    }
  }
  return fields;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open " + path.string());
  return in;
}

// Strips a trailing carriage return so CRLF files load the same as LF ones.
void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::vector<Triple> load_triples(const std::filesystem::path& path, NameDict& entities,
                                 RelationDict& relations) {
  std::ifstream in = open_or_throw(path);
  std::vector<Triple> triples;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    auto f = split_fields(line, 3, path, line_no);
    Triple t;
    t.head = entities.intern(f[0]);
    t.relation = relations.intern_base(f[1]);
    t.tail = entities.intern(f[2]);
    triples.push_back(t);
  }
  return triples;
}

std::unordered_map<std::string, std::string> load_type_map(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::unordered_map<std::string, std::string> map;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    auto f = split_fields(line, 2, path, line_no);
    auto [it, inserted] = map.emplace(std::string(f[0]), std::string(f[1]));
    if (!inserted && it->second != f[1]) {
      throw_data(path.string() + ":" + std::to_string(line_no) + ": conflicting types for '" +
                 std::string(f[0]) + "'");
    }
  }
  return map;
}

std::vector<TypeId> resolve_types(const NameDict& entities, NameDict& types,
                                  const std::unordered_map<std::string, std::string>& explicit_map) {
  std::vector<TypeId> out(entities.size(), -1);
  for (size_t e = 0; e < entities.size(); ++e) {
    const std::string& name = entities.name(static_cast<int32_t>(e));
    std::optional<std::string> prefix_type;
    if (size_t pos = name.find("::"); pos != std::string::npos && pos > 0) {
      prefix_type = name.substr(0, pos);
    }
    auto it = explicit_map.find(name);
    if (it != explicit_map.end()) {
      if (prefix_type && *prefix_type != it->second) {
        throw_data("entity '" + name + "' has prefix type '" + *prefix_type +
                   "' but the type map says '" + it->second + "'");
      }
      out[e] = types.intern(it->second);
    } else if (prefix_type) {
      out[e] = types.intern(*prefix_type);
    } else {
      throw_data("no type derivable for entity '" + name +
                 "' (no 'Type::' prefix and no entry in the type map)");
    }
  }
  return out;
}

Graph::Graph(size_t num_entities, std::span<const Triple> base_triples,
             const RelationDict& relations, std::vector<TypeId> type_of, bool add_inverses,
             const std::unordered_set<RelationId>& no_inverse)
    : type_of_(std::move(type_of)) {
  if (type_of_.size() != num_entities) {
    throw_runtime("type vector size does not match entity count");
  }
  // Dedup base triples first so degree statistics and inverses see each edge
  // once regardless of input repetition.
  std::vector<Triple> base(base_triples.begin(), base_triples.end());
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  num_base_triples_ = base.size();

  base_out_.assign(num_entities, 0);
  base_in_.assign(num_entities, 0);
  std::vector<std::pair<EntityId, Action>> directed;
  directed.reserve(base.size() * (add_inverses ? 2 : 1));
  for (const Triple& t : base) {
    if (t.head < 0 || static_cast<size_t>(t.head) >= num_entities || t.tail < 0 ||
        static_cast<size_t>(t.tail) >= num_entities) {
      throw_runtime("triple references an entity id outside the graph");
    }
    ++base_out_[t.head];
    ++base_in_[t.tail];
    directed.push_back({t.head, {t.relation, t.tail}});
    if (add_inverses && !no_inverse.count(t.relation)) {
      RelationId inv = relations.inverse_of(t.relation);
      if (inv >= 0) directed.push_back({t.tail, {inv, t.head}});
    }
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  num_directed_ = directed.size();

  offsets_.assign(num_entities + 1, 0);
  edges_.reserve(directed.size() + num_entities);
  size_t pos = 0;
  for (size_t e = 0; e < num_entities; ++e) {
    offsets_[e] = static_cast<int64_t>(edges_.size());
    while (pos < directed.size() && directed[pos].first == static_cast<EntityId>(e)) {
      edges_.push_back(directed[pos].second);
      ++pos;
    }
    edges_.push_back({RelationDict::kNoOp, static_cast<EntityId>(e)});
  }
  offsets_[num_entities] = static_cast<int64_t>(edges_.size());
}

std::span<const Action> Graph::actions(EntityId e) const {
  return {edges_.data() + offsets_.at(e), static_cast<size_t>(offsets_.at(e + 1) - offsets_.at(e))};
}

std::span<const Action> Graph::out_edges(EntityId e) const {
  auto all = actions(e);
  return all.subspan(0, all.size() - 1);  // drop the trailing self-loop
}

bool Graph::has_edge(EntityId head, RelationId relation, EntityId tail) const {
  auto edges = out_edges(head);
  Action probe{relation, tail};
  return std::binary_search(edges.begin(), edges.end(), probe);
}

Graph build_graph(std::span<const Triple> base_triples, size_t num_entities,
                  const RelationDict& relations, std::vector<TypeId> type_of, bool add_inverses,
                  const std::unordered_set<RelationId>& no_inverse) {
  return Graph(num_entities, base_triples, relations, std::move(type_of), add_inverses,
               no_inverse);
}

std::vector<TypeStat> type_statistics(const Graph& graph) {
  std::unordered_map<TypeId, std::pair<int64_t, int64_t>> acc;  // type -> (count, degree sum)
  for (size_t e = 0; e < graph.num_entities(); ++e) {
    auto& slot = acc[graph.type_of(static_cast<EntityId>(e))];
    slot.first += 1;
    slot.second += graph.base_degree(static_cast<EntityId>(e));
  }
  std::vector<TypeStat> out;
  out.reserve(acc.size());
  for (const auto& [type, cd] : acc) {
    out.push_back({type, cd.first, static_cast<double>(cd.second) / static_cast<double>(cd.first)});
  }
  std::sort(out.begin(), out.end(), [](const TypeStat& a, const TypeStat& b) { return a.type < b.type; });
  return out;
}

Dataset Dataset::load(const std::filesystem::path& dir, const std::string& target_relation) {
  if (!std::filesystem::is_directory(dir)) {
    throw_data("data directory not found: " + dir.string());
  }
  Dataset ds;
  auto path = [&](const char* f) { return dir / f; };
  if (!std::filesystem::exists(path("train.txt"))) {
    throw_data("missing required file: " + (dir / "train.txt").string());
  }
  ds.train = load_triples(path("train.txt"), ds.entities, ds.relations);
  auto load_optional = [&](const char* f) -> std::vector<Triple> {
    if (!std::filesystem::exists(path(f))) return {};
    return load_triples(path(f), ds.entities, ds.relations);
  };
  ds.valid = load_optional("valid.txt");
  ds.test = load_optional("test.txt");
  std::vector<Triple> background = load_optional("graph.txt");

  ds.query_relation = ds.relations.intern_base(target_relation);

  // Splits must contain the target relation only, once per (head, tail), and
  // must not leak across each other.
  std::unordered_set<uint64_t> seen;
  auto check_split = [&](std::vector<Triple>& split, const char* name) {
    std::vector<Triple> kept;
    std::unordered_set<uint64_t> mine;
    for (const Triple& t : split) {
      if (t.relation != ds.query_relation) {
        throw_data(std::string(name) + " contains relation '" + ds.relations.name(t.relation) +
                   "' but the target relation is '" + target_relation + "'");
      }
      uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(t.head)) << 32) |
                     static_cast<uint32_t>(t.tail);
      if (!mine.insert(key).second) continue;  // duplicate within the split
      if (seen.count(key)) {
        throw_data("query triple " + ds.entities.name(t.head) + " -> " + ds.entities.name(t.tail) +
                   " appears in more than one split");
      }
      kept.push_back(t);
    }
    for (uint64_t k : mine) seen.insert(k);
    split = std::move(kept);
  };
  check_split(ds.train, "train.txt");
  check_split(ds.valid, "valid.txt");
  check_split(ds.test, "test.txt");

  for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
    for (const Triple& t : *split) ds.all_known.add(t.head, t.tail);
  }

  // Domain/range of the query relation, inferred from the splits. Needed to
  // validate rule cyclicity; left unset when the splits are empty.
  ds.relations.generate_inverses();
  std::unordered_map<std::string, std::string> type_map;
  if (std::filesystem::exists(path("types.tsv"))) {
    type_map = load_type_map(path("types.tsv"));
  }
  std::vector<TypeId> type_of = resolve_types(ds.entities, ds.types, type_map);
  for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
    for (const Triple& t : *split) {
      TypeId d = type_of[t.head], r = type_of[t.tail];
      if (ds.query_domain && *ds.query_domain != d) {
        throw_data("query relation has mixed head types ('" + ds.types.name(*ds.query_domain) +
                   "' vs '" + ds.types.name(d) + "')");
      }
      if (ds.query_range && *ds.query_range != r) {
        throw_data("query relation has mixed tail types ('" + ds.types.name(*ds.query_range) +
                   "' vs '" + ds.types.name(r) + "')");
      }
      ds.query_domain = d;
      ds.query_range = r;
    }
  }

  // Rollout graph: background edges plus train query edges. Valid/test query
  // edges never enter, so their answers stay hidden during walks.
  std::unordered_set<uint64_t> held_out;
  for (const auto* split : {&ds.valid, &ds.test}) {
    for (const Triple& t : *split) {
      held_out.insert((static_cast<uint64_t>(static_cast<uint32_t>(t.head)) << 32) |
                      static_cast<uint32_t>(t.tail));
    }
  }
  std::vector<Triple> base;
  base.reserve(background.size() + ds.train.size());
  for (const auto* src : {&background, &ds.train}) {
    for (const Triple& t : *src) {
      if (t.relation == ds.query_relation) {
        uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(t.head)) << 32) |
                       static_cast<uint32_t>(t.tail);
        if (held_out.count(key)) continue;
      }
      base.push_back(t);
    }
  }
  ds.graph = Graph(ds.entities.size(), base, ds.relations, std::move(type_of), true);
  return ds;
}

}  // namespace polo
