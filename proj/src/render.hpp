#pragma once
#include <span>
#include <string>

#include "ids.hpp"
#include "rules.hpp"

namespace polo {

// Renders "(A —r1→ B —r2→ C)" for an instance path.
inline std::string format_instance_path(const NameDict& entities, const RelationDict& relations,
                                        std::span<const EntityId> ents,
                                        std::span<const RelationId> rels) {
  std::string out = "(" + entities.name(ents[0]);
  for (size_t i = 0; i < rels.size(); ++i) {
    out += " —" + relations.name(rels[i]) + "→ " + entities.name(ents[i + 1]);
  }
  out += ")";
  return out;
}

// Same arrow form over a metapath's type sequence.
inline std::string format_metapath(const NameDict& types, const RelationDict& relations,
                                   const Metapath& mp) {
  std::string out = "(" + types.name(mp.types[0]);
  for (size_t i = 0; i < mp.relations.size(); ++i) {
    out += " —" + relations.name(mp.relations[i]) + "→ " + types.name(mp.types[i + 1]);
  }
  out += ")";
  return out;
}

}  // namespace polo
