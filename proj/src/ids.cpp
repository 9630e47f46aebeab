#include "ids.hpp"

#include "errors.hpp"

namespace polo {

int32_t NameDict::intern(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  int32_t id = static_cast<int32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<int32_t> NameDict::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& NameDict::name(int32_t id) const {
  if (id < 0 || static_cast<size_t>(id) >= names_.size()) {
    throw_runtime("name lookup for out-of-range id " + std::to_string(id));
  }
  return names_[id];
}

RelationDict::RelationDict() {
  names_.intern(kNoOpName);
  inverse_of_.push_back(kNoOp);
  is_inverse_.push_back(false);
}

RelationId RelationDict::intern_base(std::string_view name) {
  if (generated_) {
    throw_runtime("cannot add relation '" + std::string(name) +
                  "' after inverses were generated");
  }
  if (name == kNoOpName) {
    throw_data("relation name 'NO_OP' is reserved");
  }
  size_t before = names_.size();
  RelationId id = names_.intern(name);
  if (names_.size() > before) {
    inverse_of_.push_back(-1);
    is_inverse_.push_back(false);
  }
  return id;
}

void RelationDict::generate_inverses(const std::unordered_set<RelationId>& no_inverse) {
  if (generated_) throw_runtime("inverses already generated");
  size_t base_count = names_.size();
  for (RelationId r = 1; r < static_cast<RelationId>(base_count); ++r) {
    if (no_inverse.count(r)) continue;
    std::string inv_name = names_.name(r) + "_inv";
    if (names_.find(inv_name)) {
      throw_data("relation name collision: '" + inv_name +
                 "' already exists and would clash with the generated inverse of '" +
                 names_.name(r) + "'");
    }
    RelationId inv = names_.intern(inv_name);
    inverse_of_.push_back(r);
    is_inverse_.push_back(true);
    inverse_of_[r] = inv;
  }
  generated_ = true;
}

std::optional<RelationId> RelationDict::find(std::string_view name) const {
  return names_.find(name);
}

}  // namespace polo
