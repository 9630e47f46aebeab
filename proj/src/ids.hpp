#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace polo {

using EntityId = int32_t;
using RelationId = int32_t;
using TypeId = int32_t;

// Bijective name <-> id mapping. Ids are dense, contiguous from 0, assigned
// in first-appearance order so two loads of the same files agree exactly.
class NameDict {
public:
  int32_t intern(std::string_view name);
  std::optional<int32_t> find(std::string_view name) const;
  const std::string& name(int32_t id) const;
  size_t size() const { return names_.size(); }

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int32_t> ids_;
};

// Relation dictionary with inverse bookkeeping. Id 0 is the reserved NO_OP
// relation (the stay-in-place self-loop), which counts as its own inverse.
// Base relations come from input files; inverses are generated afterwards
// with an "_inv" suffix and checked for name collisions.
class RelationDict {
public:
  static constexpr RelationId kNoOp = 0;
  static constexpr const char* kNoOpName = "NO_OP";

  RelationDict();

  RelationId intern_base(std::string_view name);
  void generate_inverses(const std::unordered_set<RelationId>& no_inverse = {});

  std::optional<RelationId> find(std::string_view name) const;
  const std::string& name(RelationId id) const { return names_.name(id); }
  // -1 when the relation deliberately has no inverse.
  RelationId inverse_of(RelationId id) const { return inverse_of_.at(id); }
  bool is_inverse(RelationId id) const { return is_inverse_.at(id); }
  size_t size() const { return names_.size(); }
  bool inverses_generated() const { return generated_; }

private:
  NameDict names_;
  std::vector<RelationId> inverse_of_;
  std::vector<bool> is_inverse_;
  bool generated_ = false;
};

}  // namespace polo
