#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "linknbed/common.hpp"

namespace linknbed {

// Attribute value tokens beyond the frequency cap all map to this token.
constexpr const char* kOovToken = "<oov>";

// Dense 0-based id <-> string map for one vocabulary category.
class IdMap {
 public:
  int32_t intern(const std::string& s) {
    auto it = ids_.find(s);
    if (it != ids_.end()) return it->second;
    int32_t id = int32_t(names_.size());
    names_.push_back(s);
    ids_.emplace(s, id);
    return id;
  }

  int32_t find(const std::string& s) const {
    auto it = ids_.find(s);
    return it == ids_.end() ? kInvalidId : it->second;
  }

  const std::string& name(int32_t id) const {
    LNB_REQUIRE(id >= 0 && id < int32_t(names_.size()), "id out of range");
    return names_[size_t(id)];
  }

  int32_t size() const { return int32_t(names_.size()); }

  uint64_t digest() const {
    uint64_t h = fnv1a64_u64(names_.size());
    for (const auto& n : names_) {
      h = fnv1a64(n, h);
      h = fnv1a64_u64(0x1f, h);
    }
    return h;
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int32_t> ids_;
};

// Shared id spaces across both graphs. Each entity carries a graph-of-origin
// tag; everything else (relations, types, attribute keys, value tokens) is a
// single pooled vocabulary.
struct Vocab {
  IdMap entities;
  IdMap relations;
  IdMap types;
  IdMap attr_keys;
  IdMap attr_values;
  std::vector<GraphTag> entity_graph;  // parallel to entities
  TokenId oov_token = kInvalidId;      // always present once attributes are loaded

  GraphTag graph_of(EntityId e) const {
    LNB_REQUIRE(e >= 0 && e < int32_t(entity_graph.size()), "entity id out of range");
    return entity_graph[size_t(e)];
  }

  // Entity digest folds in graph tags so the same names with different
  // origins count as a different dataset.
  std::array<uint64_t, 5> digests() const {
    uint64_t ent = entities.digest();
    for (GraphTag g : entity_graph) ent = fnv1a64_u64(uint64_t(g), ent);
    return {ent, relations.digest(), types.digest(), attr_keys.digest(),
            attr_values.digest()};
  }

  uint64_t combined_digest() const {
    uint64_t h = fnv1a64_u64(0x4c4e4245);
    for (uint64_t d : digests()) h = fnv1a64_u64(d, h);
    return h;
  }
};

}  // namespace linknbed
