#pragma once

#include <algorithm>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/vocab.hpp"

namespace linknbed {

struct Triple {
  EntityId subject = kInvalidId;
  RelationId relation = kInvalidId;
  EntityId object = kInvalidId;
  GraphTag graph = GraphTag::X;

  friend bool operator==(const Triple& a, const Triple& b) {
    return a.subject == b.subject && a.relation == b.relation &&
           a.object == b.object && a.graph == b.graph;
  }
};

// Membership identity: (subject, relation, object). The graph tag is implied
// by the endpoints and never part of the key.
struct TripleKey {
  EntityId s;
  RelationId r;
  EntityId o;
  friend bool operator==(const TripleKey& a, const TripleKey& b) {
    return a.s == b.s && a.r == b.r && a.o == b.o;
  }
};

struct TripleKeyHash {
  size_t operator()(const TripleKey& k) const {
    uint64_t h = fnv1a64_u64(uint64_t(uint32_t(k.s)));
    h = fnv1a64_u64(uint64_t(uint32_t(k.r)), h);
    h = fnv1a64_u64(uint64_t(uint32_t(k.o)), h);
    return size_t(h);
  }
};

struct AttributeRecord {
  EntityId entity = kInvalidId;
  AttrKeyId key = kInvalidId;
  std::vector<TokenId> value_tokens;  // non-empty by construction
};

struct LabelRecord {
  EntityId x = kInvalidId;  // graph-X side
  EntityId y = kInvalidId;  // graph-Y side
  bool positive = false;
};

// Cross-graph linkage labels. `positives` is the symmetric closure of the
// positive records (at most one partner per entity). `negatives` is a
// per-entity partner list; whether a record lands on one side or both is the
// builder's choice (generation keeps the sampled side only, ingestion adds
// both).
struct LinkageLabelSet {
  std::vector<LabelRecord> records;
  std::unordered_map<EntityId, EntityId> positives;
  std::unordered_map<EntityId, std::vector<EntityId>> negatives;

  const EntityId* positive_partner(EntityId e) const {
    auto it = positives.find(e);
    return it == positives.end() ? nullptr : &it->second;
  }

  std::span<const EntityId> negatives_of(EntityId e) const {
    auto it = negatives.find(e);
    if (it == negatives.end()) return {};
    return {it->second.data(), it->second.size()};
  }

  bool empty() const { return records.empty(); }
};

// Builds the lookup maps from a record list. Validates: pairs span graphs,
// at most one positive partner per entity, no pair both positive and
// negative. With `symmetric_negatives` each negative record feeds both
// endpoints' lists.
inline LinkageLabelSet build_label_set(std::vector<LabelRecord> records,
                                       const Vocab& vocab,
                                       bool symmetric_negatives) {
  LinkageLabelSet out;
  std::unordered_set<uint64_t> neg_pairs;
  std::unordered_set<uint64_t> pos_pairs;
  auto pair_key = [](EntityId a, EntityId b) {
    if (a > b) std::swap(a, b);
    return (uint64_t(uint32_t(a)) << 32) | uint64_t(uint32_t(b));
  };
  auto push_negative = [&out](EntityId e, EntityId partner) {
    auto& lst = out.negatives[e];
    if (std::find(lst.begin(), lst.end(), partner) == lst.end()) lst.push_back(partner);
  };
  std::vector<LabelRecord> kept;
  kept.reserve(records.size());
  for (const LabelRecord& rec : records) {
    if (vocab.graph_of(rec.x) == vocab.graph_of(rec.y))
      throw ValidationError("label pair does not span graphs: " +
                            vocab.entities.name(rec.x) + " / " +
                            vocab.entities.name(rec.y));
    uint64_t key = pair_key(rec.x, rec.y);
    if (rec.positive) {
      if (pos_pairs.count(key)) continue;  // identical repeat
      auto it = out.positives.find(rec.x);
      if (it != out.positives.end() && it->second != rec.y)
        throw ValidationError("entity has more than one positive label: " +
                              vocab.entities.name(rec.x));
      it = out.positives.find(rec.y);
      if (it != out.positives.end() && it->second != rec.x)
        throw ValidationError("entity has more than one positive label: " +
                              vocab.entities.name(rec.y));
      out.positives[rec.x] = rec.y;
      out.positives[rec.y] = rec.x;
      pos_pairs.insert(key);
      kept.push_back(rec);
    } else {
      if (neg_pairs.count(key)) continue;
      neg_pairs.insert(key);
      push_negative(rec.x, rec.y);
      if (symmetric_negatives) push_negative(rec.y, rec.x);
      kept.push_back(rec);
    }
  }
  for (uint64_t key : neg_pairs) {
    if (pos_pairs.count(key))
      throw ValidationError("label pair marked both positive and negative");
  }
  out.records = std::move(kept);
  return out;
}

// Combined triple set over both graphs plus attributes and entity types.
// Immutable once finalized; all readers may share it freely.
class MultiGraphStore {
 public:
  enum class AddResult { Added, SelfLoop, Duplicate };

  void set_entity_count(int32_t n) {
    entity_types_.resize(size_t(n));
    triples_of_.resize(size_t(n));
    attrs_of_.resize(size_t(n));
  }

  AddResult add_triple(const Triple& t) {
    if (t.subject == t.object) return AddResult::SelfLoop;
    TripleKey key{t.subject, t.relation, t.object};
    if (!keys_.insert(key).second) return AddResult::Duplicate;
    int32_t idx = int32_t(triples_.size());
    triples_.push_back(t);
    triples_of_[size_t(t.subject)].push_back(idx);
    triples_of_[size_t(t.object)].push_back(idx);
    return AddResult::Added;
  }

  void add_attribute(AttributeRecord rec) {
    LNB_REQUIRE(!rec.value_tokens.empty(), "attribute record with no value tokens");
    int32_t idx = int32_t(attributes_.size());
    attrs_of_[size_t(rec.entity)].push_back(idx);
    attributes_.push_back(std::move(rec));
  }

  void add_entity_type(EntityId e, TypeId t) {
    auto& lst = entity_types_[size_t(e)];
    if (std::find(lst.begin(), lst.end(), t) == lst.end()) lst.push_back(t);
  }

  bool contains(EntityId s, RelationId r, EntityId o) const {
    return keys_.count(TripleKey{s, r, o}) != 0;
  }

  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<AttributeRecord>& attributes() const { return attributes_; }

  // Types in first-listed order; the front one is the primary type.
  std::span<const TypeId> types_of(EntityId e) const {
    const auto& lst = entity_types_[size_t(e)];
    return {lst.data(), lst.size()};
  }

  TypeId primary_type(EntityId e) const {
    const auto& lst = entity_types_[size_t(e)];
    return lst.empty() ? kInvalidId : lst.front();
  }

  std::span<const int32_t> triples_of(EntityId e) const {
    const auto& lst = triples_of_[size_t(e)];
    return {lst.data(), lst.size()};
  }

  std::span<const int32_t> attrs_of(EntityId e) const {
    const auto& lst = attrs_of_[size_t(e)];
    return {lst.data(), lst.size()};
  }

  int32_t entity_count() const { return int32_t(entity_types_.size()); }

 private:
  std::vector<Triple> triples_;
  std::unordered_set<TripleKey, TripleKeyHash> keys_;
  std::vector<AttributeRecord> attributes_;
  std::vector<std::vector<TypeId>> entity_types_;
  std::vector<std::vector<int32_t>> triples_of_;
  std::vector<std::vector<int32_t>> attrs_of_;
};

// Copy of `full` restricted to the given triples. Attributes and types are
// entity metadata, not observations, so they carry over unchanged.
inline MultiGraphStore subset_store(const MultiGraphStore& full,
                                    std::span<const Triple> keep) {
  MultiGraphStore out;
  out.set_entity_count(full.entity_count());
  for (const Triple& t : keep) out.add_triple(t);
  for (const AttributeRecord& a : full.attributes()) out.add_attribute(a);
  for (EntityId e = 0; e < full.entity_count(); ++e) {
    for (TypeId t : full.types_of(e)) out.add_entity_type(e, t);
  }
  return out;
}

}  // namespace linknbed
