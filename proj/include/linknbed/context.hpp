#pragma once

// Precomputed context index structures consumed by the encoder:
//   - neighborhoods N(e): unique nodes visited by k seeded random walks of
//     length l from e over the undirected, unlabeled triple graph
//   - entity_attrs: per-entity attribute record indices, in ingestion order
//   - relation_types: distinct entity types witnessed by each relation
//
// The cache is immutable once built and can be persisted to a versioned
// binary sidecar keyed by its build parameters and the dataset digest.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/rng.hpp"
#include "linknbed/store.hpp"
#include "linknbed/vocab.hpp"

namespace linknbed {

struct ContextParams {
  int walks_per_node = 50;   // k
  int walk_length = 3;       // l
  int neighborhood_cap = 512;
  uint64_t seed = 0;
};

struct ContextCache {
  ContextParams params;
  uint64_t dataset_digest = 0;
  std::vector<std::vector<EntityId>> neighborhoods;   // sorted by id, e excluded
  std::vector<std::vector<int32_t>> entity_attrs;     // indices into store.attributes()
  std::vector<std::vector<TypeId>> relation_types;    // sorted by id

  std::span<const EntityId> neighbors(EntityId e) const {
    const auto& v = neighborhoods[size_t(e)];
    return {v.data(), v.size()};
  }
  std::span<const int32_t> attrs(EntityId e) const {
    const auto& v = entity_attrs[size_t(e)];
    return {v.data(), v.size()};
  }
  std::span<const TypeId> types_for_relation(RelationId r) const {
    const auto& v = relation_types[size_t(r)];
    return {v.data(), v.size()};
  }
};

// Undirected, deduplicated adjacency over subject<->object edges.
inline std::vector<std::vector<EntityId>> build_adjacency(const MultiGraphStore& store) {
  std::vector<std::vector<EntityId>> adj(size_t(store.entity_count()));
  for (const Triple& t : store.triples()) {
    adj[size_t(t.subject)].push_back(t.object);
    adj[size_t(t.object)].push_back(t.subject);
  }
  for (auto& lst : adj) {
    std::sort(lst.begin(), lst.end());
    lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
  }
  return adj;
}

// Walk w for entity e draws from its own stream, so increasing k replays the
// same prefix of walks and can only grow N(e). A walk stuck at a sink stops;
// visits to e itself are not recorded. When the cap binds, the most
// frequently visited nodes win (ties toward the lower id).
inline std::vector<std::vector<EntityId>> build_neighborhoods(
    const MultiGraphStore& store, const ContextParams& p) {
  LNB_REQUIRE(p.walks_per_node >= 1 && p.walk_length >= 1,
              "walks_per_node and walk_length must be >= 1");
  auto adj = build_adjacency(store);
  std::vector<std::vector<EntityId>> out(adj.size());
  std::unordered_map<EntityId, int> visit_count;
  for (EntityId e = 0; e < EntityId(adj.size()); ++e) {
    visit_count.clear();
    for (int w = 0; w < p.walks_per_node; ++w) {
      Rng rng = make_stream(p.seed, "walk", uint64_t(e), uint64_t(w));
      EntityId cur = e;
      for (int step = 0; step < p.walk_length; ++step) {
        const auto& nb = adj[size_t(cur)];
        if (nb.empty()) break;
        cur = nb[rng.next_below(nb.size())];
        if (cur != e) ++visit_count[cur];
      }
    }
    std::vector<EntityId>& nbrs = out[size_t(e)];
    nbrs.reserve(visit_count.size());
    for (const auto& [id, cnt] : visit_count) nbrs.push_back(id);
    if (int(nbrs.size()) > p.neighborhood_cap) {
      std::sort(nbrs.begin(), nbrs.end(), [&](EntityId a, EntityId b) {
        int ca = visit_count[a], cb = visit_count[b];
        if (ca != cb) return ca > cb;
        return a < b;
      });
      nbrs.resize(size_t(p.neighborhood_cap));
    }
    std::sort(nbrs.begin(), nbrs.end());
  }
  return out;
}

inline std::vector<std::vector<int32_t>> build_attribute_lists(
    const MultiGraphStore& store) {
  std::vector<std::vector<int32_t>> out(size_t(store.entity_count()));
  for (EntityId e = 0; e < store.entity_count(); ++e) {
    auto idx = store.attrs_of(e);
    out[size_t(e)].assign(idx.begin(), idx.end());
  }
  return out;
}

// Distinct types over all entities observed as subject or object of each
// relation. Relations with no triples keep an empty set.
inline std::vector<std::vector<TypeId>> build_relation_type_context(
    const MultiGraphStore& store, const Vocab& vocab) {
  std::vector<std::vector<TypeId>> out(size_t(vocab.relations.size()));
  for (const Triple& t : store.triples()) {
    auto& lst = out[size_t(t.relation)];
    for (EntityId e : {t.subject, t.object}) {
      for (TypeId ty : store.types_of(e)) lst.push_back(ty);
    }
  }
  for (auto& lst : out) {
    std::sort(lst.begin(), lst.end());
    lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
  }
  return out;
}

inline ContextCache build_context(const MultiGraphStore& store, const Vocab& vocab,
                                  const ContextParams& p) {
  ContextCache cache;
  cache.params = p;
  cache.dataset_digest = vocab.combined_digest();
  cache.neighborhoods = build_neighborhoods(store, p);
  cache.entity_attrs = build_attribute_lists(store);
  cache.relation_types = build_relation_type_context(store, vocab);
  return cache;
}

// ---- binary sidecar ----

namespace detail {

constexpr uint32_t kContextMagic = 0x4c4e4243;  // "LNBC"
constexpr uint32_t kContextVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return bool(in);
}

inline void write_id_lists(std::ostream& out,
                           const std::vector<std::vector<int32_t>>& lists) {
  write_pod(out, uint64_t(lists.size()));
  for (const auto& lst : lists) {
    write_pod(out, uint64_t(lst.size()));
    out.write(reinterpret_cast<const char*>(lst.data()),
              std::streamsize(lst.size() * sizeof(int32_t)));
  }
}

inline bool read_id_lists(std::istream& in, std::vector<std::vector<int32_t>>& lists) {
  uint64_t n = 0;
  if (!read_pod(in, n)) return false;
  lists.resize(size_t(n));
  for (auto& lst : lists) {
    uint64_t len = 0;
    if (!read_pod(in, len)) return false;
    lst.resize(size_t(len));
    in.read(reinterpret_cast<char*>(lst.data()),
            std::streamsize(len * sizeof(int32_t)));
    if (!in) return false;
  }
  return true;
}

}  // namespace detail

inline void save_context_cache(const std::string& path, const ContextCache& cache) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write context cache: " + path);
  detail::write_pod(out, detail::kContextMagic);
  detail::write_pod(out, detail::kContextVersion);
  detail::write_pod(out, cache.dataset_digest);
  detail::write_pod(out, uint64_t(cache.params.seed));
  detail::write_pod(out, int32_t(cache.params.walks_per_node));
  detail::write_pod(out, int32_t(cache.params.walk_length));
  detail::write_pod(out, int32_t(cache.params.neighborhood_cap));
  detail::write_id_lists(out, cache.neighborhoods);
  detail::write_id_lists(out, cache.entity_attrs);
  detail::write_id_lists(out, cache.relation_types);
}

// Returns the cached structures only when magic, version, parameters and
// dataset digest all match; anything else means "rebuild".
inline std::optional<ContextCache> load_context_cache(const std::string& path,
                                                      const ContextParams& want,
                                                      uint64_t dataset_digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  uint32_t magic = 0, version = 0;
  uint64_t digest = 0, seed = 0;
  int32_t walks = 0, length = 0, cap = 0;
  if (!detail::read_pod(in, magic) || magic != detail::kContextMagic) return std::nullopt;
  if (!detail::read_pod(in, version) || version != detail::kContextVersion)
    return std::nullopt;
  if (!detail::read_pod(in, digest) || !detail::read_pod(in, seed) ||
      !detail::read_pod(in, walks) || !detail::read_pod(in, length) ||
      !detail::read_pod(in, cap))
    return std::nullopt;
  if (digest != dataset_digest || seed != want.seed || walks != want.walks_per_node ||
      length != want.walk_length || cap != want.neighborhood_cap)
    return std::nullopt;
  ContextCache cache;
  cache.params = want;
  cache.dataset_digest = digest;
  if (!detail::read_id_lists(in, cache.neighborhoods)) return std::nullopt;
  if (!detail::read_id_lists(in, cache.entity_attrs)) return std::nullopt;
  if (!detail::read_id_lists(in, cache.relation_types)) return std::nullopt;
  return cache;
}

}  // namespace linknbed
