#pragma once

// Dataset-level operations on a loaded store: train/test splitting and
// negative linkage-label generation.

#include <unordered_set>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/rng.hpp"
#include "linknbed/store.hpp"
#include "linknbed/vocab.hpp"

namespace linknbed {

struct DatasetSplit {
  std::vector<Triple> train_triples;
  std::vector<Triple> test_triples;
  LinkageLabelSet train_labels;
  LinkageLabelSet test_labels;
};

// Uniform disjoint split of triples and of label records. Round-half-up on
// the train side, so a single item lands in train at fraction 0.6.
inline DatasetSplit split_dataset(const MultiGraphStore& store, const Vocab& vocab,
                                  const LinkageLabelSet& labels,
                                  double train_fraction, uint64_t seed) {
  LNB_REQUIRE(train_fraction > 0.0 && train_fraction < 1.0,
              "train_fraction must be in (0, 1)");
  DatasetSplit split;

  {
    std::vector<size_t> idx(store.triples().size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng = make_stream(seed, "split.triples");
    rng.shuffle(idx);
    size_t train_n = size_t(double(idx.size()) * train_fraction + 0.5);
    for (size_t i = 0; i < idx.size(); ++i) {
      const Triple& t = store.triples()[idx[i]];
      (i < train_n ? split.train_triples : split.test_triples).push_back(t);
    }
  }

  {
    std::vector<size_t> idx(labels.records.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng = make_stream(seed, "split.labels");
    rng.shuffle(idx);
    size_t train_n = size_t(double(idx.size()) * train_fraction + 0.5);
    std::vector<LabelRecord> train_recs, test_recs;
    for (size_t i = 0; i < idx.size(); ++i) {
      const LabelRecord& rec = labels.records[idx[i]];
      (i < train_n ? train_recs : test_recs).push_back(rec);
    }
    split.train_labels = build_label_set(std::move(train_recs), vocab, true);
    split.test_labels = build_label_set(std::move(test_recs), vocab, true);
  }

  return split;
}

// Samples negative linkage labels per entity from the opposite graph:
// `per_type` candidates sharing the entity's primary type and `cross_type`
// candidates of a different primary type, never the positive partner,
// without replacement. Pools smaller than requested yield what they have.
// The returned set carries the input positives plus the generated negatives;
// each negative list is attached to the entity it was sampled for.
inline LinkageLabelSet generate_negative_labels(const MultiGraphStore& store,
                                                const Vocab& vocab,
                                                const LinkageLabelSet& positives,
                                                int per_type, int cross_type,
                                                uint64_t seed) {
  LNB_REQUIRE(per_type >= 0 && cross_type >= 0, "negative counts must be >= 0");
  const int32_t n = vocab.entities.size();

  std::vector<std::vector<EntityId>> by_graph(2);
  for (EntityId e = 0; e < n; ++e) by_graph[size_t(vocab.graph_of(e))].push_back(e);

  LinkageLabelSet out;
  out.positives = positives.positives;
  for (const LabelRecord& rec : positives.records) {
    if (rec.positive) out.records.push_back(rec);
  }

  for (EntityId e = 0; e < n; ++e) {
    const GraphTag own = vocab.graph_of(e);
    const auto& pool = by_graph[size_t(other_graph(own))];
    if (pool.empty()) continue;
    const TypeId own_type = store.primary_type(e);
    const EntityId* partner = out.positive_partner(e);

    std::vector<EntityId> same, cross;
    for (EntityId cand : pool) {
      if (partner && cand == *partner) continue;
      if (own_type != kInvalidId && store.primary_type(cand) == own_type)
        same.push_back(cand);
      else
        cross.push_back(cand);
    }

    Rng rng = make_stream(seed, "neg_labels", uint64_t(e));
    auto take = [&](std::vector<EntityId>& cands, int want) {
      auto picked = rng.sample_indices(cands.size(), size_t(want));
      for (size_t i : picked) {
        EntityId neg = cands[i];
        out.negatives[e].push_back(neg);
        LabelRecord rec;
        rec.x = own == GraphTag::X ? e : neg;
        rec.y = own == GraphTag::X ? neg : e;
        rec.positive = false;
        out.records.push_back(rec);
      }
    };
    take(same, per_type);
    take(cross, cross_type);
  }
  return out;
}

}  // namespace linknbed
