#pragma once

// Finite-difference validation of the manual backward pass. The generic
// checker perturbs chosen parameter coordinates by +-h and compares the
// central difference of a loss callable against the supplied analytic
// derivative. check_model_gradients wires it to the batch loss; the probes
// are drawn from rows the batch actually touched. Runs in double; the float
// path shares the same templated code.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/context.hpp"
#include "linknbed/model.hpp"
#include "linknbed/rng.hpp"
#include "linknbed/store.hpp"
#include "linknbed/trainer.hpp"

namespace linknbed {

struct GradProbe {
  double* coord = nullptr;
  double analytic = 0.0;
  size_t array = 0;
  int32_t row = 0;
  int32_t col = 0;
};

struct FiniteDiffFailure {
  size_t array;
  int32_t row;
  int32_t col;
  double analytic;
  double numeric;
  double rel_error;
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  size_t probes = 0;
  size_t nonzero_analytic = 0;  // probes that hit a live gradient
  std::vector<FiniteDiffFailure> failures;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

inline double gradcheck_rel_error(double analytic, double numeric) {
  double diff = std::abs(analytic - numeric);
  if (diff < 1e-9) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

template <typename LossFn>
FiniteDiffReport finite_diff_check(LossFn&& loss, std::span<GradProbe> probes,
                                   double h, double tolerance) {
  LNB_REQUIRE(h > 0.0, "finite difference step must be positive");
  FiniteDiffReport report;
  report.probes = probes.size();
  for (GradProbe& p : probes) {
    const double saved = *p.coord;
    *p.coord = saved + h;
    const double up = loss();
    *p.coord = saved - h;
    const double down = loss();
    *p.coord = saved;
    const double numeric = (up - down) / (2.0 * h);
    if (p.analytic != 0.0) ++report.nonzero_analytic;
    const double rel = gradcheck_rel_error(p.analytic, numeric);
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (rel > tolerance)
      report.failures.push_back({p.array, p.row, p.col, p.analytic, numeric, rel});
  }
  return report;
}

struct GradCheckSettings {
  int probe_count = 20;
  double h = 1e-3;
  double tolerance = 1e-4;
  uint64_t seed = 42;
};

// Checks d(batch loss)/d(params) for a freshly initialized double-precision
// parameter set on the given batch.
inline FiniteDiffReport check_model_gradients(
    const MultiGraphStore& store, const Vocab& vocab, const LinkageLabelSet* labels,
    const ContextCache& cache, const ModelConfig& mcfg,
    const TrainConfig<double>& tcfg, std::span<const Triple> batch,
    const GradCheckSettings& gc) {
  ParamSet<double> params = init_params<double>(vocab, mcfg, gc.seed);
  Encoder<double> enc(params, mcfg, cache, store);

  std::vector<TriplePlan> plans;
  plans.reserve(batch.size());
  int shortfall = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    plans.push_back(build_triple_plan(batch[i], store, vocab, labels, tcfg,
                                      /*epoch=*/0, i, &shortfall));
  }

  GradSink<double> grads;
  evaluate_batch(enc, plans, tcfg, grads, /*with_grads=*/true);

  // Flatten touched rows and draw probe coordinates from them.
  struct RowRef {
    size_t array;
    int32_t row;
  };
  std::vector<RowRef> touched;
  for (size_t a = 0; a < ParamSet<double>::kArrayCount; ++a) {
    std::vector<int32_t> keys;
    for (const auto& [r, g] : grads.rows[a]) keys.push_back(r);
    std::sort(keys.begin(), keys.end());
    for (int32_t r : keys) touched.push_back({a, r});
  }
  LNB_REQUIRE(!touched.empty(), "gradcheck batch touched no parameters");

  Rng rng = make_stream(gc.seed, "gradcheck.probe");
  std::vector<GradProbe> probes;
  probes.reserve(size_t(gc.probe_count));
  for (int i = 0; i < gc.probe_count; ++i) {
    const RowRef& ref = touched[rng.next_below(touched.size())];
    Matrix<double>& arr = params.array(ref.array);
    int32_t col = int32_t(rng.next_below(uint64_t(arr.cols)));
    GradProbe p;
    p.array = ref.array;
    p.row = ref.row;
    p.col = col;
    p.coord = &arr.data[size_t(ref.row) * size_t(arr.cols) + size_t(col)];
    p.analytic = double(grads.rows[ref.array].at(ref.row)[size_t(col)]);
    probes.push_back(p);
  }

  auto loss = [&]() {
    GradSink<double> scratch;
    return evaluate_batch(enc, plans, tcfg, scratch, /*with_grads=*/false).loss_sum;
  };
  return finite_diff_check(loss, probes, gc.h, gc.tolerance);
}

struct RandomInstance {
  MultiGraphStore store;
  Vocab vocab;
  LinkageLabelSet labels;
  ContextCache cache;
  std::vector<Triple> batch;
};

// Small two-graph dataset with attributes, types and labels on both sides,
// including labeled entities without a positive partner so the fallback
// path gets exercised.
inline RandomInstance build_gradcheck_instance(int n_entities, uint64_t seed) {
  LNB_REQUIRE(n_entities >= 8, "instance needs at least 8 entities");
  RandomInstance inst;
  Vocab& vocab = inst.vocab;
  const int half = n_entities / 2;
  for (int i = 0; i < n_entities; ++i) {
    vocab.entities.intern("e" + std::to_string(i));
    vocab.entity_graph.push_back(i < half ? GraphTag::X : GraphTag::Y);
  }
  for (int r = 0; r < 4; ++r) vocab.relations.intern("r" + std::to_string(r));
  for (int t = 0; t < 3; ++t) vocab.types.intern("t" + std::to_string(t));
  for (int k = 0; k < 3; ++k) vocab.attr_keys.intern("k" + std::to_string(k));
  for (int v = 0; v < 10; ++v) vocab.attr_values.intern("v" + std::to_string(v));
  vocab.oov_token = vocab.attr_values.intern(kOovToken);

  MultiGraphStore& store = inst.store;
  store.set_entity_count(n_entities);
  Rng rng = make_stream(seed, "instance");
  for (int i = 0; i < n_entities; ++i) {
    store.add_entity_type(EntityId(i), TypeId(rng.next_below(3)));
    if (rng.next_coin()) store.add_entity_type(EntityId(i), TypeId(rng.next_below(3)));
  }
  auto add_random_triples = [&](int lo, int hi, GraphTag g) {
    const int span = hi - lo;
    for (int i = lo; i < hi; ++i) {
      for (int edge = 0; edge < 4; ++edge) {
        EntityId o = EntityId(lo + int(rng.next_below(uint64_t(span))));
        if (o == EntityId(i)) continue;
        store.add_triple(Triple{EntityId(i), RelationId(rng.next_below(4)), o, g});
      }
    }
  };
  add_random_triples(0, half, GraphTag::X);
  add_random_triples(half, n_entities, GraphTag::Y);

  for (int i = 0; i < n_entities; ++i) {
    int n_attrs = 1 + int(rng.next_below(3));
    for (int a = 0; a < n_attrs; ++a) {
      AttributeRecord rec;
      rec.entity = EntityId(i);
      rec.key = AttrKeyId(rng.next_below(3));
      int n_toks = 1 + int(rng.next_below(2));
      for (int t = 0; t < n_toks; ++t)
        rec.value_tokens.push_back(TokenId(rng.next_below(10)));
      store.add_attribute(std::move(rec));
    }
  }

  std::vector<LabelRecord> records;
  const int n_pos = std::max(2, half / 4);
  for (int i = 0; i < n_pos; ++i)
    records.push_back({EntityId(i), EntityId(half + i), true});
  // Negative-only entities exercise the missing-positive fallback.
  for (int i = 0; i < half; ++i) {
    int n_negs = 1 + int(rng.next_below(3));
    for (int z = 0; z < n_negs; ++z) {
      EntityId y = EntityId(half + int(rng.next_below(uint64_t(half))));
      records.push_back({EntityId(i), y, false});
    }
  }
  // Drop negative records that collide with a positive pair.
  std::vector<LabelRecord> cleaned;
  for (const LabelRecord& rec : records) {
    if (!rec.positive && rec.y - half == rec.x && rec.x < n_pos) continue;
    cleaned.push_back(rec);
  }
  inst.labels = build_label_set(std::move(cleaned), vocab, true);

  ContextParams cp;
  cp.walks_per_node = 6;
  cp.walk_length = 3;
  cp.seed = seed;
  inst.cache = build_context(store, vocab, cp);

  const auto& triples = store.triples();
  for (size_t i = 0; i < 6 && i < triples.size(); ++i) {
    inst.batch.push_back(triples[(i * 7919) % triples.size()]);
  }
  return inst;
}

}  // namespace linknbed
