#pragma once

// End-to-end orchestration: ingest -> split -> context cache -> train ->
// eval/link. The CLI is a thin shell over these calls; integration tests use
// them directly.

#include <filesystem>
#include <fstream>
#include <string>

#include "linknbed/checkpoint.hpp"
#include "linknbed/config.hpp"
#include "linknbed/context.hpp"
#include "linknbed/dataset.hpp"
#include "linknbed/evaluator.hpp"
#include "linknbed/io.hpp"
#include "linknbed/model.hpp"
#include "linknbed/trainer.hpp"

namespace linknbed {

struct Pipeline {
  LoadResult data;
  DatasetSplit split;
  MultiGraphStore train_store;
  ContextCache cache;
};

// Loads the dataset, derives the split, and builds (or reuses) the context
// cache over the train triples. Walks, attribute lists and relation-type
// sets never see test triples.
inline Pipeline prepare_pipeline(const RunConfig& rc) {
  for (const char* key : {"triples", "attrs", "types", "labels"}) {
    if (!rc.flat.has(key))
      throw ValidationError(std::string("missing required path: --") + key);
  }
  Pipeline p;
  p.data = load_graphs(rc.flat.get("triples"), rc.flat.get("attrs"),
                       rc.flat.get("types"), rc.flat.get("labels"), rc.load);
  p.split = split_dataset(p.data.store, p.data.vocab, p.data.labels,
                          rc.train_fraction, rc.train.seed);
  p.train_store = subset_store(p.data.store, p.split.train_triples);

  const uint64_t digest = p.data.vocab.combined_digest();
  if (rc.flat.has("cache")) {
    const std::string& path = rc.flat.get("cache");
    if (auto cached = load_context_cache(path, rc.context, digest)) {
      p.cache = std::move(*cached);
      return p;
    }
    p.cache = build_context(p.train_store, p.data.vocab, rc.context);
    save_context_cache(path, p.cache);
  } else {
    p.cache = build_context(p.train_store, p.data.vocab, rc.context);
  }
  return p;
}

inline void write_trace_csv(const std::string& path,
                            const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write trace: " + path);
  out << "epoch,batch,loss,wall_ms\n";
  char buf[128];
  for (const TraceRow& row : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.3f\n", row.epoch, row.batch,
                  row.mean_loss, row.wall_ms);
    out << buf;
  }
}

struct TrainOutput {
  ParamSet<float> params;
  Adam<float> optimizer;
  TrainStats stats;
  int next_epoch = 0;
};

inline Checkpoint make_checkpoint(const RunConfig& rc, const Pipeline& p,
                                  const TrainOutput& t) {
  Checkpoint ck;
  ck.config_echo = rc.flat.echo_text();
  ck.digests = p.data.vocab.digests();
  ck.next_epoch = t.next_epoch;
  ck.seed = rc.train.seed;
  ck.params = t.params;
  ck.optimizer = t.optimizer;
  return ck;
}

// Trains from scratch or resumes from a checkpoint. Epoch-cadence
// checkpoints land in checkpoint_dir; "final.ckpt" is always written there.
inline TrainOutput run_training(const Pipeline& p, const RunConfig& rc,
                                const Checkpoint* resume = nullptr) {
  TrainOutput out;
  int start_epoch = 0;
  if (resume != nullptr) {
    verify_digests(*resume, p.data.vocab, "resume");
    out.params = resume->params;
    out.optimizer = resume->optimizer;
    start_epoch = resume->next_epoch;
  } else {
    out.params = init_params<float>(p.data.vocab, rc.model, rc.train.seed);
    out.optimizer = Adam<float>(param_shapes(out.params), rc.train.adam);
  }

  std::function<void(int)> cadence;
  if (rc.flat.has("checkpoint_dir") && rc.checkpoint_every > 0) {
    cadence = [&](int epoch) {
      if ((epoch + 1) % rc.checkpoint_every != 0) return;
      TrainOutput snap{out.params, out.optimizer, {}, epoch + 1};
      Checkpoint ck = make_checkpoint(rc, p, snap);
      namespace fs = std::filesystem;
      char name[64];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch + 1);
      save_checkpoint((fs::path(rc.flat.get("checkpoint_dir")) / name).string(), ck);
    };
  }

  const LinkageLabelSet* labels = &p.split.train_labels;
  out.stats = train(p.train_store, p.data.vocab, labels, p.cache, rc.model, rc.train,
                    out.params, out.optimizer, start_epoch, cadence);
  out.next_epoch = rc.train.epochs;

  if (rc.flat.has("checkpoint_dir")) {
    namespace fs = std::filesystem;
    fs::create_directories(rc.flat.get("checkpoint_dir"));
    Checkpoint ck = make_checkpoint(rc, p, out);
    save_checkpoint((fs::path(rc.flat.get("checkpoint_dir")) / "final.ckpt").string(), ck);
  }
  if (rc.flat.has("trace")) write_trace_csv(rc.flat.get("trace"), out.stats.trace);
  return out;
}

// Link prediction over the test split plus the linkage block. The linkage
// block is emitted when the test labels contain both classes; the flag
// selects substitution scoring (supervised) vs the second-stage classifier.
inline std::string run_eval_to_json(const Pipeline& p, const RunConfig& rc,
                                    const ParamSet<float>& params) {
  Encoder<float> enc(params, rc.model, p.cache, p.train_store);
  auto metrics =
      link_prediction_metrics<float>(p.split.test_triples, enc, p.data.store,
                                     p.data.vocab);
  bool have_pos = false, have_neg = false;
  for (const LabelRecord& rec : p.split.test_labels.records)
    (rec.positive ? have_pos : have_neg) = true;
  LinkageEvalResult linkage;
  bool have_linkage = have_pos && have_neg;
  if (have_linkage) {
    if (rc.unsupervised) {
      linkage = classifier_linkage_eval(enc, p.data.vocab, p.split.train_labels,
                                        p.split.test_labels, rc.classifier);
    } else {
      linkage = supervised_linkage_eval(enc, p.data.store, p.data.vocab,
                                        p.split.test_labels);
    }
  }
  return render_metrics_json(rc.flat.echo(), metrics,
                             have_linkage ? &linkage : nullptr, !rc.unsupervised);
}

}  // namespace linknbed
