// linknbed command-line tool.
//
//   linknbed train     --triples T --attrs A --types Y --labels L [--key value ...]
//   linknbed eval      --checkpoint C [--unsupervised true] [--metrics out.json]
//   linknbed link      --checkpoint C --pairs P [--out verdicts.csv]
//   linknbed synth     --out DIR [--entities N --density D ...]
//   linknbed gradcheck [--probes N --h H --tolerance T --variant V ...]
//
// Every option is a config key; values come from defaults, then --config
// FILE, then later flags (last wins). LINKNBED_SEED overrides the seed.
// Exit codes: 0 ok, 1 validation failure, 2 numerical abort.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "linknbed/checkpoint.hpp"
#include "linknbed/config.hpp"
#include "linknbed/gradcheck.hpp"
#include "linknbed/pipeline.hpp"
#include "linknbed/synth.hpp"

namespace {

using namespace linknbed;

void usage() {
  std::cerr <<
      "usage: linknbed <train|eval|link|synth|gradcheck> [--key value ...]\n"
      "       linknbed <cmd> --config FILE applies the file at that point;\n"
      "       later flags override earlier ones.\n";
}

std::vector<std::string> arg_vector(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 2; i < argc; ++i) args.emplace_back(argv[i]);
  return args;
}

RunConfig config_from_args(const std::vector<std::string>& args) {
  FlatConfig fc = FlatConfig::defaults();
  fc.apply_args(args);
  fc.apply_env();
  return RunConfig::from(fc);
}

int cmd_train(const std::vector<std::string>& args) {
  RunConfig rc = config_from_args(args);
  Pipeline p = prepare_pipeline(rc);
  std::printf("loaded: %d entities, %d relations, %zu triples (%d dropped), %zu labels\n",
              p.data.vocab.entities.size(), p.data.vocab.relations.size(),
              p.data.store.triples().size(),
              p.data.stats.dropped_self_loops + p.data.stats.dropped_duplicate_triples,
              p.data.labels.records.size());
  std::printf("split: %zu train / %zu test triples, %zu train / %zu test label records\n",
              p.split.train_triples.size(), p.split.test_triples.size(),
              p.split.train_labels.records.size(), p.split.test_labels.records.size());

  TrainOutput out;
  if (rc.flat.has("checkpoint")) {
    Checkpoint resume = load_checkpoint(rc.flat.get("checkpoint"), rc.train.adam);
    out = run_training(p, rc, &resume);
  } else {
    out = run_training(p, rc);
  }
  for (size_t e = 0; e < out.stats.epoch_mean_loss.size(); ++e)
    std::printf("epoch %zu mean batch loss %.6f\n", e, out.stats.epoch_mean_loss[e]);
  if (out.stats.corruption_shortfalls > 0)
    std::printf("warning: %d corruption draws fell short of the retry budget\n",
                out.stats.corruption_shortfalls);
  if (!rc.flat.has("checkpoint_dir"))
    std::printf("note: no --checkpoint_dir given, parameters were discarded\n");
  return 0;
}

// Eval and link read the run configuration back out of the checkpoint, then
// let the command line override it.
RunConfig config_from_checkpoint(const std::vector<std::string>& args,
                                 Checkpoint& ck_out) {
  FlatConfig probe = FlatConfig::defaults();
  probe.apply_args(args);
  if (!probe.has("checkpoint"))
    throw ValidationError("--checkpoint is required");
  ck_out = load_checkpoint(probe.get("checkpoint"), {});
  FlatConfig fc = FlatConfig::from_echo_text(ck_out.config_echo);
  fc.apply_args(args);
  fc.apply_env();
  return RunConfig::from(fc);
}

int cmd_eval(const std::vector<std::string>& args) {
  Checkpoint ck;
  RunConfig rc = config_from_checkpoint(args, ck);
  Pipeline p = prepare_pipeline(rc);
  verify_digests(ck, p.data.vocab, "eval");
  std::string json = run_eval_to_json(p, rc, ck.params);
  if (rc.flat.has("metrics")) {
    std::ofstream out(rc.flat.get("metrics"));
    if (!out) throw ValidationError("cannot write metrics: " + rc.flat.get("metrics"));
    out << json;
  } else {
    std::cout << json;
  }
  return 0;
}

int cmd_link(const std::vector<std::string>& args) {
  Checkpoint ck;
  RunConfig rc = config_from_checkpoint(args, ck);
  if (!rc.flat.has("pairs")) throw ValidationError("--pairs is required");
  Pipeline p = prepare_pipeline(rc);
  verify_digests(ck, p.data.vocab, "link");
  Encoder<float> enc(ck.params, rc.model, p.cache, p.train_store);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (rc.flat.has("out")) {
    file.open(rc.flat.get("out"));
    if (!file) throw ValidationError("cannot write: " + rc.flat.get("out"));
    out = &file;
  }
  *out << "e_x,e_y,q,label\n";
  std::ifstream in(rc.flat.get("pairs"));
  if (!in) throw ValidationError("cannot open pairs file: " + rc.flat.get("pairs"));
  std::string line;
  size_t lineno = 0;
  int bad_rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() != 2 && cols.size() != 3)
      throw ValidationError("pairs file line " + std::to_string(lineno) +
                            ": expected 2 or 3 fields");
    std::string label = cols.size() == 3 ? cols[2] : "";
    EntityId a = p.data.vocab.entities.find(cols[0]);
    EntityId b = p.data.vocab.entities.find(cols[1]);
    if (a == kInvalidId || b == kInvalidId) {
      *out << cols[0] << ',' << cols[1] << ",nan," << label << '\n';
      ++bad_rows;
      continue;
    }
    LinkageVerdict v;
    try {
      v = linkage_score(a, b, enc, p.data.store, p.data.vocab);
    } catch (const ValidationError&) {
      *out << cols[0] << ',' << cols[1] << ",nan," << label << '\n';
      ++bad_rows;
      continue;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v.q);
    *out << cols[0] << ',' << cols[1] << ',' << buf << ',' << label << '\n';
  }
  if (bad_rows > 0)
    std::fprintf(stderr, "warning: %d rows had unknown entities or no triples\n",
                 bad_rows);
  return 0;
}

int cmd_synth(const std::vector<std::string>& args) {
  FlatConfig fc;
  fc.set("out", "");
  fc.set("entities", "200");
  fc.set("relations", "8");
  fc.set("types", "5");
  fc.set("density", "6");
  fc.set("duplicate_fraction", "0.2");
  fc.set("edge_drop", "0.3");
  fc.set("attr_drop", "0.15");
  fc.set("seed", "7");
  fc.set("per_type_negatives", "10");
  fc.set("cross_type_negatives", "10");
  fc.set("identity_attrs", "2");
  fc.set("type_attrs", "2");
  fc.set("noise_attrs", "0");
  fc.set("value_pool_per_key", "40");
  fc.set("type_value_variants", "2");
  fc.set("dup_cluster_bias", "0");
  fc.apply_args(args);
  fc.apply_env();
  if (!fc.has("out")) throw ValidationError("--out directory is required");

  SynthConfig sc;
  sc.n_entities = fc.get_int("entities");
  sc.n_relations = fc.get_int("relations");
  sc.n_types = fc.get_int("types");
  sc.density = fc.get_double("density");
  sc.duplicate_fraction = fc.get_double("duplicate_fraction");
  sc.edge_drop = fc.get_double("edge_drop");
  sc.attr_drop = fc.get_double("attr_drop");
  sc.seed = fc.get_u64("seed");
  sc.per_type_negatives = fc.get_int("per_type_negatives");
  sc.cross_type_negatives = fc.get_int("cross_type_negatives");
  sc.identity_attrs = fc.get_int("identity_attrs");
  sc.type_attrs = fc.get_int("type_attrs");
  sc.noise_attrs = fc.get_int("noise_attrs");
  sc.value_pool_per_key = fc.get_int("value_pool_per_key");
  sc.type_value_variants = fc.get_int("type_value_variants");
  sc.dup_cluster_bias = fc.get_double("dup_cluster_bias");

  SynthPaths paths = generate_synthetic_pair(sc, fc.get("out"));
  std::printf("wrote %s (+attrs/types/labels/rename_map): %d positive, %d negative labels\n",
              paths.triples.c_str(), paths.positive_labels, paths.negative_labels);
  return 0;
}

int cmd_gradcheck(const std::vector<std::string>& args) {
  FlatConfig fc = FlatConfig::defaults();
  fc.set("probes", "20");
  fc.set("h", "0.001");
  fc.set("tolerance", "0.0001");
  fc.set("instance_entities", "30");
  fc.apply_args(args);
  fc.apply_env();
  RunConfig rc = RunConfig::from(fc);

  GradCheckSettings gc;
  gc.probe_count = fc.get_int("probes");
  gc.h = fc.get_double("h");
  gc.tolerance = fc.get_double("tolerance");
  gc.seed = rc.train.seed;

  TrainConfig<double> tcfg;
  tcfg.neg_samples = rc.train.neg_samples;
  tcfg.neg_labels = rc.train.neg_labels;
  tcfg.margin = double(rc.train.margin);
  tcfg.task_weight = double(rc.train.task_weight);
  tcfg.l2 = double(rc.train.l2);
  tcfg.corrupt_mode = rc.train.corrupt_mode;
  tcfg.seed = rc.train.seed;

  FiniteDiffReport report;
  if (rc.flat.has("triples")) {
    Pipeline p = prepare_pipeline(rc);
    std::vector<Triple> batch;
    for (size_t i = 0; i < 6 && i < p.split.train_triples.size(); ++i)
      batch.push_back(p.split.train_triples[i]);
    report = check_model_gradients(p.train_store, p.data.vocab,
                                   &p.split.train_labels, p.cache, rc.model, tcfg,
                                   batch, gc);
  } else {
    RandomInstance inst =
        build_gradcheck_instance(fc.get_int("instance_entities"), rc.train.seed);
    report = check_model_gradients(inst.store, inst.vocab, &inst.labels, inst.cache,
                                   rc.model, tcfg, inst.batch, gc);
  }

  std::printf("gradcheck: %zu probes, max relative error %.3e (tolerance %.1e)\n",
              report.probes, report.max_rel_error, gc.tolerance);
  for (const FiniteDiffFailure& f : report.failures) {
    std::printf("  FAIL %s[%d,%d]: analytic %.9g vs numeric %.9g (rel %.3e)\n",
                ParamSet<double>::array_name(f.array), f.row, f.col, f.analytic,
                f.numeric, f.rel_error);
  }
  if (!report.passed(gc.tolerance)) {
    std::printf("gradcheck FAILED\n");
    return 1;
  }
  std::printf("gradcheck passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    usage();
    return 1;
  }
  const std::string cmd = argv[1];
  try {
    auto args = arg_vector(argc, argv);
    if (cmd == "train") return cmd_train(args);
    if (cmd == "eval") return cmd_eval(args);
    if (cmd == "link") return cmd_link(args);
    if (cmd == "synth") return cmd_synth(args);
    if (cmd == "gradcheck") return cmd_gradcheck(args);
    usage();
    return 1;
  } catch (const linknbed::NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 2;
  } catch (const linknbed::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
