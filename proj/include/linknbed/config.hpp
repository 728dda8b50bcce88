#pragma once

// Run configuration: a flat key=value store assembled from built-in
// defaults, an optional config file, and command-line overrides, in that
// order (last write wins). The sorted echo of the final map is embedded in
// checkpoints and metrics JSON so a run is always reproducible from its
// outputs. LINKNBED_SEED overrides the seed from the environment.

#include <cstdlib>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/context.hpp"
#include "linknbed/evaluator.hpp"
#include "linknbed/io.hpp"
#include "linknbed/model.hpp"
#include "linknbed/trainer.hpp"

namespace linknbed {

class FlatConfig {
 public:
  static FlatConfig defaults() {
    FlatConfig c;
    // model
    c.set("variant", "embed_all_attention");
    c.set("entity_dim", "256");
    c.set("relation_dim", "64");
    c.set("attr_dim", "16");
    c.set("type_dim", "16");
    c.set("value_token_cap", "512");
    c.set("atomic_activation", "relu");
    c.set("repr_activation", "tanh");
    c.set("attr_aggregator", "max");
    // context
    c.set("walks", "50");
    c.set("walk_length", "3");
    c.set("neighborhood_cap", "512");
    // training
    c.set("neg_samples", "50");
    c.set("neg_labels", "20");
    c.set("margin", "1");
    c.set("task_weight", "0.6");
    c.set("l2", "1e-05");
    c.set("weight_decay", "0");
    c.set("lr", "0.01");
    c.set("lr_decay", "0.95");
    c.set("batch_size", "2000");
    c.set("epochs", "5");
    c.set("corrupt_mode", "both");
    c.set("seed", "13");
    c.set("threads", "1");
    c.set("train_fraction", "0.6");
    c.set("strict_ingest", "false");
    c.set("checkpoint_every", "0");
    // second-stage classifier
    c.set("classifier_hidden", "64");
    c.set("classifier_epochs", "300");
    c.set("classifier_lr", "0.01");
    // eval
    c.set("unsupervised", "false");
    // paths (empty = unset)
    for (const char* k : {"triples", "attrs", "types", "labels", "cache",
                          "checkpoint_dir", "checkpoint", "metrics", "trace",
                          "pairs", "out"})
      c.set(k, "");
    return c;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const {
    auto it = values_.find(key);
    return it != values_.end() && !it->second.empty();
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("unknown config key: " + key);
    return it->second;
  }

  int get_int(const std::string& key) const {
    try {
      return std::stoi(get(key));
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "' is not an integer: " + get(key));
    }
  }

  double get_double(const std::string& key) const {
    try {
      return std::stod(get(key));
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "' is not a number: " + get(key));
    }
  }

  uint64_t get_u64(const std::string& key) const {
    try {
      return std::stoull(get(key));
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "' is not an integer: " + get(key));
    }
  }

  bool get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("config key '" + key + "' is not a boolean: " + v);
  }

  // key = value lines; blank lines and #-comments ignored.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      size_t eq = line.find('=');
      if (eq == std::string::npos) {
        bool blank = line.find_first_not_of(" \t") == std::string::npos;
        if (blank) continue;
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
      }
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ValidationError(path + ":" + std::to_string(lineno) + ": empty key");
      set(key, value);
    }
  }

  // --key value pairs; a leading --config FILE loads the file at the point
  // it appears, keeping strict last-wins ordering.
  void apply_args(std::span<const std::string> args) {
    for (size_t i = 0; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a.rfind("--", 0) != 0)
        throw ValidationError("expected --key, got: " + a);
      std::string key = a.substr(2);
      if (i + 1 >= args.size())
        throw ValidationError("missing value for --" + key);
      const std::string& value = args[++i];
      if (key == "config") {
        load_file(value);
      } else {
        set(key, value);
      }
    }
  }

  void apply_env() {
    if (const char* s = std::getenv("LINKNBED_SEED")) set("seed", s);
  }

  const std::map<std::string, std::string>& echo() const { return values_; }

  std::string echo_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  static FlatConfig from_echo_text(const std::string& text) {
    FlatConfig c = defaults();
    std::string line;
    size_t start = 0;
    while (start < text.size()) {
      size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      line = text.substr(start, end - start);
      start = end + 1;
      size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
  }

 private:
  std::map<std::string, std::string> values_;
};

inline Variant parse_variant(const std::string& s) {
  if (s == "embed_only") return Variant::EmbedOnly;
  if (s == "attr_only") return Variant::AttrOnly;
  if (s == "nhbr_only") return Variant::NhbrOnly;
  if (s == "embed_attr") return Variant::EmbedAttr;
  if (s == "embed_nhbr") return Variant::EmbedNhbr;
  if (s == "embed_all") return Variant::EmbedAll;
  if (s == "embed_all_attention") return Variant::EmbedAllAttention;
  throw ValidationError("unknown variant: " + s);
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "identity") return Activation::Identity;
  throw ValidationError("unknown activation: " + s);
}

inline Aggregator parse_aggregator(const std::string& s) {
  if (s == "max") return Aggregator::Max;
  if (s == "mean") return Aggregator::Mean;
  throw ValidationError("unknown aggregator: " + s);
}

inline CorruptMode parse_corrupt_mode(const std::string& s) {
  if (s == "head") return CorruptMode::Head;
  if (s == "tail") return CorruptMode::Tail;
  if (s == "both") return CorruptMode::Both;
  throw ValidationError("unknown corrupt_mode: " + s);
}

// Typed view over the flat map.
struct RunConfig {
  FlatConfig flat;
  Variant variant = Variant::EmbedAllAttention;
  ModelConfig model;
  TrainConfig<float> train;
  ContextParams context;
  LoadOptions load;
  ClassifierConfig classifier;
  double train_fraction = 0.6;
  int checkpoint_every = 0;
  bool unsupervised = false;

  static RunConfig from(const FlatConfig& fc) {
    RunConfig rc;
    rc.flat = fc;
    rc.variant = parse_variant(fc.get("variant"));
    rc.model.entity_dim = fc.get_int("entity_dim");
    rc.model.relation_dim = fc.get_int("relation_dim");
    rc.model.attr_dim = fc.get_int("attr_dim");
    rc.model.type_dim = fc.get_int("type_dim");
    rc.model.atomic_activation = parse_activation(fc.get("atomic_activation"));
    rc.model.repr_activation = parse_activation(fc.get("repr_activation"));
    rc.model.attr_aggregator = parse_aggregator(fc.get("attr_aggregator"));
    apply_variant(rc.model, rc.variant);
    rc.model.validate();

    rc.train.neg_samples = fc.get_int("neg_samples");
    rc.train.neg_labels = fc.get_int("neg_labels");
    rc.train.margin = float(fc.get_double("margin"));
    rc.train.task_weight = float(fc.get_double("task_weight"));
    rc.train.l2 = float(fc.get_double("l2"));
    rc.train.weight_decay = float(fc.get_double("weight_decay"));
    rc.train.lr = float(fc.get_double("lr"));
    rc.train.lr_decay = float(fc.get_double("lr_decay"));
    rc.train.batch_size = fc.get_int("batch_size");
    rc.train.epochs = fc.get_int("epochs");
    rc.train.corrupt_mode = parse_corrupt_mode(fc.get("corrupt_mode"));
    rc.train.seed = fc.get_u64("seed");
    rc.train.threads = fc.get_int("threads");
    rc.train.validate();

    rc.context.walks_per_node = fc.get_int("walks");
    rc.context.walk_length = fc.get_int("walk_length");
    rc.context.neighborhood_cap = fc.get_int("neighborhood_cap");
    rc.context.seed = rc.train.seed;

    rc.load.value_token_cap = size_t(fc.get_int("value_token_cap"));
    rc.load.duplicate_policy = fc.get_bool("strict_ingest")
                                   ? DuplicatePolicy::Error
                                   : DuplicatePolicy::DropWithWarning;

    rc.classifier.hidden = fc.get_int("classifier_hidden");
    rc.classifier.epochs = fc.get_int("classifier_epochs");
    rc.classifier.lr = fc.get_double("classifier_lr");
    rc.classifier.seed = rc.train.seed + 1;

    rc.train_fraction = fc.get_double("train_fraction");
    rc.checkpoint_every = fc.get_int("checkpoint_every");
    rc.unsupervised = fc.get_bool("unsupervised");
    return rc;
  }
};

}  // namespace linknbed
