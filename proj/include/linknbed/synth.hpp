#pragma once

// Synthetic dual-graph generator. Graph X is random; graph Y is a renamed
// copy of a chosen fraction of X's entities with independently dropped edges
// and attributes, padded with fresh entities and edges. Ground-truth
// positive labels cover the duplicated subset; negatives come from
// generate_negative_labels. Output uses the TSV formats of io.hpp plus
// rename_map.tsv (x_name <TAB> y_name).

#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/dataset.hpp"
#include "linknbed/io.hpp"
#include "linknbed/rng.hpp"

namespace linknbed {

struct SynthConfig {
  int n_entities = 200;
  int n_relations = 8;
  int n_types = 5;
  double density = 6.0;  // target triples per entity, per graph
  double duplicate_fraction = 0.2;
  double edge_drop = 0.3;
  double attr_drop = 0.15;
  uint64_t seed = 7;
  int per_type_negatives = 10;
  int cross_type_negatives = 10;
  // Attribute layout. Identity attributes draw a per-entity value from a
  // large pool, so only duplicates share them. Type attributes draw from a
  // small per-type pool, so same-type entities collide often; they are the
  // hard-negative confounder for linkage. Noise attributes are fresh per
  // record.
  int identity_attrs = 2;
  int type_attrs = 2;
  int noise_attrs = 0;
  int value_pool_per_key = 40;       // identity pool size
  int type_value_variants = 2;       // per-type pool size for type attributes
  // Probability that an edge generated at a duplicated entity targets
  // another duplicated entity: the overlapping subset forms a coherent core
  // shared by both graphs, as overlapping catalog slices do.
  double dup_cluster_bias = 0.0;
};

struct SynthPaths {
  std::string triples;
  std::string attrs;
  std::string types;
  std::string labels;
  std::string rename_map;
  int positive_labels = 0;
  int negative_labels = 0;
};

namespace detail {

struct StringTriple {
  std::string g, s, r, o;
};

inline std::string synth_name(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d", prefix, i);
  return buf;
}

}  // namespace detail

inline SynthPaths generate_synthetic_pair(const SynthConfig& cfg,
                                          const std::string& out_dir) {
  if (cfg.duplicate_fraction < 0.0 || cfg.duplicate_fraction > 1.0)
    throw ValidationError("duplicate_fraction must be in [0, 1]");
  if (cfg.edge_drop < 0.0 || cfg.edge_drop > 1.0 || cfg.attr_drop < 0.0 ||
      cfg.attr_drop > 1.0)
    throw ValidationError("corruption rates must be in [0, 1]");
  if (cfg.density < 1.0)
    throw ValidationError("density must be >= 1 triple per entity");
  if (cfg.n_entities < 2 || cfg.n_relations < 1 || cfg.n_types < 1)
    throw ValidationError("synthetic sizes must be positive (>= 2 entities)");
  if (cfg.identity_attrs < 0 || cfg.type_attrs < 0 || cfg.noise_attrs < 0 ||
      cfg.dup_cluster_bias < 0.0 || cfg.dup_cluster_bias > 1.0)
    throw ValidationError("bad attribute counts or cluster bias");

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const int n = cfg.n_entities;
  std::vector<std::string> x_names(n);
  for (int i = 0; i < n; ++i) x_names[i] = detail::synth_name("x", i);

  // Per-entity primary type.
  std::vector<int> x_type(n);
  {
    Rng rng = make_stream(cfg.seed, "synth.types");
    for (int i = 0; i < n; ++i) x_type[i] = int(rng.next_below(uint64_t(cfg.n_types)));
  }

  // Duplicated subset of X, chosen first so edge generation can bias the
  // overlapping core toward itself.
  const int dup_count = int(cfg.duplicate_fraction * n + 0.5);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  {
    Rng rng = make_stream(cfg.seed, "synth.dup.pick");
    rng.shuffle(order);
  }
  std::vector<bool> duplicated(n, false);
  std::vector<int> dup_list(order.begin(), order.begin() + dup_count);
  for (int i : dup_list) duplicated[size_t(i)] = true;

  // Graph X edges: one covering edge per entity, then fill to the density
  // target. Duplicates and self-loops are rejected at generation time.
  struct Edge {
    int s, r, o;
  };
  std::vector<Edge> x_edges;
  std::unordered_set<uint64_t> edge_keys;
  auto edge_key = [&](int s, int r, int o) {
    return (uint64_t(uint32_t(s)) << 40) ^ (uint64_t(uint32_t(r)) << 24) ^
           uint64_t(uint32_t(o));
  };
  auto try_add_edge = [&](int s, int r, int o) {
    if (s == o) return false;
    if (!edge_keys.insert(edge_key(s, r, o)).second) return false;
    x_edges.push_back({s, r, o});
    return true;
  };
  {
    Rng rng = make_stream(cfg.seed, "synth.x.edges");
    auto pick_target = [&](int s) {
      if (dup_count > 1 && duplicated[size_t(s)] &&
          rng.next_unit() < cfg.dup_cluster_bias)
        return dup_list[size_t(rng.next_below(uint64_t(dup_count)))];
      return int(rng.next_below(uint64_t(n)));
    };
    for (int i = 0; i < n; ++i) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        int r = int(rng.next_below(uint64_t(cfg.n_relations)));
        if (try_add_edge(i, r, pick_target(i))) break;
      }
    }
    const size_t target = size_t(cfg.density * n + 0.5);
    size_t guard = 0;
    while (x_edges.size() < target && guard < target * 200) {
      ++guard;
      int s = int(rng.next_below(uint64_t(n)));
      int r = int(rng.next_below(uint64_t(cfg.n_relations)));
      try_add_edge(s, r, pick_target(s));
    }
  }

  // Attributes.
  struct Attr {
    int entity;
    std::string key;
    std::string value;
  };
  auto make_attrs = [&](Rng& rng, int entity, int type, std::vector<Attr>& out) {
    for (int j = 0; j < cfg.identity_attrs; ++j) {
      int tok = int(rng.next_below(uint64_t(cfg.value_pool_per_key)));
      out.push_back({entity, "ik" + std::to_string(j),
                     "ik" + std::to_string(j) + "v" + std::to_string(tok)});
    }
    for (int j = 0; j < cfg.type_attrs; ++j) {
      int tok = int(rng.next_below(uint64_t(std::max(1, cfg.type_value_variants))));
      out.push_back({entity, "tk" + std::to_string(j),
                     "tk" + std::to_string(j) + "t" + std::to_string(type) + "v" +
                         std::to_string(tok)});
    }
    for (int j = 0; j < cfg.noise_attrs; ++j) {
      int tok = int(rng.next_below(100000));
      out.push_back({entity, "nk" + std::to_string(j),
                     "nk" + std::to_string(j) + "v" + std::to_string(tok)});
    }
  };
  std::vector<Attr> x_attrs;
  {
    Rng rng = make_stream(cfg.seed, "synth.x.attrs");
    for (int i = 0; i < n; ++i) make_attrs(rng, i, x_type[size_t(i)], x_attrs);
  }

  // Graph Y: renamed duplicates plus fresh entities up to the same size.
  const int fresh_count = n - dup_count;
  std::vector<std::string> y_names;            // all Y entity names
  std::vector<int> y_type;                     // parallel types
  std::vector<std::string> y_name_of_x(n);     // only for duplicated entities
  for (int i = 0; i < n; ++i) {
    if (duplicated[size_t(i)]) {
      y_name_of_x[size_t(i)] = detail::synth_name("y", i);
      y_names.push_back(y_name_of_x[size_t(i)]);
      y_type.push_back(x_type[size_t(i)]);
    }
  }
  {
    Rng rng = make_stream(cfg.seed, "synth.y.fresh");
    for (int f = 0; f < fresh_count; ++f) {
      y_names.push_back(detail::synth_name("yf", f));
      y_type.push_back(int(rng.next_below(uint64_t(cfg.n_types))));
    }
  }
  const int ny = int(y_names.size());

  // Y edges: surviving copies of dup-internal X edges, then coverage and
  // density fill over all Y entities.
  std::vector<Edge> y_edges;  // indices into y_names
  std::unordered_set<uint64_t> y_edge_keys;
  std::vector<int> y_index_of_x(n, -1);
  {
    int yi = 0;
    for (int i = 0; i < n; ++i) {
      if (duplicated[size_t(i)]) y_index_of_x[size_t(i)] = yi++;
    }
  }
  auto try_add_y_edge = [&](int s, int r, int o) {
    if (s == o) return false;
    if (!y_edge_keys.insert(edge_key(s, r, o)).second) return false;
    y_edges.push_back({s, r, o});
    return true;
  };
  {
    Rng rng = make_stream(cfg.seed, "synth.y.keep");
    for (const Edge& e : x_edges) {
      if (!duplicated[size_t(e.s)] || !duplicated[size_t(e.o)]) continue;
      if (rng.next_unit() < cfg.edge_drop) continue;
      try_add_y_edge(y_index_of_x[size_t(e.s)], e.r, y_index_of_x[size_t(e.o)]);
    }
  }
  {
    Rng rng = make_stream(cfg.seed, "synth.y.edges");
    // y-indices below dup_count are the duplicated copies
    auto pick_target = [&](int s) {
      if (dup_count > 1 && s < dup_count && rng.next_unit() < cfg.dup_cluster_bias)
        return int(rng.next_below(uint64_t(dup_count)));
      return int(rng.next_below(uint64_t(ny)));
    };
    std::vector<bool> covered(size_t(ny), false);
    for (const Edge& e : y_edges) {
      covered[size_t(e.s)] = covered[size_t(e.o)] = true;
    }
    for (int i = 0; i < ny; ++i) {
      if (covered[size_t(i)]) continue;
      for (int attempt = 0; attempt < 64; ++attempt) {
        int r = int(rng.next_below(uint64_t(cfg.n_relations)));
        if (try_add_y_edge(i, r, pick_target(i))) break;
      }
    }
    const size_t target = size_t(cfg.density * ny + 0.5);
    size_t guard = 0;
    while (y_edges.size() < target && guard < target * 200) {
      ++guard;
      int s = int(rng.next_below(uint64_t(ny)));
      int r = int(rng.next_below(uint64_t(cfg.n_relations)));
      try_add_y_edge(s, r, pick_target(s));
    }
  }

  // Y attributes.
  std::vector<Attr> y_attrs;  // entity indexes into y_names
  {
    Rng rng = make_stream(cfg.seed, "synth.y.attr.keep");
    for (const Attr& a : x_attrs) {
      if (!duplicated[size_t(a.entity)]) continue;
      if (rng.next_unit() < cfg.attr_drop) continue;
      y_attrs.push_back({y_index_of_x[size_t(a.entity)], a.key, a.value});
    }
  }
  {
    Rng rng = make_stream(cfg.seed, "synth.y.attr.fresh");
    for (int yi = dup_count; yi < ny; ++yi)
      make_attrs(rng, yi, y_type[size_t(yi)], y_attrs);
  }

  // Write everything out; negatives need the loaded store, so labels are
  // written twice (positives first, then positives + generated negatives).
  SynthPaths paths;
  paths.triples = (fs::path(out_dir) / "triples.tsv").string();
  paths.attrs = (fs::path(out_dir) / "attrs.tsv").string();
  paths.types = (fs::path(out_dir) / "types.tsv").string();
  paths.labels = (fs::path(out_dir) / "labels.tsv").string();
  paths.rename_map = (fs::path(out_dir) / "rename_map.tsv").string();

  {
    std::vector<std::string> rows;
    for (const Edge& e : x_edges)
      rows.push_back("X\t" + x_names[size_t(e.s)] + "\tr" + std::to_string(e.r) +
                     "\t" + x_names[size_t(e.o)]);
    for (const Edge& e : y_edges)
      rows.push_back("Y\t" + y_names[size_t(e.s)] + "\tr" + std::to_string(e.r) +
                     "\t" + y_names[size_t(e.o)]);
    detail::write_sorted(paths.triples, std::move(rows));
  }
  {
    std::vector<std::string> rows;
    for (const Attr& a : x_attrs)
      rows.push_back(x_names[size_t(a.entity)] + "\t" + a.key + "\t" + a.value);
    for (const Attr& a : y_attrs)
      rows.push_back(y_names[size_t(a.entity)] + "\t" + a.key + "\t" + a.value);
    detail::write_sorted(paths.attrs, std::move(rows));
  }
  {
    std::vector<std::string> rows;
    for (int i = 0; i < n; ++i)
      rows.push_back(x_names[size_t(i)] + "\tt" + std::to_string(x_type[size_t(i)]));
    for (int yi = 0; yi < ny; ++yi)
      rows.push_back(y_names[size_t(yi)] + "\tt" + std::to_string(y_type[size_t(yi)]));
    detail::write_sorted(paths.types, std::move(rows));
  }
  {
    std::vector<std::string> rows;
    for (int i : dup_list)
      rows.push_back(x_names[size_t(i)] + "\t" + y_name_of_x[size_t(i)] + "\t1");
    detail::write_sorted(paths.labels, std::move(rows));
  }
  {
    std::vector<std::string> rows;
    for (int i : dup_list)
      rows.push_back(x_names[size_t(i)] + "\t" + y_name_of_x[size_t(i)]);
    detail::write_sorted(paths.rename_map, std::move(rows));
  }

  LoadResult loaded =
      load_graphs(paths.triples, paths.attrs, paths.types, paths.labels, {});
  LinkageLabelSet full = generate_negative_labels(
      loaded.store, loaded.vocab, loaded.labels, cfg.per_type_negatives,
      cfg.cross_type_negatives, cfg.seed);
  write_labels_tsv(paths.labels, full, loaded.vocab);

  for (const LabelRecord& rec : full.records) {
    if (rec.positive) ++paths.positive_labels;
    else ++paths.negative_labels;
  }
  return paths;
}

}  // namespace linknbed
