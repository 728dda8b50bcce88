#pragma once

// TSV ingestion and canonical serialization.
//
// File formats, one record per line, UTF-8, tab-separated:
//   triples.tsv : graph <TAB> subject <TAB> relation <TAB> object   (graph is X or Y)
//   attrs.tsv   : entity <TAB> key <TAB> value                      (value may contain spaces)
//   types.tsv   : entity <TAB> type                                 (repeatable per entity)
//   labels.tsv  : entity_x <TAB> entity_y <TAB> {0|1}
//
// Attribute values are lowercased and split on whitespace; the token
// vocabulary keeps the most frequent `value_token_cap` tokens and maps the
// rest to a shared <oov> token.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/store.hpp"
#include "linknbed/vocab.hpp"

namespace linknbed {

enum class DuplicatePolicy { DropWithWarning, Error };

struct LoadOptions {
  DuplicatePolicy duplicate_policy = DuplicatePolicy::DropWithWarning;
  size_t value_token_cap = 512;
};

struct LoadStats {
  int dropped_self_loops = 0;
  int dropped_duplicate_triples = 0;
  int oov_token_hits = 0;
};

struct LoadResult {
  MultiGraphStore store;
  Vocab vocab;
  LinkageLabelSet labels;
  LoadStats stats;
};

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

[[noreturn]] inline void parse_error(const std::string& path, size_t lineno,
                                     const std::string& what) {
  throw ValidationError(path + ":" + std::to_string(lineno) + ": " + what);
}

inline std::vector<std::string> tokenize_value(const std::string& value) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : value) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) toks.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) toks.push_back(std::move(cur));
  return toks;
}

}  // namespace detail

inline LoadResult load_graphs(const std::string& triples_path,
                              const std::string& attrs_path,
                              const std::string& types_path,
                              const std::string& labels_path,
                              const LoadOptions& opt = {}) {
  LoadResult res;
  Vocab& vocab = res.vocab;

  // Triples establish the entity and relation vocabularies and each
  // entity's graph of origin.
  struct RawTriple {
    EntityId s;
    RelationId r;
    EntityId o;
    GraphTag g;
  };
  std::vector<RawTriple> raw;
  {
    auto lines = detail::read_lines(triples_path);
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto cols = detail::split_tabs(lines[i]);
      if (cols.size() != 4)
        detail::parse_error(triples_path, i + 1, "expected 4 tab-separated fields");
      GraphTag g;
      if (cols[0] == "X") g = GraphTag::X;
      else if (cols[0] == "Y") g = GraphTag::Y;
      else detail::parse_error(triples_path, i + 1, "graph tag must be X or Y");
      if (cols[1].empty() || cols[2].empty() || cols[3].empty())
        detail::parse_error(triples_path, i + 1, "empty field");
      auto intern_entity = [&](const std::string& name) {
        int32_t before = vocab.entities.size();
        EntityId id = vocab.entities.intern(name);
        if (id == before) {
          vocab.entity_graph.push_back(g);
        } else if (vocab.entity_graph[size_t(id)] != g) {
          detail::parse_error(triples_path, i + 1,
                              "entity appears in both graphs: " + name);
        }
        return id;
      };
      RawTriple t;
      t.s = intern_entity(cols[1]);
      t.r = vocab.relations.intern(cols[2]);
      t.o = intern_entity(cols[3]);
      t.g = g;
      raw.push_back(t);
    }
  }

  res.store.set_entity_count(vocab.entities.size());
  for (const RawTriple& t : raw) {
    auto r = res.store.add_triple(Triple{t.s, t.r, t.o, t.g});
    if (r == MultiGraphStore::AddResult::SelfLoop) {
      if (opt.duplicate_policy == DuplicatePolicy::Error)
        throw ValidationError("self-loop triple in " + triples_path + ": " +
                              vocab.entities.name(t.s));
      ++res.stats.dropped_self_loops;
    } else if (r == MultiGraphStore::AddResult::Duplicate) {
      if (opt.duplicate_policy == DuplicatePolicy::Error)
        throw ValidationError("duplicate triple in " + triples_path);
      ++res.stats.dropped_duplicate_triples;
    }
  }

  // Types.
  {
    auto lines = detail::read_lines(types_path);
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto cols = detail::split_tabs(lines[i]);
      if (cols.size() != 2)
        detail::parse_error(types_path, i + 1, "expected 2 tab-separated fields");
      EntityId e = vocab.entities.find(cols[0]);
      if (e == kInvalidId)
        detail::parse_error(types_path, i + 1, "unknown entity: " + cols[0]);
      res.store.add_entity_type(e, vocab.types.intern(cols[1]));
    }
  }

  // Attributes: first pass counts token frequencies, second pass maps
  // through the capped vocabulary.
  {
    auto lines = detail::read_lines(attrs_path);
    struct RawAttr {
      EntityId e;
      AttrKeyId k;
      std::vector<std::string> toks;
    };
    std::vector<RawAttr> raw_attrs;
    std::unordered_map<std::string, int64_t> freq;
    std::vector<std::string> first_seen;
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto cols = detail::split_tabs(lines[i]);
      if (cols.size() != 3)
        detail::parse_error(attrs_path, i + 1, "expected 3 tab-separated fields");
      EntityId e = vocab.entities.find(cols[0]);
      if (e == kInvalidId)
        detail::parse_error(attrs_path, i + 1, "unknown entity: " + cols[0]);
      auto toks = detail::tokenize_value(cols[2]);
      if (toks.empty())
        detail::parse_error(attrs_path, i + 1, "attribute value has no tokens");
      for (const auto& t : toks) {
        auto [it, inserted] = freq.emplace(t, 0);
        if (inserted) first_seen.push_back(t);
        ++it->second;
      }
      raw_attrs.push_back({e, vocab.attr_keys.intern(cols[1]), std::move(toks)});
    }

    // Rank by frequency, ties toward earlier first appearance.
    std::unordered_map<std::string, size_t> order;
    for (size_t i = 0; i < first_seen.size(); ++i) order[first_seen[i]] = i;
    std::vector<std::string> ranked = first_seen;
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      if (freq[a] != freq[b]) return freq[a] > freq[b];
      return order[a] < order[b];
    });
    if (ranked.size() > opt.value_token_cap) ranked.resize(opt.value_token_cap);
    std::unordered_set<std::string> kept(ranked.begin(), ranked.end());
    for (const auto& t : first_seen) {
      if (kept.count(t)) vocab.attr_values.intern(t);
    }
    vocab.oov_token = vocab.attr_values.intern(kOovToken);

    for (auto& ra : raw_attrs) {
      AttributeRecord rec;
      rec.entity = ra.e;
      rec.key = ra.k;
      for (const auto& t : ra.toks) {
        TokenId id = vocab.attr_values.find(t);
        if (id == kInvalidId || !kept.count(t)) {
          rec.value_tokens.push_back(vocab.oov_token);
          ++res.stats.oov_token_hits;
        } else {
          rec.value_tokens.push_back(id);
        }
      }
      res.store.add_attribute(std::move(rec));
    }
  }

  // Labels.
  {
    auto lines = detail::read_lines(labels_path);
    std::vector<LabelRecord> records;
    for (size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto cols = detail::split_tabs(lines[i]);
      if (cols.size() != 3)
        detail::parse_error(labels_path, i + 1, "expected 3 tab-separated fields");
      EntityId a = vocab.entities.find(cols[0]);
      if (a == kInvalidId)
        detail::parse_error(labels_path, i + 1, "unknown entity: " + cols[0]);
      EntityId b = vocab.entities.find(cols[1]);
      if (b == kInvalidId)
        detail::parse_error(labels_path, i + 1, "unknown entity: " + cols[1]);
      if (cols[2] != "0" && cols[2] != "1")
        detail::parse_error(labels_path, i + 1, "label must be 0 or 1");
      if (vocab.graph_of(a) == vocab.graph_of(b))
        detail::parse_error(labels_path, i + 1, "label pair within one graph");
      LabelRecord rec;
      // Normalize so the first column is the graph-X side.
      if (vocab.graph_of(a) == GraphTag::X) {
        rec.x = a;
        rec.y = b;
      } else {
        rec.x = b;
        rec.y = a;
      }
      rec.positive = cols[2] == "1";
      records.push_back(rec);
    }
    res.labels = build_label_set(std::move(records), vocab, /*symmetric_negatives=*/true);
  }

  return res;
}

// ---- canonical serialization (sorted, deduplicated) ----

namespace detail {

inline void write_sorted(const std::string& path, std::vector<std::string> rows) {
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  for (const auto& r : rows) out << r << '\n';
}

}  // namespace detail

inline void write_triples_tsv(const std::string& path, const MultiGraphStore& store,
                              const Vocab& vocab) {
  std::vector<std::string> rows;
  rows.reserve(store.triples().size());
  for (const Triple& t : store.triples()) {
    std::string row;
    row.push_back(graph_tag_char(t.graph));
    row += '\t';
    row += vocab.entities.name(t.subject);
    row += '\t';
    row += vocab.relations.name(t.relation);
    row += '\t';
    row += vocab.entities.name(t.object);
    rows.push_back(std::move(row));
  }
  detail::write_sorted(path, std::move(rows));
}

inline void write_attributes_tsv(const std::string& path, const MultiGraphStore& store,
                                 const Vocab& vocab) {
  std::vector<std::string> rows;
  for (const AttributeRecord& a : store.attributes()) {
    std::string value;
    for (size_t i = 0; i < a.value_tokens.size(); ++i) {
      if (i) value += ' ';
      value += vocab.attr_values.name(a.value_tokens[i]);
    }
    rows.push_back(vocab.entities.name(a.entity) + "\t" +
                   vocab.attr_keys.name(a.key) + "\t" + value);
  }
  detail::write_sorted(path, std::move(rows));
}

inline void write_types_tsv(const std::string& path, const MultiGraphStore& store,
                            const Vocab& vocab) {
  std::vector<std::string> rows;
  for (EntityId e = 0; e < store.entity_count(); ++e) {
    for (TypeId t : store.types_of(e)) {
      rows.push_back(vocab.entities.name(e) + "\t" + vocab.types.name(t));
    }
  }
  detail::write_sorted(path, std::move(rows));
}

inline void write_labels_tsv(const std::string& path, const LinkageLabelSet& labels,
                             const Vocab& vocab) {
  std::vector<std::string> rows;
  for (const LabelRecord& rec : labels.records) {
    rows.push_back(vocab.entities.name(rec.x) + "\t" + vocab.entities.name(rec.y) +
                   "\t" + (rec.positive ? "1" : "0"));
  }
  detail::write_sorted(path, std::move(rows));
}

}  // namespace linknbed
