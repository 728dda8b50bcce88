#include <catch2/catch_amalgamated.hpp>

#include <unordered_map>
#include <unordered_set>

#include "linknbed/synth.hpp"
#include "test_util.hpp"

using namespace linknbed;

namespace {

std::unordered_map<std::string, std::string> load_rename_map(const std::string& path) {
  std::unordered_map<std::string, std::string> out;
  for (const std::string& line : detail::read_lines(path)) {
    if (line.empty()) continue;
    auto cols = detail::split_tabs(line);
    REQUIRE(cols.size() == 2);
    out[cols[0]] = cols[1];
  }
  return out;
}

}  // namespace

TEST_CASE("duplicate_fraction zero yields no positive labels") {
  SynthConfig cfg;
  cfg.n_entities = 40;
  cfg.density = 3;
  cfg.duplicate_fraction = 0.0;
  cfg.seed = 11;
  SynthPaths paths = generate_synthetic_pair(cfg, testutil::temp_dir("synth_zero"));
  REQUIRE(paths.positive_labels == 0);
  LoadResult res = load_graphs(paths.triples, paths.attrs, paths.types, paths.labels);
  REQUIRE(res.labels.positives.empty());
}

TEST_CASE("no corruption and full duplication give an isomorphic rename") {
  SynthConfig cfg;
  cfg.n_entities = 30;
  cfg.density = 3;
  cfg.duplicate_fraction = 1.0;
  cfg.edge_drop = 0.0;
  cfg.attr_drop = 0.0;
  cfg.seed = 4;
  std::string dir = testutil::temp_dir("synth_iso");
  SynthPaths paths = generate_synthetic_pair(cfg, dir);
  REQUIRE(paths.positive_labels == 30);

  auto rename = load_rename_map(paths.rename_map);
  REQUIRE(rename.size() == 30);

  LoadResult res = load_graphs(paths.triples, paths.attrs, paths.types, paths.labels);
  // every entity is positively labeled
  for (EntityId e = 0; e < res.vocab.entities.size(); ++e)
    REQUIRE(res.labels.positive_partner(e) != nullptr);

  // X triples map exactly onto Y triples through the rename
  std::unordered_set<std::string> y_rows;
  size_t x_count = 0, y_count = 0;
  for (const Triple& t : res.store.triples()) {
    if (t.graph == GraphTag::Y) {
      y_rows.insert(res.vocab.entities.name(t.subject) + "|" +
                    res.vocab.relations.name(t.relation) + "|" +
                    res.vocab.entities.name(t.object));
      ++y_count;
    } else {
      ++x_count;
    }
  }
  REQUIRE(x_count == y_count);
  for (const Triple& t : res.store.triples()) {
    if (t.graph != GraphTag::X) continue;
    std::string mapped = rename.at(res.vocab.entities.name(t.subject)) + "|" +
                         res.vocab.relations.name(t.relation) + "|" +
                         rename.at(res.vocab.entities.name(t.object));
    REQUIRE(y_rows.count(mapped) == 1);
  }
}

TEST_CASE("default-scale recipe yields the expected label count") {
  SynthConfig cfg;  // 200 entities, density 6, duplicate_fraction 0.2
  cfg.seed = 7;
  std::string dir = testutil::temp_dir("synth_default");
  SynthPaths paths = generate_synthetic_pair(cfg, dir);
  REQUIRE(paths.positive_labels == 40);

  LoadResult res = load_graphs(paths.triples, paths.attrs, paths.types, paths.labels);
  size_t x_triples = 0;
  for (const Triple& t : res.store.triples())
    if (t.graph == GraphTag::X) ++x_triples;
  REQUIRE(x_triples >= 1150);
  REQUIRE(x_triples <= 1200);
  // every entity appears in at least one triple
  for (EntityId e = 0; e < res.vocab.entities.size(); ++e)
    REQUIRE(!res.store.triples_of(e).empty());
}

TEST_CASE("generator rejects invalid rates") {
  SynthConfig cfg;
  cfg.duplicate_fraction = 1.5;
  REQUIRE_THROWS_AS(generate_synthetic_pair(cfg, testutil::temp_dir("synth_bad")),
                    ValidationError);
  cfg.duplicate_fraction = 0.5;
  cfg.edge_drop = -0.1;
  REQUIRE_THROWS_AS(generate_synthetic_pair(cfg, testutil::temp_dir("synth_bad2")),
                    ValidationError);
  cfg.edge_drop = 0.1;
  cfg.density = 0.2;
  REQUIRE_THROWS_AS(generate_synthetic_pair(cfg, testutil::temp_dir("synth_bad3")),
                    ValidationError);
}

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig cfg;
  cfg.n_entities = 25;
  cfg.density = 2;
  cfg.duplicate_fraction = 0.4;
  cfg.seed = 99;
  std::string d1 = testutil::temp_dir("synth_det1");
  std::string d2 = testutil::temp_dir("synth_det2");
  SynthPaths p1 = generate_synthetic_pair(cfg, d1);
  SynthPaths p2 = generate_synthetic_pair(cfg, d2);
  REQUIRE(testutil::read_file(p1.triples) == testutil::read_file(p2.triples));
  REQUIRE(testutil::read_file(p1.attrs) == testutil::read_file(p2.attrs));
  REQUIRE(testutil::read_file(p1.labels) == testutil::read_file(p2.labels));
}
