#include <catch2/catch_amalgamated.hpp>

#include "linknbed/checkpoint.hpp"
#include "linknbed/gradcheck.hpp"
#include "test_util.hpp"

using namespace linknbed;

namespace {

Checkpoint make_test_checkpoint(const RandomInstance& inst, const ModelConfig& mc,
                                uint64_t seed) {
  Checkpoint ck;
  ck.config_echo = "entity_dim = 6\nseed = " + std::to_string(seed) + "\n";
  ck.digests = inst.vocab.digests();
  ck.next_epoch = 3;
  ck.seed = seed;
  ck.params = init_params<float>(inst.vocab, mc, seed);
  ck.optimizer = Adam<float>(param_shapes(ck.params));
  ck.optimizer.begin_step(0.01f);
  std::vector<float> g(size_t(mc.entity_dim), 0.25f);
  ck.optimizer.update_row(kEntityEmbed, 1, {g.data(), g.size()},
                          ck.params.entity_embed.row(1));
  return ck;
}

ModelConfig ck_config() {
  ModelConfig mc;
  mc.entity_dim = 6;
  mc.relation_dim = 4;
  mc.type_dim = 3;
  mc.attr_dim = 4;
  apply_variant(mc, Variant::EmbedAllAttention);
  return mc;
}

}  // namespace

TEST_CASE("save, load, save is byte-identical") {
  RandomInstance inst = build_gradcheck_instance(20, 101);
  ModelConfig mc = ck_config();
  Checkpoint ck = make_test_checkpoint(inst, mc, 101);

  std::string dir = testutil::temp_dir("ckpt");
  save_checkpoint(dir + "/a.ckpt", ck);
  Checkpoint loaded = load_checkpoint(dir + "/a.ckpt", {});
  save_checkpoint(dir + "/b.ckpt", loaded);
  REQUIRE(testutil::read_file(dir + "/a.ckpt") == testutil::read_file(dir + "/b.ckpt"));

  REQUIRE(loaded.config_echo == ck.config_echo);
  REQUIRE(loaded.next_epoch == 3);
  REQUIRE(loaded.seed == 101);
  REQUIRE(loaded.optimizer.step_count() == 1);
  for (size_t a = 0; a < ParamSet<float>::kArrayCount; ++a) {
    REQUIRE(loaded.params.array(a).data == ck.params.array(a).data);
    REQUIRE(loaded.optimizer.first_moment(a).data == ck.optimizer.first_moment(a).data);
    REQUIRE(loaded.optimizer.second_moment(a).data ==
            ck.optimizer.second_moment(a).data);
  }
}

TEST_CASE("round trip reproduces probe-batch scores bit-exactly") {
  RandomInstance inst = build_gradcheck_instance(24, 103);
  ModelConfig mc = ck_config();
  Checkpoint ck = make_test_checkpoint(inst, mc, 103);

  std::string path = testutil::temp_dir("ckpt_probe") + "/m.ckpt";
  save_checkpoint(path, ck);
  Checkpoint loaded = load_checkpoint(path, {});

  Encoder<float> before(ck.params, mc, inst.cache, inst.store);
  Encoder<float> after(loaded.params, mc, inst.cache, inst.store);
  for (const Triple& t : inst.batch) {
    float a = before.score(t);
    float b = after.score(t);
    REQUIRE(a == b);  // bitwise
  }
}

TEST_CASE("digest mismatch refuses the checkpoint") {
  RandomInstance inst = build_gradcheck_instance(20, 107);
  RandomInstance other = build_gradcheck_instance(22, 109);
  ModelConfig mc = ck_config();
  Checkpoint ck = make_test_checkpoint(inst, mc, 107);
  REQUIRE_NOTHROW(verify_digests(ck, inst.vocab, "test"));
  REQUIRE_THROWS_AS(verify_digests(ck, other.vocab, "test"), ValidationError);
}

TEST_CASE("corrupted files are rejected") {
  std::string dir = testutil::temp_dir("ckpt_bad");
  testutil::write_file(dir + "/junk.ckpt", "this is not a checkpoint");
  REQUIRE_THROWS_AS(load_checkpoint(dir + "/junk.ckpt", {}), ValidationError);
  REQUIRE_THROWS_AS(load_checkpoint(dir + "/missing.ckpt", {}), ValidationError);
}
