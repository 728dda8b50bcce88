#include <catch2/catch_amalgamated.hpp>

#include "linknbed/gradcheck.hpp"
#include "linknbed/trainer.hpp"
#include "test_util.hpp"

using namespace linknbed;
using Catch::Approx;

TEST_CASE("relational loss hand cases") {
  std::vector<double> negs{0.2, 0.95};
  REQUIRE(relational_loss(0.9, std::span<const double>(negs), 1.0) ==
          Approx(1.35).margin(1e-12));

  // positive clears every negative by at least the margin
  std::vector<double> satisfied{-0.5, -0.9};
  REQUIRE(relational_loss(0.9, std::span<const double>(satisfied), 1.0) == 0.0);

  std::vector<double> cleared{0.0};
  REQUIRE(relational_loss(1.5, std::span<const double>(cleared), 1.0) == 0.0);

  std::vector<double> none;
  REQUIRE(relational_loss(0.9, std::span<const double>(none), 1.0) == 0.0);
}

TEST_CASE("linkage hinge arithmetic matches the shared kernel") {
  std::vector<double> negs{0.1, 0.9};
  REQUIRE(hinge_sum(0.8, std::span<const double>(negs), 1.0) ==
          Approx(1.4).margin(1e-12));
}

TEST_CASE("hinge losses are nonnegative") {
  Rng rng(17);
  for (int rep = 0; rep < 1000; ++rep) {
    double pos = rng.next_unit();
    std::vector<double> negs(rng.next_below(5));
    for (auto& n : negs) n = rng.next_unit();
    REQUIRE(hinge_sum(pos, std::span<const double>(negs), 1.0) >= 0.0);
  }
}

TEST_CASE("negative triple sampling constraints hold") {
  testutil::World w = testutil::random_world(30, 3, 7);
  Rng rng(5);
  int shortfall = 0;
  int checked = 0;
  for (size_t i = 0; i < w.store.triples().size() && checked < 1000; ++i) {
    const Triple& t = w.store.triples()[i];
    auto negs = sample_negative_triples(t, w.store, w.vocab, 20, CorruptMode::Both,
                                        rng, 64, &shortfall);
    for (const Triple& c : negs) {
      ++checked;
      bool head_changed = c.subject != t.subject;
      bool tail_changed = c.object != t.object;
      REQUIRE(head_changed != tail_changed);  // exactly one endpoint replaced
      EntityId replacement = head_changed ? c.subject : c.object;
      REQUIRE(replacement != t.subject);
      REQUIRE(replacement != t.object);
      REQUIRE(!w.store.contains(c.subject, c.relation, c.object));
    }
  }
  REQUIRE(checked >= 1000);
}

TEST_CASE("C = 0 yields no corruptions") {
  testutil::World w = testutil::random_world(10, 2, 8);
  Rng rng(1);
  auto negs = sample_negative_triples(w.store.triples()[0], w.store, w.vocab, 0,
                                      CorruptMode::Both, rng, 8, nullptr);
  REQUIRE(negs.empty());
}

TEST_CASE("a complete graph exhausts the retry budget with a warning") {
  // 3 entities, all 6 ordered pairs present: every corruption is observed.
  testutil::World w;
  EntityId a = w.entity("a", GraphTag::X);
  EntityId b = w.entity("b", GraphTag::X);
  EntityId c = w.entity("c", GraphTag::X);
  RelationId r = w.relation("r");
  w.seal_entities();
  for (EntityId s : {a, b, c})
    for (EntityId o : {a, b, c})
      if (s != o) w.add(s, r, o);

  Rng rng(2);
  int shortfall = 0;
  auto negs = sample_negative_triples(w.store.triples()[0], w.store, w.vocab, 5,
                                      CorruptMode::Both, rng, 32, &shortfall);
  REQUIRE(negs.empty());
  REQUIRE(shortfall == 5);
}

TEST_CASE("head-only mode reproduces subject-only corruption") {
  testutil::World w = testutil::random_world(20, 2, 9);
  Rng rng(3);
  const Triple& t = w.store.triples()[0];
  auto negs = sample_negative_triples(t, w.store, w.vocab, 30, CorruptMode::Head,
                                      rng, 64, nullptr);
  for (const Triple& c : negs) {
    REQUIRE(c.object == t.object);
    REQUIRE(c.subject != t.subject);
  }
}

namespace {

TrainConfig<double> tiny_train_config() {
  TrainConfig<double> tc;
  tc.neg_samples = 4;
  tc.neg_labels = 3;
  tc.batch_size = 16;
  tc.epochs = 2;
  tc.l2 = 1e-4;
  tc.seed = 23;
  return tc;
}

}  // namespace

TEST_CASE("plans skip unlabeled endpoints and cap label negatives") {
  RandomInstance inst = build_gradcheck_instance(24, 31);
  TrainConfig<double> tc = tiny_train_config();
  int sf = 0;
  int sides = 0, fallbacks = 0;
  for (size_t i = 0; i < inst.store.triples().size(); ++i) {
    const Triple& t = inst.store.triples()[i];
    TriplePlan plan =
        build_triple_plan(t, inst.store, inst.vocab, &inst.labels, tc, 0, i, &sf);
    for (const auto* side : {&plan.subj_label, &plan.obj_label}) {
      EntityId endpoint =
          side == &plan.subj_label ? t.subject : t.object;
      if (inst.labels.negatives_of(endpoint).empty()) {
        REQUIRE(!side->has_value());
        continue;
      }
      REQUIRE(side->has_value());
      ++sides;
      REQUIRE(int((**side).negative_substitutes.size()) <= tc.neg_labels);
      const EntityId* partner = inst.labels.positive_partner(endpoint);
      if (partner == nullptr) {
        REQUIRE((**side).positive_substitute == kInvalidId);
        ++fallbacks;
      } else {
        REQUIRE((**side).positive_substitute == *partner);
      }
    }
  }
  REQUIRE(sides > 0);
  REQUIRE(fallbacks > 0);
}

TEST_CASE("task weight mixes the two losses linearly") {
  RandomInstance inst = build_gradcheck_instance(24, 37);
  ModelConfig mc;
  mc.entity_dim = 6;
  mc.relation_dim = 4;
  mc.type_dim = 3;
  mc.attr_dim = 4;
  apply_variant(mc, Variant::EmbedAll);
  TrainConfig<double> tc = tiny_train_config();
  tc.l2 = 0;  // isolate the hinge terms
  tc.task_weight = 0.6;
  ParamSet<double> p = init_params<double>(inst.vocab, mc, 41);
  Encoder<double> enc(p, mc, inst.cache, inst.store);

  const Triple& t = inst.store.triples()[1];
  TriplePlan plan = build_triple_plan(t, inst.store, inst.vocab, &inst.labels, tc, 0,
                                      1, nullptr);
  auto loss_at = [&](double b) {
    TrainConfig<double> cfg = tc;
    cfg.task_weight = b;
    GradSink<double> sink;
    return eval_triple_plan(enc, plan, cfg, sink, false);
  };
  double rel_only = loss_at(1.0);
  double lab_only = loss_at(0.0);
  double mixed = loss_at(0.6);
  REQUIRE(rel_only > 0.0);
  REQUIRE(lab_only > 0.0);
  REQUIRE(mixed == Approx(0.6 * rel_only + 0.4 * lab_only).margin(1e-9));
}

TEST_CASE("empty batch evaluates to zero") {
  RandomInstance inst = build_gradcheck_instance(16, 43);
  ModelConfig mc;
  mc.entity_dim = 4;
  mc.relation_dim = 4;
  mc.type_dim = 3;
  mc.attr_dim = 4;
  ParamSet<double> p = init_params<double>(inst.vocab, mc, 5);
  Encoder<double> enc(p, mc, inst.cache, inst.store);
  GradSink<double> sink;
  TrainConfig<double> tc = tiny_train_config();
  BatchResult br = evaluate_batch(enc, {}, tc, sink, true);
  REQUIRE(br.loss_sum == 0.0);
  REQUIRE(sink.empty());
}

TEST_CASE("batch gradients match finite differences across task weights") {
  RandomInstance inst = build_gradcheck_instance(20, 47);
  ModelConfig mc;
  mc.entity_dim = 4;
  mc.relation_dim = 3;
  mc.type_dim = 2;
  mc.attr_dim = 3;
  apply_variant(mc, Variant::EmbedAllAttention);
  for (double b : {0.0, 0.6, 1.0}) {
    TrainConfig<double> tc = tiny_train_config();
    tc.task_weight = b;
    GradCheckSettings gc;
    gc.probe_count = 12;
    gc.h = 1e-5;
    gc.seed = 53;
    std::vector<Triple> batch(inst.batch.begin(), inst.batch.begin() + 4);
    FiniteDiffReport rep = check_model_gradients(
        inst.store, inst.vocab, &inst.labels, inst.cache, mc, tc, batch, gc);
    INFO("b = " << b << " max rel " << rep.max_rel_error);
    REQUIRE(rep.passed(1e-4));
  }
}

TEST_CASE("relational-only training never reads the label set") {
  RandomInstance inst = build_gradcheck_instance(20, 59);
  ModelConfig mc;
  mc.entity_dim = 4;
  mc.relation_dim = 3;
  mc.type_dim = 2;
  mc.attr_dim = 3;
  apply_variant(mc, Variant::EmbedOnly);
  TrainConfig<float> tc;
  tc.neg_samples = 3;
  tc.neg_labels = 5;
  tc.task_weight = 1.0;  // relational only
  tc.batch_size = 8;
  tc.epochs = 1;
  tc.seed = 61;

  auto run = [&](const LinkageLabelSet* labels) {
    ParamSet<float> p = init_params<float>(inst.vocab, mc, 3);
    Adam<float> opt(param_shapes(p));
    train(inst.store, inst.vocab, labels, inst.cache, mc, tc, p, opt);
    return p;
  };
  LinkageLabelSet scrambled = inst.labels;
  scrambled.negatives.clear();  // a very different label set
  ParamSet<float> with_real = run(&inst.labels);
  ParamSet<float> with_scrambled = run(&scrambled);
  ParamSet<float> with_null = run(nullptr);
  for (size_t a = 0; a < ParamSet<float>::kArrayCount; ++a) {
    REQUIRE(with_real.array(a).data == with_scrambled.array(a).data);
    REQUIRE(with_real.array(a).data == with_null.array(a).data);
  }
}

TEST_CASE("zero learning rate leaves parameters frozen and the trace flat") {
  RandomInstance inst = build_gradcheck_instance(20, 67);
  ModelConfig mc;
  mc.entity_dim = 4;
  mc.relation_dim = 3;
  mc.type_dim = 2;
  mc.attr_dim = 3;
  apply_variant(mc, Variant::EmbedAll);
  TrainConfig<float> tc;
  tc.neg_samples = 3;
  tc.neg_labels = 2;
  tc.lr = 0.0;
  tc.batch_size = 100;
  tc.epochs = 3;
  tc.seed = 71;

  ParamSet<float> p = init_params<float>(inst.vocab, mc, 9);
  ParamSet<float> before = p;
  Adam<float> opt(param_shapes(p));
  TrainStats stats = train(inst.store, inst.vocab, &inst.labels, inst.cache, mc, tc,
                           p, opt);
  for (size_t a = 0; a < ParamSet<float>::kArrayCount; ++a)
    REQUIRE(p.array(a).data == before.array(a).data);
  REQUIRE(stats.epoch_mean_loss.size() == 3);
  REQUIRE(stats.epoch_mean_loss[0] == Approx(stats.epoch_mean_loss[2]).margin(1e-9));
}

TEST_CASE("training on the tiny instance reduces the loss") {
  RandomInstance inst = build_gradcheck_instance(30, 73);
  ModelConfig mc;
  mc.entity_dim = 8;
  mc.relation_dim = 4;
  mc.type_dim = 3;
  mc.attr_dim = 4;
  apply_variant(mc, Variant::EmbedAll);
  TrainConfig<float> tc;
  tc.neg_samples = 8;
  tc.neg_labels = 4;
  tc.batch_size = 64;
  tc.epochs = 6;
  tc.lr = 0.02f;
  tc.seed = 79;

  ParamSet<float> p = init_params<float>(inst.vocab, mc, 11);
  Adam<float> opt(param_shapes(p));
  TrainStats stats =
      train(inst.store, inst.vocab, &inst.labels, inst.cache, mc, tc, p, opt);
  REQUIRE(stats.epoch_mean_loss.back() < stats.epoch_mean_loss.front());
}

TEST_CASE("single- and multi-threaded batches agree on the loss") {
  RandomInstance inst = build_gradcheck_instance(24, 83);
  ModelConfig mc;
  mc.entity_dim = 4;
  mc.relation_dim = 3;
  mc.type_dim = 2;
  mc.attr_dim = 3;
  apply_variant(mc, Variant::EmbedAll);
  ParamSet<double> p = init_params<double>(inst.vocab, mc, 13);
  Encoder<double> enc(p, mc, inst.cache, inst.store);
  TrainConfig<double> tc = tiny_train_config();

  std::vector<TriplePlan> plans;
  for (size_t i = 0; i < inst.store.triples().size() && i < 12; ++i)
    plans.push_back(build_triple_plan(inst.store.triples()[i], inst.store, inst.vocab,
                                      &inst.labels, tc, 0, i, nullptr));
  GradSink<double> s1, s4;
  tc.threads = 1;
  BatchResult r1 = evaluate_batch(enc, plans, tc, s1, true);
  tc.threads = 4;
  BatchResult r4 = evaluate_batch(enc, plans, tc, s4, true);
  REQUIRE(r1.loss_sum == Approx(r4.loss_sum).margin(1e-9));
  REQUIRE(s1.touched_rows() == s4.touched_rows());
}

TEST_CASE("non-finite parameters abort training with a diagnostic") {
  RandomInstance inst = build_gradcheck_instance(16, 89);
  ModelConfig mc;
  mc.entity_dim = 4;
  mc.relation_dim = 3;
  mc.type_dim = 2;
  mc.attr_dim = 3;
  TrainConfig<float> tc;
  tc.neg_samples = 2;
  tc.neg_labels = 2;
  tc.batch_size = 8;
  tc.epochs = 1;
  tc.seed = 97;

  ParamSet<float> p = init_params<float>(inst.vocab, mc, 15);
  p.w_relation.at(0, 0) = std::numeric_limits<float>::quiet_NaN();
  Adam<float> opt(param_shapes(p));
  REQUIRE_THROWS_AS(
      train(inst.store, inst.vocab, &inst.labels, inst.cache, mc, tc, p, opt),
      NumericalError);
}

TEST_CASE("train config validation") {
  TrainConfig<float> tc;
  tc.task_weight = 1.5f;
  REQUIRE_THROWS_AS(tc.validate(), std::logic_error);
  tc.task_weight = 0.5f;
  tc.margin = 0.0f;
  REQUIRE_THROWS_AS(tc.validate(), std::logic_error);
}
