#pragma once

// Evaluation: filtered link-prediction ranking (HITS@10, MRR per graph),
// substitution-based entity-linkage scoring, AUPRC, and the second-stage
// pair classifier used when embeddings were trained without labels.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "linknbed/adam.hpp"
#include "linknbed/common.hpp"
#include "linknbed/model.hpp"
#include "linknbed/rng.hpp"
#include "linknbed/store.hpp"
#include "linknbed/tensor.hpp"
#include "linknbed/vocab.hpp"

namespace linknbed {

struct RankResult {
  Triple triple;
  int rank = 0;              // 1-based, pessimistic within tie groups
  double reciprocal = 0.0;
  int candidates = 0;        // after filtering
};

// Scores (s, r, e') for every entity e', removes candidates that exist
// anywhere in `filter_store` (train + test) except the ground truth, plus
// the self-loop candidate e' == s, and ranks the ground truth by descending
// score. Ties resolve pessimistically: the truth ranks last in its group.
template <typename Real>
RankResult filtered_rank(const Triple& test, const Encoder<Real>& enc,
                         const MultiGraphStore& filter_store, const Vocab& vocab) {
  RankResult res;
  res.triple = test;

  RelationTrace<Real> rel = enc.encode_relation(test.relation);
  // The subject's neighborhood excludes the candidate object, so the subject
  // encoding only changes for candidates inside N(subject).
  EntityTrace<Real> subj_plain = enc.encode_entity(test.subject, kInvalidId);
  auto nbrs = enc.cache().neighbors(test.subject);

  auto score_candidate = [&](EntityId cand) {
    const EntityTrace<Real>* subj = &subj_plain;
    EntityTrace<Real> subj_excl;
    if (std::binary_search(nbrs.begin(), nbrs.end(), cand)) {
      subj_excl = enc.encode_entity(test.subject, cand);
      subj = &subj_excl;
    }
    EntityTrace<Real> obj = enc.encode_entity(cand, test.subject);
    Vec<Real> had = hadamard<Real>(subj->repr, obj.repr);
    return activate(Activation::Sigmoid, Real(dot<Real>(rel.repr, had)));
  };

  const Real truth_score = score_candidate(test.object);
  int higher = 0, tied = 0, kept = 0;
  for (EntityId cand = 0; cand < vocab.entities.size(); ++cand) {
    if (cand == test.subject) continue;  // would be a self-loop
    if (cand != test.object &&
        filter_store.contains(test.subject, test.relation, cand))
      continue;  // filtered: that triple is itself observed
    ++kept;
    if (cand == test.object) continue;
    Real s = score_candidate(cand);
    if (s > truth_score) ++higher;
    else if (s == truth_score) ++tied;
  }
  res.candidates = kept;
  res.rank = higher + tied + 1;
  res.reciprocal = 1.0 / double(res.rank);
  return res;
}

struct GraphMetrics {
  double hits10 = 0.0;
  double mrr = 0.0;
  int n = 0;
};

// Means over the test triples of each graph.
template <typename Real>
std::map<char, GraphMetrics> link_prediction_metrics(std::span<const Triple> test_triples,
                                                     const Encoder<Real>& enc,
                                                     const MultiGraphStore& filter_store,
                                                     const Vocab& vocab) {
  if (test_triples.empty()) throw ValidationError("empty test set");
  std::map<char, GraphMetrics> out;
  for (const Triple& t : test_triples) {
    RankResult r = filtered_rank(t, enc, filter_store, vocab);
    GraphMetrics& gm = out[graph_tag_char(t.graph)];
    gm.hits10 += r.rank <= 10 ? 1.0 : 0.0;
    gm.mrr += r.reciprocal;
    gm.n += 1;
  }
  for (auto& [g, gm] : out) {
    gm.hits10 /= double(gm.n);
    gm.mrr /= double(gm.n);
  }
  return out;
}

struct LinkageVerdict {
  EntityId entity_x = kInvalidId;
  EntityId entity_y = kInvalidId;
  double q = 0.0;  // mean absolute substitution-score difference; lower = same
  int shared_triples = 0;
};

// Collects every triple mentioning either entity, swaps one entity for the
// other in each, and takes the mean absolute score difference. The triple
// set and swap direction depend only on graph membership, so the result is
// bitwise symmetric in its arguments.
template <typename Real>
LinkageVerdict linkage_score(EntityId a, EntityId b, const Encoder<Real>& enc,
                             const MultiGraphStore& collect_store, const Vocab& vocab) {
  if (vocab.graph_of(a) == vocab.graph_of(b))
    throw ValidationError("linkage pair must span graphs");
  EntityId ex = a, ey = b;
  if (vocab.graph_of(ex) != GraphTag::X) std::swap(ex, ey);

  LinkageVerdict verdict;
  verdict.entity_x = ex;
  verdict.entity_y = ey;

  double total = 0.0;
  int k = 0;
  for (auto [self, other] : {std::pair{ex, ey}, std::pair{ey, ex}}) {
    for (int32_t idx : collect_store.triples_of(self)) {
      const Triple& orig = collect_store.triples()[size_t(idx)];
      Triple swapped = orig;
      if (swapped.subject == self) swapped.subject = other;
      if (swapped.object == self) swapped.object = other;
      const Real s_orig = enc.score(orig);
      const Real s_repl = enc.score(swapped);
      total += std::abs(double(s_orig) - double(s_repl));
      ++k;
    }
  }
  if (k == 0)
    throw ValidationError("linkage score undefined: neither entity appears in a triple");
  verdict.q = total / double(k);
  verdict.shared_triples = k;
  return verdict;
}

// Area under the precision-recall curve via a descending walk over the
// scored pairs, accumulating precision at each positive (step-wise, no
// interpolation). Stable under any strictly monotone score transform.
inline double auprc(std::vector<std::pair<double, bool>> scored) {
  int positives = 0, negatives = 0;
  for (const auto& [s, pos] : scored) (pos ? positives : negatives)++;
  if (positives == 0) throw ValidationError("auprc undefined: no positive pairs");
  if (negatives == 0) throw ValidationError("auprc undefined: no negative pairs");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  double area = 0.0;
  int tp = 0;
  for (size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].second) {
      ++tp;
      double precision = double(tp) / double(i + 1);
      area += precision / double(positives);
    }
  }
  return area;
}

// One-hidden-layer classifier over pair features, trained full-batch with
// Adam on weighted cross-entropy. Deterministic given the seed.
template <typename Real>
class PairClassifier {
 public:
  PairClassifier(int input_dim, int hidden, uint64_t seed)
      : w1_(hidden, input_dim), b1_(size_t(hidden), Real(0)), w2_(1, hidden),
        b2_(Real(0)) {
    Rng rng = make_stream(seed, "classifier.init");
    double bound1 = 0.5 / std::sqrt(double(hidden));
    fill_uniform(w1_, rng, -bound1, bound1);
    fill_uniform(w2_, rng, -0.5, 0.5);
  }

  // labels in {0,1}; pos_weight scales the positive-class loss.
  void train(const std::vector<Vec<Real>>& features, const std::vector<int>& labels,
             int epochs, Real lr, Real pos_weight) {
    LNB_REQUIRE(features.size() == labels.size(), "feature/label size mismatch");
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
      throw ValidationError("classifier training set has a single class");

    std::vector<std::pair<int32_t, int32_t>> shapes = {
        {w1_.rows, w1_.cols}, {1, w1_.rows}, {1, w2_.cols}, {1, 1}};
    Adam<Real> opt(shapes);
    const int h = w1_.rows;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      Matrix<Real> gw1(w1_.rows, w1_.cols);
      Vec<Real> gb1(size_t(h), Real(0));
      Vec<Real> gw2(size_t(h), Real(0));
      Real gb2 = Real(0);
      for (size_t i = 0; i < features.size(); ++i) {
        const Vec<Real>& x = features[i];
        Vec<Real> h_pre = affine(w1_, std::span<const Real>(x));
        for (int j = 0; j < h; ++j) h_pre[size_t(j)] += b1_[size_t(j)];
        Vec<Real> hid = activate_vec(Activation::Relu, std::span<const Real>(h_pre));
        Real out_pre = Real(dot<Real>(w2_.row(0), hid)) + b2_;
        Real p = activate(Activation::Sigmoid, out_pre);
        // d(weighted BCE)/d(out_pre)
        Real dout = labels[i] ? -pos_weight * (Real(1) - p) : p;
        gb2 += dout;
        for (int j = 0; j < h; ++j) {
          gw2[size_t(j)] += dout * hid[size_t(j)];
          Real dh = dout * w2_.at(0, j) *
                    activate_grad(Activation::Relu, h_pre[size_t(j)]);
          if (dh == Real(0)) continue;
          gb1[size_t(j)] += dh;
          Real* grow = gw1.data.data() + size_t(j) * size_t(gw1.cols);
          for (size_t c = 0; c < x.size(); ++c) grow[c] += dh * x[c];
        }
      }
      opt.begin_step(lr);
      for (int j = 0; j < h; ++j)
        opt.update_row(0, j, gw1.row(j), w1_.row(j));
      opt.update_row(1, 0, {gb1.data(), gb1.size()}, {b1_.data(), b1_.size()});
      opt.update_row(2, 0, {gw2.data(), gw2.size()}, w2_.row(0));
      opt.update_row(3, 0, {&gb2, 1}, {&b2_, 1});
    }
  }

  Real score(std::span<const Real> feature) const {
    Vec<Real> h_pre = affine(w1_, feature);
    for (int j = 0; j < w1_.rows; ++j) h_pre[size_t(j)] += b1_[size_t(j)];
    Vec<Real> hid = activate_vec(Activation::Relu, std::span<const Real>(h_pre));
    return activate(Activation::Sigmoid, Real(dot<Real>(w2_.row(0), hid)) + b2_);
  }

 private:
  Matrix<Real> w1_;
  Vec<Real> b1_;
  Matrix<Real> w2_;
  Real b2_;
};

// Pair feature: [ |z_a - z_b| , z_a * z_b ] over stand-alone entity
// representations (all enabled contexts included).
template <typename Real>
Vec<Real> pair_features(std::span<const Real> za, std::span<const Real> zb) {
  LNB_REQUIRE(za.size() == zb.size(), "pair_features: dimension mismatch");
  Vec<Real> f;
  f.reserve(2 * za.size());
  for (size_t i = 0; i < za.size(); ++i) f.push_back(Real(std::abs(double(za[i]) - double(zb[i]))));
  for (size_t i = 0; i < za.size(); ++i) f.push_back(za[i] * zb[i]);
  return f;
}

struct ScoredPair {
  EntityId x = kInvalidId;
  EntityId y = kInvalidId;
  double similarity = 0.0;  // higher = more likely the same entity
  double q = -1.0;          // only for the substitution path
  bool positive = false;
};

struct LinkageEvalResult {
  double auprc_value = 0.0;
  int n_pairs = 0;
  int skipped = 0;  // pairs with no triples on either side
  std::vector<ScoredPair> pairs;
};

inline std::vector<LabelRecord> sorted_records(const LinkageLabelSet& labels) {
  std::vector<LabelRecord> recs = labels.records;
  std::sort(recs.begin(), recs.end(), [](const LabelRecord& a, const LabelRecord& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.positive < b.positive;
  });
  return recs;
}

// Supervised path: rank pairs by -q from the substitution score.
template <typename Real>
LinkageEvalResult supervised_linkage_eval(const Encoder<Real>& enc,
                                          const MultiGraphStore& collect_store,
                                          const Vocab& vocab,
                                          const LinkageLabelSet& test_labels) {
  LinkageEvalResult res;
  std::vector<std::pair<double, bool>> scored;
  for (const LabelRecord& rec : sorted_records(test_labels)) {
    LinkageVerdict v;
    try {
      v = linkage_score(rec.x, rec.y, enc, collect_store, vocab);
    } catch (const ValidationError&) {
      ++res.skipped;
      continue;
    }
    res.pairs.push_back({rec.x, rec.y, -v.q, v.q, rec.positive});
    scored.emplace_back(-v.q, rec.positive);
  }
  res.n_pairs = int(scored.size());
  res.auprc_value = auprc(std::move(scored));
  return res;
}

struct ClassifierConfig {
  int hidden = 64;
  int epochs = 300;
  double lr = 0.01;
  uint64_t seed = 99;
};

// Unsupervised path: the embeddings were trained label-blind; a second-stage
// classifier learns the linkage decision from the label train split.
template <typename Real>
LinkageEvalResult classifier_linkage_eval(const Encoder<Real>& enc, const Vocab& vocab,
                                          const LinkageLabelSet& train_labels,
                                          const LinkageLabelSet& test_labels,
                                          const ClassifierConfig& cc = {}) {
  std::unordered_map<EntityId, Vec<Real>> reprs;
  auto repr_of = [&](EntityId e) -> const Vec<Real>& {
    auto it = reprs.find(e);
    if (it == reprs.end())
      it = reprs.emplace(e, enc.entity_representation(e)).first;
    return it->second;
  };

  std::vector<Vec<Real>> feats;
  std::vector<int> ys;
  int n_pos = 0, n_neg = 0;
  for (const LabelRecord& rec : sorted_records(train_labels)) {
    feats.push_back(pair_features<Real>(repr_of(rec.x), repr_of(rec.y)));
    ys.push_back(rec.positive ? 1 : 0);
    (rec.positive ? n_pos : n_neg)++;
  }
  if (feats.empty()) throw ValidationError("no training label pairs for classifier");
  const int dim = int(feats.front().size());
  Real pos_weight = n_pos > 0 ? Real(std::min(50.0, double(n_neg) / double(n_pos)))
                              : Real(1);
  PairClassifier<Real> clf(dim, cc.hidden, cc.seed);
  clf.train(feats, ys, cc.epochs, Real(cc.lr), pos_weight);

  LinkageEvalResult res;
  std::vector<std::pair<double, bool>> scored;
  for (const LabelRecord& rec : sorted_records(test_labels)) {
    Vec<Real> f = pair_features<Real>(repr_of(rec.x), repr_of(rec.y));
    double p = double(clf.score(std::span<const Real>(f)));
    res.pairs.push_back({rec.x, rec.y, p, -1.0, rec.positive});
    scored.emplace_back(p, rec.positive);
  }
  res.n_pairs = int(scored.size());
  res.auprc_value = auprc(std::move(scored));
  return res;
}

// Single JSON document with the exact run configuration, per-graph ranking
// metrics, and the linkage block. Key order is fixed so identical runs
// serialize to identical bytes.
inline std::string render_metrics_json(
    const std::map<std::string, std::string>& config_echo,
    const std::map<char, GraphMetrics>& graphs,
    const LinkageEvalResult* linkage, bool linkage_supervised) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_echo) cfg[k] = v;
  doc["config"] = std::move(cfg);
  nlohmann::ordered_json gs = nlohmann::ordered_json::object();
  for (const auto& [g, gm] : graphs) {
    nlohmann::ordered_json one;
    one["hits10"] = gm.hits10;
    one["mrr"] = gm.mrr;
    one["n"] = gm.n;
    gs[std::string(1, g)] = std::move(one);
  }
  doc["graphs"] = std::move(gs);
  if (linkage != nullptr) {
    nlohmann::ordered_json lk;
    lk[linkage_supervised ? "auprc_supervised" : "auprc_unsupervised"] =
        linkage->auprc_value;
    lk["n_pairs"] = linkage->n_pairs;
    lk["skipped_pairs"] = linkage->skipped;
    doc["linkage"] = std::move(lk);
  }
  return doc.dump(2) + "\n";
}

}  // namespace linknbed
