#pragma once

// Multi-task mini-batch training. Each triple in a batch contributes
//   task_weight      * relational hinge loss over C corrupted triples
//   (1 - task_weight) * linkage hinge loss over the endpoint's positive
//                       partner substitution and up to Z negative-label
//                       substitutions (both endpoints when both are labeled;
//                       an endpoint with no positive partner falls back to
//                       the original triple as its positive term)
// plus l2 * ||row||^2 over every parameter row the batch touched. Gradients
// are exact; the optimizer is row-sparse Adam with per-epoch lr decay.

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "linknbed/adam.hpp"
#include "linknbed/common.hpp"
#include "linknbed/context.hpp"
#include "linknbed/model.hpp"
#include "linknbed/rng.hpp"
#include "linknbed/store.hpp"
#include "linknbed/vocab.hpp"

namespace linknbed {

enum class CorruptMode { Head, Tail, Both };

template <typename Real>
struct TrainConfig {
  int neg_samples = 50;       // C
  int neg_labels = 20;        // Z
  Real margin = Real(1);      // gamma
  Real task_weight = Real(0.6);  // b; 1 = relational only (label-blind)
  Real l2 = Real(1e-5);
  // Decoupled per-row decay applied to touched rows at update time. Unlike
  // l2 it bypasses Adam's moment normalization, so it actually shrinks rows
  // and keeps scores out of the sigmoid's saturated tails.
  Real weight_decay = Real(0);
  Real lr = Real(0.01);
  Real lr_decay = Real(0.95);  // multiplied in per epoch
  AdamHyper<Real> adam;
  int batch_size = 2000;
  int epochs = 5;
  CorruptMode corrupt_mode = CorruptMode::Both;
  uint64_t seed = 13;
  int threads = 1;
  int corrupt_retry_budget = 64;

  void validate() const {
    LNB_REQUIRE(neg_samples >= 0 && neg_labels >= 0, "C and Z must be >= 0");
    LNB_REQUIRE(task_weight >= Real(0) && task_weight <= Real(1),
                "task_weight must be in [0, 1]");
    LNB_REQUIRE(margin > Real(0), "margin must be > 0");
    LNB_REQUIRE(batch_size >= 1 && epochs >= 0, "bad batch_size/epochs");
    LNB_REQUIRE(threads >= 1, "threads must be >= 1");
  }
};

// Sum of max(0, margin - pos + neg) over the negative scores. Shared by the
// relational and linkage losses.
template <typename Real>
double hinge_sum(Real pos_score, std::span<const Real> neg_scores, Real margin) {
  double total = 0.0;
  for (Real neg : neg_scores) {
    double h = double(margin) - double(pos_score) + double(neg);
    if (h > 0.0) total += h;
  }
  return total;
}

template <typename Real>
double relational_loss(Real pos_score, std::span<const Real> neg_scores, Real margin) {
  return hinge_sum(pos_score, neg_scores, margin);
}

// Corrupts head or tail with a uniformly drawn entity e_c subject to
// e_c != subject, e_c != object and the corrupted triple being unobserved.
// Rejection sampling; an exhausted retry budget yields fewer than C and
// bumps *shortfall.
inline std::vector<Triple> sample_negative_triples(const Triple& t,
                                                   const MultiGraphStore& store,
                                                   const Vocab& vocab, int count,
                                                   CorruptMode mode, Rng& rng,
                                                   int retry_budget,
                                                   int* shortfall = nullptr) {
  std::vector<Triple> out;
  out.reserve(size_t(count));
  const int32_t n = vocab.entities.size();
  if (n <= 2) {
    if (shortfall) *shortfall += count;
    return out;
  }
  for (int c = 0; c < count; ++c) {
    bool corrupt_head = mode == CorruptMode::Head ||
                        (mode == CorruptMode::Both && rng.next_coin());
    bool found = false;
    for (int attempt = 0; attempt < retry_budget; ++attempt) {
      EntityId cand = EntityId(rng.next_below(uint64_t(n)));
      if (cand == t.subject || cand == t.object) continue;
      Triple corrupted = t;
      (corrupt_head ? corrupted.subject : corrupted.object) = cand;
      if (store.contains(corrupted.subject, corrupted.relation, corrupted.object))
        continue;
      out.push_back(corrupted);
      found = true;
      break;
    }
    if (!found && shortfall) ++(*shortfall);
  }
  return out;
}

// One endpoint's linkage substitutions. Built only when the endpoint has at
// least one negative label; a missing positive partner is recorded as
// kInvalidId and scored with the original triple.
struct LabelSidePlan {
  bool subject_side = true;
  EntityId positive_substitute = kInvalidId;
  std::vector<EntityId> negative_substitutes;
};

struct TriplePlan {
  Triple triple;
  std::vector<Triple> corruptions;
  std::optional<LabelSidePlan> subj_label;
  std::optional<LabelSidePlan> obj_label;
};

template <typename Real>
TriplePlan build_triple_plan(const Triple& t, const MultiGraphStore& store,
                             const Vocab& vocab, const LinkageLabelSet* labels,
                             const TrainConfig<Real>& cfg, uint64_t epoch,
                             uint64_t item_index, int* shortfall = nullptr) {
  TriplePlan plan;
  plan.triple = t;
  if (cfg.task_weight > Real(0) && cfg.neg_samples > 0) {
    Rng rng = make_stream(cfg.seed, "corrupt", epoch, item_index);
    plan.corruptions =
        sample_negative_triples(t, store, vocab, cfg.neg_samples, cfg.corrupt_mode,
                                rng, cfg.corrupt_retry_budget, shortfall);
  }
  if (cfg.task_weight < Real(1) && labels != nullptr && cfg.neg_labels > 0) {
    auto build_side = [&](EntityId endpoint, bool subject_side,
                          uint64_t salt) -> std::optional<LabelSidePlan> {
      auto negs = labels->negatives_of(endpoint);
      if (negs.empty()) return std::nullopt;
      LabelSidePlan side;
      side.subject_side = subject_side;
      const EntityId* partner = labels->positive_partner(endpoint);
      side.positive_substitute = partner ? *partner : kInvalidId;
      Rng rng = make_stream(cfg.seed, "label_neg", epoch * 2 + salt, item_index);
      auto picked = rng.sample_indices(negs.size(), size_t(cfg.neg_labels));
      for (size_t i : picked) side.negative_substitutes.push_back(negs[i]);
      return side;
    };
    plan.subj_label = build_side(t.subject, true, 0);
    plan.obj_label = build_side(t.object, false, 1);
  }
  return plan;
}

template <typename Real>
Triple substitute_endpoint(const Triple& t, bool subject_side, EntityId with) {
  Triple out = t;
  (subject_side ? out.subject : out.object) = with;
  return out;
}

// Loss (and optionally gradients) of one plan. The positive tape collects
// upstream from every hinge it participates in, including fallback linkage
// terms, and is backpropagated once.
template <typename Real>
double eval_triple_plan(const Encoder<Real>& enc, const TriplePlan& plan,
                        const TrainConfig<Real>& cfg, GradSink<Real>& sink,
                        bool with_grads) {
  const Real b = cfg.task_weight;
  const Real margin = cfg.margin;
  double loss = 0.0;

  ForwardTape<Real> pos = enc.forward(plan.triple);
  Real up_pos = Real(0);

  struct Scored {
    ForwardTape<Real> tape;
    Real upstream = Real(0);
  };
  std::vector<Scored> extra;
  extra.reserve(plan.corruptions.size() + 2 * (size_t(cfg.neg_labels) + 1));

  if (b > Real(0)) {
    for (const Triple& c : plan.corruptions) {
      Scored s{enc.forward(c), Real(0)};
      double h = double(margin) - double(pos.score) + double(s.tape.score);
      if (h > 0.0) {
        loss += double(b) * h;
        up_pos -= b;
        s.upstream += b;
      }
      extra.push_back(std::move(s));
    }
  }

  if (b < Real(1)) {
    const Real w = Real(1) - b;
    for (const auto* side_ptr : {&plan.subj_label, &plan.obj_label}) {
      const auto& side = *side_ptr;
      if (!side) continue;
      Real pos_lab_score;
      size_t pos_lab_idx = size_t(-1);
      if (side->positive_substitute != kInvalidId) {
        Triple sub = substitute_endpoint<Real>(plan.triple, side->subject_side,
                                               side->positive_substitute);
        extra.push_back({enc.forward(sub), Real(0)});
        pos_lab_idx = extra.size() - 1;
        pos_lab_score = extra.back().tape.score;
      } else {
        pos_lab_score = pos.score;  // missing-positive fallback
      }
      for (EntityId neg : side->negative_substitutes) {
        Triple sub = substitute_endpoint<Real>(plan.triple, side->subject_side, neg);
        Scored s{enc.forward(sub), Real(0)};
        double h = double(margin) - double(pos_lab_score) + double(s.tape.score);
        if (h > 0.0) {
          loss += double(w) * h;
          s.upstream += w;
          if (pos_lab_idx != size_t(-1))
            extra[pos_lab_idx].upstream -= w;
          else
            up_pos -= w;
        }
        extra.push_back(std::move(s));
      }
    }
  }

  if (with_grads) {
    enc.backward(pos, up_pos, sink);
    for (const Scored& s : extra) enc.backward(s.tape, s.upstream, sink);
  } else {
    enc.mark_touched(pos, sink);
    for (const Scored& s : extra) enc.mark_touched(s.tape, sink);
  }
  return loss;
}

// Adds l2 * ||row||^2 for every touched row to the loss, and 2*l2*row to the
// gradient when requested. Applied once per batch over the merged sink.
template <typename Real>
double apply_l2(const ParamSet<Real>& params, GradSink<Real>& sink, Real l2,
                bool with_grads) {
  if (l2 == Real(0)) return 0.0;
  double reg = 0.0;
  for (size_t a = 0; a < ParamSet<Real>::kArrayCount; ++a) {
    const Matrix<Real>& arr = params.array(a);
    std::vector<int32_t> keys;
    keys.reserve(sink.rows[a].size());
    for (const auto& [r, g] : sink.rows[a]) keys.push_back(r);
    std::sort(keys.begin(), keys.end());
    for (int32_t r : keys) {
      auto prow = arr.row(r);
      double sq = 0.0;
      for (Real x : prow) sq += double(x) * double(x);
      reg += double(l2) * sq;
      if (with_grads) {
        Vec<Real>& grow = sink.rows[a][r];
        for (size_t j = 0; j < prow.size(); ++j)
          grow[j] += Real(2) * l2 * prow[j];
      }
    }
  }
  return reg;
}

struct BatchResult {
  double loss_sum = 0.0;  // optimization objective (sum over triples + l2)
  size_t triples = 0;
  double mean_loss() const { return triples ? loss_sum / double(triples) : loss_sum; }
};

// Static partition across workers; worker results merge in index order, so a
// given (seed, threads) pair is bit-reproducible.
template <typename Real>
BatchResult evaluate_batch(const Encoder<Real>& enc, std::span<const TriplePlan> plans,
                           const TrainConfig<Real>& cfg, GradSink<Real>& sink,
                           bool with_grads) {
  BatchResult res;
  res.triples = plans.size();
  const int workers = std::max(1, std::min<int>(cfg.threads, int(plans.size())));
  if (workers == 1) {
    for (const TriplePlan& plan : plans)
      res.loss_sum += eval_triple_plan(enc, plan, cfg, sink, with_grads);
  } else {
    std::vector<GradSink<Real>> local(static_cast<size_t>(workers));
    std::vector<double> local_loss(size_t(workers), 0.0);
    std::vector<std::thread> pool;
    const size_t chunk = (plans.size() + size_t(workers) - 1) / size_t(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        size_t lo = size_t(w) * chunk;
        size_t hi = std::min(plans.size(), lo + chunk);
        for (size_t i = lo; i < hi; ++i)
          local_loss[size_t(w)] +=
              eval_triple_plan(enc, plans[i], cfg, local[size_t(w)], with_grads);
      });
    }
    for (auto& th : pool) th.join();
    for (int w = 0; w < workers; ++w) {
      res.loss_sum += local_loss[size_t(w)];
      sink.merge(local[size_t(w)]);
    }
  }
  res.loss_sum += apply_l2(enc.params(), sink, cfg.l2, with_grads);
  return res;
}

template <typename Real>
std::vector<std::pair<int32_t, int32_t>> param_shapes(const ParamSet<Real>& p) {
  std::vector<std::pair<int32_t, int32_t>> shapes;
  for (size_t i = 0; i < ParamSet<Real>::kArrayCount; ++i)
    shapes.emplace_back(p.array(i).rows, p.array(i).cols);
  return shapes;
}

struct TraceRow {
  int epoch = 0;
  int batch = 0;
  double mean_loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainStats {
  int first_epoch = 0;
  std::vector<double> epoch_mean_loss;  // one entry per epoch actually run
  std::vector<TraceRow> trace;
  int corruption_shortfalls = 0;
};

template <typename Real>
std::string param_norm_report(const ParamSet<Real>& p) {
  std::string out;
  for (size_t i = 0; i < ParamSet<Real>::kArrayCount; ++i) {
    const Matrix<Real>& arr = p.array(i);
    double sq = 0.0;
    for (Real x : arr.data) sq += double(x) * double(x);
    out += std::string(ParamSet<Real>::array_name(i)) + "=" +
           std::to_string(std::sqrt(sq)) + " ";
  }
  return out;
}

// Shuffled mini-batch passes over the train triples. `labels` is never read
// when task_weight == 1. Throws NumericalError on a non-finite batch loss.
template <typename Real>
TrainStats train(const MultiGraphStore& train_store, const Vocab& vocab,
                 const LinkageLabelSet* labels, const ContextCache& cache,
                 const ModelConfig& mcfg, const TrainConfig<Real>& tcfg,
                 ParamSet<Real>& params, Adam<Real>& opt, int start_epoch = 0,
                 const std::function<void(int)>& epoch_done = {}) {
  tcfg.validate();
  mcfg.validate();
  TrainStats stats;
  const LinkageLabelSet* effective_labels =
      tcfg.task_weight >= Real(1) ? nullptr : labels;
  std::vector<Triple> triples = train_store.triples();
  Encoder<Real> enc(params, mcfg, cache, train_store);

  for (int epoch = start_epoch; epoch < tcfg.epochs; ++epoch) {
    const Real lr = Real(double(tcfg.lr) * std::pow(double(tcfg.lr_decay), epoch));
    std::vector<size_t> order(triples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = make_stream(tcfg.seed, "shuffle", uint64_t(epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += size_t(tcfg.batch_size)) {
      const auto t0 = std::chrono::steady_clock::now();
      size_t end = std::min(order.size(), start + size_t(tcfg.batch_size));
      std::vector<TriplePlan> plans;
      plans.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        plans.push_back(build_triple_plan(triples[order[i]], train_store, vocab,
                                          effective_labels, tcfg, uint64_t(epoch),
                                          uint64_t(i), &stats.corruption_shortfalls));
      }
      GradSink<Real> sink;
      BatchResult br = evaluate_batch(enc, plans, tcfg, sink, /*with_grads=*/true);
      if (!std::isfinite(br.loss_sum)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                             " batch " + std::to_string(batches) +
                             "; param norms: " + param_norm_report(params));
      }
      opt.begin_step(lr);
      const Real shrink = Real(1) - lr * tcfg.weight_decay;
      for (size_t a = 0; a < ParamSet<Real>::kArrayCount; ++a) {
        std::vector<int32_t> keys;
        keys.reserve(sink.rows[a].size());
        for (const auto& [r, g] : sink.rows[a]) keys.push_back(r);
        std::sort(keys.begin(), keys.end());
        Matrix<Real>& arr = params.array(a);
        for (int32_t r : keys) {
          auto prow = arr.row(r);
          if (tcfg.weight_decay != Real(0)) {
            for (Real& x : prow) x *= shrink;
          }
          const Vec<Real>& grow = sink.rows[a][r];
          opt.update_row(a, r, {grow.data(), grow.size()}, prow);
        }
      }
      const auto t1 = std::chrono::steady_clock::now();
      double wall_ms =
          std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0)
              .count();
      stats.trace.push_back({epoch, batches, br.mean_loss(), wall_ms});
      epoch_loss += br.mean_loss();
      ++batches;
    }
    stats.epoch_mean_loss.push_back(batches ? epoch_loss / batches : 0.0);
    if (epoch_done) epoch_done(epoch);
  }
  return stats;
}

}  // namespace linknbed
