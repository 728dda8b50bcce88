#pragma once

// Three-layer encoder and relational scorer.
//
//   atomic layer         v = f(embedding row)            entities, relations,
//                                                        types, attributes
//   contextual layer     aggregate(member vectors)       neighborhood /
//                        mean, max, or softmax-attention attribute / type
//   representation layer z = sigma(W.v + W.contexts)
//   score                g = sigmoid(z_r . (z_s * z_o))
//
// The forward pass records a tape of every intermediate needed to reproduce
// the score and to drive the exact backward pass; gradients land in a sparse
// row-indexed sink so the optimizer only ever touches rows that participated.

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/context.hpp"
#include "linknbed/rng.hpp"
#include "linknbed/store.hpp"
#include "linknbed/tensor.hpp"
#include "linknbed/vocab.hpp"

namespace linknbed {

enum class Aggregator { Mean, Max };

struct ModelConfig {
  int entity_dim = 256;
  int relation_dim = 64;
  int type_dim = 16;
  int attr_dim = 16;
  bool use_entity = true;
  bool use_attrs = false;
  bool use_neighbors = false;
  bool use_types = false;
  bool use_attention = false;
  Activation atomic_activation = Activation::Relu;
  Activation repr_activation = Activation::Tanh;
  Aggregator attr_aggregator = Aggregator::Max;

  void validate() const {
    LNB_REQUIRE(entity_dim >= 1 && relation_dim >= 1 && type_dim >= 1 && attr_dim >= 1,
                "all embedding dimensions must be >= 1");
  }
};

// The seven ablations: which information feeds the representation layer.
enum class Variant {
  EmbedOnly,
  AttrOnly,
  NhbrOnly,
  EmbedAttr,
  EmbedNhbr,
  EmbedAll,
  EmbedAllAttention,
};

inline void apply_variant(ModelConfig& cfg, Variant v) {
  cfg.use_entity = false;
  cfg.use_attrs = false;
  cfg.use_neighbors = false;
  cfg.use_types = false;
  cfg.use_attention = false;
  switch (v) {
    case Variant::EmbedOnly: cfg.use_entity = true; break;
    case Variant::AttrOnly: cfg.use_attrs = true; break;
    case Variant::NhbrOnly: cfg.use_neighbors = true; break;
    case Variant::EmbedAttr: cfg.use_entity = cfg.use_attrs = true; break;
    case Variant::EmbedNhbr: cfg.use_entity = cfg.use_neighbors = true; break;
    case Variant::EmbedAll:
      cfg.use_entity = cfg.use_attrs = cfg.use_neighbors = cfg.use_types = true;
      break;
    case Variant::EmbedAllAttention:
      cfg.use_entity = cfg.use_attrs = cfg.use_neighbors = cfg.use_types = true;
      cfg.use_attention = true;
      break;
  }
}

// All learnable arrays. Embedding tables hold one row per id; projection
// weights are out_dim x in_dim; attention scores are one scalar per context
// member id (allocated only when attention is enabled).
template <typename Real>
struct ParamSet {
  Matrix<Real> entity_embed;    // n x d
  Matrix<Real> relation_embed;  // m x k
  Matrix<Real> type_embed;      // z x q
  Matrix<Real> attr_key_embed;  // u x y
  Matrix<Real> attr_val_embed;  // v x y
  Matrix<Real> w_entity;        // d x d
  Matrix<Real> w_neighbor;      // d x d
  Matrix<Real> w_attr;          // d x y
  Matrix<Real> w_relation;      // d x k
  Matrix<Real> w_type;          // d x q
  Matrix<Real> attn_neighbor;   // n x 1
  Matrix<Real> attn_attr_key;   // u x 1
  Matrix<Real> attn_type;       // z x 1

  static constexpr size_t kArrayCount = 13;

  Matrix<Real>& array(size_t i) {
    Matrix<Real>* arr[kArrayCount] = {
        &entity_embed, &relation_embed, &type_embed,  &attr_key_embed,
        &attr_val_embed, &w_entity,     &w_neighbor,  &w_attr,
        &w_relation,   &w_type,         &attn_neighbor, &attn_attr_key,
        &attn_type};
    LNB_REQUIRE(i < kArrayCount, "param array index out of range");
    return *arr[i];
  }
  const Matrix<Real>& array(size_t i) const {
    return const_cast<ParamSet*>(this)->array(i);
  }

  static const char* array_name(size_t i) {
    static const char* names[kArrayCount] = {
        "entity_embed",  "relation_embed", "type_embed",  "attr_key_embed",
        "attr_val_embed", "w_entity",      "w_neighbor",  "w_attr",
        "w_relation",    "w_type",         "attn_neighbor", "attn_attr_key",
        "attn_type"};
    return names[i];
  }

  uint64_t allocated_scalars() const {
    uint64_t n = 0;
    for (size_t i = 0; i < kArrayCount; ++i) n += array(i).size();
    return n;
  }
};

enum ParamArray : size_t {
  kEntityEmbed = 0,
  kRelationEmbed,
  kTypeEmbed,
  kAttrKeyEmbed,
  kAttrValEmbed,
  kWEntity,
  kWNeighbor,
  kWAttr,
  kWRelation,
  kWType,
  kAttnNeighbor,
  kAttnAttrKey,
  kAttnType,
};

// Uniform init in +-0.5/sqrt(out_dim); attention scores count as out_dim 1.
template <typename Real>
ParamSet<Real> init_params(const Vocab& vocab, const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamSet<Real> p;
  const int32_t n = vocab.entities.size();
  const int32_t m = vocab.relations.size();
  const int32_t z = vocab.types.size();
  const int32_t u = vocab.attr_keys.size();
  const int32_t v = vocab.attr_values.size();
  p.entity_embed = Matrix<Real>(n, cfg.entity_dim);
  p.relation_embed = Matrix<Real>(m, cfg.relation_dim);
  p.type_embed = Matrix<Real>(z, cfg.type_dim);
  p.attr_key_embed = Matrix<Real>(u, cfg.attr_dim);
  p.attr_val_embed = Matrix<Real>(v, cfg.attr_dim);
  p.w_entity = Matrix<Real>(cfg.entity_dim, cfg.entity_dim);
  p.w_neighbor = Matrix<Real>(cfg.entity_dim, cfg.entity_dim);
  p.w_attr = Matrix<Real>(cfg.entity_dim, cfg.attr_dim);
  p.w_relation = Matrix<Real>(cfg.entity_dim, cfg.relation_dim);
  p.w_type = Matrix<Real>(cfg.entity_dim, cfg.type_dim);
  if (cfg.use_attention) {
    p.attn_neighbor = Matrix<Real>(n, 1);
    p.attn_attr_key = Matrix<Real>(u, 1);
    p.attn_type = Matrix<Real>(z, 1);
  }
  for (size_t i = 0; i < ParamSet<Real>::kArrayCount; ++i) {
    Matrix<Real>& arr = p.array(i);
    if (arr.empty()) continue;
    int out_dim = (i >= kWEntity && i <= kWType) ? arr.rows : arr.cols;
    double bound = 0.5 / std::sqrt(double(out_dim));
    Rng rng = make_stream(seed, "init", i);
    fill_uniform(arr, rng, -bound, bound);
  }
  return p;
}

// Sparse row-indexed gradients. Rows present in the sink are exactly the
// rows the batch touched; rows never read stay absent.
template <typename Real>
struct GradSink {
  std::array<std::unordered_map<int32_t, Vec<Real>>, ParamSet<Real>::kArrayCount> rows;

  Vec<Real>& row(size_t array, int32_t r, int32_t cols) {
    auto [it, inserted] = rows[array].try_emplace(r);
    if (inserted) it->second.assign(size_t(cols), Real(0));
    return it->second;
  }

  void merge(const GradSink& other) {
    for (size_t a = 0; a < rows.size(); ++a) {
      for (const auto& [r, grad] : other.rows[a]) {
        Vec<Real>& mine = row(a, r, int32_t(grad.size()));
        for (size_t j = 0; j < grad.size(); ++j) mine[j] += grad[j];
      }
    }
  }

  size_t touched_rows() const {
    size_t n = 0;
    for (const auto& m : rows) n += m.size();
    return n;
  }

  bool empty() const { return touched_rows() == 0; }
};

// Shared aggregation for all three context kinds. Weighted sum when weights
// are given (attention), otherwise mean or elementwise max. For max, argmax
// per coordinate is recorded for gradient routing; ties go to the lowest
// member index. No members -> zero vector.
template <typename Real>
Vec<Real> aggregate_context(std::span<const Vec<Real>> members,
                            std::span<const Real> weights, Aggregator agg,
                            int dim, std::vector<int32_t>* argmax_out = nullptr) {
  Vec<Real> out(size_t(dim), Real(0));
  if (argmax_out) argmax_out->assign(size_t(dim), -1);
  if (members.empty()) return out;
  for (const auto& mvec : members)
    LNB_REQUIRE(int(mvec.size()) == dim, "aggregate_context: mixed member lengths");
  if (!weights.empty()) {
    LNB_REQUIRE(weights.size() == members.size(),
                "aggregate_context: weight count mismatch");
    for (size_t i = 0; i < members.size(); ++i) {
      for (int j = 0; j < dim; ++j)
        out[size_t(j)] += weights[i] * members[i][size_t(j)];
    }
    return out;
  }
  if (agg == Aggregator::Mean) {
    for (const auto& mvec : members) {
      for (int j = 0; j < dim; ++j) out[size_t(j)] += mvec[size_t(j)];
    }
    const Real inv = Real(1) / Real(members.size());
    for (auto& o : out) o *= inv;
    return out;
  }
  // Max
  for (int j = 0; j < dim; ++j) {
    Real best = members[0][size_t(j)];
    int32_t arg = 0;
    for (size_t i = 1; i < members.size(); ++i) {
      if (members[i][size_t(j)] > best) {
        best = members[i][size_t(j)];
        arg = int32_t(i);
      }
    }
    out[size_t(j)] = best;
    if (argmax_out) (*argmax_out)[size_t(j)] = arg;
  }
  return out;
}

template <typename Real>
struct EntityTrace {
  EntityId id = kInvalidId;
  Vec<Real> atomic;                  // f(entity row)
  std::vector<EntityId> nbr_ids;     // members after excluding the other endpoint
  Vec<Real> nbr_weights;             // attention weights; empty means plain mean
  Vec<Real> nbr_ctx;                 // dim d
  std::vector<int32_t> attr_records; // indices into store.attributes()
  std::vector<Vec<Real>> attr_pre;   // per record, before the atomic activation
  std::vector<Vec<Real>> attr_emb;   // per record, after
  Vec<Real> attr_weights;            // attention weights; empty means mean/max
  std::vector<int32_t> attr_argmax;  // per coordinate, member index (max only)
  Vec<Real> attr_ctx;                // dim y
  Vec<Real> pre_repr;                // dim d, before repr activation
  Vec<Real> repr;                    // z vector
};

template <typename Real>
struct RelationTrace {
  RelationId id = kInvalidId;
  Vec<Real> atomic;               // f(relation row)
  std::vector<TypeId> type_ids;
  Vec<Real> type_weights;         // attention weights; empty means mean
  Vec<Real> type_ctx;             // dim q
  Vec<Real> pre_repr;
  Vec<Real> repr;
};

template <typename Real>
struct ForwardTape {
  EntityTrace<Real> subj;
  EntityTrace<Real> obj;
  RelationTrace<Real> rel;
  Real score_pre = Real(0);
  Real score = Real(0);
};

template <typename Real>
class Encoder {
 public:
  Encoder(const ParamSet<Real>& params, const ModelConfig& cfg,
          const ContextCache& cache, const MultiGraphStore& store)
      : p_(params), cfg_(cfg), cache_(cache), store_(store) {}

  const ModelConfig& config() const { return cfg_; }
  const ParamSet<Real>& params() const { return p_; }
  const ContextCache& cache() const { return cache_; }
  const MultiGraphStore& store() const { return store_; }

  Vec<Real> atomic_entity(EntityId e) const {
    LNB_REQUIRE(e >= 0 && e < p_.entity_embed.rows, "unknown entity id");
    return activate_vec(cfg_.atomic_activation, p_.entity_embed.row(e));
  }
  Vec<Real> atomic_relation(RelationId r) const {
    LNB_REQUIRE(r >= 0 && r < p_.relation_embed.rows, "unknown relation id");
    return activate_vec(cfg_.atomic_activation, p_.relation_embed.row(r));
  }
  Vec<Real> atomic_type(TypeId t) const {
    LNB_REQUIRE(t >= 0 && t < p_.type_embed.rows, "unknown type id");
    return activate_vec(cfg_.atomic_activation, p_.type_embed.row(t));
  }

  // a = f(key row + mean of value-token rows)
  void attribute_embed(const AttributeRecord& rec, Vec<Real>& pre, Vec<Real>& emb) const {
    auto key_row = p_.attr_key_embed.row(rec.key);
    pre.assign(key_row.begin(), key_row.end());
    const Real inv = Real(1) / Real(rec.value_tokens.size());
    for (TokenId t : rec.value_tokens) {
      auto vrow = p_.attr_val_embed.row(t);
      for (size_t j = 0; j < pre.size(); ++j) pre[j] += inv * vrow[j];
    }
    emb = activate_vec(cfg_.atomic_activation, std::span<const Real>(pre));
  }

  // Encodes one entity for a triple whose other endpoint is `exclude`
  // (kInvalidId when encoding stand-alone). Disabled contexts stay zero.
  EntityTrace<Real> encode_entity(EntityId e, EntityId exclude) const {
    EntityTrace<Real> tr;
    tr.id = e;
    tr.atomic = atomic_entity(e);
    const int d = cfg_.entity_dim;
    tr.nbr_ctx.assign(size_t(d), Real(0));
    tr.attr_ctx.assign(size_t(cfg_.attr_dim), Real(0));

    if (cfg_.use_neighbors) {
      for (EntityId nb : cache_.neighbors(e)) {
        if (nb != exclude) tr.nbr_ids.push_back(nb);
      }
      if (!tr.nbr_ids.empty()) {
        std::vector<Vec<Real>> members;
        members.reserve(tr.nbr_ids.size());
        for (EntityId nb : tr.nbr_ids) members.push_back(atomic_entity(nb));
        if (cfg_.use_attention) {
          Vec<Real> theta(tr.nbr_ids.size());
          for (size_t i = 0; i < tr.nbr_ids.size(); ++i)
            theta[i] = p_.attn_neighbor.at(tr.nbr_ids[i], 0);
          tr.nbr_weights = softmax<Real>(theta);
        }
        tr.nbr_ctx = aggregate_context<Real>(members, tr.nbr_weights,
                                             Aggregator::Mean, d);
      }
    }

    if (cfg_.use_attrs) {
      auto recs = cache_.attrs(e);
      tr.attr_records.assign(recs.begin(), recs.end());
      if (!tr.attr_records.empty()) {
        tr.attr_pre.resize(tr.attr_records.size());
        tr.attr_emb.resize(tr.attr_records.size());
        for (size_t i = 0; i < tr.attr_records.size(); ++i) {
          const AttributeRecord& rec = store_.attributes()[size_t(tr.attr_records[i])];
          attribute_embed(rec, tr.attr_pre[i], tr.attr_emb[i]);
        }
        if (cfg_.use_attention) {
          Vec<Real> theta(tr.attr_records.size());
          for (size_t i = 0; i < tr.attr_records.size(); ++i) {
            const AttributeRecord& rec = store_.attributes()[size_t(tr.attr_records[i])];
            theta[i] = p_.attn_attr_key.at(rec.key, 0);
          }
          tr.attr_weights = softmax<Real>(theta);
        }
        tr.attr_ctx = aggregate_context<Real>(tr.attr_emb, tr.attr_weights,
                                              cfg_.attr_aggregator, cfg_.attr_dim,
                                              &tr.attr_argmax);
      }
    }

    tr.pre_repr.assign(size_t(d), Real(0));
    if (cfg_.use_entity) affine_add(tr.pre_repr, p_.w_entity, std::span<const Real>(tr.atomic));
    if (cfg_.use_neighbors)
      affine_add(tr.pre_repr, p_.w_neighbor, std::span<const Real>(tr.nbr_ctx));
    if (cfg_.use_attrs)
      affine_add(tr.pre_repr, p_.w_attr, std::span<const Real>(tr.attr_ctx));
    tr.repr = activate_vec(cfg_.repr_activation, std::span<const Real>(tr.pre_repr));
    return tr;
  }

  RelationTrace<Real> encode_relation(RelationId r) const {
    RelationTrace<Real> tr;
    tr.id = r;
    tr.atomic = atomic_relation(r);
    tr.type_ctx.assign(size_t(cfg_.type_dim), Real(0));
    if (cfg_.use_types) {
      auto tys = cache_.types_for_relation(r);
      tr.type_ids.assign(tys.begin(), tys.end());
      if (!tr.type_ids.empty()) {
        std::vector<Vec<Real>> members;
        members.reserve(tr.type_ids.size());
        for (TypeId t : tr.type_ids) members.push_back(atomic_type(t));
        if (cfg_.use_attention) {
          Vec<Real> theta(tr.type_ids.size());
          for (size_t i = 0; i < tr.type_ids.size(); ++i)
            theta[i] = p_.attn_type.at(tr.type_ids[i], 0);
          tr.type_weights = softmax<Real>(theta);
        }
        tr.type_ctx = aggregate_context<Real>(members, tr.type_weights,
                                              Aggregator::Mean, cfg_.type_dim);
      }
    }
    tr.pre_repr = affine(p_.w_relation, std::span<const Real>(tr.atomic));
    if (cfg_.use_types)
      affine_add(tr.pre_repr, p_.w_type, std::span<const Real>(tr.type_ctx));
    tr.repr = activate_vec(cfg_.repr_activation, std::span<const Real>(tr.pre_repr));
    return tr;
  }

  ForwardTape<Real> forward(const Triple& t) const {
    ForwardTape<Real> tape;
    tape.subj = encode_entity(t.subject, t.object);
    tape.obj = encode_entity(t.object, t.subject);
    tape.rel = encode_relation(t.relation);
    Vec<Real> had = hadamard<Real>(tape.subj.repr, tape.obj.repr);
    tape.score_pre = Real(dot<Real>(tape.rel.repr, had));
    tape.score = activate(Activation::Sigmoid, tape.score_pre);
    return tape;
  }

  Real score(const Triple& t) const { return forward(t).score; }

  // Stand-alone representation (no endpoint exclusion); used by the
  // second-stage classifier features.
  Vec<Real> entity_representation(EntityId e) const {
    return encode_entity(e, kInvalidId).repr;
  }

  // d(loss)/d(params) for upstream = d(loss)/d(score). Touched-but-dead rows
  // still appear in the sink with zero gradient.
  void backward(const ForwardTape<Real>& tape, Real upstream, GradSink<Real>& sink) const {
    mark_touched(tape, sink);
    if (upstream == Real(0)) return;
    const Real g = tape.score;
    const Real du = upstream * g * (Real(1) - g);
    const int d = cfg_.entity_dim;
    Vec<Real> dzr(size_t(d), Real(0)), dzs(size_t(d), Real(0)), dzo(size_t(d), Real(0));
    for (int j = 0; j < d; ++j) {
      const Real zr = tape.rel.repr[size_t(j)];
      const Real zs = tape.subj.repr[size_t(j)];
      const Real zo = tape.obj.repr[size_t(j)];
      dzr[size_t(j)] = du * zs * zo;
      dzs[size_t(j)] = du * zr * zo;
      dzo[size_t(j)] = du * zr * zs;
    }
    backward_entity(tape.subj, dzs, sink);
    backward_entity(tape.obj, dzo, sink);
    backward_relation(tape.rel, dzr, sink);
  }

  // Registers every row the tape read, without any gradient. Keeps the
  // touched-row set identical between loss-only and gradient passes.
  void mark_touched(const ForwardTape<Real>& tape, GradSink<Real>& sink) const {
    for (const EntityTrace<Real>* tr : {&tape.subj, &tape.obj}) {
      sink.row(kEntityEmbed, tr->id, cfg_.entity_dim);
      for (EntityId nb : tr->nbr_ids) {
        sink.row(kEntityEmbed, nb, cfg_.entity_dim);
        if (cfg_.use_attention) sink.row(kAttnNeighbor, nb, 1);
      }
      for (int32_t ridx : tr->attr_records) {
        const AttributeRecord& rec = store_.attributes()[size_t(ridx)];
        sink.row(kAttrKeyEmbed, rec.key, cfg_.attr_dim);
        for (TokenId t : rec.value_tokens) sink.row(kAttrValEmbed, t, cfg_.attr_dim);
        if (cfg_.use_attention) sink.row(kAttnAttrKey, rec.key, 1);
      }
    }
    sink.row(kRelationEmbed, tape.rel.id, cfg_.relation_dim);
    for (TypeId t : tape.rel.type_ids) {
      sink.row(kTypeEmbed, t, cfg_.type_dim);
      if (cfg_.use_attention) sink.row(kAttnType, t, 1);
    }
    auto touch_dense = [&](size_t arr, const Matrix<Real>& m) {
      for (int32_t i = 0; i < m.rows; ++i) sink.row(arr, i, m.cols);
    };
    if (cfg_.use_entity) touch_dense(kWEntity, p_.w_entity);
    if (cfg_.use_neighbors) touch_dense(kWNeighbor, p_.w_neighbor);
    if (cfg_.use_attrs) touch_dense(kWAttr, p_.w_attr);
    touch_dense(kWRelation, p_.w_relation);
    if (cfg_.use_types) touch_dense(kWType, p_.w_type);
  }

 private:
  // dtheta_i = w_i * (s_i - sum_j w_j s_j), s_i = <dctx, member_i>
  static Vec<Real> attention_theta_grads(std::span<const Real> weights,
                                         const std::vector<Vec<Real>>& members,
                                         std::span<const Real> dctx) {
    Vec<Real> s(weights.size());
    double mix = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      s[i] = Real(dot<Real>(dctx, members[i]));
      mix += double(weights[i]) * double(s[i]);
    }
    Vec<Real> dtheta(weights.size());
    for (size_t i = 0; i < weights.size(); ++i)
      dtheta[i] = weights[i] * Real(double(s[i]) - mix);
    return dtheta;
  }

  void add_embedding_grad(size_t array, int32_t id, std::span<const Real> datomic,
                          GradSink<Real>& sink) const {
    auto pre = p_.array(array).row(id);
    Vec<Real>& grow = sink.row(array, id, int32_t(pre.size()));
    for (size_t j = 0; j < pre.size(); ++j)
      grow[j] += datomic[j] * activate_grad(cfg_.atomic_activation, pre[j]);
  }

  void add_outer(size_t array, std::span<const Real> dout, std::span<const Real> in,
                 GradSink<Real>& sink) const {
    for (size_t i = 0; i < dout.size(); ++i) {
      if (dout[i] == Real(0)) continue;
      Vec<Real>& grow = sink.row(array, int32_t(i), int32_t(in.size()));
      for (size_t j = 0; j < in.size(); ++j) grow[j] += dout[i] * in[j];
    }
  }

  void backward_entity(const EntityTrace<Real>& tr, const Vec<Real>& dz,
                       GradSink<Real>& sink) const {
    const int d = cfg_.entity_dim;
    Vec<Real> dh(size_t(d), Real(0));
    for (int j = 0; j < d; ++j)
      dh[size_t(j)] =
          dz[size_t(j)] * activate_grad(cfg_.repr_activation, tr.pre_repr[size_t(j)]);

    if (cfg_.use_entity) {
      add_outer(kWEntity, dh, tr.atomic, sink);
      Vec<Real> datomic = affine_backward_input(p_.w_entity, std::span<const Real>(dh));
      add_embedding_grad(kEntityEmbed, tr.id, datomic, sink);
    }

    if (cfg_.use_neighbors && !tr.nbr_ids.empty()) {
      add_outer(kWNeighbor, dh, tr.nbr_ctx, sink);
      Vec<Real> dctx = affine_backward_input(p_.w_neighbor, std::span<const Real>(dh));
      std::vector<Vec<Real>> members;
      members.reserve(tr.nbr_ids.size());
      for (EntityId nb : tr.nbr_ids) members.push_back(atomic_entity(nb));
      if (!tr.nbr_weights.empty()) {
        Vec<Real> dtheta = attention_theta_grads(tr.nbr_weights, members, dctx);
        for (size_t i = 0; i < tr.nbr_ids.size(); ++i) {
          sink.row(kAttnNeighbor, tr.nbr_ids[i], 1)[0] += dtheta[i];
          Vec<Real> dm(size_t(d), Real(0));
          for (int j = 0; j < d; ++j) dm[size_t(j)] = tr.nbr_weights[i] * dctx[size_t(j)];
          add_embedding_grad(kEntityEmbed, tr.nbr_ids[i], dm, sink);
        }
      } else {
        const Real inv = Real(1) / Real(tr.nbr_ids.size());
        Vec<Real> dm(size_t(d), Real(0));
        for (int j = 0; j < d; ++j) dm[size_t(j)] = inv * dctx[size_t(j)];
        for (EntityId nb : tr.nbr_ids) add_embedding_grad(kEntityEmbed, nb, dm, sink);
      }
    } else if (cfg_.use_neighbors) {
      add_outer(kWNeighbor, dh, tr.nbr_ctx, sink);  // context is zero: no-op values
    }

    if (cfg_.use_attrs && !tr.attr_records.empty()) {
      add_outer(kWAttr, dh, tr.attr_ctx, sink);
      Vec<Real> dctx = affine_backward_input(p_.w_attr, std::span<const Real>(dh));
      const size_t n_members = tr.attr_records.size();
      std::vector<Vec<Real>> dmember(n_members,
                                     Vec<Real>(size_t(cfg_.attr_dim), Real(0)));
      if (!tr.attr_weights.empty()) {
        Vec<Real> dtheta = attention_theta_grads(tr.attr_weights, tr.attr_emb, dctx);
        for (size_t i = 0; i < n_members; ++i) {
          const AttributeRecord& rec = store_.attributes()[size_t(tr.attr_records[i])];
          sink.row(kAttnAttrKey, rec.key, 1)[0] += dtheta[i];
          for (int j = 0; j < cfg_.attr_dim; ++j)
            dmember[i][size_t(j)] = tr.attr_weights[i] * dctx[size_t(j)];
        }
      } else if (cfg_.attr_aggregator == Aggregator::Mean) {
        const Real inv = Real(1) / Real(n_members);
        for (size_t i = 0; i < n_members; ++i) {
          for (int j = 0; j < cfg_.attr_dim; ++j)
            dmember[i][size_t(j)] = inv * dctx[size_t(j)];
        }
      } else {
        for (int j = 0; j < cfg_.attr_dim; ++j) {
          int32_t arg = tr.attr_argmax[size_t(j)];
          if (arg >= 0) dmember[size_t(arg)][size_t(j)] = dctx[size_t(j)];
        }
      }
      for (size_t i = 0; i < n_members; ++i) {
        const AttributeRecord& rec = store_.attributes()[size_t(tr.attr_records[i])];
        Vec<Real> dpre(size_t(cfg_.attr_dim), Real(0));
        for (int j = 0; j < cfg_.attr_dim; ++j)
          dpre[size_t(j)] = dmember[i][size_t(j)] *
                            activate_grad(cfg_.atomic_activation, tr.attr_pre[i][size_t(j)]);
        Vec<Real>& gkey = sink.row(kAttrKeyEmbed, rec.key, cfg_.attr_dim);
        for (int j = 0; j < cfg_.attr_dim; ++j) gkey[size_t(j)] += dpre[size_t(j)];
        const Real inv_tok = Real(1) / Real(rec.value_tokens.size());
        for (TokenId t : rec.value_tokens) {
          Vec<Real>& gval = sink.row(kAttrValEmbed, t, cfg_.attr_dim);
          for (int j = 0; j < cfg_.attr_dim; ++j)
            gval[size_t(j)] += inv_tok * dpre[size_t(j)];
        }
      }
    } else if (cfg_.use_attrs) {
      add_outer(kWAttr, dh, tr.attr_ctx, sink);
    }
  }

  void backward_relation(const RelationTrace<Real>& tr, const Vec<Real>& dz,
                         GradSink<Real>& sink) const {
    const int d = cfg_.entity_dim;
    Vec<Real> dh(size_t(d), Real(0));
    for (int j = 0; j < d; ++j)
      dh[size_t(j)] =
          dz[size_t(j)] * activate_grad(cfg_.repr_activation, tr.pre_repr[size_t(j)]);

    add_outer(kWRelation, dh, tr.atomic, sink);
    Vec<Real> datomic = affine_backward_input(p_.w_relation, std::span<const Real>(dh));
    add_embedding_grad(kRelationEmbed, tr.id, datomic, sink);

    if (cfg_.use_types) {
      add_outer(kWType, dh, tr.type_ctx, sink);
      if (!tr.type_ids.empty()) {
        Vec<Real> dctx = affine_backward_input(p_.w_type, std::span<const Real>(dh));
        std::vector<Vec<Real>> members;
        members.reserve(tr.type_ids.size());
        for (TypeId t : tr.type_ids) members.push_back(atomic_type(t));
        if (!tr.type_weights.empty()) {
          Vec<Real> dtheta = attention_theta_grads(tr.type_weights, members, dctx);
          for (size_t i = 0; i < tr.type_ids.size(); ++i) {
            sink.row(kAttnType, tr.type_ids[i], 1)[0] += dtheta[i];
            Vec<Real> dm(size_t(cfg_.type_dim), Real(0));
            for (int j = 0; j < cfg_.type_dim; ++j)
              dm[size_t(j)] = tr.type_weights[i] * dctx[size_t(j)];
            add_embedding_grad(kTypeEmbed, tr.type_ids[i], dm, sink);
          }
        } else {
          const Real inv = Real(1) / Real(tr.type_ids.size());
          Vec<Real> dm(size_t(cfg_.type_dim), Real(0));
          for (int j = 0; j < cfg_.type_dim; ++j) dm[size_t(j)] = inv * dctx[size_t(j)];
          for (TypeId t : tr.type_ids) add_embedding_grad(kTypeEmbed, t, dm, sink);
        }
      }
    }
  }

  const ParamSet<Real>& p_;
  const ModelConfig& cfg_;
  const ContextCache& cache_;
  const MultiGraphStore& store_;
};

// Parameter complexity H_a * (H_b + 1) with
// H_a = 2*Ne*He + Nr*Hr + Nt*Ht + Nk*Hk + Nv*Hv. Reported alongside the
// exact allocated scalar count, which books entities once.
inline uint64_t param_complexity_formula(uint64_t n_entities, uint64_t n_relations,
                                         uint64_t n_types, uint64_t n_attr_keys,
                                         uint64_t n_attr_values, uint64_t h_entity,
                                         uint64_t h_relation, uint64_t h_type,
                                         uint64_t h_key, uint64_t h_value,
                                         uint64_t h_hidden) {
  uint64_t h_a = 2 * n_entities * h_entity + n_relations * h_relation +
                 n_types * h_type + n_attr_keys * h_key + n_attr_values * h_value;
  return h_a * (h_hidden + 1);
}

}  // namespace linknbed
