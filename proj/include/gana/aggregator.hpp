#pragma once

#include <unordered_map>
#include <vector>

#include "gana/core.hpp"
#include "gana/kg.hpp"

namespace gana {

struct AggregatorParams {
  Mat W1;  // d x 2d, neighbor encoding
  Vec u1;  // d, attention scorer
  Vec u2;  // d, gate scorer
  double b_g = 0.0;
  Mat W2;  // d x d, entity path
  Vec b;   // d, fusion bias

  static AggregatorParams init(int d, Rng& rng) {
    AggregatorParams p;
    p.W1.resize(d, 2 * d);
    glorot_init(p.W1, rng);
    p.u1.resize(d);
    glorot_init(p.u1, static_cast<std::size_t>(d), rng);
    p.u2.resize(d);
    glorot_init(p.u2, static_cast<std::size_t>(d), rng);
    p.W2.resize(d, d);
    glorot_init(p.W2, rng);
    p.b = Vec::Zero(d);
    return p;
  }

  static AggregatorParams zeros_like(const AggregatorParams& o) {
    AggregatorParams g;
    g.W1 = Mat::Zero(o.W1.rows(), o.W1.cols());
    g.u1 = Vec::Zero(o.u1.size());
    g.u2 = Vec::Zero(o.u2.size());
    g.b_g = 0.0;
    g.W2 = Mat::Zero(o.W2.rows(), o.W2.cols());
    g.b = Vec::Zero(o.b.size());
    return g;
  }
};

// Everything the backward pass needs about one entity's aggregation, plus the
// attention weights and gate exposed for inspection.
struct NeighborhoodEncoding {
  EntityId entity = 0;
  std::vector<Neighbor> neighbors;
  Mat codes;       // d x n, column i = c_i
  Vec raw_scores;  // n, u1 . c_i before the LeakyReLU
  Vec logits;      // n, d_i
  Vec attention;   // n, alpha
  Vec weighted_sum;  // d, sum_i alpha_i c_i (zero vector when n = 0)
  double gate_pre = 0.0;
  double gate = 0.5;
  Vec fusion_pre;  // d, argument of the activation in Eq. 5
  Vec fused;       // d, e'
};

// Eq. 1: c_i = W1 [r_i; e_i].
inline Mat encode_neighbors(const std::vector<Neighbor>& neighbors, const EmbeddingTable& emb,
                            const AggregatorParams& params) {
  const int d = emb.d;
  if (params.W1.rows() != d || params.W1.cols() != 2 * d)
    throw ConfigError("encode_neighbors: W1 must be d x 2d");
  Mat codes(d, static_cast<Eigen::Index>(neighbors.size()));
  Vec x(2 * d);
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    x.head(d) = emb.relation(neighbors[i].first);
    x.tail(d) = emb.entity(neighbors[i].second);
    codes.col(static_cast<Eigen::Index>(i)).noalias() = params.W1 * x;
  }
  return codes;
}

// Eq. 2-3: attention over neighbor codes.
inline Vec neighbor_attention(const Mat& codes, const AggregatorParams& params) {
  const Eigen::Index n = codes.cols();
  if (n == 0) return Vec();
  Vec logits(n);
  for (Eigen::Index i = 0; i < n; ++i) logits(i) = leaky_relu(params.u1.dot(codes.col(i)));
  return softmax(logits);
}

// Eq. 4: g = sigmoid(u2 . sum_i alpha_i c_i + b_g). The empty neighborhood
// uses the zero vector for the weighted sum.
inline double gate_value(const Mat& codes, const Vec& alpha, const AggregatorParams& params) {
  Vec m = Vec::Zero(params.u2.size());
  for (Eigen::Index i = 0; i < codes.cols(); ++i) m += alpha(i) * codes.col(i);
  return sigmoid(params.u2.dot(m) + params.b_g);
}

// Eq. 5: e' = act(g * sum_i alpha_i c_i + (1 - g) W2 e + b).
inline Vec gated_fuse(EntityId entity, const Mat& codes, const Vec& alpha, double g,
                      const EmbeddingTable& emb, const AggregatorParams& params,
                      Activation act = Activation::Relu) {
  Vec m = Vec::Zero(params.b.size());
  for (Eigen::Index i = 0; i < codes.cols(); ++i) m += alpha(i) * codes.col(i);
  Vec z = g * m + (1.0 - g) * (params.W2 * emb.entity(entity)) + params.b;
  Vec out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out(i) = activate(act, z(i));
  return out;
}

struct AggregatorOptions {
  Activation activation = Activation::Relu;
  bool no_gate = false;  // ablation: g fixed to 1
};

// Full cached forward over one entity's neighborhood.
inline NeighborhoodEncoding aggregate_entity(EntityId entity, const std::vector<Neighbor>& neighbors,
                                             const EmbeddingTable& emb, const AggregatorParams& params,
                                             const AggregatorOptions& opts = {}) {
  const int d = emb.d;
  NeighborhoodEncoding enc;
  enc.entity = entity;
  enc.neighbors = neighbors;
  enc.codes = encode_neighbors(neighbors, emb, params);
  const Eigen::Index n = enc.codes.cols();
  enc.raw_scores.resize(n);
  enc.logits.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    enc.raw_scores(i) = params.u1.dot(enc.codes.col(i));
    enc.logits(i) = leaky_relu(enc.raw_scores(i));
  }
  enc.attention = softmax(enc.logits);
  enc.weighted_sum = Vec::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) enc.weighted_sum += enc.attention(i) * enc.codes.col(i);
  if (opts.no_gate) {
    enc.gate_pre = 0.0;
    enc.gate = 1.0;
    enc.fusion_pre = enc.weighted_sum + params.b;
  } else {
    enc.gate_pre = params.u2.dot(enc.weighted_sum) + params.b_g;
    enc.gate = sigmoid(enc.gate_pre);
    enc.fusion_pre = enc.gate * enc.weighted_sum +
                     (1.0 - enc.gate) * (params.W2 * emb.entity(entity)) + params.b;
  }
  enc.fused.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) enc.fused(i) = activate(opts.activation, enc.fusion_pre(i));
  return enc;
}

// Backward through aggregate_entity. d_fused is dL/de'; parameter gradients
// accumulate into `grads`, embedding gradients into `emb_grads` when given.
inline void aggregate_entity_backward(const NeighborhoodEncoding& enc, const Vec& d_fused,
                                      const EmbeddingTable& emb, const AggregatorParams& params,
                                      AggregatorParams& grads, EmbeddingGrads* emb_grads,
                                      const AggregatorOptions& opts = {}) {
  const int d = emb.d;
  const Eigen::Index n = enc.codes.cols();
  Vec dz(d);
  for (Eigen::Index i = 0; i < d; ++i)
    dz(i) = d_fused(i) * activate_grad(opts.activation, enc.fusion_pre(i), enc.fused(i));
  grads.b += dz;

  Vec dm;
  if (opts.no_gate) {
    dm = dz;
  } else {
    const Vec w2e = params.W2 * emb.entity(enc.entity);
    const double dgate = dz.dot(enc.weighted_sum - w2e);
    dm = enc.gate * dz;
    grads.W2.noalias() += (1.0 - enc.gate) * dz * emb.entity(enc.entity).transpose();
    if (emb_grads) emb_grads->add_entity(enc.entity, (1.0 - enc.gate) * (params.W2.transpose() * dz));
    const double dpre = dgate * enc.gate * (1.0 - enc.gate);
    grads.u2 += dpre * enc.weighted_sum;
    grads.b_g += dpre;
    dm += dpre * params.u2;
  }

  if (n == 0) return;

  Vec dalpha(n);
  Mat dcodes = Mat::Zero(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dalpha(i) = enc.codes.col(i).dot(dm);
    dcodes.col(i) = enc.attention(i) * dm;
  }
  const Vec dlogits = softmax_backward(enc.attention, dalpha);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double draw = dlogits(i) * leaky_relu_grad(enc.raw_scores(i));
    grads.u1 += draw * enc.codes.col(i);
    dcodes.col(i) += draw * params.u1;
  }
  Vec x(2 * d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [rel, ent] = enc.neighbors[static_cast<std::size_t>(i)];
    x.head(d) = emb.relation(rel);
    x.tail(d) = emb.entity(ent);
    grads.W1.noalias() += dcodes.col(i) * x.transpose();
    if (emb_grads) {
      Vec dx = params.W1.transpose() * dcodes.col(i);
      emb_grads->add_relation(rel, dx.head(d));
      emb_grads->add_entity(ent, dx.tail(d));
    }
  }
}

// Eq. 6: s = [h'; t'] over the capped neighborhoods of both endpoints.
inline Vec pair_representation(EntityId h, EntityId t, const NeighborIndex& index,
                               const EmbeddingTable& emb, const AggregatorParams& params,
                               const AggregatorOptions& opts = {}) {
  const NeighborhoodEncoding eh =
      aggregate_entity(h, index[static_cast<std::size_t>(h)], emb, params, opts);
  const NeighborhoodEncoding et =
      aggregate_entity(t, index[static_cast<std::size_t>(t)], emb, params, opts);
  Vec s(2 * emb.d);
  s.head(emb.d) = eh.fused;
  s.tail(emb.d) = et.fused;
  return s;
}

}  // namespace gana
