#pragma once

#include <utility>
#include <vector>

#include "gana/aggregator.hpp"
#include "gana/config.hpp"
#include "gana/core.hpp"
#include "gana/encoder.hpp"
#include "gana/kg.hpp"
#include "gana/mtransh.hpp"

namespace gana {

struct ModelParams {
  AggregatorParams agg;
  BiLSTMParams lstm;
  SupportAttnParams attn;
  Vec P_star;

  static ModelParams init(int d, int hid1, int hid2, Rng& rng) {
    ModelParams p;
    p.agg = AggregatorParams::init(d, rng);
    p.lstm = BiLSTMParams::init(2 * d, hid1, hid2, rng);
    p.attn = SupportAttnParams::init(d, hid2, rng);
    p.P_star.resize(d);
    glorot_init(p.P_star, static_cast<std::size_t>(d), rng);
    p.P_star.normalize();
    return p;
  }

  static ModelParams zeros_like(const ModelParams& o) {
    ModelParams g;
    g.agg = AggregatorParams::zeros_like(o.agg);
    g.lstm = BiLSTMParams::zeros_like(o.lstm);
    g.attn = SupportAttnParams::zeros_like(o.attn);
    g.P_star = Vec::Zero(o.P_star.size());
    return g;
  }
};

// Gradients of the query loss. `P_star` is the gradient the finite-difference
// check validates (it passes through the renormalization of the adapted
// normal); `P_adapted_raw` is dL(Q)/dP_adapted, which Eq. 16-2's outer update
// consumes directly.
struct ModelGrads {
  ModelParams params;
  Vec P_adapted_raw;
  EmbeddingGrads emb;

  static ModelGrads zeros_like(const ModelParams& o) {
    ModelGrads g;
    g.params = ModelParams::zeros_like(o);
    g.P_adapted_raw = Vec::Zero(o.P_star.size());
    return g;
  }

  void accumulate(const ModelGrads& o) {
    params.agg.W1 += o.params.agg.W1;
    params.agg.u1 += o.params.agg.u1;
    params.agg.u2 += o.params.agg.u2;
    params.agg.b_g += o.params.agg.b_g;
    params.agg.W2 += o.params.agg.W2;
    params.agg.b += o.params.agg.b;
    for (int l = 0; l < 2; ++l)
      for (int dir = 0; dir < 2; ++dir) {
        params.lstm.cells[l][dir].Wx += o.params.lstm.cells[l][dir].Wx;
        params.lstm.cells[l][dir].Wh += o.params.lstm.cells[l][dir].Wh;
        params.lstm.cells[l][dir].bias += o.params.lstm.cells[l][dir].bias;
      }
    params.attn.W3 += o.params.attn.W3;
    params.attn.u3 += o.params.attn.u3;
    params.attn.b_a += o.params.attn.b_a;
    params.P_star += o.params.P_star;
    P_adapted_raw += o.P_adapted_raw;
    emb.accumulate(o.emb);
  }

  void scale(double s) {
    params.agg.W1 *= s;
    params.agg.u1 *= s;
    params.agg.u2 *= s;
    params.agg.b_g *= s;
    params.agg.W2 *= s;
    params.agg.b *= s;
    for (int l = 0; l < 2; ++l)
      for (int dir = 0; dir < 2; ++dir) {
        params.lstm.cells[l][dir].Wx *= s;
        params.lstm.cells[l][dir].Wh *= s;
        params.lstm.cells[l][dir].bias *= s;
      }
    params.attn.W3 *= s;
    params.attn.u3 *= s;
    params.attn.b_a *= s;
    params.P_star *= s;
    P_adapted_raw *= s;
    for (auto& [e, g] : emb.entity) g *= s;
    for (auto& [r, g] : emb.relation) g *= s;
  }
};

// Cached state of one episode's two-level forward pass.
struct EpisodeCache {
  Episode episode;
  std::vector<NeighborhoodEncoding> head_enc;  // per support triple (empty under no_gana)
  std::vector<NeighborhoodEncoding> tail_enc;
  std::vector<Vec> support_reps;  // s_i
  EncoderCache encoder;
  Vec r_prime;
  PairedLoss support;  // evaluated at (r', P_star)
  Vec r_m;
  Vec P_pre;      // P_star - l_p * grad before renormalization
  Vec P_adapted;  // hyperplane used on the query set
  PairedLoss query;  // evaluated at (r_m, P_adapted)
  double support_loss = 0.0;
  double query_loss = 0.0;
};

inline AggregatorOptions aggregator_options(const TrainConfig& cfg) {
  AggregatorOptions opts;
  opts.activation = cfg.fuse_activation;
  opts.no_gate = cfg.has(Ablation::NoGate);
  return opts;
}

// Support-pair representation s_i = [h'; t'] (or raw embeddings under
// no_gana), caching the neighborhood encodings for the backward pass.
inline Vec support_pair_forward(const Triple& triple, const NeighborIndex& index,
                                const EmbeddingTable& emb, const ModelParams& params,
                                const TrainConfig& cfg, std::vector<NeighborhoodEncoding>* head_enc,
                                std::vector<NeighborhoodEncoding>* tail_enc) {
  Vec s(2 * emb.d);
  if (cfg.has(Ablation::NoGana)) {
    s.head(emb.d) = emb.entity(triple.head);
    s.tail(emb.d) = emb.entity(triple.tail);
    return s;
  }
  const AggregatorOptions opts = aggregator_options(cfg);
  NeighborhoodEncoding eh = aggregate_entity(
      triple.head, index[static_cast<std::size_t>(triple.head)], emb, params.agg, opts);
  NeighborhoodEncoding et = aggregate_entity(
      triple.tail, index[static_cast<std::size_t>(triple.tail)], emb, params.agg, opts);
  s.head(emb.d) = eh.fused;
  s.tail(emb.d) = et.fused;
  if (head_enc) head_enc->push_back(std::move(eh));
  if (tail_enc) tail_enc->push_back(std::move(et));
  return s;
}

// Full two-level forward: aggregate support neighborhoods, encode the
// relation, take the inner adaptation step on the support loss, then score
// the query set with the adapted parameters. The query set may be empty (the
// evaluation path adapts and ranks separately).
inline EpisodeCache episode_forward(const ModelParams& params, const Episode& episode,
                                    const NeighborIndex& index, const EmbeddingTable& emb,
                                    const TrainConfig& cfg) {
  EpisodeCache cache;
  cache.episode = episode;
  const bool projection = cfg.use_projection();

  for (const Triple& t : episode.support)
    cache.support_reps.push_back(
        support_pair_forward(t, index, emb, params, cfg, &cache.head_enc, &cache.tail_enc));

  cache.encoder = encoder_forward(cache.support_reps, params.lstm, params.attn);
  cache.r_prime = cache.encoder.r_prime;

  cache.support = paired_margin_loss(episode.support, episode.support_negatives, emb,
                                     cache.r_prime, params.P_star, cfg.gamma, cfg.norm, projection);
  cache.support_loss = cache.support.loss;

  cache.r_m = adapt_relation(cache.r_prime, cache.support.grad_r, cfg.l_r);
  if (projection) {
    cache.P_pre = params.P_star - cfg.l_p * cache.support.grad_P;
    cache.P_adapted = adapt_hyperplane(params.P_star, cache.support.grad_P, cfg.l_p, cfg.unit_norm);
  } else {
    cache.P_pre = params.P_star;
    cache.P_adapted = params.P_star;
  }

  cache.query = paired_margin_loss(episode.query, episode.query_negatives, emb, cache.r_m,
                                   cache.P_adapted, cfg.gamma, cfg.norm, projection);
  cache.query_loss = cache.query.loss;
  return cache;
}

namespace detail {

// Sums a Hessian block over the active support pairs (positive minus
// negative contributions).
template <typename BlockFn>
Mat sum_support_hessian(const PairedLoss& support, BlockFn block, Eigen::Index d) {
  Mat H = Mat::Zero(d, d);
  for (std::size_t i = 0; i < support.pos.size(); ++i) {
    if (!support.active[i]) continue;
    H += block(support.pos[i]) - block(support.neg[i]);
  }
  return H;
}

}  // namespace detail

// Backward through the full episode. First-order by default (the inner-step
// gradients are treated as constants); with cfg.second_order the
// differentiation goes through the single inner step using the closed-form
// Hessian blocks of the support loss.
inline ModelGrads episode_backward(const EpisodeCache& cache, const ModelParams& params,
                                   const NeighborIndex& index, const EmbeddingTable& emb,
                                   const TrainConfig& cfg) {
  const bool projection = cfg.use_projection();
  const Eigen::Index d = emb.d;
  ModelGrads grads = ModelGrads::zeros_like(params);

  // Seeds from the query loss.
  const Vec q_r = cache.query.grad_r;
  const Vec q_P = cache.query.grad_P;  // zero without projection
  grads.P_adapted_raw = q_P;

  if (cfg.finetune_embeddings)
    paired_loss_embedding_grads(cache.query, cache.episode.query, cache.episode.query_negatives,
                                cache.P_adapted, projection, grads.emb);

  // Pull q_P back through the renormalization of the adapted normal.
  Vec jq_P = Vec::Zero(d);
  if (projection) {
    if (cfg.unit_norm) {
      const double n = cache.P_pre.norm();
      jq_P = (q_P - cache.P_adapted.dot(q_P) * cache.P_adapted) / n;
    } else {
      jq_P = q_P;
    }
  }

  Vec seed_r = q_r;
  if (projection) {
    grads.params.P_star = jq_P;
  }

  if (cfg.second_order) {
    const Mat H_rr =
        detail::sum_support_hessian(cache.support, [&](const TripleScore& s) { return score_hess_rr(s, cfg.norm); }, d);
    seed_r -= cfg.l_r * (H_rr * q_r);
    if (projection) {
      const Mat H_rP = detail::sum_support_hessian(
          cache.support,
          [&](const TripleScore& s) { return score_hess_rP(s, params.P_star, cfg.norm, true); }, d);
      const Mat H_PP = detail::sum_support_hessian(
          cache.support,
          [&](const TripleScore& s) { return score_hess_PP(s, params.P_star, cfg.norm, true); }, d);
      seed_r -= cfg.l_p * (H_rP * jq_P);
      grads.params.P_star -= cfg.l_p * (H_PP.transpose() * jq_P);
      grads.params.P_star -= cfg.l_r * (H_rP.transpose() * q_r);
    }
    if (cfg.finetune_embeddings) {
      // Mixed second-order terms: the inner-step gradients depend on the
      // support-pair embeddings.
      for (std::size_t i = 0; i < cache.support.pos.size(); ++i) {
        if (!cache.support.active[i]) continue;
        const Triple& pos = cache.episode.support[i];
        const Triple& neg = cache.episode.support_negatives[i];
        auto add_mixed = [&](const TripleScore& s, double sign, EntityId head, EntityId tail) {
          const Mat H_rh = score_hess_rh(s, params.P_star, cfg.norm, projection);
          Vec dh = -cfg.l_r * sign * (H_rh.transpose() * q_r);
          if (projection) {
            const Mat H_Ph = score_hess_Ph(s, params.P_star, cfg.norm, true);
            dh -= cfg.l_p * sign * (H_Ph.transpose() * jq_P);
          }
          grads.emb.add_entity(head, dh);
          grads.emb.add_entity(tail, -dh);
        };
        add_mixed(cache.support.pos[i], 1.0, pos.head, pos.tail);
        add_mixed(cache.support.neg[i], -1.0, neg.head, neg.tail);
      }
    }
  }

  // Backprop the relation-representation seed through the encoder and the
  // aggregator.
  const std::vector<Vec> d_support =
      encoder_backward(cache.encoder, params.lstm, params.attn, seed_r, grads.params.lstm,
                       grads.params.attn);
  const AggregatorOptions opts = aggregator_options(cfg);
  for (std::size_t i = 0; i < d_support.size(); ++i) {
    const Vec dh = d_support[i].head(d);
    const Vec dt = d_support[i].tail(d);
    if (cfg.has(Ablation::NoGana)) {
      if (cfg.finetune_embeddings) {
        grads.emb.add_entity(cache.episode.support[i].head, dh);
        grads.emb.add_entity(cache.episode.support[i].tail, dt);
      }
      continue;
    }
    EmbeddingGrads* sink = cfg.finetune_embeddings ? &grads.emb : nullptr;
    aggregate_entity_backward(cache.head_enc[i], dh, emb, params.agg, grads.params.agg, sink, opts);
    aggregate_entity_backward(cache.tail_enc[i], dt, emb, params.agg, grads.params.agg, sink, opts);
  }
  return grads;
}

// Adapted per-relation state used for ranking.
struct AdaptedRelation {
  Vec r_prime;
  Vec r_m;
  Vec P_adapted;
};

inline AdaptedRelation adapt_to_support(const ModelParams& params, const Episode& support_only,
                                        const NeighborIndex& index, const EmbeddingTable& emb,
                                        const TrainConfig& cfg) {
  EpisodeCache cache = episode_forward(params, support_only, index, emb, cfg);
  return AdaptedRelation{cache.r_prime, cache.r_m, cache.P_adapted};
}

}  // namespace gana
