#pragma once

#include <atomic>
#include <vector>

#include "gana/core.hpp"
#include "gana/kg.hpp"

namespace gana {

// Call accounting used by the structural ablation tests.
inline std::atomic<std::uint64_t>& projection_call_count() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

// Eq. 11: hyperplane projection e - (P . e) P. P is expected to be unit-norm
// when the unit-norm invariant is on.
inline Vec project_entity(const Vec& e, const Vec& P) {
  projection_call_count().fetch_add(1, std::memory_order_relaxed);
  return e - (P.dot(e)) * P;
}

// Eq. 12: E = || proj(h) + r - proj(t) || under the chosen norm.
inline double score_triple(const Vec& h, const Vec& r, const Vec& t, const Vec& P,
                           Norm norm = Norm::L2) {
  const Vec v = project_entity(h, P) + r - project_entity(t, P);
  return norm == Norm::L2 ? v.norm() : v.lpNorm<1>();
}

// Eq. 13 / Eq. 19: L = sum_i max(0, E_pos_i + gamma - E_neg_i).
inline double margin_loss(const std::vector<double>& positive_scores,
                          const std::vector<double>& negative_scores, double gamma) {
  if (positive_scores.size() != negative_scores.size())
    throw PairingError("margin_loss: positive/negative lists differ in length");
  double loss = 0.0;
  for (std::size_t i = 0; i < positive_scores.size(); ++i)
    loss += std::max(0.0, positive_scores[i] + gamma - negative_scores[i]);
  return loss;
}

// Eq. 15: one stochastic-gradient step on the relation representation.
inline Vec adapt_relation(const Vec& r_prime, const Vec& support_loss_gradient, double l_r) {
  if (!all_finite(support_loss_gradient))
    throw DivergenceError("adapt_relation: non-finite support gradient");
  return r_prime - l_r * support_loss_gradient;
}

// Eq. 16-1: one gradient step on the hyperplane normal, renormalized to unit
// length when the unit-norm invariant is on.
inline Vec adapt_hyperplane(const Vec& P_star, const Vec& support_loss_gradient_wrt_P, double l_p,
                            bool unit_norm = true) {
  if (!all_finite(support_loss_gradient_wrt_P))
    throw DivergenceError("adapt_hyperplane: non-finite support gradient");
  Vec P = P_star - l_p * support_loss_gradient_wrt_P;
  if (unit_norm) {
    const double n = P.norm();
    if (n < 1e-300) throw DegeneracyError("adapt_hyperplane: zero-norm hyperplane");
    P /= n;
  }
  return P;
}

// Eq. 16-2: outer update of the well-initialized hyperplane normal, using the
// (batch-averaged) gradient of the query loss with respect to the adapted
// normal.
inline Vec outer_update_hyperplane(const Vec& P_star, const Vec& query_loss_gradient_wrt_P_adapted,
                                   double l_p, bool unit_norm = true) {
  if (!all_finite(query_loss_gradient_wrt_P_adapted))
    throw DivergenceError("outer_update_hyperplane: non-finite query gradient");
  Vec P = P_star - l_p * query_loss_gradient_wrt_P_adapted;
  if (unit_norm) {
    const double n = P.norm();
    if (n < 1e-300) throw DegeneracyError("outer_update_hyperplane: zero-norm hyperplane");
    P /= n;
  }
  return P;
}

// ---------------------------------------------------------------------------
// Cached scoring with first derivatives (and the second-derivative blocks the
// second-order meta-gradient needs). With projection enabled the score only
// depends on the entity difference w = h - t:
//     v = w - (P . w) P + r,   E = ||v||.
// ---------------------------------------------------------------------------

struct TripleScore {
  Vec w;  // h - t
  Vec v;
  Vec u;  // dE/dv: v/||v|| for L2, sign(v) for L1
  double E = 0.0;
  double vnorm = 0.0;  // L2 length of v (used by the Hessian blocks)
};

inline TripleScore score_with_grads(const Vec& h, const Vec& r, const Vec& t, const Vec& P,
                                    Norm norm, bool use_projection) {
  TripleScore s;
  s.w = h - t;
  if (use_projection) {
    projection_call_count().fetch_add(2, std::memory_order_relaxed);
    s.v = s.w - (P.dot(s.w)) * P + r;
  } else {
    s.v = s.w + r;
  }
  s.vnorm = s.v.norm();
  if (norm == Norm::L2) {
    s.E = s.vnorm;
    s.u = s.vnorm > 0 ? Vec(s.v / s.vnorm) : Vec(Vec::Zero(s.v.size()));
  } else {
    s.E = s.v.lpNorm<1>();
    s.u = s.v.array().sign();
  }
  return s;
}

// dE/dr = u.
inline Vec score_grad_r(const TripleScore& s) { return s.u; }

// dE/dP = -[(P . u) w + (P . w) u]; zero without projection.
inline Vec score_grad_P(const TripleScore& s, const Vec& P, bool use_projection) {
  if (!use_projection) return Vec::Zero(P.size());
  return -(P.dot(s.u)) * s.w - (P.dot(s.w)) * s.u;
}

// dE/dh = (I - P P^T) u with projection, u without; dE/dt is its negation.
inline Vec score_grad_h(const TripleScore& s, const Vec& P, bool use_projection) {
  if (!use_projection) return s.u;
  return s.u - (P.dot(s.u)) * P;
}

// Second-derivative blocks of E (L2 norm; the L1 blocks are handled by the
// caller since almost all of them vanish).
//
//   H_rr = Pi / ||v||                       Pi = I - u u^T
//   H_rP = dU/dP = Pi J / ||v||             J  = -(P w^T + (P . w) I)
//   H_PP = -[w u^T + u w^T + w P^T K + (P . w) K],  K = Pi J / ||v||
namespace detail {

inline Mat projector(const TripleScore& s) {
  return Mat::Identity(s.u.size(), s.u.size()) - s.u * s.u.transpose();
}

inline Mat jac_v_wrt_P(const TripleScore& s, const Vec& P) {
  const Eigen::Index d = P.size();
  return -(P * s.w.transpose() + (P.dot(s.w)) * Mat::Identity(d, d));
}

}  // namespace detail

inline Mat score_hess_rr(const TripleScore& s, Norm norm) {
  const Eigen::Index d = s.u.size();
  if (norm == Norm::L1 || s.vnorm <= 0) return Mat::Zero(d, d);
  return detail::projector(s) / s.vnorm;
}

inline Mat score_hess_rP(const TripleScore& s, const Vec& P, Norm norm, bool use_projection) {
  const Eigen::Index d = s.u.size();
  if (!use_projection || norm == Norm::L1 || s.vnorm <= 0) return Mat::Zero(d, d);
  return detail::projector(s) * detail::jac_v_wrt_P(s, P) / s.vnorm;
}

inline Mat score_hess_PP(const TripleScore& s, const Vec& P, Norm norm, bool use_projection) {
  const Eigen::Index d = s.u.size();
  if (!use_projection) return Mat::Zero(d, d);
  if (norm == Norm::L1) return -(s.w * s.u.transpose() + s.u * s.w.transpose());
  if (s.vnorm <= 0) return Mat::Zero(d, d);
  const Mat K = detail::projector(s) * detail::jac_v_wrt_P(s, P) / s.vnorm;
  return -(s.w * s.u.transpose() + s.u * s.w.transpose() + s.w * (P.transpose() * K) +
           (P.dot(s.w)) * K);
}

// d(dE/dr)/dh = Pi (I - P P^T) / ||v|| (L2, projection). Used for the mixed
// second-order terms when embeddings are fine-tuned.
inline Mat score_hess_rh(const TripleScore& s, const Vec& P, Norm norm, bool use_projection) {
  const Eigen::Index d = s.u.size();
  if (norm == Norm::L1 || s.vnorm <= 0) return Mat::Zero(d, d);
  const Mat Pi = detail::projector(s);
  if (!use_projection) return Pi / s.vnorm;
  return Pi * (Mat::Identity(d, d) - P * P.transpose()) / s.vnorm;
}

// d(dE/dP)/dh with dE/dP = -[(P . u) w + (P . w) u]:
//   -( w (M^T P)^T + (P . u) I + u P^T + (P . w) M ),  M = du/dh.
inline Mat score_hess_Ph(const TripleScore& s, const Vec& P, Norm norm, bool use_projection) {
  const Eigen::Index d = s.u.size();
  if (!use_projection) return Mat::Zero(d, d);
  Mat M = Mat::Zero(d, d);
  if (norm == Norm::L2 && s.vnorm > 0)
    M = detail::projector(s) * (Mat::Identity(d, d) - P * P.transpose()) / s.vnorm;
  return -(s.w * (M.transpose() * P).transpose() + (P.dot(s.u)) * Mat::Identity(d, d) +
           s.u * P.transpose() + (P.dot(s.w)) * M);
}

// ---------------------------------------------------------------------------
// Paired margin loss over a set of (positive, negative) triples, with the
// gradients the adaptation steps consume.
// ---------------------------------------------------------------------------

struct PairedLoss {
  double loss = 0.0;
  Vec grad_r;  // dL/dr
  Vec grad_P;  // dL/dP (zero without projection)
  std::vector<TripleScore> pos;  // cached per-pair scores
  std::vector<TripleScore> neg;
  std::vector<bool> active;  // hinge active per pair

  // A NaN score disables its hinge pair, so the loss alone cannot reveal a
  // poisoned input; divergence checks must look at the raw scores.
  bool scores_finite() const {
    for (const TripleScore& s : pos)
      if (!std::isfinite(s.E)) return false;
    for (const TripleScore& s : neg)
      if (!std::isfinite(s.E)) return false;
    return true;
  }
};

// Scores paired positives/negatives of one episode side under relation vector
// r and hyperplane P.
inline PairedLoss paired_margin_loss(const std::vector<Triple>& positives,
                                     const std::vector<Triple>& negatives,
                                     const EmbeddingTable& emb, const Vec& r, const Vec& P,
                                     double gamma, Norm norm, bool use_projection) {
  if (positives.size() != negatives.size())
    throw PairingError("paired_margin_loss: positive/negative lists differ in length");
  PairedLoss out;
  out.grad_r = Vec::Zero(r.size());
  out.grad_P = Vec::Zero(P.size());
  out.pos.reserve(positives.size());
  out.neg.reserve(negatives.size());
  out.active.reserve(positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    TripleScore sp = score_with_grads(emb.entity(positives[i].head), r,
                                      emb.entity(positives[i].tail), P, norm, use_projection);
    TripleScore sn = score_with_grads(emb.entity(negatives[i].head), r,
                                      emb.entity(negatives[i].tail), P, norm, use_projection);
    const bool active = sp.E + gamma - sn.E > 0.0;
    if (active) {
      out.loss += sp.E + gamma - sn.E;
      out.grad_r += score_grad_r(sp) - score_grad_r(sn);
      if (use_projection)
        out.grad_P += score_grad_P(sp, P, true) - score_grad_P(sn, P, true);
    }
    out.pos.push_back(std::move(sp));
    out.neg.push_back(std::move(sn));
    out.active.push_back(active);
  }
  return out;
}

// Eq. 17-19: margin loss over the query set under the adapted parameters.
inline double query_loss(const Episode& episode, const Vec& r_m, const Vec& P_adapted,
                         const EmbeddingTable& emb, double gamma, Norm norm,
                         bool use_projection = true) {
  return paired_margin_loss(episode.query, episode.query_negatives, emb, r_m, P_adapted, gamma,
                            norm, use_projection)
      .loss;
}

// Accumulates dL/d(embedding) of a paired loss into emb_grads.
inline void paired_loss_embedding_grads(const PairedLoss& pl, const std::vector<Triple>& positives,
                                        const std::vector<Triple>& negatives, const Vec& P,
                                        bool use_projection, EmbeddingGrads& emb_grads) {
  for (std::size_t i = 0; i < positives.size(); ++i) {
    if (!pl.active[i]) continue;
    const Vec gp = score_grad_h(pl.pos[i], P, use_projection);
    const Vec gn = score_grad_h(pl.neg[i], P, use_projection);
    emb_grads.add_entity(positives[i].head, gp);
    emb_grads.add_entity(positives[i].tail, -gp);
    emb_grads.add_entity(negatives[i].head, -gn);
    emb_grads.add_entity(negatives[i].tail, gn);
  }
}

}  // namespace gana
