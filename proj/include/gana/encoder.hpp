#pragma once

#include <utility>
#include <vector>

#include "gana/core.hpp"

namespace gana {

struct LstmCellParams {
  // Gate blocks stacked as [input; forget; candidate; output], each H rows.
  Mat Wx;   // 4H x in
  Mat Wh;   // 4H x H
  Vec bias;  // 4H

  static LstmCellParams init(int in, int hidden, Rng& rng) {
    LstmCellParams p;
    p.Wx.resize(4 * hidden, in);
    glorot_init(p.Wx, rng);
    p.Wh.resize(4 * hidden, hidden);
    glorot_init(p.Wh, rng);
    p.bias = Vec::Zero(4 * hidden);
    return p;
  }
  static LstmCellParams zeros_like(const LstmCellParams& o) {
    LstmCellParams g;
    g.Wx = Mat::Zero(o.Wx.rows(), o.Wx.cols());
    g.Wh = Mat::Zero(o.Wh.rows(), o.Wh.cols());
    g.bias = Vec::Zero(o.bias.size());
    return g;
  }
};

struct BiLSTMParams {
  // cells[layer][direction], direction 0 forward / 1 reverse.
  LstmCellParams cells[2][2];
  int hid1 = 0;
  int hid2 = 0;

  static BiLSTMParams init(int input_dim, int hid1, int hid2, Rng& rng) {
    BiLSTMParams p;
    p.hid1 = hid1;
    p.hid2 = hid2;
    for (int dir = 0; dir < 2; ++dir) p.cells[0][dir] = LstmCellParams::init(input_dim, hid1, rng);
    for (int dir = 0; dir < 2; ++dir) p.cells[1][dir] = LstmCellParams::init(2 * hid1, hid2, rng);
    return p;
  }
  static BiLSTMParams zeros_like(const BiLSTMParams& o) {
    BiLSTMParams g;
    g.hid1 = o.hid1;
    g.hid2 = o.hid2;
    for (int l = 0; l < 2; ++l)
      for (int dir = 0; dir < 2; ++dir) g.cells[l][dir] = LstmCellParams::zeros_like(o.cells[l][dir]);
    return g;
  }
};

struct SupportAttnParams {
  Mat W3;  // d x 2*hid2
  Vec u3;  // d
  double b_a = 0.0;

  static SupportAttnParams init(int d, int hid2, Rng& rng) {
    SupportAttnParams p;
    p.W3.resize(d, 2 * hid2);
    glorot_init(p.W3, rng);
    p.u3.resize(d);
    glorot_init(p.u3, static_cast<std::size_t>(d), rng);
    return p;
  }
  static SupportAttnParams zeros_like(const SupportAttnParams& o) {
    SupportAttnParams g;
    g.W3 = Mat::Zero(o.W3.rows(), o.W3.cols());
    g.u3 = Vec::Zero(o.u3.size());
    g.b_a = 0.0;
    return g;
  }
};

// One unidirectional LSTM pass with cached activations for BPTT.
struct LstmRun {
  std::vector<Vec> inputs;
  std::vector<Vec> gate_i, gate_f, gate_g, gate_o;
  std::vector<Vec> cell, tanh_cell, hidden;
};

inline LstmRun lstm_forward(const LstmCellParams& p, const std::vector<Vec>& inputs) {
  const Eigen::Index H = p.Wh.cols();
  LstmRun run;
  run.inputs = inputs;
  const std::size_t T = inputs.size();
  run.gate_i.resize(T);
  run.gate_f.resize(T);
  run.gate_g.resize(T);
  run.gate_o.resize(T);
  run.cell.resize(T);
  run.tanh_cell.resize(T);
  run.hidden.resize(T);
  Vec h_prev = Vec::Zero(H);
  Vec c_prev = Vec::Zero(H);
  Vec a(4 * H);
  for (std::size_t t = 0; t < T; ++t) {
    a.noalias() = p.Wx * inputs[t];
    a.noalias() += p.Wh * h_prev;
    a += p.bias;
    Vec gi(H), gf(H), gg(H), go(H);
    for (Eigen::Index k = 0; k < H; ++k) {
      gi(k) = sigmoid(a(k));
      gf(k) = sigmoid(a(H + k));
      gg(k) = std::tanh(a(2 * H + k));
      go(k) = sigmoid(a(3 * H + k));
    }
    Vec c = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
    Vec tc = c.array().tanh();
    Vec h = go.cwiseProduct(tc);
    run.gate_i[t] = std::move(gi);
    run.gate_f[t] = std::move(gf);
    run.gate_g[t] = std::move(gg);
    run.gate_o[t] = std::move(go);
    run.cell[t] = c;
    run.tanh_cell[t] = std::move(tc);
    run.hidden[t] = h;
    h_prev = std::move(h);
    c_prev = std::move(c);
  }
  return run;
}

// BPTT through one run. d_hidden[t] is dL/dh_t from above; returns dL/dinput
// per step and accumulates parameter gradients.
inline std::vector<Vec> lstm_backward(const LstmCellParams& p, const LstmRun& run,
                                      const std::vector<Vec>& d_hidden, LstmCellParams& grads) {
  const Eigen::Index H = p.Wh.cols();
  const std::size_t T = run.inputs.size();
  std::vector<Vec> d_inputs(T);
  Vec dh_next = Vec::Zero(H);
  Vec dc_next = Vec::Zero(H);
  Vec da(4 * H);
  for (std::size_t ti = T; ti-- > 0;) {
    const Vec dh = d_hidden[ti] + dh_next;
    const Vec& gi = run.gate_i[ti];
    const Vec& gf = run.gate_f[ti];
    const Vec& gg = run.gate_g[ti];
    const Vec& go = run.gate_o[ti];
    const Vec& tc = run.tanh_cell[ti];
    const Vec c_prev = ti > 0 ? run.cell[ti - 1] : Vec(Vec::Zero(H));
    const Vec h_prev = ti > 0 ? run.hidden[ti - 1] : Vec(Vec::Zero(H));

    Vec dc = dc_next + dh.cwiseProduct(go).cwiseProduct(Vec(1.0 - tc.array().square()));
    const Vec d_go = dh.cwiseProduct(tc);
    da.segment(3 * H, H) = d_go.cwiseProduct(go).cwiseProduct(Vec(1.0 - go.array()));
    const Vec d_gi = dc.cwiseProduct(gg);
    da.segment(0, H) = d_gi.cwiseProduct(gi).cwiseProduct(Vec(1.0 - gi.array()));
    const Vec d_gf = dc.cwiseProduct(c_prev);
    da.segment(H, H) = d_gf.cwiseProduct(gf).cwiseProduct(Vec(1.0 - gf.array()));
    const Vec d_gg = dc.cwiseProduct(gi);
    da.segment(2 * H, H) = d_gg.cwiseProduct(Vec(1.0 - gg.array().square()));

    grads.Wx.noalias() += da * run.inputs[ti].transpose();
    grads.Wh.noalias() += da * h_prev.transpose();
    grads.bias += da;
    d_inputs[ti] = p.Wx.transpose() * da;
    dh_next = p.Wh.transpose() * da;
    dc_next = dc.cwiseProduct(gf);
  }
  return d_inputs;
}

// Cached forward state of the full encoder: two Bi-LSTM layers plus the
// attention readout.
struct EncoderCache {
  int K = 0;
  LstmRun runs[2][2];          // [layer][direction]; reverse runs see reversed inputs
  std::vector<Vec> layer1_out;  // per position, [fwd; bwd] of layer 1
  std::vector<Vec> p;           // per position, [fwd; bwd] of layer 2
  Mat p_prime;                  // d x K
  Vec o_raw;                    // K, u3 . p'_i + b_a
  Vec o;                        // K, tanh
  Vec beta;                     // K
  Vec r_prime;                  // d
};

inline EncoderCache encoder_forward(const std::vector<Vec>& support, const BiLSTMParams& lstm,
                                    const SupportAttnParams& attn) {
  const std::size_t K = support.size();
  if (K == 0) throw EncoderError("encode_support_sequence: empty support set");
  EncoderCache cache;
  cache.K = static_cast<int>(K);

  std::vector<Vec> reversed(support.rbegin(), support.rend());
  cache.runs[0][0] = lstm_forward(lstm.cells[0][0], support);
  cache.runs[0][1] = lstm_forward(lstm.cells[0][1], reversed);

  cache.layer1_out.resize(K);
  for (std::size_t i = 0; i < K; ++i) {
    Vec y(2 * lstm.hid1);
    y.head(lstm.hid1) = cache.runs[0][0].hidden[i];
    y.tail(lstm.hid1) = cache.runs[0][1].hidden[K - 1 - i];
    cache.layer1_out[i] = std::move(y);
  }
  std::vector<Vec> rev2(cache.layer1_out.rbegin(), cache.layer1_out.rend());
  cache.runs[1][0] = lstm_forward(lstm.cells[1][0], cache.layer1_out);
  cache.runs[1][1] = lstm_forward(lstm.cells[1][1], rev2);

  cache.p.resize(K);
  const Eigen::Index d = attn.W3.rows();
  cache.p_prime.resize(d, static_cast<Eigen::Index>(K));
  cache.o_raw.resize(static_cast<Eigen::Index>(K));
  cache.o.resize(static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < K; ++i) {
    Vec p(2 * lstm.hid2);
    p.head(lstm.hid2) = cache.runs[1][0].hidden[i];
    p.tail(lstm.hid2) = cache.runs[1][1].hidden[K - 1 - i];
    cache.p_prime.col(static_cast<Eigen::Index>(i)).noalias() = attn.W3 * p;
    cache.p[i] = std::move(p);
    cache.o_raw(static_cast<Eigen::Index>(i)) =
        attn.u3.dot(cache.p_prime.col(static_cast<Eigen::Index>(i))) + attn.b_a;
    cache.o(static_cast<Eigen::Index>(i)) = std::tanh(cache.o_raw(static_cast<Eigen::Index>(i)));
  }
  cache.beta = softmax(cache.o);
  cache.r_prime = cache.p_prime * cache.beta;
  return cache;
}

// Backward through the encoder. d_r_prime is dL/dr'; returns dL/ds_i per
// support position and accumulates parameter gradients.
inline std::vector<Vec> encoder_backward(const EncoderCache& cache, const BiLSTMParams& lstm,
                                         const SupportAttnParams& attn, const Vec& d_r_prime,
                                         BiLSTMParams& lstm_grads, SupportAttnParams& attn_grads) {
  const std::size_t K = static_cast<std::size_t>(cache.K);
  const Eigen::Index Ki = static_cast<Eigen::Index>(K);

  Mat d_p_prime(cache.p_prime.rows(), Ki);
  Vec d_beta(Ki);
  for (Eigen::Index i = 0; i < Ki; ++i) {
    d_p_prime.col(i) = cache.beta(i) * d_r_prime;
    d_beta(i) = cache.p_prime.col(i).dot(d_r_prime);
  }
  const Vec d_o = softmax_backward(cache.beta, d_beta);
  for (Eigen::Index i = 0; i < Ki; ++i) {
    const double dz = d_o(i) * (1.0 - cache.o(i) * cache.o(i));
    attn_grads.u3 += dz * cache.p_prime.col(i);
    attn_grads.b_a += dz;
    d_p_prime.col(i) += dz * attn.u3;
  }
  std::vector<Vec> d_p(K);
  for (std::size_t i = 0; i < K; ++i) {
    attn_grads.W3.noalias() += d_p_prime.col(static_cast<Eigen::Index>(i)) * cache.p[i].transpose();
    d_p[i] = attn.W3.transpose() * d_p_prime.col(static_cast<Eigen::Index>(i));
  }

  // Layer 2: split position-space grads into the two runs.
  std::vector<Vec> d_h2f(K), d_h2b(K);
  for (std::size_t i = 0; i < K; ++i) {
    d_h2f[i] = d_p[i].head(lstm.hid2);
    d_h2b[K - 1 - i] = d_p[i].tail(lstm.hid2);  // reverse run step K-1-i holds position i
  }
  const std::vector<Vec> d_in2f = lstm_backward(lstm.cells[1][0], cache.runs[1][0], d_h2f, lstm_grads.cells[1][0]);
  const std::vector<Vec> d_in2b = lstm_backward(lstm.cells[1][1], cache.runs[1][1], d_h2b, lstm_grads.cells[1][1]);

  std::vector<Vec> d_y(K);
  for (std::size_t i = 0; i < K; ++i) d_y[i] = d_in2f[i] + d_in2b[K - 1 - i];

  std::vector<Vec> d_h1f(K), d_h1b(K);
  for (std::size_t i = 0; i < K; ++i) {
    d_h1f[i] = d_y[i].head(lstm.hid1);
    d_h1b[K - 1 - i] = d_y[i].tail(lstm.hid1);
  }
  const std::vector<Vec> d_in1f = lstm_backward(lstm.cells[0][0], cache.runs[0][0], d_h1f, lstm_grads.cells[0][0]);
  const std::vector<Vec> d_in1b = lstm_backward(lstm.cells[0][1], cache.runs[0][1], d_h1b, lstm_grads.cells[0][1]);

  std::vector<Vec> d_support(K);
  for (std::size_t i = 0; i < K; ++i) d_support[i] = d_in1f[i] + d_in1b[K - 1 - i];
  return d_support;
}

// Eq. 7-8: the layer-2 directional hidden states per support position.
inline std::vector<std::pair<Vec, Vec>> encode_support_sequence(const std::vector<Vec>& support,
                                                                const BiLSTMParams& lstm,
                                                                const SupportAttnParams& attn) {
  EncoderCache cache = encoder_forward(support, lstm, attn);
  std::vector<std::pair<Vec, Vec>> out;
  out.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i)
    out.emplace_back(cache.runs[1][0].hidden[i], cache.runs[1][1].hidden[support.size() - 1 - i]);
  return out;
}

// Eq. 9-12: attention weights over the projected hidden states.
inline std::pair<Vec, Mat> support_attention(const std::vector<std::pair<Vec, Vec>>& hidden_pairs,
                                             const SupportAttnParams& attn) {
  const std::size_t K = hidden_pairs.size();
  if (K == 0) throw EncoderError("support_attention: empty support set");
  const Eigen::Index d = attn.W3.rows();
  Mat p_prime(d, static_cast<Eigen::Index>(K));
  Vec o(static_cast<Eigen::Index>(K));
  Vec p(attn.W3.cols());
  for (std::size_t i = 0; i < K; ++i) {
    p.head(hidden_pairs[i].first.size()) = hidden_pairs[i].first;
    p.tail(hidden_pairs[i].second.size()) = hidden_pairs[i].second;
    p_prime.col(static_cast<Eigen::Index>(i)).noalias() = attn.W3 * p;
    o(static_cast<Eigen::Index>(i)) = std::tanh(attn.u3.dot(p_prime.col(static_cast<Eigen::Index>(i))) + attn.b_a);
  }
  return {softmax(o), std::move(p_prime)};
}

// Eq. 13: r' = sum_i beta_i p'_i.
inline Vec relation_representation(const Vec& beta, const Mat& p_prime) {
  return p_prime * beta;
}

}  // namespace gana
