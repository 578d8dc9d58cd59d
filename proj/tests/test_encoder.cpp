#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gana/encoder.hpp"

#include "helpers.hpp"

using namespace gana;

namespace {

// Independent unrolled LSTM: plain scalar loops over std::vector buffers.
std::vector<std::vector<double>> naive_lstm(const LstmCellParams& p,
                                            const std::vector<Vec>& inputs) {
  const int H = static_cast<int>(p.Wh.cols());
  const int in = static_cast<int>(p.Wx.cols());
  std::vector<double> h(H, 0.0), c(H, 0.0);
  std::vector<std::vector<double>> hiddens;
  for (const Vec& x : inputs) {
    std::vector<double> a(4 * H, 0.0);
    for (int r = 0; r < 4 * H; ++r) {
      double acc = p.bias(r);
      for (int k = 0; k < in; ++k) acc += p.Wx(r, k) * x(k);
      for (int k = 0; k < H; ++k) acc += p.Wh(r, k) * h[static_cast<std::size_t>(k)];
      a[static_cast<std::size_t>(r)] = acc;
    }
    std::vector<double> nh(H), nc(H);
    for (int k = 0; k < H; ++k) {
      const double gi = 1.0 / (1.0 + std::exp(-a[static_cast<std::size_t>(k)]));
      const double gf = 1.0 / (1.0 + std::exp(-a[static_cast<std::size_t>(H + k)]));
      const double gg = std::tanh(a[static_cast<std::size_t>(2 * H + k)]);
      const double go = 1.0 / (1.0 + std::exp(-a[static_cast<std::size_t>(3 * H + k)]));
      nc[static_cast<std::size_t>(k)] = gf * c[static_cast<std::size_t>(k)] + gi * gg;
      nh[static_cast<std::size_t>(k)] = go * std::tanh(nc[static_cast<std::size_t>(k)]);
    }
    h = nh;
    c = nc;
    hiddens.push_back(h);
  }
  return hiddens;
}

std::vector<Vec> random_support(int K, int dim, Rng& rng) {
  std::vector<Vec> s;
  for (int i = 0; i < K; ++i) s.push_back(testutil::random_vec(dim, rng));
  return s;
}

}  // namespace

TEST_CASE("encode_support_sequence") {
  Rng rng(11);
  const int d = 3, hid1 = 4, hid2 = 3;

  SECTION("K = 1 with tied directional weights gives equal directional states") {
    BiLSTMParams lstm = BiLSTMParams::init(2 * d, hid1, hid2, rng);
    lstm.cells[0][1] = lstm.cells[0][0];
    lstm.cells[1][1] = lstm.cells[1][0];
    SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
    auto pairs = encode_support_sequence(random_support(1, 2 * d, rng), lstm, attn);
    REQUIRE(pairs.size() == 1);
    REQUIRE((pairs[0].first - pairs[0].second).lpNorm<Eigen::Infinity>() < 1e-15);
  }
  SECTION("all-zero inputs and zero biases give all-zero hidden states") {
    BiLSTMParams lstm = BiLSTMParams::init(2 * d, hid1, hid2, rng);
    SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
    std::vector<Vec> zeros(3, Vec::Zero(2 * d));
    auto pairs = encode_support_sequence(zeros, lstm, attn);
    // x = 0 and h = 0 with zero biases: candidate tanh(0) = 0, so the cell
    // never leaves the origin
    for (const auto& [f, b] : pairs) {
      REQUIRE(f.norm() == 0.0);
      REQUIRE(b.norm() == 0.0);
    }
  }
  SECTION("empty support set is an encoder error") {
    BiLSTMParams lstm = BiLSTMParams::init(2 * d, hid1, hid2, rng);
    SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
    REQUIRE_THROWS_AS(encode_support_sequence({}, lstm, attn), EncoderError);
  }
  SECTION("K = 3 matches the step-by-step scalar-loop oracle") {
    BiLSTMParams lstm = BiLSTMParams::init(2 * d, hid1, hid2, rng);
    SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
    std::vector<Vec> support = random_support(3, 2 * d, rng);
    auto pairs = encode_support_sequence(support, lstm, attn);

    // layer 1
    auto h1f = naive_lstm(lstm.cells[0][0], support);
    std::vector<Vec> reversed(support.rbegin(), support.rend());
    auto h1b_run = naive_lstm(lstm.cells[0][1], reversed);
    // layer-2 inputs: position-aligned concatenation
    std::vector<Vec> y;
    for (int i = 0; i < 3; ++i) {
      Vec v(2 * hid1);
      for (int k = 0; k < hid1; ++k) v(k) = h1f[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      for (int k = 0; k < hid1; ++k)
        v(hid1 + k) = h1b_run[static_cast<std::size_t>(2 - i)][static_cast<std::size_t>(k)];
      y.push_back(v);
    }
    auto h2f = naive_lstm(lstm.cells[1][0], y);
    std::vector<Vec> y_rev(y.rbegin(), y.rend());
    auto h2b_run = naive_lstm(lstm.cells[1][1], y_rev);

    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < hid2; ++k) {
        REQUIRE(pairs[static_cast<std::size_t>(i)].first(k) ==
                Catch::Approx(h2f[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]).margin(1e-10));
        REQUIRE(pairs[static_cast<std::size_t>(i)].second(k) ==
                Catch::Approx(h2b_run[static_cast<std::size_t>(2 - i)][static_cast<std::size_t>(k)]).margin(1e-10));
      }
    }
  }
}

TEST_CASE("support_attention") {
  Rng rng(13);
  const int d = 4, hid2 = 3;

  SECTION("identical hidden states give uniform weights") {
    SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
    Vec f = testutil::random_vec(hid2, rng), b = testutil::random_vec(hid2, rng);
    std::vector<std::pair<Vec, Vec>> pairs(4, {f, b});
    auto [beta, p_prime] = support_attention(pairs, attn);
    for (int i = 0; i < 4; ++i) REQUIRE(beta(i) == Catch::Approx(0.25).margin(1e-12));
  }
  SECTION("zero scorer vector gives uniform weights regardless of inputs") {
    SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
    attn.u3.setZero();
    std::vector<std::pair<Vec, Vec>> pairs;
    for (int i = 0; i < 3; ++i)
      pairs.push_back({testutil::random_vec(hid2, rng), testutil::random_vec(hid2, rng)});
    auto [beta, p_prime] = support_attention(pairs, attn);
    for (int i = 0; i < 3; ++i) REQUIRE(beta(i) == Catch::Approx(1.0 / 3).margin(1e-12));
  }
  SECTION("softmax of logits [ln 3, 0] is [0.75, 0.25]") {
    // closed-form check of the readout softmax with the tanh bypassed
    Vec o(2);
    o << std::log(3.0), 0.0;
    Vec beta = softmax(o);
    REQUIRE(beta(0) == Catch::Approx(0.75).margin(1e-12));
    REQUIRE(beta(1) == Catch::Approx(0.25).margin(1e-12));
  }
}

TEST_CASE("relation_representation") {
  Rng rng(17);
  const int d = 4;
  SECTION("K = 1 returns the single projected state") {
    Mat p_prime = Mat::Random(d, 1);
    Vec beta(1);
    beta << 1.0;
    REQUIRE((relation_representation(beta, p_prime) - p_prime.col(0)).norm() == 0.0);
  }
  SECTION("one-hot weights select a column") {
    Mat p_prime = Mat::Random(d, 3);
    Vec beta = Vec::Zero(3);
    beta(2) = 1.0;
    REQUIRE((relation_representation(beta, p_prime) - p_prime.col(2)).norm() == 0.0);
  }
  SECTION("random K = 4 matches the naive weighted sum") {
    Mat p_prime = Mat::Random(d, 4);
    Vec o = testutil::random_vec(4, rng);
    Vec beta = softmax(o);
    Vec r = relation_representation(beta, p_prime);
    for (int k = 0; k < d; ++k) {
      double acc = 0;
      for (int i = 0; i < 4; ++i) acc += beta(i) * p_prime(k, i);
      REQUIRE(r(k) == Catch::Approx(acc).margin(1e-12));
    }
  }
}

TEST_CASE("encoder invariants over 1000 randomized cases") {
  Rng rng(19);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 2 + rng.index(4);
    const int hid1 = 2 + rng.index(4);
    const int hid2 = 2 + rng.index(4);
    const int K = 1 + rng.index(4);
    BiLSTMParams lstm = BiLSTMParams::init(2 * d, hid1, hid2, rng);
    SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
    EncoderCache cache = encoder_forward(random_support(K, 2 * d, rng), lstm, attn);
    REQUIRE(cache.beta.minCoeff() >= 0.0);
    REQUIRE(cache.beta.sum() == Catch::Approx(1.0).margin(1e-9));
    // convex-hull bounds per coordinate
    for (int k = 0; k < d; ++k) {
      const double lo = cache.p_prime.row(k).minCoeff();
      const double hi = cache.p_prime.row(k).maxCoeff();
      REQUIRE(cache.r_prime(k) >= lo - 1e-9);
      REQUIRE(cache.r_prime(k) <= hi + 1e-9);
    }
  }
}

TEST_CASE("encoder determinism: identical inputs give bit-identical outputs") {
  Rng rng(23);
  const int d = 4, hid1 = 5, hid2 = 4, K = 3;
  BiLSTMParams lstm = BiLSTMParams::init(2 * d, hid1, hid2, rng);
  SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
  std::vector<Vec> support = random_support(K, 2 * d, rng);
  EncoderCache a = encoder_forward(support, lstm, attn);
  EncoderCache b = encoder_forward(support, lstm, attn);
  REQUIRE(a.r_prime == b.r_prime);
}

TEST_CASE("encoder analytic gradients match central finite differences") {
  Rng rng(29);
  const int d = 3, hid1 = 3, hid2 = 3, K = 3;
  const double fd = 1e-4;
  BiLSTMParams lstm = BiLSTMParams::init(2 * d, hid1, hid2, rng);
  SupportAttnParams attn = SupportAttnParams::init(d, hid2, rng);
  std::vector<Vec> support = random_support(K, 2 * d, rng);
  const Vec w = testutil::random_vec(d, rng);

  EncoderCache cache = encoder_forward(support, lstm, attn);
  BiLSTMParams lstm_grads = BiLSTMParams::zeros_like(lstm);
  SupportAttnParams attn_grads = SupportAttnParams::zeros_like(attn);
  std::vector<Vec> d_support = encoder_backward(cache, lstm, attn, w, lstm_grads, attn_grads);

  auto loss = [&]() { return w.dot(encoder_forward(support, lstm, attn).r_prime); };
  auto check = [&](double* data, Eigen::Index size, const double* grad) {
    for (Eigen::Index i = 0; i < size; ++i) {
      const double saved = data[i];
      data[i] = saved + fd;
      const double up = loss();
      data[i] = saved - fd;
      const double down = loss();
      data[i] = saved;
      const double numeric = (up - down) / (2 * fd);
      const double rel =
          std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
      REQUIRE(rel <= 1e-4);
    }
  };
  for (int l = 0; l < 2; ++l)
    for (int dir = 0; dir < 2; ++dir) {
      check(lstm.cells[l][dir].Wx.data(), lstm.cells[l][dir].Wx.size(),
            lstm_grads.cells[l][dir].Wx.data());
      check(lstm.cells[l][dir].Wh.data(), lstm.cells[l][dir].Wh.size(),
            lstm_grads.cells[l][dir].Wh.data());
      check(lstm.cells[l][dir].bias.data(), lstm.cells[l][dir].bias.size(),
            lstm_grads.cells[l][dir].bias.data());
    }
  check(attn.W3.data(), attn.W3.size(), attn_grads.W3.data());
  check(attn.u3.data(), attn.u3.size(), attn_grads.u3.data());
  check(&attn.b_a, 1, &attn_grads.b_a);

  // input gradients
  for (int i = 0; i < K; ++i)
    for (int k = 0; k < 2 * d; ++k) {
      const double saved = support[static_cast<std::size_t>(i)](k);
      support[static_cast<std::size_t>(i)](k) = saved + fd;
      const double up = loss();
      support[static_cast<std::size_t>(i)](k) = saved - fd;
      const double down = loss();
      support[static_cast<std::size_t>(i)](k) = saved;
      const double numeric = (up - down) / (2 * fd);
      const double exact = d_support[static_cast<std::size_t>(i)](k);
      const double rel =
          std::abs(numeric - exact) / std::max({std::abs(numeric), std::abs(exact), 1e-6});
      REQUIRE(rel <= 1e-4);
    }
}
