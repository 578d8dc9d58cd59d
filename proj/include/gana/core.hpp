#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gana {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using EntityId = std::int32_t;
using RelationId = std::int32_t;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct LoadError : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct EpisodeError : Error {
  using Error::Error;
};
struct SamplingError : Error {
  using Error::Error;
};
struct GenerationError : Error {
  using Error::Error;
};
struct EncoderError : Error {
  using Error::Error;
};
struct DivergenceError : Error {
  using Error::Error;
};
struct DegeneracyError : Error {
  using Error::Error;
};
struct PairingError : Error {
  using Error::Error;
};
struct CheckpointError : Error {
  using Error::Error;
};
struct IntegrityError : Error {
  using Error::Error;
};
struct ProtocolError : Error {
  using Error::Error;
};
struct ClassificationError : Error {
  using Error::Error;
};
struct PretrainError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// Thin wrapper over mt19937_64 with hand-rolled distributions so sampled
// sequences do not depend on the standard library's distribution
// implementations. State round-trips through strings for checkpointing.
// ---------------------------------------------------------------------------

class Rng {
 public:
  Rng() : engine_(0x9e3779b97f4a7c15ULL) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection keeps the draw unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below called with n = 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  int index(std::size_t n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Sample k distinct indices from [0, n), order given by the draw.
  std::vector<int> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(std::min(k, n));
    return idx;
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void restore(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (!is) throw IntegrityError("corrupt RNG state string");
  }

 private:
  std::mt19937_64 engine_;
};

// Derives decorrelated stream seeds from a master seed (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

// Softmax with max-subtraction.
inline Vec softmax(const Vec& logits) {
  if (logits.size() == 0) return Vec();
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  return e / e.sum();
}

// Backward of y = softmax(x): dx_i = y_i * (dy_i - sum_j y_j dy_j).
inline Vec softmax_backward(const Vec& y, const Vec& dy) {
  const double s = y.dot(dy);
  return y.array() * (dy.array() - s);
}

inline double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kLeakySlope = 0.2;

inline double leaky_relu(double x) { return x > 0 ? x : kLeakySlope * x; }
inline double leaky_relu_grad(double x) { return x >= 0 ? 1.0 : kLeakySlope; }

enum class Activation { Relu, Tanh, Sigmoid, Identity };

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::Relu: return x > 0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Identity: return x;
  }
  return x;
}

// Derivative expressed through pre-activation x and output y = act(x).
inline double activate_grad(Activation a, double x, double y) {
  switch (a) {
    case Activation::Relu: return x > 0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + s);
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

enum class Norm { L1, L2 };

inline Norm norm_from_string(const std::string& s) {
  if (s == "L1" || s == "l1") return Norm::L1;
  if (s == "L2" || s == "l2") return Norm::L2;
  throw ConfigError("unknown norm: " + s);
}

inline std::string to_string(Norm n) { return n == Norm::L1 ? "L1" : "L2"; }

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

// Glorot-uniform initialization used for every weight matrix; weight vectors
// are treated as 1 x n matrices.
inline void glorot_init(Mat& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
}

inline void glorot_init(Vec& v, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + 1));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
}

}  // namespace gana
