#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mfgrow/error.hpp"

namespace mfgrow {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

// out[i] = sum_j m(i,j) x[j], j ascending. Eigen's GEMV blocks the inner
// sum, so the reduction is written out to keep the order fixed.
template <typename DerivedM, typename DerivedX>
VectorT<typename DerivedM::Scalar> matvec(const Eigen::MatrixBase<DerivedM>& m,
                                          const Eigen::MatrixBase<DerivedX>& x) {
  using Scalar = typename DerivedM::Scalar;
  if (m.cols() != x.size()) {
    throw DimensionError("matvec: matrix " + shape_string(m.rows(), m.cols()) + " vs vector (" +
                         std::to_string(x.size()) + ")");
  }
  VectorT<Scalar> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Scalar acc(0);
    for (Eigen::Index j = 0; j < m.cols(); ++j) acc += m(i, j) * x(j);
    out(i) = acc;
  }
  return out;
}

// out = a * b with every out(i,j) accumulated over k ascending. The k loop is
// outermost per row so the j loop vectorizes without changing the order.
template <typename DerivedA, typename DerivedB>
MatrixT<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_string(a.rows(), a.cols()) + " * " +
                         shape_string(b.rows(), b.cols()));
  }
  const MatrixT<Scalar> lhs = a;
  const MatrixT<Scalar> rhs = b;
  MatrixT<Scalar> out = MatrixT<Scalar>::Zero(lhs.rows(), rhs.cols());
  for (Eigen::Index i = 0; i < lhs.rows(); ++i) {
    auto row = out.row(i);
    for (Eigen::Index k = 0; k < lhs.cols(); ++k) row.noalias() += lhs(i, k) * rhs.row(k);
  }
  return out;
}

// Counter-based generator: output n of stream (seed, id) is a keyed hash of n,
// so substreams never share state and can be derived in any order.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), key_(mix(mix(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 1))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  result_type next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  // Child stream keyed by (this stream, id); does not advance this stream.
  Rng substream(std::uint64_t id) const { return Rng(seed_, mix(stream_ ^ mix(id + 0x632BE59BD9B4E019ULL))); }
  Rng substream(const std::string& name) const { return substream(hash_name(name)); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double gaussian(double mean, double stddev) {
    // Box-Muller; one pair of uniforms per draw keeps the counter arithmetic simple.
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n) by rejection.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw ParameterError("Rng::index: empty range");
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t hash_name(const std::string& name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return h;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct DistributionSpec {
  enum class Kind { Uniform, Gaussian, Constant };

  Kind kind = Kind::Constant;
  double a = 0.0;  // uniform low, gaussian mean, or the constant
  double b = 0.0;  // uniform high or gaussian std

  static DistributionSpec uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static DistributionSpec gaussian(double mean, double stddev) { return {Kind::Gaussian, mean, stddev}; }
  static DistributionSpec constant(double c) { return {Kind::Constant, c, 0.0}; }

  void validate() const {
    if (!std::isfinite(a) || !std::isfinite(b)) throw ParameterError("distribution parameters must be finite");
    if (kind == Kind::Uniform && b < a) throw ParameterError("uniform(a, b) requires b >= a");
    if (kind == Kind::Gaussian && b < 0.0) throw ParameterError("gaussian std must be non-negative");
  }

  double draw(Rng& rng) const {
    switch (kind) {
      case Kind::Uniform:
        return rng.uniform(a, b);
      case Kind::Gaussian:
        return rng.gaussian(a, b);
      case Kind::Constant:
        return a;
    }
    return a;
  }

  std::string describe() const;
};

inline std::string DistributionSpec::describe() const {
  switch (kind) {
    case Kind::Uniform:
      return "uniform(" + std::to_string(a) + "," + std::to_string(b) + ")";
    case Kind::Gaussian:
      return "gaussian(" + std::to_string(a) + "," + std::to_string(b) + ")";
    case Kind::Constant:
      return "constant(" + std::to_string(a) + ")";
  }
  return "?";
}

inline Vector sample(Rng& rng, const DistributionSpec& dist, Eigen::Index n) {
  dist.validate();
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = dist.draw(rng);
  return out;
}

template <typename Derived>
double mean(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw DimensionError("mean of empty tensor");
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += static_cast<double>(v.reshaped()(i));
  return s / static_cast<double>(v.size());
}

// Population standard deviation.
template <typename Derived>
double stddev(const Eigen::MatrixBase<Derived>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double d = static_cast<double>(v.reshaped()(i)) - m;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace mfgrow
