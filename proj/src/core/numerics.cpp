#include "core/numerics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "core/error.hpp"

namespace specvoc {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorCode::kShapeError,
          "matrix data length must equal rows * cols");
}

std::vector<double> DenseMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

SeededRng SeededRng::stream(std::uint64_t seed, std::uint64_t stream_id) {
  return SeededRng(splitmix64(seed ^ splitmix64(stream_id + 0x5eed)));
}

double SeededRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.14159265358979323846 * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t SeededRng::uniform_index(std::size_t n) {
  require(n > 0, ErrorCode::kEmptyInput, "uniform_index over an empty range");
  auto idx = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return std::min(idx, n - 1);
}

std::size_t SeededRng::categorical(std::span<const double> weights) {
  require(!weights.empty(), ErrorCode::kEmptyInput, "categorical over empty weights");
  double total = 0.0;
  for (double w : weights) total += w;
  require(total > 0.0, ErrorCode::kZeroMassSubset, "categorical weights sum to zero");
  const double target = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

Vector matvec(std::span<const double> h, const DenseMatrix& W) {
  require(h.size() == W.rows(), ErrorCode::kShapeError, "matvec: h length != W rows");
  Vector out(W.cols(), 0.0);
  for (std::size_t i = 0; i < W.rows(); ++i) {
    const double hi = h[i];
    const auto row = W.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += hi * row[j];
  }
  return out;
}

Vector gathered_matvec(std::span<const double> h, const DenseMatrix& W,
                       std::span<const TokenId> idx) {
  require(h.size() == W.rows(), ErrorCode::kShapeError, "gathered_matvec: h length != W rows");
  require(!idx.empty(), ErrorCode::kEmptyShortlist, "gathered_matvec: empty index list");
  const std::size_t n = W.cols();
  for (TokenId c : idx) {
    if (c < 0 || static_cast<std::size_t>(c) >= n) {
      fail(ErrorCode::kIndexOutOfRange, "gathered_matvec: column " + std::to_string(c) +
                                            " outside [0, " + std::to_string(n) + ")");
    }
  }
  Vector out(idx.size(), 0.0);
  const double* base = W.data().data();
  for (std::size_t i = 0; i < W.rows(); ++i) {
    const double hi = h[i];
    const double* row = base + i * n;
    for (std::size_t j = 0; j < idx.size(); ++j) out[j] += hi * row[idx[j]];
  }
  return out;
}

Vector log_softmax(std::span<const double> z) {
  require(!z.empty(), ErrorCode::kEmptyInput, "log_softmax of an empty vector");
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double log_s = std::log(s);
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - m) - log_s;
  return out;
}

Vector softmax(std::span<const double> z) {
  require(!z.empty(), ErrorCode::kEmptyInput, "softmax of an empty vector");
  const double m = *std::max_element(z.begin(), z.end());
  Vector out(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

TopK top_k(std::span<const double> values, std::size_t k) {
  if (k < 1 || k > values.size()) {
    fail(ErrorCode::kInvalidBudget, "top_k: k=" + std::to_string(k) + " outside [1, " +
                                        std::to_string(values.size()) + "]");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    before);
  order.resize(k);
  TopK out;
  out.values.reserve(k);
  for (std::size_t i : order) out.values.push_back(values[i]);
  out.indices = std::move(order);
  return out;
}

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), ErrorCode::kEmptyInput, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void round_to_float(std::span<double> values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::vector<std::uint8_t> encode_f32(std::span<const double> values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return out;
}

std::vector<double> decode_f32(std::span<const std::uint8_t> bytes) {
  require(bytes.size() % 4 == 0, ErrorCode::kShapeError, "float32 blob length not a multiple of 4");
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

}  // namespace specvoc
