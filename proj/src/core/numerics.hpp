#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace specvoc {

using TokenId = std::int32_t;
using Vector = std::vector<double>;

// Row-major dense matrix. Model weights keep float32-representable values in
// 64-bit storage so checkpoints round-trip exactly.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::vector<double> column(std::size_t c) const;

  bool all_finite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// mt19937_64 with hand-rolled real-valued draws; std distributions are not
// reproducible across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  // Independent stream derived from (seed, stream id).
  static SeededRng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  static constexpr const char* algorithm() { return "mt19937_64"; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double normal();
  std::size_t uniform_index(std::size_t n);
  // Draws an index with probability proportional to weights.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// output = h * W, W is d x n.
Vector matvec(std::span<const double> h, const DenseMatrix& W);

// output[j] = dot(h, column idx[j] of W). Same summation order as matvec.
Vector gathered_matvec(std::span<const double> h, const DenseMatrix& W,
                       std::span<const TokenId> idx);

Vector log_softmax(std::span<const double> z);
Vector softmax(std::span<const double> z);

struct TopK {
  std::vector<std::size_t> indices;
  Vector values;
};

// k largest entries, descending; ties go to the lower index.
TopK top_k(std::span<const double> values, std::size_t k);

std::size_t argmax(std::span<const double> values);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// Rounds every entry to the nearest float32.
void round_to_float(std::span<double> values);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Little-endian float32 encoding used by every binary blob on disk.
std::vector<std::uint8_t> encode_f32(std::span<const double> values);
std::vector<double> decode_f32(std::span<const std::uint8_t> bytes);

}  // namespace specvoc
