#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "core/error.hpp"
#include "core/numerics.hpp"
#include "core/toy_lm.hpp"

namespace specvoc::testing {

// Asserts that `stmt` throws specvoc::Error with the given code.
#define EXPECT_SPECVOC_ERROR(stmt, expected_code)                          \
  do {                                                                     \
    try {                                                                  \
      stmt;                                                                \
      ADD_FAILURE() << "expected " << ::specvoc::to_string(expected_code); \
    } catch (const ::specvoc::Error& e) {                                  \
      EXPECT_EQ(e.code(), expected_code) << e.what();                      \
    }                                                                      \
  } while (0)

inline ModelConfig tiny_model_config(std::size_t vocab = 8, std::size_t d = 4,
                                     std::uint64_t seed = 7) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.hidden_dim = d;
  c.window = 3;
  c.target_blocks = 1;
  c.seed = seed;
  return c;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = tag;
    if (info != nullptr) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / ("specvoc_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline double sum(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace specvoc::testing
