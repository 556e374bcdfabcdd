#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace specvoc {

using Json = nlohmann::json;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
// Pretty-printed with sorted keys; byte-stable for identical values.
void write_json(const std::filesystem::path& path, const Json& value);

struct NamedTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
};

// Manifest (manifest.json) plus one little-endian float32 blob per tensor.
struct Checkpoint {
  std::string kind;
  Json meta = Json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor& tensor(const std::string& name) const;
};

// Returns the chained FNV-1a hash over all blobs in manifest order.
std::uint64_t save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

// Verifies every blob against its recorded hash; HashMismatch names the file.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::uint64_t checkpoint_hash(const std::filesystem::path& dir);

}  // namespace specvoc
