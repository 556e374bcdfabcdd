#include "core/io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "core/error.hpp"
#include "core/numerics.hpp"

namespace specvoc {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kConfigError, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

const NamedTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  fail(ErrorCode::kConfigError, "checkpoint has no tensor named '" + name + "'");
}

std::uint64_t save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  Json manifest;
  manifest["format"] = "specvoc-checkpoint";
  manifest["version"] = 1;
  manifest["kind"] = ckpt.kind;
  manifest["meta"] = ckpt.meta;
  Json entries = Json::array();
  std::uint64_t chained = 0xcbf29ce484222325ULL;
  for (const auto& t : ckpt.tensors) {
    require(t.values.size() == t.rows * t.cols, ErrorCode::kShapeError,
            "checkpoint tensor size does not match its shape");
    const auto bytes = encode_f32(t.values);
    const std::string file = t.name + ".f32";
    write_bytes(dir / file, bytes);
    chained = fnv1a64(bytes, chained);
    entries.push_back({{"name", t.name},
                       {"file", file},
                       {"rows", t.rows},
                       {"cols", t.cols},
                       {"fnv1a64", hex64(fnv1a64(bytes))}});
  }
  manifest["tensors"] = entries;
  manifest["hash"] = hex64(chained);
  write_json(dir / "manifest.json", manifest);
  return chained;
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const Json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != "specvoc-checkpoint") {
    fail(ErrorCode::kConfigError, (dir / "manifest.json").string() + " is not a specvoc checkpoint");
  }
  Checkpoint ckpt;
  ckpt.kind = manifest.at("kind").get<std::string>();
  ckpt.meta = manifest.value("meta", Json::object());
  std::uint64_t chained = 0xcbf29ce484222325ULL;
  for (const auto& e : manifest.at("tensors")) {
    NamedTensor t;
    t.name = e.at("name").get<std::string>();
    t.rows = e.at("rows").get<std::size_t>();
    t.cols = e.at("cols").get<std::size_t>();
    const fs::path file = dir / e.at("file").get<std::string>();
    const auto bytes = read_bytes(file);
    if (hex64(fnv1a64(bytes)) != e.at("fnv1a64").get<std::string>()) {
      fail(ErrorCode::kHashMismatch, "blob hash does not match manifest: " + file.string());
    }
    chained = fnv1a64(bytes, chained);
    t.values = decode_f32(bytes);
    if (t.values.size() != t.rows * t.cols) {
      fail(ErrorCode::kShapeError, "blob length does not match manifest shape: " + file.string());
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (hex64(chained) != manifest.value("hash", "")) {
    fail(ErrorCode::kHashMismatch, "checkpoint hash does not match manifest: " + dir.string());
  }
  return ckpt;
}

std::uint64_t checkpoint_hash(const fs::path& dir) {
  const Json manifest = read_json(dir / "manifest.json");
  return std::stoull(manifest.at("hash").get<std::string>(), nullptr, 16);
}

}  // namespace specvoc
