#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gcope/autodiff.hpp"
#include "gcope/types.hpp"

namespace gcope {

inline constexpr std::string_view kCheckpointMagic = "GCOPEv1";

std::uint64_t fnv1a64(std::string_view bytes);

struct Tensor {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<float> data;  // row-major

  bool operator==(const Tensor&) const = default;
};

/// Named float32 tensors plus an ordered hyperparameter record.
///
/// On disk: a text header (magic line, "fingerprint <hex>", one
/// "hyper <key> <value>" line per record entry, one
/// "tensor <name> <rows> <cols> <offset>" line per tensor, "payload <floats>")
/// followed by the little-endian float32 payload with tensors in manifest
/// order. The fingerprint is FNV-1a over the hyper lines.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> hyper;
  std::vector<Tensor> tensors;

  void set_hyper(const std::string& key, const std::string& value);
  /// Throws ParseError when the key is absent.
  const std::string& hyper_value(const std::string& key) const;
  bool has_hyper(const std::string& key) const;
  std::uint64_t fingerprint() const;

  void add(const Param& p);
  const Tensor* find(const std::string& name) const;
  /// Copies the stored tensor into p.value. ShapeMismatch when the shapes
  /// differ, ParseError when the tensor is missing.
  void restore(Param& p) const;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Fingerprint over an arbitrary ordered key/value record, same hashing as
/// Checkpoint::fingerprint().
std::uint64_t record_fingerprint(const std::vector<std::pair<std::string, std::string>>& record);
std::string to_hex(std::uint64_t v);

}  // namespace gcope
