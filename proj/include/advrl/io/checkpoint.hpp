#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advrl/diff/mlp.hpp"

namespace advrl::io {

/// Binary checkpoint: 8-byte magic "ADVRLCKP", little-endian u32 format
/// version, u64 manifest length, the JSON manifest, u64 value count, then
/// every block's values as row-major IEEE-754 doubles. The manifest holds
/// free-form `meta` plus one {name, shape, offset} entry per block.
struct Checkpoint {
  struct Block {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
  };

  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();
  std::vector<Block> blocks;

  void add(std::string name, std::vector<std::size_t> shape, std::vector<double> values);
  /// Throws LoadError when absent.
  const Block& block(const std::string& name) const;
  bool has(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws LoadError on a missing file, bad magic, truncated data, or a
/// version newer than kVersion.
Checkpoint read_checkpoint(const std::string& path);

/// Stores layers as `<prefix>.<i>.weight` / `.bias`; activations go in meta[prefix].
void add_mlp(Checkpoint& ckpt, const std::string& prefix, const diff::MlpParams& params);
diff::MlpParams read_mlp(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace advrl::io
