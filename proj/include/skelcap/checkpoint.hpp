#pragma once

#include <map>
#include <string>

#include "skelcap/params.hpp"

namespace skelcap::nn {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string kind;                                // "skel" or "attr"
  std::map<std::string, std::string> vocab_hashes;  // vocabulary role -> hash
  std::string config_json;                          // model dimensions etc.
};

// A checkpoint is a directory holding `manifest.txt` (format version, step,
// vocabulary hashes, config, and one `tensor <name> <rank> <dims..> <offset>`
// line per tensor) and `weights.bin` (little-endian float32 payload).
// Adagrad accumulators are stored as tensors named `adagrad/<name>`.
void save_checkpoint(const std::string& dir, const ParameterStore& store, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ParameterStore store;
  CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace skelcap::nn
