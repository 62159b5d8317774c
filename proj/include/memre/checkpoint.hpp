#ifndef MEMRE_CHECKPOINT_HPP
#define MEMRE_CHECKPOINT_HPP

#include "memre/config.hpp"
#include "memre/pipeline.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace memre {

// A checkpoint is a directory holding manifest.json (config, vocabularies,
// tokenizer, training state) and tensors.bin:
//
//   "MEMRETS1" | u32 count | count x (u32 name_len, name, u32 rows, u32 cols,
//   rows*cols float32 row-major) | u64 FNV-1a of everything before it
//
// All integers and floats are little-endian.

struct CheckpointInfo {
  long step = 0;
  std::optional<double> dev_f1;
};

struct LoadedCheckpoint {
  RunConfig config;
  std::unique_ptr<Model> model;
  CheckpointInfo info;
};

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const RunConfig& config,
                     const CheckpointInfo& info = {});

/// Throws CheckpointError on missing files, bad magic, hash mismatch or a
/// tensor whose name or shape disagrees with the configured model.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace memre

#endif  // MEMRE_CHECKPOINT_HPP
