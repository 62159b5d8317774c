#ifndef MEMRE_CONFIG_HPP
#define MEMRE_CONFIG_HPP

#include "memre/corpus.hpp"
#include "memre/evaluation.hpp"
#include "memre/pipeline.hpp"
#include "memre/training.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>

namespace memre {

struct DataConfig {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> split_file;
  SplitRatios split_ratios{1.0, 0.0, 0.0};
  std::optional<std::filesystem::path> vocabulary;

  SplitSpec split_spec() const;
};

/// Everything a run needs, read from a flat JSON object with dotted keys,
/// e.g. {"encoder.h": 32, "memory.s_E": 16, "train.epochs": 20}.
/// Unknown keys are rejected; missing keys keep their defaults.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  EvalOptions eval;
  std::filesystem::path output_dir = "runs/default";

  /// Relative paths are resolved against `base_dir`.
  static RunConfig from_json(const nlohmann::json& flat, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  void validate() const;
};

/// Environment variable that, when set, replaces output.dir.
inline constexpr const char* kOutputRootEnv = "MEMRE_OUTPUT_ROOT";

}  // namespace memre

#endif  // MEMRE_CONFIG_HPP
