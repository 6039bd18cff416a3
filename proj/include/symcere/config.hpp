#pragma once

#include "symcere/synth.hpp"
#include "symcere/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace symcere {

struct DataConfig {
  std::string input;       // raw interaction dump for `prepare`
  std::string dir;         // prepared dataset directory
  std::string embeddings;  // optional override of the manifest's file
  double train_fraction = 0.8;
  std::size_t kcore = 5;
};

struct EvalConfig {
  std::vector<std::size_t> topk{10};
  /// Cosine scoring; false scores with raw inner products. Unset follows the
  /// training normalization flag.
  std::optional<bool> cosine;
  std::size_t eval_every = 1;  // epochs between evaluations during `train`
  std::size_t patience = 10;   // evaluations without NDCG gain before stopping; 0 disables
  bool per_user_ranks = false;
};

struct DiagnosticsConfig {
  std::size_t num_pairs = 100000;
  std::size_t histogram_bins = 50;
  std::uint64_t seed = 1;
};

/// Everything a run reads, one section per module.
struct RunConfig {
  DataConfig data;
  TrainConfig train;
  EvalConfig eval;
  DiagnosticsConfig diagnostics;
  SynthConfig synth;
};

/// Missing keys keep their defaults; unknown sections or keys throw UsageError.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

nlohmann::json train_config_json(const TrainConfig& config);

}  // namespace symcere
