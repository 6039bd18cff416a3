#pragma once

#include "symcere/config.hpp"
#include "symcere/evaluator.hpp"
#include "symcere/trainer.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace symcere {

/// Text rows as the trainer expects them (empty when the dataset has none).
Matrix text_matrix(const PreparedDataset& data);

/// Train-row item of each embedding row, for anchoring diagnostics.
std::vector<Index> embedding_row_items(const TrainPartition& train);

struct TrainHooks {
  std::function<void(const Trainer&)> on_start;
  std::function<void(const EpochLosses&, double wall_seconds)> on_epoch;
  std::function<void(std::size_t epochs_done, const MetricsReport&, const Trainer&)> on_eval;
};

struct TrainOutcome {
  TrainState state;
  std::vector<EpochLosses> curve;
  MetricsReport final_metrics;  // on the final parameters
  std::size_t best_epoch = 0;   // epochs completed at the best evaluation
  double best_ndcg = 0.0;       // NDCG at the first K of the list
  bool stopped_early = false;
};

/// Full training loop: epochs with periodic evaluation on the held-out rows
/// and early stopping on NDCG at eval.topk[0]. `resume` continues a saved
/// state up to config.epochs.
TrainOutcome train_model(const TrainConfig& config, const EvalConfig& eval, const InteractionSet& dataset,
                         Matrix text, const TrainHooks& hooks = {},
                         std::optional<TrainState> resume = std::nullopt);

/// Scoring mode the evaluator should use for a model.
bool eval_cosine(const EvalConfig& eval, const TrainConfig& train);

/// (full - value) / full * 100.
double drop_percent(double full, double value);

struct AblationCell {
  Backbone backbone = Backbone::lightgcn;
  LossVariant variant = LossVariant::symcere;
  bool normalize = true;
  double hr = 0.0;
  double ndcg = 0.0;
};

struct AblationSummary {
  Backbone backbone = Backbone::lightgcn;
  std::vector<AblationCell> cells;  // the full model first
  double min_drop_hr = 0.0;         // (full - min over the other cells) / full * 100
  double min_drop_ndcg = 0.0;
};

/// Drop columns for one backbone's cells; the cell with symcere + norm is the
/// reference.
AblationSummary summarize_ablation(std::vector<AblationCell> cells);

}  // namespace symcere
