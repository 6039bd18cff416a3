#include "symcere/driver.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace symcere {

Matrix text_matrix(const PreparedDataset& data) {
  if (!data.embeddings) return Matrix();
  return data.embeddings->cast<double>();
}

std::vector<Index> embedding_row_items(const TrainPartition& train) {
  std::vector<Index> items(train.size());
  for (const auto& row : train.rows()) items[row.embedding_row] = row.item;
  return items;
}

bool eval_cosine(const EvalConfig& eval, const TrainConfig& train) {
  return eval.cosine.value_or(train.normalize);
}

TrainOutcome train_model(const TrainConfig& config, const EvalConfig& eval, const InteractionSet& dataset,
                         Matrix text, const TrainHooks& hooks, std::optional<TrainState> resume) {
  if (eval.topk.empty()) throw UsageError("eval.topk must not be empty");
  std::optional<Trainer> trainer;
  if (resume) {
    resume->config = config;
    trainer.emplace(std::move(*resume), dataset.train_partition(), std::move(text));
  } else {
    trainer.emplace(config, dataset.train_partition(), std::move(text));
  }
  const EvalOptions options{eval_cosine(eval, config), eval.per_user_ranks};
  const std::size_t primary_k = eval.topk.front();

  TrainOutcome out;
  if (hooks.on_start) hooks.on_start(*trainer);
  std::optional<MetricsReport> last;
  std::size_t evals_since_best = 0;
  bool have_best = false;
  while (trainer->state().epoch < config.epochs) {
    const auto start = std::chrono::steady_clock::now();
    const auto losses = trainer->train_epoch();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.curve.push_back(losses);
    if (hooks.on_epoch) hooks.on_epoch(losses, secs);
    last.reset();

    const std::size_t done = trainer->state().epoch;
    if (done % eval.eval_every != 0 && done != config.epochs) continue;
    last = evaluate_all(trainer->node_embeddings(), dataset, eval.topk, options);
    if (hooks.on_eval) hooks.on_eval(done, *last, *trainer);
    const double ndcg = last->ndcg_at(primary_k);
    if (!have_best || ndcg > out.best_ndcg) {
      have_best = true;
      out.best_ndcg = ndcg;
      out.best_epoch = done;
      evals_since_best = 0;
    } else if (eval.patience > 0 && ++evals_since_best >= eval.patience) {
      out.stopped_early = true;
      break;
    }
  }
  out.final_metrics = last ? *last : evaluate_all(trainer->node_embeddings(), dataset, eval.topk, options);
  if (!have_best) {
    out.best_ndcg = out.final_metrics.ndcg_at(primary_k);
    out.best_epoch = trainer->state().epoch;
  }
  out.state = trainer->state();
  return out;
}

double drop_percent(double full, double value) {
  if (full == 0.0) throw NumericError("drop_percent: reference value is zero");
  return (full - value) / full * 100.0;
}

AblationSummary summarize_ablation(std::vector<AblationCell> cells) {
  auto full = std::find_if(cells.begin(), cells.end(), [](const AblationCell& c) {
    return c.variant == LossVariant::symcere && c.normalize;
  });
  if (full == cells.end()) throw std::invalid_argument("summarize_ablation: no symcere + norm cell");
  std::rotate(cells.begin(), full, full + 1);

  AblationSummary s;
  s.backbone = cells.front().backbone;
  const auto& ref = cells.front();
  double min_hr = cells.size() > 1 ? cells[1].hr : ref.hr;
  double min_ndcg = cells.size() > 1 ? cells[1].ndcg : ref.ndcg;
  for (std::size_t i = 2; i < cells.size(); ++i) {
    min_hr = std::min(min_hr, cells[i].hr);
    min_ndcg = std::min(min_ndcg, cells[i].ndcg);
  }
  s.min_drop_hr = drop_percent(ref.hr, min_hr);
  s.min_drop_ndcg = drop_percent(ref.ndcg, min_ndcg);
  s.cells = std::move(cells);
  return s;
}

}  // namespace symcere
