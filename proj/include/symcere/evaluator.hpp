#pragma once

#include "symcere/common.hpp"
#include "symcere/dataio.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace symcere {

/// Item indices by descending score with `exclude` removed. Ties go to the
/// lower index.
std::vector<Index> rank_items(std::span<const double> scores, std::span<const Index> exclude);

/// Ranks the full catalogue for `user` from node rows (users first, then
/// items). Cosine scoring normalises both sides; otherwise raw inner products.
std::vector<Index> rank_items(const Matrix& nodes, std::size_t num_users, Index user,
                              std::span<const Index> exclude, bool cosine = true);

/// 1 if any truth item is in the first K positions. Throws std::invalid_argument
/// for K = 0 or an empty truth set.
double hr_at_k(std::span<const Index> ranked, std::span<const Index> truth, std::size_t k);
/// Binary-relevance DCG@K over IDCG@K with min(K, |truth|) ideal hits.
double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> truth, std::size_t k);

/// Same metrics from the 1-based positions of the truth items.
double hr_from_ranks(std::span<const std::size_t> ranks, std::size_t k);
double ndcg_from_ranks(std::span<const std::size_t> ranks, std::size_t num_truth, std::size_t k);

struct UserRanks {
  Index user = 0;
  std::vector<Index> items;         // truth items, ascending
  std::vector<std::size_t> ranks;   // 1-based position of each
};

struct MetricsReport {
  std::vector<std::size_t> ks;
  std::vector<double> hr;    // per K, macro-averaged over users
  std::vector<double> ndcg;
  std::size_t num_users = 0;      // users with at least one held-out item
  std::size_t skipped_users = 0;  // users without one
  bool cosine = true;
  std::vector<UserRanks> per_user;  // filled on request

  double hr_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;

  nlohmann::json to_json() const;
  /// One JSON object per line: a header, then one line per K.
  std::string to_lines() const;
  /// Tab-separated k / hr / ndcg table with a header row.
  std::string to_table() const;
  /// Tab-separated user / item / rank rows.
  std::string per_user_table() const;
};

struct EvalOptions {
  bool cosine = true;
  bool per_user = false;
};

/// All-ranking evaluation: every user with held-out items ranks the whole
/// catalogue minus their training items. Throws DataError if no user has a
/// held-out item.
MetricsReport evaluate_all(const Matrix& nodes, const InteractionSet& dataset,
                           std::span<const std::size_t> ks, const EvalOptions& options = {});

struct RandomExpectation {
  double hr = 0.0;
  double ndcg = 0.0;
};

/// Expected HR@K / NDCG@K when `num_truth` relevant items sit at uniformly
/// random positions among `num_candidates`.
RandomExpectation random_ranking_expectation(std::size_t num_candidates, std::size_t num_truth,
                                             std::size_t k);

/// random_ranking_expectation averaged over the users evaluate_all would
/// score, each with its own candidate and truth count.
RandomExpectation random_ranking_baseline(const InteractionSet& dataset, std::size_t k);

}  // namespace symcere
