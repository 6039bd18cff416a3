#include "symcere/evaluator.hpp"

#include "symcere/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace symcere {

using nlohmann::json;

namespace {

double discount(std::size_t position) { return 1.0 / std::log2(static_cast<double>(position) + 1.0); }

double ideal_dcg(std::size_t num_truth, std::size_t k) {
  double idcg = 0.0;
  for (std::size_t p = 1; p <= std::min(k, num_truth); ++p) idcg += discount(p);
  return idcg;
}

void check_k(std::size_t k) {
  if (k < 1) throw std::invalid_argument("K must be >= 1");
}

// Rows scaled to unit length; zero rows stay zero.
Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double n = out.row(r).norm();
    out.row(r) *= n > kMinNorm ? 1.0 / n : 0.0;
  }
  return out;
}

std::size_t position_of(Index truth, std::span<const double> scores, const std::vector<std::uint8_t>& excluded) {
  const double s = scores[truth];
  std::size_t better = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (excluded[j]) continue;
    if (scores[j] > s || (scores[j] == s && j < truth)) ++better;
  }
  return better + 1;
}

}  // namespace

std::vector<Index> rank_items(std::span<const double> scores, std::span<const Index> exclude) {
  std::vector<std::uint8_t> excluded(scores.size(), 0);
  for (auto e : exclude) {
    if (e < scores.size()) excluded[e] = 1;
  }
  std::vector<Index> order;
  order.reserve(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!excluded[j]) order.push_back(static_cast<Index>(j));
  }
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<Index> rank_items(const Matrix& nodes, std::size_t num_users, Index user,
                              std::span<const Index> exclude, bool cosine) {
  if (user >= num_users || static_cast<std::size_t>(nodes.rows()) < num_users) {
    throw std::invalid_argument("rank_items: user out of range");
  }
  const auto items = nodes.bottomRows(nodes.rows() - static_cast<Eigen::Index>(num_users));
  Matrix u = nodes.row(user);
  Matrix it = items;
  if (cosine) {
    u = unit_rows(u);
    it = unit_rows(it);
  }
  const Vector scores = it * u.transpose();
  return rank_items(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), exclude);
}

double hr_at_k(std::span<const Index> ranked, std::span<const Index> truth, std::size_t k) {
  check_k(k);
  if (truth.empty()) throw std::invalid_argument("hr_at_k: empty ground truth");
  const auto n = std::min(k, ranked.size());
  for (std::size_t p = 0; p < n; ++p) {
    if (std::find(truth.begin(), truth.end(), ranked[p]) != truth.end()) return 1.0;
  }
  return 0.0;
}

double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> truth, std::size_t k) {
  check_k(k);
  if (truth.empty()) throw std::invalid_argument("ndcg_at_k: empty ground truth");
  double dcg = 0.0;
  const auto n = std::min(k, ranked.size());
  for (std::size_t p = 0; p < n; ++p) {
    if (std::find(truth.begin(), truth.end(), ranked[p]) != truth.end()) dcg += discount(p + 1);
  }
  std::vector<Index> distinct(truth.begin(), truth.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  return dcg / ideal_dcg(distinct.size(), k);
}

double hr_from_ranks(std::span<const std::size_t> ranks, std::size_t k) {
  check_k(k);
  if (ranks.empty()) throw std::invalid_argument("hr_from_ranks: empty ground truth");
  return std::any_of(ranks.begin(), ranks.end(), [&](std::size_t r) { return r <= k; }) ? 1.0 : 0.0;
}

double ndcg_from_ranks(std::span<const std::size_t> ranks, std::size_t num_truth, std::size_t k) {
  check_k(k);
  if (num_truth == 0) throw std::invalid_argument("ndcg_from_ranks: empty ground truth");
  double dcg = 0.0;
  for (auto r : ranks) {
    if (r >= 1 && r <= k) dcg += discount(r);
  }
  return dcg / ideal_dcg(num_truth, k);
}

double MetricsReport::hr_at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return hr[i];
  }
  throw std::out_of_range("no HR@" + std::to_string(k) + " in report");
}

double MetricsReport::ndcg_at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return ndcg[i];
  }
  throw std::out_of_range("no NDCG@" + std::to_string(k) + " in report");
}

json MetricsReport::to_json() const {
  json j;
  j["averaging"] = "macro: per-user metric, mean over users";
  j["scoring"] = cosine ? "cosine" : "inner_product";
  j["num_users"] = num_users;
  j["skipped_users"] = skipped_users;
  json metrics = json::object();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    metrics["HR@" + std::to_string(ks[i])] = hr[i];
    metrics["NDCG@" + std::to_string(ks[i])] = ndcg[i];
  }
  j["metrics"] = metrics;
  return j;
}

std::string MetricsReport::to_lines() const {
  std::ostringstream out;
  out << json{{"averaging", "macro"},
              {"scoring", cosine ? "cosine" : "inner_product"},
              {"num_users", num_users},
              {"skipped_users", skipped_users}}
             .dump()
      << '\n';
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out << json{{"k", ks[i]}, {"hr", hr[i]}, {"ndcg", ndcg[i]}}.dump() << '\n';
  }
  return out.str();
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  out.precision(17);
  out << "k\thr\tndcg\n";
  for (std::size_t i = 0; i < ks.size(); ++i) out << ks[i] << '\t' << hr[i] << '\t' << ndcg[i] << '\n';
  return out.str();
}

std::string MetricsReport::per_user_table() const {
  std::ostringstream out;
  out << "user\titem\trank\n";
  for (const auto& u : per_user) {
    for (std::size_t i = 0; i < u.items.size(); ++i) out << u.user << '\t' << u.items[i] << '\t' << u.ranks[i] << '\n';
  }
  return out.str();
}

MetricsReport evaluate_all(const Matrix& nodes, const InteractionSet& dataset,
                           std::span<const std::size_t> ks, const EvalOptions& options) {
  if (ks.empty()) throw std::invalid_argument("evaluate_all: empty K list");
  for (auto k : ks) check_k(k);
  const std::size_t nu = dataset.num_users();
  const std::size_t ni = dataset.num_items();
  if (static_cast<std::size_t>(nodes.rows()) != nu + ni) {
    throw std::invalid_argument("evaluate_all: node matrix does not match the dataset");
  }
  if (!nodes.allFinite()) throw NumericError("evaluate_all: non-finite embeddings");

  Matrix users = nodes.topRows(static_cast<Eigen::Index>(nu));
  Matrix items = nodes.bottomRows(static_cast<Eigen::Index>(ni));
  if (options.cosine) {
    users = unit_rows(users);
    items = unit_rows(items);
  }

  MetricsReport report;
  report.ks.assign(ks.begin(), ks.end());
  report.hr.assign(ks.size(), 0.0);
  report.ndcg.assign(ks.size(), 0.0);
  report.cosine = options.cosine;

  const auto truth = dataset.test_items_by_user();
  const auto& train = dataset.train();
  std::vector<std::uint8_t> excluded(ni, 0);
  Vector scores(static_cast<Eigen::Index>(ni));
  for (std::size_t u = 0; u < nu; ++u) {
    if (truth[u].empty()) {
      ++report.skipped_users;
      continue;
    }
    scores.noalias() = items * users.row(static_cast<Eigen::Index>(u)).transpose();
    const auto& seen = train.user_items(static_cast<Index>(u));
    for (auto i : seen) excluded[i] = 1;

    UserRanks ur;
    ur.user = static_cast<Index>(u);
    ur.items = truth[u];
    std::sort(ur.items.begin(), ur.items.end());
    const std::span<const double> s(scores.data(), ni);
    for (auto t : ur.items) ur.ranks.push_back(position_of(t, s, excluded));
    for (auto i : seen) excluded[i] = 0;

    for (std::size_t i = 0; i < ks.size(); ++i) {
      report.hr[i] += hr_from_ranks(ur.ranks, ks[i]);
      report.ndcg[i] += ndcg_from_ranks(ur.ranks, ur.items.size(), ks[i]);
    }
    ++report.num_users;
    if (options.per_user) report.per_user.push_back(std::move(ur));
  }
  if (report.num_users == 0) throw DataError("evaluate_all: no user has a held-out item");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.hr[i] /= static_cast<double>(report.num_users);
    report.ndcg[i] /= static_cast<double>(report.num_users);
  }
  return report;
}

RandomExpectation random_ranking_expectation(std::size_t num_candidates, std::size_t num_truth,
                                             std::size_t k) {
  check_k(k);
  if (num_truth == 0 || num_truth > num_candidates) {
    throw std::invalid_argument("random_ranking_expectation: need 1 <= num_truth <= num_candidates");
  }
  const std::size_t n = num_candidates;
  const std::size_t kk = std::min(k, n);
  // P(no truth in the top K) = C(n - m, K) / C(n, K).
  double miss = 1.0;
  for (std::size_t i = 0; i < kk; ++i) {
    if (n - num_truth <= i) {
      miss = 0.0;
      break;
    }
    miss *= static_cast<double>(n - num_truth - i) / static_cast<double>(n - i);
  }
  double dcg = 0.0;
  for (std::size_t p = 1; p <= kk; ++p) dcg += discount(p);
  dcg *= static_cast<double>(num_truth) / static_cast<double>(n);
  return {1.0 - miss, dcg / ideal_dcg(num_truth, k)};
}

RandomExpectation random_ranking_baseline(const InteractionSet& dataset, std::size_t k) {
  const auto truth = dataset.test_items_by_user();
  RandomExpectation sum;
  std::size_t users = 0;
  for (std::size_t u = 0; u < truth.size(); ++u) {
    if (truth[u].empty()) continue;
    const auto candidates = dataset.num_items() - dataset.train().user_items(static_cast<Index>(u)).size();
    const auto e = random_ranking_expectation(candidates, truth[u].size(), k);
    sum.hr += e.hr;
    sum.ndcg += e.ndcg;
    ++users;
  }
  if (users == 0) throw DataError("random_ranking_baseline: no user has a held-out item");
  return {sum.hr / static_cast<double>(users), sum.ndcg / static_cast<double>(users)};
}

}  // namespace symcere
