#include "support.hpp"

#include "symcere/evaluator.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

namespace symcere {
namespace {

/// Every user trains on `per_user` distinct random items and holds out one
/// more; train items cover [0, num_items).
InteractionSet random_dataset(std::size_t nu, std::size_t ni, std::size_t per_user, std::mt19937_64& rng) {
  std::vector<TrainInteraction> train;
  std::vector<TestInteraction> test;
  std::vector<std::string> users, items;
  for (std::size_t u = 0; u < nu; ++u) users.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < ni; ++i) items.push_back("i" + std::to_string(i));
  std::vector<bool> covered(ni, false);
  for (std::size_t u = 0; u < nu; ++u) {
    std::set<Index> chosen;
    while (chosen.size() < per_user + 1) chosen.insert(static_cast<Index>(rng() % ni));
    std::vector<Index> order(chosen.begin(), chosen.end());
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j = 0; j < per_user; ++j) {
      train.push_back({static_cast<Index>(u), order[j], static_cast<std::int64_t>(j), train.size()});
      covered[order[j]] = true;
    }
    test.push_back({static_cast<Index>(u), order[per_user], static_cast<std::int64_t>(per_user)});
  }
  // Cover any unused item through user 0 so the train-item block is dense.
  for (std::size_t i = 0; i < ni; ++i) {
    if (!covered[i]) {
      train.push_back({0, static_cast<Index>(i), 0, train.size()});
    }
  }
  std::erase_if(test, [&](const TestInteraction& t) {
    return std::any_of(train.begin(), train.end(), [&](const auto& r) { return r.user == t.user && r.item == t.item; });
  });
  return InteractionSet(users, items, ni, std::move(train), std::move(test));
}

/// Brute-force expectation over every placement of m truths among N slots.
RandomExpectation enumerate_expectation(std::size_t n, std::size_t m, std::size_t k) {
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(m), true);
  std::sort(pick.begin(), pick.end());
  double hr = 0.0, ndcg = 0.0, count = 0.0;
  do {
    std::vector<std::size_t> ranks;
    for (std::size_t p = 0; p < n; ++p) {
      if (pick[p]) ranks.push_back(p + 1);
    }
    hr += hr_from_ranks(ranks, k);
    ndcg += ndcg_from_ranks(ranks, m, k);
    count += 1.0;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return {hr / count, ndcg / count};
}

TEST(RankItems, Examples) {
  const std::vector<double> s{0.1, 0.9, 0.5};
  EXPECT_EQ(rank_items(s, std::vector<Index>{}), (std::vector<Index>{1, 2, 0}));
  EXPECT_EQ(rank_items(s, std::vector<Index>{1}), (std::vector<Index>{2, 0}));
  const std::vector<double> tied{0.5, 0.7, 0.5, 0.7};
  EXPECT_EQ(rank_items(tied, std::vector<Index>{}), (std::vector<Index>{1, 3, 0, 2}));
}

TEST(Metrics, Examples) {
  const std::vector<Index> ranked{3, 1, 2};
  EXPECT_EQ(hr_at_k(ranked, std::vector<Index>{3}, 1), 1.0);
  EXPECT_EQ(ndcg_at_k(ranked, std::vector<Index>{3}, 1), 1.0);
  EXPECT_EQ(hr_at_k(ranked, std::vector<Index>{2}, 2), 0.0);
  EXPECT_NEAR(ndcg_at_k(ranked, std::vector<Index>{1}, 2), 1.0 / std::log2(3.0), 1e-15);
  const std::vector<Index> four{9, 8, 7, 6};
  EXPECT_NEAR(ndcg_at_k(four, std::vector<Index>{7}, 3), 0.5, 1e-15);
  EXPECT_NEAR(ndcg_at_k(ranked, std::vector<Index>{3, 1}, 2), 1.0, 1e-15);
  EXPECT_NEAR(ndcg_at_k(ranked, std::vector<Index>{3, 3}, 2), 1.0, 1e-15);
  EXPECT_THROW(hr_at_k(ranked, std::vector<Index>{3}, 0), std::invalid_argument);
  EXPECT_THROW(ndcg_at_k(ranked, std::vector<Index>{}, 1), std::invalid_argument);
}

TEST(Metrics, RankFormsAgreeWithListForms) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    std::vector<Index> ranked(n);
    std::iota(ranked.begin(), ranked.end(), Index{0});
    std::shuffle(ranked.begin(), ranked.end(), rng);
    std::set<Index> truth;
    const std::size_t m = 1 + rng() % n;
    while (truth.size() < m) truth.insert(static_cast<Index>(rng() % n));
    std::vector<Index> t(truth.begin(), truth.end());
    std::vector<std::size_t> ranks;
    for (std::size_t p = 0; p < n; ++p) {
      if (truth.contains(ranked[p])) ranks.push_back(p + 1);
    }
    const std::size_t k = 1 + rng() % n;
    EXPECT_EQ(hr_at_k(ranked, t, k), hr_from_ranks(ranks, k));
    EXPECT_NEAR(ndcg_at_k(ranked, t, k), ndcg_from_ranks(ranks, m, k), 1e-14);
    EXPECT_LE(ndcg_at_k(ranked, t, k), 1.0 + 1e-15);
  }
}

TEST(RandomExpectation, MatchesEnumeration) {
  for (std::size_t n = 1; n <= 9; ++n) {
    for (std::size_t m = 1; m <= n; ++m) {
      for (std::size_t k = 1; k <= n + 1; ++k) {
        const auto exact = enumerate_expectation(n, m, k);
        const auto formula = random_ranking_expectation(n, m, k);
        EXPECT_NEAR(formula.hr, exact.hr, 1e-12) << n << " " << m << " " << k;
        EXPECT_NEAR(formula.ndcg, exact.ndcg, 1e-12) << n << " " << m << " " << k;
      }
    }
  }
  EXPECT_NEAR(random_ranking_expectation(1000, 1, 10).hr, 0.01, 1e-15);
}

TEST(EvaluateAll, OracleEmbeddingsRankEveryTruthFirst) {
  std::mt19937_64 rng(2);
  const auto ds = random_dataset(60, 40, 5, rng);
  const auto nu = static_cast<Eigen::Index>(ds.num_users());
  const auto ni = static_cast<Eigen::Index>(ds.num_items());
  Matrix nodes = Matrix::Zero(nu + ni, ni);
  nodes.bottomRows(ni) = Matrix::Identity(ni, ni);
  for (const auto& t : ds.test()) nodes(t.user, t.item) = 1.0;
  const std::vector<std::size_t> ks{1, 10};
  const auto r = evaluate_all(nodes, ds, ks);
  EXPECT_EQ(r.hr_at(1), 1.0);
  EXPECT_EQ(r.ndcg_at(1), 1.0);
  EXPECT_EQ(r.ndcg_at(10), 1.0);
  EXPECT_EQ(r.num_users, ds.test().size());
}

TEST(EvaluateAll, RandomEmbeddingsMatchExpectation) {
  std::mt19937_64 rng(3);
  const auto ds = random_dataset(3000, 400, 8, rng);
  const std::vector<std::size_t> ks{5, 10, 20};
  double hr = 0.0, ndcg = 0.0;
  const int reps = 3;
  for (int rep = 0; rep < reps; ++rep) {
    const Matrix nodes = testing::random_matrix(static_cast<Eigen::Index>(ds.num_users() + ds.num_items()), 16, rng);
    const auto r = evaluate_all(nodes, ds, ks);
    hr += r.hr_at(10) / reps;
    ndcg += r.ndcg_at(10) / reps;
    EXPECT_LE(r.hr_at(5), r.hr_at(10));
    EXPECT_LE(r.hr_at(10), r.hr_at(20));
    EXPECT_LE(r.ndcg_at(5), r.ndcg_at(10));
  }
  const auto expected = random_ranking_baseline(ds, 10);
  EXPECT_NEAR(expected.hr, 10.0 / 392.0, 1e-3);
  EXPECT_NEAR(hr, expected.hr, 0.15 * expected.hr);
  EXPECT_NEAR(ndcg, expected.ndcg, 0.15 * expected.ndcg);
}

TEST(EvaluateAll, TrainItemsAreExcluded) {
  std::mt19937_64 rng(4);
  const auto ds = random_dataset(30, 25, 6, rng);
  const Matrix nodes = testing::random_matrix(55, 4, rng);
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto& seen = ds.train().user_items(static_cast<Index>(u));
    const auto ranked = rank_items(nodes, ds.num_users(), static_cast<Index>(u), seen);
    EXPECT_EQ(ranked.size(), ds.num_items() - seen.size());
    for (auto i : ranked) EXPECT_FALSE(std::binary_search(seen.begin(), seen.end(), i));
  }
  const std::vector<std::size_t> ks{10};
  EvalOptions opts;
  opts.per_user = true;
  const auto r = evaluate_all(nodes, ds, ks, opts);
  for (const auto& pu : r.per_user) {
    for (auto rank : pu.ranks) EXPECT_LE(rank, ds.num_items() - ds.train().user_items(pu.user).size());
  }
}

TEST(EvaluateAll, CosineScoringIgnoresRowScale) {
  std::mt19937_64 rng(5);
  const auto ds = random_dataset(50, 30, 4, rng);
  const Matrix nodes = testing::random_matrix(80, 6, rng);
  Matrix scaled = nodes;
  std::uniform_real_distribution<double> s(0.1, 10.0);
  for (Eigen::Index r = 0; r < scaled.rows(); ++r) scaled.row(r) *= s(rng);
  const std::vector<std::size_t> ks{3, 10};
  const auto a = evaluate_all(nodes, ds, ks);
  const auto b = evaluate_all(scaled, ds, ks);
  EXPECT_EQ(a.hr, b.hr);
  EXPECT_EQ(a.ndcg, b.ndcg);
  EvalOptions dot;
  dot.cosine = false;
  EXPECT_FALSE(evaluate_all(nodes, ds, ks, dot).cosine);
}

TEST(EvaluateAll, NoEvaluableUserRaises) {
  const InteractionSet ds({"u0"}, {"i0"}, 1, {{0, 0, 0, 0}}, {});
  const std::vector<std::size_t> ks{10};
  EXPECT_THROW(evaluate_all(Matrix::Ones(2, 2), ds, ks), DataError);
}

TEST(EvaluateAll, ReportFormats) {
  std::mt19937_64 rng(6);
  const auto ds = random_dataset(20, 15, 3, rng);
  const std::vector<std::size_t> ks{5, 10};
  const auto r = evaluate_all(testing::random_matrix(35, 4, rng), ds, ks);
  const auto j = r.to_json();
  EXPECT_EQ(j["metrics"]["HR@5"].get<double>(), r.hr_at(5));
  EXPECT_EQ(j["metrics"]["NDCG@10"].get<double>(), r.ndcg_at(10));
  EXPECT_EQ(j["scoring"], "cosine");
  EXPECT_EQ(r.to_table().substr(0, r.to_table().find('\n')), "k\thr\tndcg");
  std::size_t lines = 0;
  for (char c : r.to_lines()) lines += c == '\n';
  EXPECT_EQ(lines, 3u);
}

TEST(EvaluateAll, AutomotiveScaleRunsQuickly) {
  std::mt19937_64 rng(7);
  const auto ds = random_dataset(1187, 2833, 8, rng);
  const Matrix nodes = testing::random_matrix(1187 + 2833, 64, rng);
  const std::vector<std::size_t> ks{10, 20};
  const auto start = std::chrono::steady_clock::now();
  const auto r = evaluate_all(nodes, ds, ks);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(r.num_users, ds.test().size());
  EXPECT_LT(secs, 60.0);
}

}  // namespace
}  // namespace symcere
