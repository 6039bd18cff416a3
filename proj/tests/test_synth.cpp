#include "support.hpp"

#include "symcere/diagnostics.hpp"
#include "symcere/driver.hpp"
#include "symcere/synth.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace symcere {
namespace {

SynthConfig small() {
  SynthConfig c;
  c.num_users = 200;
  c.num_items = 300;
  c.num_clusters = 5;
  c.interactions_per_user = 6;
  c.text_dim = 16;
  return c;
}

TEST(Synth, AxesAreOrthonormal) {
  const auto s = generate_synthetic_dataset(small());
  Matrix all(s.truth.cluster_axes.rows() + 1, s.truth.cluster_axes.cols());
  all << s.truth.cluster_axes, s.truth.subjective_axis;
  const Matrix gram = all * all.transpose();
  EXPECT_LT((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Synth, TextRowsAreUnitAndCarryPlantedSubjectiveWeight) {
  const auto s = generate_synthetic_dataset(small());
  const Matrix e = s.record_embeddings.cast<double>();
  for (Eigen::Index r = 0; r < e.rows(); ++r) {
    EXPECT_NEAR(e.row(r).norm(), 1.0, 1e-5);
    const double along = e.row(r).dot(s.truth.subjective_axis);
    EXPECT_NEAR(along, 0.6 * s.record_sentiment[static_cast<std::size_t>(r)], 1e-5);
  }
}

TEST(Synth, SubjectiveEnergyUnderIdentityProjection) {
  const auto s = generate_synthetic_dataset(small());
  const Matrix text = s.text.cast<double>();
  const auto rows = embedding_row_items(s.dataset.train());
  const auto e = anchoring_energy(text, rows, s.truth, Matrix::Identity(16, 16));
  EXPECT_NEAR(e.subjective, 0.36, 0.02);
  EXPECT_NEAR(e.objective + e.subjective + e.residual, 1.0, 1e-6);
}

TEST(Synth, NoiseFreeTextIsExactlyTheClusterAxis) {
  SynthConfig c = small();
  c.noise_scale = 0.0;
  c.subjective_weight = 0.0;
  const auto s = generate_synthetic_dataset(c);
  const auto& ds = s.dataset;
  for (std::size_t r = 0; r < ds.train().size(); ++r) {
    const auto& row = ds.train().row(r);
    const RowVector axis = s.truth.cluster_axes.row(s.truth.item_cluster[row.item]);
    EXPECT_LT((s.text.row(static_cast<Eigen::Index>(row.embedding_row)).cast<double>() - axis).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Synth, ZeroExponentIsUniformPopularity) {
  SynthConfig c = small();
  c.popularity_exponent = 0.0;
  const auto s = generate_synthetic_dataset(c);
  const double first = s.truth.item_popularity.front();
  for (double p : s.truth.item_popularity) EXPECT_NEAR(p, first, 1e-15);
}

TEST(Synth, PopularityRatioOfTopTwoItems) {
  SynthConfig c;
  c.num_users = 100000;
  c.num_items = 1500;
  c.num_clusters = 1;
  c.interactions_per_user = 1;
  c.text_dim = 4;
  const auto s = generate_synthetic_dataset(c);
  const auto& pop = s.truth.item_popularity;
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pop[a] > pop[b]; });
  EXPECT_NEAR(pop[order[0]] / pop[order[1]], 2.0, 1e-9);
  std::map<std::string, double> counts;
  for (const auto& r : s.records) counts[r.item_key] += 1.0;
  const double top = counts[s.dataset.item_keys()[order[0]]];
  const double second = counts[s.dataset.item_keys()[order[1]]];
  EXPECT_NEAR(top / second, 2.0, 0.1);
}

TEST(Synth, UsersPreferTheirCluster) {
  const auto s = generate_synthetic_dataset(small());
  std::map<std::string, std::size_t> user_index;
  for (std::size_t u = 0; u < s.dataset.user_keys().size(); ++u) user_index[s.dataset.user_keys()[u]] = u;
  std::map<std::string, std::size_t> item_index;
  for (std::size_t i = 0; i < s.dataset.item_keys().size(); ++i) item_index[s.dataset.item_keys()[i]] = i;
  double hits = 0.0;
  for (const auto& r : s.records) {
    hits += s.truth.item_cluster[item_index[r.item_key]] == s.user_cluster[user_index[r.user_key]] ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(s.records.size());
  EXPECT_NEAR(hits / n, 0.8, 4 * std::sqrt(0.16 / n));
}

TEST(Synth, EachUserHasDistinctItems) {
  const auto s = generate_synthetic_dataset(small());
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& r : s.records) EXPECT_TRUE(seen[r.user_key].insert(r.item_key).second);
  EXPECT_EQ(seen.size(), 200u);
}

TEST(Synth, DeterministicInSeed) {
  const auto a = generate_synthetic_dataset(small());
  const auto b = generate_synthetic_dataset(small());
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.record_embeddings, b.record_embeddings);
  SynthConfig other = small();
  other.seed = 2;
  EXPECT_NE(generate_synthetic_dataset(other).records, a.records);
}

TEST(Synth, InfeasibleConfigsRejected) {
  SynthConfig c = small();
  c.interactions_per_user = 301;
  try {
    generate_synthetic_dataset(c);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("infeasible"), std::string::npos);
  }
  c = small();
  c.text_dim = 5;
  EXPECT_THROW(generate_synthetic_dataset(c), UsageError);
  c = small();
  c.subjective_weight = 1.5;
  EXPECT_THROW(generate_synthetic_dataset(c), UsageError);
}

TEST(Synth, GroundTruthRoundTrip) {
  testing::TempDir dir;
  const auto s = generate_synthetic_dataset(small());
  write_ground_truth(dir / "gt.bin", s.truth);
  const auto back = read_ground_truth(dir / "gt.bin");
  EXPECT_EQ(back.item_cluster, s.truth.item_cluster);
  EXPECT_EQ(back.item_popularity, s.truth.item_popularity);
  EXPECT_EQ(back.cluster_axes, s.truth.cluster_axes);
  EXPECT_EQ(back.subjective_axis, s.truth.subjective_axis);

  std::ofstream(dir / "bad.bin", std::ios::binary) << "XXXX";
  EXPECT_THROW(read_ground_truth(dir / "bad.bin"), DataError);
  const auto size = std::filesystem::file_size(dir / "gt.bin");
  std::filesystem::resize_file(dir / "gt.bin", size - 3);
  EXPECT_THROW(read_ground_truth(dir / "gt.bin"), DataError);
}

TEST(Synth, WrittenDatasetLoadsBack) {
  testing::TempDir dir;
  const auto c = small();
  const auto s = generate_synthetic_dataset(c);
  write_synthetic_dataset(dir.path(), s, c);
  const auto data = load_prepared(dir.path());
  EXPECT_EQ(data.dataset.train().size(), s.dataset.train().size());
  EXPECT_EQ(data.dataset.test().size(), s.dataset.test().size());
  ASSERT_TRUE(data.embeddings.has_value());
  EXPECT_EQ(*data.embeddings, s.text);
  EXPECT_TRUE(std::filesystem::exists(dir / "ground_truth.bin"));
}

}  // namespace
}  // namespace symcere
