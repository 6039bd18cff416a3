#include "support.hpp"

#include "symcere/encoder.hpp"

#include <gtest/gtest.h>

namespace symcere {
namespace {

Matrix dense_lightgcn(const Matrix& a, const Matrix& e0, std::size_t k) {
  Matrix out = e0 / static_cast<double>(k + 1);
  Matrix layer = e0;
  for (std::size_t l = 1; l <= k; ++l) {
    layer = a * layer;
    out += layer / static_cast<double>(k + 1);
  }
  return out;
}

GraphParams lightgcn_params(Matrix base, std::size_t k) {
  GraphParams p;
  p.base = std::move(base);
  p.num_layers = k;
  p.layer_weights = GraphParams::uniform_layer_weights(k);
  return p;
}

NgcfWeights random_ngcf(std::size_t k, Eigen::Index d, std::mt19937_64& rng) {
  NgcfWeights w;
  for (std::size_t l = 0; l < k; ++l) {
    w.layers.push_back({testing::random_matrix(d, d, rng, 0.5), testing::random_matrix(d, d, rng, 0.5),
                        testing::random_matrix(1, d, rng, 0.1)});
  }
  w.output = testing::random_matrix(static_cast<Eigen::Index>((k + 1)) * d, d, rng, 0.5);
  return w;
}

TEST(LightGcn, ZeroLayersIsIdentity) {
  std::mt19937_64 rng(1);
  const auto adj = NormalizedAdjacency::from_pairs(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  const Matrix e0 = testing::random_matrix(4, 3, rng);
  EXPECT_EQ(lightgcn_forward(lightgcn_params(e0, 0), adj), e0);
}

TEST(LightGcn, OnePairOneLayer) {
  const auto adj = NormalizedAdjacency::from_pairs(1, 1, {{0, 0}});
  Matrix e0(2, 2);
  e0 << 1, 0, 0, 1;
  const Matrix out = lightgcn_forward(lightgcn_params(e0, 1), adj);
  Matrix expected(2, 2);
  expected << 0.5, 0.5, 0.5, 0.5;
  EXPECT_TRUE(out.isApprox(expected, 1e-15));
  EXPECT_TRUE(out.isApprox(dense_lightgcn(testing::dense_adjacency(1, 1, {{0, 0}}), e0, 1), 1e-15));
}

TEST(LightGcn, MatchesDenseOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nu = 1 + rng() % 25;
    const std::size_t ni = 1 + rng() % 25;
    const std::size_t k = rng() % 5;
    const auto pairs = testing::random_pairs(nu, ni, 1 + rng() % 80, rng);
    const auto adj = NormalizedAdjacency::from_pairs(nu, ni, pairs);
    const Matrix e0 = testing::random_matrix(static_cast<Eigen::Index>(nu + ni), 4, rng);
    const Matrix sparse = lightgcn_forward(lightgcn_params(e0, k), adj);
    const Matrix dense = dense_lightgcn(testing::dense_adjacency(nu, ni, pairs), e0, k);
    EXPECT_LT((sparse - dense).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LightGcn, LinearInBaseEmbeddings) {
  std::mt19937_64 rng(3);
  const auto pairs = testing::random_pairs(10, 12, 40, rng);
  const auto adj = NormalizedAdjacency::from_pairs(10, 12, pairs);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = testing::random_matrix(22, 5, rng);
    const Matrix y = testing::random_matrix(22, 5, rng);
    const double a = std::normal_distribution<double>()(rng);
    const double b = std::normal_distribution<double>()(rng);
    const Matrix lhs = lightgcn_forward(lightgcn_params(a * x + b * y, 3), adj);
    const Matrix rhs = a * lightgcn_forward(lightgcn_params(x, 3), adj) + b * lightgcn_forward(lightgcn_params(y, 3), adj);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(LightGcn, BackwardIsAdjointOfForward) {
  std::mt19937_64 rng(4);
  const auto adj = NormalizedAdjacency::from_pairs(6, 7, testing::random_pairs(6, 7, 20, rng));
  const auto params = lightgcn_params(testing::random_matrix(13, 3, rng), 2);
  const Matrix g = testing::random_matrix(13, 3, rng);
  const auto f = [&](const Matrix& e) { return (lightgcn_forward(lightgcn_params(e, 2), adj).cwiseProduct(g)).sum(); };
  const Matrix numeric = testing::numeric_gradient(f, params.base);
  EXPECT_LT(testing::gradient_error(lightgcn_backward(params, adj, g), numeric), 1e-7);
}

TEST(LightGcn, DimensionMismatchThrows) {
  const auto adj = NormalizedAdjacency::from_pairs(1, 1, {{0, 0}});
  EXPECT_THROW(lightgcn_forward(lightgcn_params(Matrix::Zero(3, 2), 1), adj), std::invalid_argument);
}

TEST(Ngcf, ZeroWeightsGiveZeroOutput) {
  std::mt19937_64 rng(5);
  const auto adj = NormalizedAdjacency::from_pairs(3, 3, testing::random_pairs(3, 3, 6, rng));
  GraphParams p = lightgcn_params(testing::random_matrix(6, 4, rng), 2);
  NgcfWeights w;
  for (int l = 0; l < 2; ++l) w.layers.push_back({Matrix::Zero(4, 4), Matrix::Zero(4, 4), Matrix::Zero(1, 4)});
  w.output = Matrix::Zero(12, 4);
  p.ngcf = w;
  EXPECT_TRUE(ngcf_forward(p, adj).isZero(0.0));
}

TEST(Ngcf, IsolatedNodeWithIdentitySelfWeight) {
  // Item 1 has no edges, so each layer reduces to LeakyReLU(e W_self) = LeakyReLU(e).
  const auto adj = NormalizedAdjacency::from_pairs(1, 2, {{0, 0}});
  GraphParams p = lightgcn_params(Matrix::Zero(3, 2), 2);
  p.base.row(2) << 0.8, -0.5;
  NgcfWeights w;
  w.leaky_slope = 0.2;
  for (int l = 0; l < 2; ++l) w.layers.push_back({Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Zero(1, 2)});
  w.output = Matrix::Zero(6, 2);
  w.output.block(4, 0, 2, 2) = Matrix::Identity(2, 2);  // read out e2 only
  p.ngcf = w;
  const Matrix out = ngcf_forward(p, adj);
  EXPECT_NEAR(out(2, 0), 0.8, 1e-15);
  EXPECT_NEAR(out(2, 1), -0.5 * 0.2 * 0.2, 1e-15);
}

TEST(Ngcf, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t nu = 2 + rng() % 4;
    const std::size_t ni = 2 + rng() % 4;
    const auto adj = NormalizedAdjacency::from_pairs(nu, ni, testing::random_pairs(nu, ni, 8, rng));
    const Eigen::Index d = 3;
    GraphParams p = lightgcn_params(testing::random_matrix(static_cast<Eigen::Index>(nu + ni), d, rng), 2);
    p.ngcf = random_ngcf(2, d, rng);
    const Matrix g = testing::random_matrix(static_cast<Eigen::Index>(nu + ni), d, rng);
    NgcfCache cache;
    ngcf_forward(p, adj, &cache);
    const NgcfGrads grads = ngcf_backward(p, adj, cache, g);
    const auto loss = [&](const GraphParams& q) { return ngcf_forward(q, adj).cwiseProduct(g).sum(); };

    EXPECT_LT(testing::gradient_error(grads.base, testing::numeric_gradient([&](const Matrix& x) {
                                        GraphParams q = p;
                                        q.base = x;
                                        return loss(q);
                                      }, p.base)),
              1e-5);
    EXPECT_LT(testing::gradient_error(grads.layers[0].w_self, testing::numeric_gradient([&](const Matrix& x) {
                                        GraphParams q = p;
                                        q.ngcf->layers[0].w_self = x;
                                        return loss(q);
                                      }, p.ngcf->layers[0].w_self)),
              1e-5);
    EXPECT_LT(testing::gradient_error(grads.layers[1].w_inter, testing::numeric_gradient([&](const Matrix& x) {
                                        GraphParams q = p;
                                        q.ngcf->layers[1].w_inter = x;
                                        return loss(q);
                                      }, p.ngcf->layers[1].w_inter)),
              1e-5);
    EXPECT_LT(testing::gradient_error(grads.layers[1].bias, testing::numeric_gradient([&](const Matrix& x) {
                                        GraphParams q = p;
                                        q.ngcf->layers[1].bias = x;
                                        return loss(q);
                                      }, p.ngcf->layers[1].bias)),
              1e-5);
    EXPECT_LT(testing::gradient_error(grads.output, testing::numeric_gradient([&](const Matrix& x) {
                                        GraphParams q = p;
                                        q.ngcf->output = x;
                                        return loss(q);
                                      }, p.ngcf->output)),
              1e-5);
  }
}

TEST(Ngcf, MissingWeightsThrow) {
  const auto adj = NormalizedAdjacency::from_pairs(1, 1, {{0, 0}});
  EXPECT_THROW(ngcf_forward(lightgcn_params(Matrix::Zero(2, 2), 1), adj), std::invalid_argument);
}

TEST(Ngcf, ZeroLayersHasNoNeighbourMixing) {
  std::mt19937_64 rng(7);
  const auto adj = NormalizedAdjacency::from_pairs(2, 2, {{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  GraphParams p = lightgcn_params(testing::random_matrix(4, 3, rng), 0);
  p.ngcf = random_ngcf(0, 3, rng);
  EXPECT_TRUE(ngcf_forward(p, adj).isApprox(p.base * p.ngcf->output, 1e-14));
}

TEST(InteractionRepr, Examples) {
  Matrix nodes(2, 2);
  nodes << 2, 0, 0, 2;
  EXPECT_EQ(interaction_repr(nodes, 1, 0, 0), (RowVector(2) << 1, 1).finished());
  Matrix same(2, 2);
  same << 3, -1, 3, -1;
  EXPECT_EQ(interaction_repr(same, 1, 0, 0), same.row(0));
}

TEST(InteractionRepr, BatchedEqualsLoopAndIsSymmetric) {
  std::mt19937_64 rng(8);
  const Matrix nodes = testing::random_matrix(30, 5, rng);
  std::vector<UserItem> pairs;
  for (int i = 0; i < 100; ++i) pairs.push_back({static_cast<Index>(rng() % 10), static_cast<Index>(rng() % 20)});
  const Matrix batched = interaction_repr(nodes, 10, pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(batched.row(static_cast<Eigen::Index>(i)), interaction_repr(nodes, 10, pairs[i].user, pairs[i].item));
    const RowVector swapped = (nodes.row(10 + pairs[i].item) + nodes.row(pairs[i].user)) / 2.0;
    EXPECT_EQ(batched.row(static_cast<Eigen::Index>(i)), swapped);
  }
  const Matrix g = testing::random_matrix(100, 5, rng);
  Matrix grad = Matrix::Zero(30, 5);
  interaction_repr_backward(10, pairs, g, grad);
  const Matrix numeric = testing::numeric_gradient(
      [&](const Matrix& x) { return interaction_repr(x, 10, pairs).cwiseProduct(g).sum(); }, nodes);
  EXPECT_LT(testing::gradient_error(grad, numeric), 1e-8);
}

}  // namespace
}  // namespace symcere
