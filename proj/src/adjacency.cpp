#include "symcere/dataio.hpp"

#include <algorithm>
#include <cmath>

namespace symcere {

NormalizedAdjacency NormalizedAdjacency::from_pairs(std::size_t num_users, std::size_t num_items,
                                                    std::vector<Edge> pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const Edge& a, const Edge& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  NormalizedAdjacency adj;
  adj.num_users_ = num_users;
  adj.num_items_ = num_items;
  const std::size_t n = num_users + num_items;

  std::vector<std::size_t> degree(n, 0);
  for (const auto& e : pairs) {
    if (e.user >= num_users || e.item >= num_items) {
      throw std::out_of_range("NormalizedAdjacency: edge endpoint out of range");
    }
    ++degree[e.user];
    ++degree[num_users + e.item];
  }

  adj.row_ptr_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) adj.row_ptr_[v + 1] = adj.row_ptr_[v] + degree[v];
  adj.cols_.resize(adj.row_ptr_[n]);
  adj.weights_.resize(adj.row_ptr_[n]);

  // Users come first and pairs are sorted by (user, item), so filling in
  // edge order leaves every row's columns ascending.
  std::vector<std::size_t> cursor(adj.row_ptr_.begin(), adj.row_ptr_.end() - 1);
  for (const auto& e : pairs) {
    const std::size_t a = e.user;
    const std::size_t b = num_users + e.item;
    const double w = 1.0 / std::sqrt(static_cast<double>(degree[a]) * static_cast<double>(degree[b]));
    adj.cols_[cursor[a]] = static_cast<Index>(b);
    adj.weights_[cursor[a]++] = w;
    adj.cols_[cursor[b]] = static_cast<Index>(a);
    adj.weights_[cursor[b]++] = w;
  }
  adj.edges_ = std::move(pairs);
  return adj;
}

std::span<const Index> NormalizedAdjacency::row_columns(std::size_t node) const {
  return {cols_.data() + row_ptr_[node], row_ptr_[node + 1] - row_ptr_[node]};
}

std::span<const double> NormalizedAdjacency::row_weights(std::size_t node) const {
  return {weights_.data() + row_ptr_[node], row_ptr_[node + 1] - row_ptr_[node]};
}

double NormalizedAdjacency::weight(std::size_t a, std::size_t b) const {
  const auto cols = row_columns(a);
  const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<Index>(b));
  if (it == cols.end() || *it != b) return 0.0;
  return row_weights(a)[static_cast<std::size_t>(it - cols.begin())];
}

void NormalizedAdjacency::multiply(const Matrix& in, Matrix& out) const {
  if (static_cast<std::size_t>(in.rows()) != size()) {
    throw std::invalid_argument("NormalizedAdjacency::multiply: row count mismatch");
  }
  out.setZero(in.rows(), in.cols());
  for (std::size_t v = 0; v < size(); ++v) {
    auto dst = out.row(static_cast<Eigen::Index>(v));
    for (std::size_t p = row_ptr_[v]; p < row_ptr_[v + 1]; ++p) {
      dst.noalias() += weights_[p] * in.row(cols_[p]);
    }
  }
}

Matrix NormalizedAdjacency::multiply(const Matrix& in) const {
  Matrix out;
  multiply(in, out);
  return out;
}

NormalizedAdjacency build_adjacency(const TrainPartition& train) {
  if (train.size() == 0) throw DataError("build_adjacency: empty train partition");
  std::vector<NormalizedAdjacency::Edge> pairs;
  pairs.reserve(train.size());
  for (const auto& r : train.rows()) pairs.push_back({r.user, r.item});
  return NormalizedAdjacency::from_pairs(train.num_users(), train.num_items(), std::move(pairs));
}

}  // namespace symcere
