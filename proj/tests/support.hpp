#pragma once

#include "symcere/dataio.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace symcere::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("symcere_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline Matrix random_unit_rows(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Matrix m = random_matrix(rows, cols, rng);
  m.rowwise().normalize();
  return m;
}

/// Dense D^-1/2 A D^-1/2 over distinct user-item pairs.
inline Matrix dense_adjacency(std::size_t nu, std::size_t ni, const std::vector<NormalizedAdjacency::Edge>& pairs) {
  const auto n = static_cast<Eigen::Index>(nu + ni);
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : pairs) {
    a(e.user, static_cast<Eigen::Index>(nu + e.item)) = 1.0;
    a(static_cast<Eigen::Index>(nu + e.item), e.user) = 1.0;
  }
  const Vector deg = a.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) != 0.0) a(i, j) /= std::sqrt(deg(i) * deg(j));
    }
  }
  return a;
}

inline std::vector<NormalizedAdjacency::Edge> random_pairs(std::size_t nu, std::size_t ni, std::size_t count,
                                                           std::mt19937_64& rng) {
  std::vector<NormalizedAdjacency::Edge> pairs;
  for (std::size_t k = 0; k < count; ++k) {
    pairs.push_back({static_cast<Index>(rng() % nu), static_cast<Index>(rng() % ni)});
  }
  return pairs;
}

/// Central-difference gradient of f at x.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  Matrix p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = p.data()[i];
    p.data()[i] = orig + h;
    const double up = f(p);
    p.data()[i] = orig - h;
    const double down = f(p);
    p.data()[i] = orig;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - n|| / max(||a||, ||n||), or the absolute difference when both are tiny.
inline double gradient_error(const Matrix& analytic, const Matrix& numeric) {
  const double diff = (analytic - numeric).norm();
  const double scale = std::max(analytic.norm(), numeric.norm());
  return scale > 1e-8 ? diff / scale : diff;
}

/// Train partition from (user, item) pairs in order.
inline TrainPartition partition_from(std::size_t nu, std::size_t ni, const std::vector<std::pair<Index, Index>>& rows) {
  std::vector<TrainInteraction> train;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    train.push_back({rows[r].first, rows[r].second, static_cast<std::int64_t>(r), r});
  }
  return TrainPartition(nu, ni, ni, std::move(train));
}

}  // namespace symcere::testing
