#include "symcere/diagnostics.hpp"

#include "symcere/objective.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace symcere {

namespace {

// Pairs (i, j), i < j, with first index below i.
std::uint64_t pair_offset(std::uint64_t n, std::uint64_t i) { return i * n - i * (i + 1) / 2; }

std::pair<std::size_t, std::size_t> decode_pair(std::uint64_t n, std::uint64_t t) {
  std::uint64_t lo = 0;
  std::uint64_t hi = n - 1;
  while (hi - lo > 1) {
    const auto mid = (lo + hi) / 2;
    if (pair_offset(n, mid) <= t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const auto i = pair_offset(n, hi) <= t ? hi : lo;
  return {static_cast<std::size_t>(i), static_cast<std::size_t>(t - pair_offset(n, i) + i + 1)};
}

std::vector<std::uint64_t> sample_pair_indices(std::uint64_t total, std::uint64_t count, std::uint64_t seed) {
  std::vector<std::uint64_t> out;
  if (count >= total) {
    out.resize(total);
    for (std::uint64_t t = 0; t < total; ++t) out[t] = t;
    return out;
  }
  // Floyd's algorithm.
  std::mt19937_64 rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count * 2);
  for (std::uint64_t j = total - count; j < total; ++j) {
    const auto t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
    chosen.insert(chosen.contains(t) ? j : t);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::size_t default_num_pairs(std::size_t num_rows) {
  const std::uint64_t all = static_cast<std::uint64_t>(num_rows) * (num_rows - (num_rows > 0 ? 1 : 0)) / 2;
  return static_cast<std::size_t>(std::min<std::uint64_t>(100000, all));
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

UniformityStats cosine_similarity_stats(const Matrix& rows, std::size_t num_pairs, std::uint64_t seed) {
  if (rows.rows() < 2) throw std::invalid_argument("cosine_similarity_stats: need at least 2 rows");
  if (num_pairs < 1) throw std::invalid_argument("cosine_similarity_stats: num_pairs must be >= 1");
  const Matrix unit = normalize_rows(rows, "embedding").unit;
  const auto n = static_cast<std::uint64_t>(rows.rows());
  const auto indices = sample_pair_indices(n * (n - 1) / 2, num_pairs, seed);

  std::vector<double> sims;
  sims.reserve(indices.size());
  for (auto t : indices) {
    const auto [i, j] = decode_pair(n, t);
    const double c = unit.row(static_cast<Eigen::Index>(i)).dot(unit.row(static_cast<Eigen::Index>(j)));
    sims.push_back(std::clamp(c, -1.0, 1.0));
  }

  UniformityStats s;
  s.sample_size = sims.size();
  s.seed = seed;
  double sum = 0.0;
  for (double v : sims) sum += v;
  s.mean = sum / static_cast<double>(sims.size());
  double ss = 0.0;
  for (double v : sims) ss += (v - s.mean) * (v - s.mean);
  s.std_dev = sims.size() > 1 ? std::sqrt(ss / static_cast<double>(sims.size() - 1)) : 0.0;
  std::sort(sims.begin(), sims.end());
  s.min = sims.front();
  s.max = sims.back();
  s.p25 = quantile_sorted(sims, 0.25);
  s.p75 = quantile_sorted(sims, 0.75);
  return s;
}

Histogram make_histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("make_histogram: bins must be >= 1");
  if (!(hi > lo)) throw std::invalid_argument("make_histogram: empty range");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / width);
    h.counts[std::min(b, bins - 1)] += 1;
  }
  return h;
}

DimensionVariance dimension_variance(const Matrix& rows, std::size_t bins) {
  if (rows.rows() < 2) throw std::invalid_argument("dimension_variance: need at least 2 rows");
  DimensionVariance out;
  const RowVector mean = rows.colwise().mean();
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double ss = (rows.col(c).array() - mean(c)).square().sum();
    out.variance.push_back(ss / static_cast<double>(rows.rows() - 1));
  }
  double top = out.variance.empty() ? 0.0 : *std::max_element(out.variance.begin(), out.variance.end());
  if (!(top > 0.0)) top = 1.0;
  out.histogram = make_histogram(out.variance, bins, 0.0, top);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("pearson: need at least 3 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw NumericError("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

PopularityNorm popularity_norm_correlation(const Matrix& item_rows, std::span<const std::size_t> frequencies) {
  if (static_cast<std::size_t>(item_rows.rows()) != frequencies.size()) {
    throw std::invalid_argument("popularity_norm_correlation: one frequency per item row required");
  }
  PopularityNorm out;
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    out.log_frequency.push_back(std::log1p(static_cast<double>(frequencies[i])));
    out.norm.push_back(item_rows.row(static_cast<Eigen::Index>(i)).norm());
  }
  try {
    out.pearson_r = pearson(out.log_frequency, out.norm);
  } catch (const NumericError&) {
    throw NumericError("popularity_norm_correlation: zero variance in frequencies or norms");
  }
  return out;
}

AnchoringEnergies anchoring_energy(const Matrix& projected_text, std::span<const Index> row_items,
                                   const SynthGroundTruth& truth, const Matrix& projection) {
  if (static_cast<std::size_t>(projected_text.rows()) != row_items.size()) {
    throw std::invalid_argument("anchoring_energy: one item per text row required");
  }
  if (truth.cluster_axes.rows() == 0 || truth.subjective_axis.size() == 0) {
    throw DataError("anchoring_energy: ground truth unavailable");
  }
  if (projection.rows() != truth.cluster_axes.cols() || projection.cols() != projected_text.cols()) {
    throw std::invalid_argument("anchoring_energy: projection shape does not match axes and rows");
  }
  const RowVector subj = l2_normalize(truth.subjective_axis * projection);
  Matrix clusters = truth.cluster_axes * projection;
  for (Eigen::Index c = 0; c < clusters.rows(); ++c) {
    RowVector a = clusters.row(c);
    a -= a.dot(subj) * subj;
    clusters.row(c) = l2_normalize(a);
  }

  const Matrix unit = normalize_rows(projected_text, "projected text").unit;
  AnchoringEnergies e;
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    const auto item = row_items[static_cast<std::size_t>(r)];
    if (item >= truth.item_cluster.size()) throw std::invalid_argument("anchoring_energy: item out of range");
    const double o = unit.row(r).dot(clusters.row(truth.item_cluster[item]));
    const double s = unit.row(r).dot(subj);
    e.objective += o * o;
    e.subjective += s * s;
  }
  const auto n = static_cast<double>(unit.rows());
  e.objective /= n;
  e.subjective /= n;
  e.residual = std::max(0.0, 1.0 - e.objective - e.subjective);
  return e;
}

RankSumTest rank_sum_test(std::span<const double> first, std::span<const double> second) {
  if (first.empty() || second.empty()) throw std::invalid_argument("rank_sum_test: empty sample");
  struct Entry {
    double value;
    bool first;
  };
  std::vector<Entry> all;
  for (double v : first) all.push_back({v, true});
  for (double v : second) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });

  const auto n1 = static_cast<double>(first.size());
  const auto n2 = static_cast<double>(second.size());
  const double n = n1 + n2;
  double rank_sum = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].value == all[i].value) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].first) rank_sum += avg_rank;
    }
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  RankSumTest out;
  out.u = rank_sum - n1 * (n1 + 1.0) / 2.0;
  const double mean = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    out.z = 0.0;
    out.p_greater = out.u > mean ? 0.0 : 1.0;
    return out;
  }
  const double diff = out.u - mean;
  const double corrected = diff > 0.5 ? diff - 0.5 : (diff < -0.5 ? diff + 0.5 : 0.0);
  out.z = corrected / std::sqrt(var);
  out.p_greater = 0.5 * std::erfc(out.z / std::sqrt(2.0));
  return out;
}

std::string histogram_tsv(const Histogram& h) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_lo\tbin_hi\tcount\n";
  const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << h.lo + width * static_cast<double>(b) << '\t' << h.lo + width * static_cast<double>(b + 1) << '\t'
        << h.counts[b] << '\n';
  }
  return out.str();
}

std::string columns_tsv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw std::invalid_argument("columns_tsv: header/column count mismatch");
  std::ostringstream out;
  out.precision(17);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "\t" : "") << header[c];
  out << '\n';
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (const auto& col : columns) {
    if (col.size() != n) throw std::invalid_argument("columns_tsv: ragged columns");
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "\t" : "") << columns[c][r];
    out << '\n';
  }
  return out.str();
}

}  // namespace symcere
