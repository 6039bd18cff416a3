#pragma once

#include "symcere/common.hpp"
#include "symcere/synth.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace symcere {

struct UniformityStats {
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation (n - 1)
  double min = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double max = 0.0;
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
};

/// min(100000, n(n-1)/2).
std::size_t default_num_pairs(std::size_t num_rows);

/// Pairwise cosine statistics over `num_pairs` distinct unordered row pairs
/// drawn without replacement. Asking for at least every pair uses all of them.
/// Quantiles interpolate linearly between order statistics.
UniformityStats cosine_similarity_stats(const Matrix& rows, std::size_t num_pairs, std::uint64_t seed);

/// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;  // equal-width bins; values at hi land in the last bin
};

Histogram make_histogram(std::span<const double> values, std::size_t bins, double lo, double hi);

struct DimensionVariance {
  std::vector<double> variance;  // unbiased, per column
  Histogram histogram;           // over [0, max variance]
};

DimensionVariance dimension_variance(const Matrix& rows, std::size_t bins = 50);

struct PopularityNorm {
  double pearson_r = 0.0;
  std::vector<double> log_frequency;  // log(1 + freq), per item
  std::vector<double> norm;           // L2 norm, per item
};

/// Pearson r between log(1 + frequency) and the L2 norm of each item row.
/// Throws NumericError if either series has zero variance.
PopularityNorm popularity_norm_correlation(const Matrix& item_rows, std::span<const std::size_t> frequencies);

double pearson(std::span<const double> x, std::span<const double> y);

struct AnchoringEnergies {
  double objective = 0.0;
  double subjective = 0.0;
  double residual = 0.0;
};

/// Mean squared projections of projected text rows onto their item's planted
/// cluster axis and onto the planted subjective axis, both mapped into graph
/// space through `projection` (text_dim x d). The subjective image is
/// normalised first and each cluster image is orthonormalised against it, so
/// per row objective + subjective + residual = 1.
AnchoringEnergies anchoring_energy(const Matrix& projected_text, std::span<const Index> row_items,
                                   const SynthGroundTruth& truth, const Matrix& projection);

struct RankSumTest {
  double u = 0.0;        // Mann-Whitney U of the first sample
  double z = 0.0;        // normal approximation with tie correction
  double p_greater = 1.0;  // one-sided p for "first sample tends larger"
};

RankSumTest rank_sum_test(std::span<const double> first, std::span<const double> second);

/// Plot-ready tab-separated text.
std::string histogram_tsv(const Histogram& h);
std::string columns_tsv(const std::vector<std::string>& header,
                        const std::vector<std::vector<double>>& columns);

}  // namespace symcere
