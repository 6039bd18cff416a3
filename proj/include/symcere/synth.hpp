#pragma once

#include "symcere/common.hpp"
#include "symcere/dataio.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace symcere {

/// Planted-structure generator settings. Every constant is explicit here.
struct SynthConfig {
  std::size_t num_users = 1000;
  std::size_t num_items = 1500;
  std::size_t num_clusters = 20;
  std::size_t interactions_per_user = 10;
  double popularity_exponent = 1.0;
  std::size_t text_dim = 64;
  double subjective_weight = 0.6;  // lambda_subj of every text vector
  double noise_scale = 0.05;
  double in_cluster_prob = 0.8;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthGroundTruth {
  std::vector<Index> item_cluster;   // per dataset item index
  Matrix cluster_axes;               // num_clusters x text_dim, orthonormal rows
  RowVector subjective_axis;         // unit, orthogonal to every cluster axis
  std::vector<double> item_popularity;  // per dataset item index, sums to 1
};

struct SynthDataset {
  std::vector<InteractionRecord> records;  // generation order, users contiguous
  FloatMatrix record_embeddings;           // one row per record
  std::vector<int> record_sentiment;       // +1 / -1 per record
  std::vector<Index> user_cluster;         // per dataset user index
  InteractionSet dataset;
  FloatMatrix text;                        // train rows, row r = embedding_row r
  SynthGroundTruth truth;
  double train_fraction = 0.8;
};

/// Users prefer one cluster; each interaction picks the preferred cluster with
/// probability in_cluster_prob (else a uniformly chosen other cluster), then an
/// unseen item inside it with probability proportional to rank^-exponent.
/// Text = sqrt(1 - l^2) * unit(cluster axis + noise) + l * s * subjective axis
/// with s a fair sign. Deterministic in `config.seed`.
SynthDataset generate_synthetic_dataset(const SynthConfig& config, double train_fraction = 0.8);

// Ground-truth file: "SYMG", u32 version, u64 num_items, u32 num_clusters,
// u32 text_dim, u32[num_items] clusters, f64[num_items] popularity,
// f64[num_clusters * text_dim] axes, f64[text_dim] subjective axis.
void write_ground_truth(const std::filesystem::path& path, const SynthGroundTruth& truth);
SynthGroundTruth read_ground_truth(const std::filesystem::path& path);

/// Writes interactions.tsv, train/test splits, embeddings.bin,
/// ground_truth.bin and manifest.json into `dir`.
void write_synthetic_dataset(const std::filesystem::path& dir, const SynthDataset& synth,
                             const SynthConfig& config);

}  // namespace symcere
