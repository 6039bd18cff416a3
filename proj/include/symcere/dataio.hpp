#pragma once

#include "symcere/common.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace symcere {

/// One review event: a single user reviewing a single item at a point in time.
struct InteractionRecord {
  std::string user_key;
  std::string item_key;
  std::int64_t timestamp = 0;
  std::optional<std::string> review_text;

  bool operator==(const InteractionRecord&) const = default;
};

struct LoadReport {
  std::vector<InteractionRecord> records;
  std::size_t malformed_lines = 0;
  std::vector<std::size_t> malformed_line_numbers;  // 1-based
  bool had_header = false;
};

/// Reads a tab-separated interaction dump: user, item, timestamp[, review].
/// An optional header line is recognised by a non-integer timestamp column on
/// line 1. Lines with fewer than three fields are counted as malformed.
LoadReport load_interactions(const std::filesystem::path& path);

/// Iteratively drops users and items with fewer than `k` distinct
/// interaction partners until a fixed point. Input order is preserved.
std::vector<InteractionRecord> k_core_filter(std::span<const InteractionRecord> records,
                                             std::size_t k);

struct TrainInteraction {
  Index user = 0;
  Index item = 0;
  std::int64_t timestamp = 0;
  std::size_t embedding_row = 0;

  bool operator==(const TrainInteraction&) const = default;
};

struct TestInteraction {
  Index user = 0;
  Index item = 0;
  std::int64_t timestamp = 0;

  bool operator==(const TestInteraction&) const = default;
};

/// The training half of a dataset. This is everything the trainer may see;
/// it carries no reference to held-out rows.
class TrainPartition {
 public:
  TrainPartition(std::size_t num_users, std::size_t num_items, std::size_t num_train_items,
                 std::vector<TrainInteraction> rows);

  std::size_t num_users() const { return num_users_; }
  /// Full catalogue size, including items that only occur in test rows.
  std::size_t num_items() const { return num_items_; }
  /// Items [0, num_train_items) occur in at least one training row.
  std::size_t num_train_items() const { return num_train_items_; }
  std::size_t size() const { return rows_.size(); }

  const std::vector<TrainInteraction>& rows() const { return rows_; }
  const TrainInteraction& row(std::size_t r) const { return rows_[r]; }

  /// Sorted, distinct items the user interacted with in training (R).
  const std::vector<Index>& user_items(Index user) const { return user_items_[user]; }
  bool contains(Index user, Index item) const;

  /// Number of training rows per item (duplicates counted).
  std::vector<std::size_t> item_frequencies() const;

 private:
  std::size_t num_users_;
  std::size_t num_items_;
  std::size_t num_train_items_;
  std::vector<TrainInteraction> rows_;
  std::vector<std::vector<Index>> user_items_;
};

/// Indexed, temporally split interactions.
class InteractionSet {
 public:
  /// Validates every structural invariant; throws DataError on violation.
  InteractionSet(std::vector<std::string> user_keys, std::vector<std::string> item_keys,
                 std::size_t num_train_items, std::vector<TrainInteraction> train,
                 std::vector<TestInteraction> test);

  std::size_t num_users() const { return train_->num_users(); }
  std::size_t num_items() const { return train_->num_items(); }

  const TrainPartition& train() const { return *train_; }
  std::shared_ptr<const TrainPartition> train_partition() const { return train_; }
  const std::vector<TestInteraction>& test() const { return test_; }

  /// Distinct held-out items per user that are not already training items.
  std::vector<std::vector<Index>> test_items_by_user() const;

  const std::vector<std::string>& user_keys() const { return user_keys_; }
  const std::vector<std::string>& item_keys() const { return item_keys_; }

  /// For sets built by temporal_split: index into the source record list of
  /// each train / test row. Empty for sets loaded from disk.
  const std::vector<std::size_t>& train_sources() const { return train_sources_; }
  const std::vector<std::size_t>& test_sources() const { return test_sources_; }
  void set_sources(std::vector<std::size_t> train_sources, std::vector<std::size_t> test_sources);

 private:
  std::vector<std::string> user_keys_;
  std::vector<std::string> item_keys_;
  std::shared_ptr<const TrainPartition> train_;
  std::vector<TestInteraction> test_;
  std::vector<std::size_t> train_sources_;
  std::vector<std::size_t> test_sources_;
};

/// Number of leading interactions (by time) a user with `n` interactions
/// keeps for training. Users with n >= 2 always keep one for evaluation.
std::size_t train_count(std::size_t n, double train_fraction);

/// Chronological per-user split. Train and test rows keep input file order;
/// users and items are indexed by first appearance in train, cold test items
/// after all train items.
InteractionSet temporal_split(std::span<const InteractionRecord> records, double train_fraction);

/// Symmetric-normalised bipartite user-item graph in CSR form. Nodes
/// [0, num_users) are users, [num_users, num_users + num_items) are items.
class NormalizedAdjacency {
 public:
  struct Edge {
    Index user;
    Index item;
    bool operator==(const Edge&) const = default;
  };

  NormalizedAdjacency() = default;
  /// Duplicate pairs collapse to a single edge.
  static NormalizedAdjacency from_pairs(std::size_t num_users, std::size_t num_items,
                                        std::vector<Edge> pairs);

  std::size_t size() const { return num_users_ + num_items_; }
  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  /// Distinct undirected user-item edges, sorted.
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t degree(std::size_t node) const { return row_ptr_[node + 1] - row_ptr_[node]; }

  std::span<const Index> row_columns(std::size_t node) const;
  std::span<const double> row_weights(std::size_t node) const;
  /// Stored weight for (a, b), or 0 if absent.
  double weight(std::size_t a, std::size_t b) const;

  /// out = A * in, row-parallel friendly (each output row is independent).
  void multiply(const Matrix& in, Matrix& out) const;
  Matrix multiply(const Matrix& in) const;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<Index> cols_;
  std::vector<double> weights_;
};

NormalizedAdjacency build_adjacency(const TrainPartition& train);

/// Anchor rows of a mini-batch plus the true-negative mask: entry (i, j) is
/// true iff j != i and the anchor's user never interacted with j's item.
class ContrastiveBatch {
 public:
  ContrastiveBatch(std::vector<std::size_t> anchors, std::vector<std::uint8_t> mask);
  /// Every off-diagonal pair is a negative (plain InfoNCE).
  static ContrastiveBatch all_negatives(std::vector<std::size_t> anchors);

  std::size_t size() const { return anchors_.size(); }
  const std::vector<std::size_t>& anchors() const { return anchors_; }
  bool negative(std::size_t i, std::size_t j) const { return mask_[i * anchors_.size() + j] != 0; }
  /// Off-diagonal pairs excluded from the negative set.
  std::size_t excluded_count() const;

 private:
  std::vector<std::size_t> anchors_;
  std::vector<std::uint8_t> mask_;
};

ContrastiveBatch build_negative_mask(std::span<const std::size_t> batch,
                                     const TrainPartition& train);

// Binary text-embedding file: "SYMC", u32 version, u64 count, u32 dim,
// then count*dim little-endian float32 values, row-major.
inline constexpr std::size_t kEmbeddingHeaderBytes = 20;
void write_embedding_file(const std::filesystem::path& path, const FloatMatrix& rows);
FloatMatrix read_embedding_file(const std::filesystem::path& path);

// Prepared dataset directory: manifest.json, train.tsv, test.tsv and
// optionally embeddings.bin.
struct DatasetManifest {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_train_items = 0;
  std::size_t num_train = 0;
  std::size_t num_test = 0;
  std::size_t num_eval_users = 0;
  double train_fraction = 0.8;
  std::size_t kcore = 0;
  std::string source_sha256;
  std::string embedding_file;  // relative to the dataset directory
  std::string embedding_sha256;
  std::size_t embedding_dim = 0;
  std::string ground_truth_file;
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Writes train.tsv / test.tsv. `records` must be the list the split was
/// built from when review text should be carried through (may be empty).
void write_split(const std::filesystem::path& dir, const InteractionSet& dataset,
                 std::span<const InteractionRecord> records);
InteractionSet read_split(const std::filesystem::path& dir, const DatasetManifest& manifest);

/// Writes records in the delimited input format load_interactions reads.
void write_interactions(const std::filesystem::path& path,
                        std::span<const InteractionRecord> records);

struct PreparedDataset {
  DatasetManifest manifest;
  InteractionSet dataset;
  std::optional<FloatMatrix> embeddings;
};

/// Loads a prepared directory. `embeddings_override` replaces the manifest's
/// embedding file; its row count must equal the train size.
PreparedDataset load_prepared(const std::filesystem::path& dir,
                              const std::optional<std::filesystem::path>& embeddings_override = {});

}  // namespace symcere
