#pragma once

#include "symcere/common.hpp"
#include "symcere/dataio.hpp"
#include "symcere/encoder.hpp"
#include "symcere/objective.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace symcere {

/// Cross-modal term: masked symmetric NCE, plain InfoNCE, or none (BPR /
/// intra-modal only).
enum class LossVariant { symcere, infonce, none };

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 512;
  AdamConfig adam;
  LossVariant loss_variant = LossVariant::symcere;
  bool normalize = true;
  Backbone backbone = Backbone::lightgcn;
  std::size_t dim = 64;
  std::size_t num_layers = 3;
  double leaky_slope = 0.2;
  LossWeights weights;
  double edge_dropout = 0.1;
  double text_mask = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
  /// Canonical JSON (sorted keys) of every field.
  std::string canonical_json() const;
  /// SHA-256 of canonical_json().
  std::string hash() const;
  static TrainConfig from_canonical_json(std::string_view json);
};

std::string to_string(LossVariant v);
std::string to_string(Backbone b);
LossVariant parse_loss_variant(std::string_view s);
Backbone parse_backbone(std::string_view s);

struct ModelParams {
  GraphParams graph;
  ProjectionHead head;

  struct Tensor {
    std::string name;
    Matrix* value;
  };
  struct ConstTensor {
    std::string name;
    const Matrix* value;
  };
  /// Every learnable tensor in a fixed order.
  std::vector<Tensor> tensors();
  std::vector<ConstTensor> tensors() const;
  double squared_norm() const;
};

/// E0 ~ N(0, 0.01^2); projection and NGCF weights Glorot-uniform; biases zero.
ModelParams init_params(const TrainConfig& config, std::size_t num_users, std::size_t num_items,
                        std::size_t text_dim, std::uint64_t seed);

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam update of `params` in place. Moments are created on the
/// first call. Throws NumericError naming the first tensor with a non-finite
/// gradient.
void adam_step(std::span<const ModelParams::Tensor> params, std::span<const Matrix> grads,
               AdamState& state, const AdamConfig& config);

/// One (u, v+, v-) per batch row; v- is uniform over training items the user
/// never interacted with.
std::vector<BprTriple> sample_bpr_triples(const TrainPartition& train,
                                          std::span<const std::size_t> batch, std::uint64_t seed);

/// Backbone output for the given parameters on `adj`.
Matrix encode_nodes(const ModelParams& params, Backbone backbone, const NormalizedAdjacency& adj);

/// Mixes a base seed with stream identifiers (purpose, epoch, batch, ...).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream);

struct LossBreakdown {
  double cross_modal = 0.0;
  double intra_modal = 0.0;
  double bpr = 0.0;
  double regularization = 0.0;  // lambda * ||Theta||^2
  double total = 0.0;
};

struct EpochLosses : LossBreakdown {
  std::size_t epoch = 0;
  std::size_t batches = 0;
};

struct TrainState {
  TrainConfig config;
  ModelParams params;
  AdamState adam;
  std::size_t epoch = 0;
};

/// Owns the parameters and runs mini-batch optimisation. Sees only the train
/// partition and the text rows aligned with it.
class Trainer {
 public:
  /// `text` holds one row per train interaction (row r = embedding_row r). It
  /// may be empty when the configuration never reads text.
  Trainer(TrainConfig config, std::shared_ptr<const TrainPartition> train, Matrix text);
  /// Resumes from a saved state.
  Trainer(TrainState state, std::shared_ptr<const TrainPartition> train, Matrix text);

  EpochLosses train_epoch();
  /// One optimisation step on the given train rows.
  LossBreakdown train_batch(std::span<const std::size_t> rows, std::uint64_t batch_seed);
  /// Loss of a batch without updating anything.
  LossBreakdown evaluate_batch(std::span<const std::size_t> rows, std::uint64_t batch_seed) const;

  const TrainState& state() const { return state_; }
  const TrainPartition& train() const { return *train_; }
  const NormalizedAdjacency& adjacency() const { return adjacency_; }
  std::size_t text_dim() const { return static_cast<std::size_t>(text_.cols()); }

  /// Backbone output on the clean training graph.
  Matrix node_embeddings() const;
  /// Projection-head output for every train text row.
  Matrix projected_text() const;

  /// Called with (tensor name, rows) for every matrix that enters a loss.
  using Inspector = std::function<void(std::string_view, const Matrix&)>;
  void set_inspector(Inspector inspector) { inspector_ = std::move(inspector); }

 private:
  struct BatchResult;
  BatchResult run_batch(std::span<const std::size_t> rows, std::uint64_t batch_seed,
                        bool with_grads) const;
  void check_text() const;

  TrainState state_;
  std::shared_ptr<const TrainPartition> train_;
  Matrix text_;
  NormalizedAdjacency adjacency_;
  Inspector inspector_;
};

/// Binary checkpoint: "SYMT", u32 version, config hash, canonical config,
/// epoch, Adam step, then every tensor and its two Adam moments. Written
/// atomically.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);

struct CheckpointLoadOptions {
  /// When set, the stored config hash must match unless allow_config_mismatch.
  const TrainConfig* expected = nullptr;
  bool allow_config_mismatch = false;
  std::ostream* warnings = nullptr;
};

/// With a tolerated mismatch the returned state adopts `expected` as config.
TrainState load_checkpoint(const std::filesystem::path& path, const CheckpointLoadOptions& options = {});

}  // namespace symcere
