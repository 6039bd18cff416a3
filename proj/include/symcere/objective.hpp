#pragma once

#include "symcere/common.hpp"
#include "symcere/dataio.hpp"

#include <cstdint>
#include <span>
#include <string>

namespace symcere {

struct LossWeights {
  double temperature = 0.2;
  double alpha = 0.5;    // intra-modal
  double beta = 0.05;    // BPR
  double lambda = 1e-4;  // L2 on learnable parameters

  void validate() const;
};

/// Affine map from text-encoder space to graph space: rows -> T W + b.
struct ProjectionHead {
  Matrix weight;  // text_dim x d
  Matrix bias;    // 1 x d
};

inline constexpr double kMinNorm = 1e-12;

/// v / ||v||. Throws NumericError for ||v|| <= 1e-12.
RowVector l2_normalize(const RowVector& v);

/// Row-wise unit projection that remembers the norms for the backward pass.
struct NormalizedRows {
  Matrix unit;
  Vector norms;
};

/// `what` names the tensor in the error raised for a near-zero row.
NormalizedRows normalize_rows(const Matrix& rows, const std::string& what = "rows");
Matrix normalize_rows_backward(const NormalizedRows& fwd, const Matrix& grad_unit);

/// Loss value with gradients w.r.t. both input matrices.
struct PairLoss {
  double value = 0.0;
  Matrix grad_first;
  Matrix grad_second;
};

/// Symmetric masked NCE between graph rows and text rows. Row i of each is
/// the same interaction; the denominator for anchor i only holds i itself and
/// the true negatives of `mask`. The text->graph direction reuses the mask.
PairLoss symcere_cross_modal(const Matrix& graph, const Matrix& text, const ContrastiveBatch& mask,
                             double temperature);

/// Same objective with every other in-batch row as a negative.
PairLoss infonce_cross_modal(const Matrix& graph, const Matrix& text, double temperature);

/// One-directional InfoNCE between a view and its augmentation; positives on
/// the diagonal, the full batch as negatives.
PairLoss infonce_intra(const Matrix& view, const Matrix& augmented, double temperature);

/// Removes each undirected edge with probability p, then renormalises from
/// the surviving degrees.
NormalizedAdjacency augment_edge_dropout(const NormalizedAdjacency& adj, double p,
                                         std::uint64_t seed);

/// Zeroes each coordinate with probability p and rescales rows to unit norm.
/// A row that would be fully zeroed gets a fresh mask (bounded retries).
Matrix augment_text_mask(const Matrix& text, double p, std::uint64_t seed);

struct BprTriple {
  Index user;
  Index positive;
  Index negative;
};

struct BprLoss {
  double value = 0.0;
  Matrix grad;  // w.r.t. the node matrix
};

/// Sum over triples of -log sigmoid(g_u.g_pos - g_u.g_neg) on the given node
/// rows (users first, then items). With `train` set, each triple is checked
/// against the interaction history.
BprLoss bpr_loss(const Matrix& nodes, std::size_t num_users, std::span<const BprTriple> triples,
                 const TrainPartition* train = nullptr);

Matrix project_text(const ProjectionHead& head, const Matrix& text);

struct ProjectionGrads {
  Matrix weight;
  Matrix bias;
};
ProjectionGrads project_text_backward(const ProjectionHead& head, const Matrix& text,
                                      const Matrix& grad_out);

struct LossComponents {
  double cross_modal = 0.0;
  double intra_modal = 0.0;
  double bpr = 0.0;
  double param_sq_norm = 0.0;  // ||Theta||^2
};

/// cross + alpha * intra + beta * bpr + lambda * ||Theta||^2.
double total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace symcere
