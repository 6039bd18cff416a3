#pragma once

#include "symcere/common.hpp"
#include "symcere/dataio.hpp"

#include <optional>
#include <span>
#include <vector>

namespace symcere {

enum class Backbone { lightgcn, ngcf };

/// One NGCF propagation layer:
///   e_k = LeakyReLU((A + I) e_{k-1} W_self + (A e_{k-1} ⊙ e_{k-1}) W_inter + bias)
struct NgcfLayer {
  Matrix w_self;   // d x d
  Matrix w_inter;  // d x d
  Matrix bias;     // 1 x d
};

struct NgcfWeights {
  std::vector<NgcfLayer> layers;
  Matrix output;  // (K+1)d x d, maps the concatenated layer outputs back to d
  double leaky_slope = 0.2;
};

struct GraphParams {
  Matrix base;  // E0, (num_users + num_items) x d
  std::size_t num_layers = 3;
  std::vector<double> layer_weights;  // K+1 entries
  std::optional<NgcfWeights> ngcf;

  /// alpha_k = 1 / (K + 1).
  static std::vector<double> uniform_layer_weights(std::size_t num_layers);
};

/// sum_k alpha_k A^k E0. No transforms, no nonlinearity.
Matrix lightgcn_forward(const GraphParams& params, const NormalizedAdjacency& adj);
/// Gradient of a loss w.r.t. E0 given its gradient w.r.t. the forward output.
/// A is symmetric, so this is the forward map applied to `grad_out`.
Matrix lightgcn_backward(const GraphParams& params, const NormalizedAdjacency& adj,
                         const Matrix& grad_out);

/// Activations kept by ngcf_forward for the backward pass.
struct NgcfCache {
  std::vector<Matrix> inputs;     // e_{k-1}
  std::vector<Matrix> neighbors;  // A e_{k-1}
  std::vector<Matrix> preacts;    // pre-activation of layer k
  Matrix concat;                  // [e_0 | ... | e_K]
};

struct NgcfGrads {
  Matrix base;
  std::vector<NgcfLayer> layers;
  Matrix output;
};

Matrix ngcf_forward(const GraphParams& params, const NormalizedAdjacency& adj,
                    NgcfCache* cache = nullptr);
NgcfGrads ngcf_backward(const GraphParams& params, const NormalizedAdjacency& adj,
                        const NgcfCache& cache, const Matrix& grad_out);

/// (g_u + g_v) / 2. Node rows: users first, then items.
RowVector interaction_repr(const Matrix& nodes, std::size_t num_users, Index user, Index item);

struct UserItem {
  Index user;
  Index item;
};

/// Batched interaction_repr, one output row per pair.
Matrix interaction_repr(const Matrix& nodes, std::size_t num_users, std::span<const UserItem> pairs);
/// Scatters the gradient of a batched interaction_repr back onto node rows.
void interaction_repr_backward(std::size_t num_users, std::span<const UserItem> pairs,
                               const Matrix& grad_repr, Matrix& grad_nodes);

}  // namespace symcere
