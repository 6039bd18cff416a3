#include "symcere/encoder.hpp"

#include <stdexcept>

namespace symcere {

namespace {

void check_rows(const GraphParams& params, const NormalizedAdjacency& adj) {
  if (static_cast<std::size_t>(params.base.rows()) != adj.size()) {
    throw std::invalid_argument("graph encoder: embedding rows (" +
                                std::to_string(params.base.rows()) +
                                ") do not match adjacency size (" + std::to_string(adj.size()) + ")");
  }
  if (params.layer_weights.size() != params.num_layers + 1) {
    throw std::invalid_argument("graph encoder: need num_layers + 1 layer weights");
  }
}

Matrix propagate_weighted(const std::vector<double>& alpha, std::size_t num_layers,
                          const NormalizedAdjacency& adj, const Matrix& x0) {
  Matrix out = alpha[0] * x0;
  Matrix cur = x0;
  Matrix next;
  for (std::size_t k = 1; k <= num_layers; ++k) {
    adj.multiply(cur, next);
    out += alpha[k] * next;
    cur.swap(next);
  }
  return out;
}

}  // namespace

std::vector<double> GraphParams::uniform_layer_weights(std::size_t num_layers) {
  return std::vector<double>(num_layers + 1, 1.0 / static_cast<double>(num_layers + 1));
}

Matrix lightgcn_forward(const GraphParams& params, const NormalizedAdjacency& adj) {
  check_rows(params, adj);
  return propagate_weighted(params.layer_weights, params.num_layers, adj, params.base);
}

Matrix lightgcn_backward(const GraphParams& params, const NormalizedAdjacency& adj,
                         const Matrix& grad_out) {
  check_rows(params, adj);
  return propagate_weighted(params.layer_weights, params.num_layers, adj, grad_out);
}

Matrix ngcf_forward(const GraphParams& params, const NormalizedAdjacency& adj, NgcfCache* cache) {
  if (!params.ngcf) throw std::invalid_argument("ngcf_forward: missing NGCF weights");
  check_rows(params, adj);
  const auto& w = *params.ngcf;
  if (w.layers.size() != params.num_layers) {
    throw std::invalid_argument("ngcf_forward: layer count mismatch");
  }
  const auto n = params.base.rows();
  const auto d = params.base.cols();
  const auto k_total = static_cast<Eigen::Index>(params.num_layers + 1);
  if (w.output.rows() != k_total * d || w.output.cols() != d) {
    throw std::invalid_argument("ngcf_forward: output map must be (K+1)d x d");
  }

  Matrix concat(n, k_total * d);
  concat.leftCols(d) = params.base;
  if (cache) {
    cache->inputs.clear();
    cache->neighbors.clear();
    cache->preacts.clear();
  }

  Matrix h = params.base;
  for (std::size_t k = 0; k < params.num_layers; ++k) {
    const auto& layer = w.layers[k];
    Matrix s = adj.multiply(h);
    Matrix z = (s + h) * layer.w_self;
    z.noalias() += s.cwiseProduct(h) * layer.w_inter;
    z.rowwise() += layer.bias.row(0);
    Matrix e = z.unaryExpr([slope = w.leaky_slope](double x) { return x > 0.0 ? x : slope * x; });
    concat.middleCols(static_cast<Eigen::Index>(k + 1) * d, d) = e;
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->neighbors.push_back(std::move(s));
      cache->preacts.push_back(std::move(z));
    }
    h = std::move(e);
  }
  Matrix out = concat * w.output;
  if (cache) cache->concat = std::move(concat);
  return out;
}

NgcfGrads ngcf_backward(const GraphParams& params, const NormalizedAdjacency& adj,
                        const NgcfCache& cache, const Matrix& grad_out) {
  const auto& w = *params.ngcf;
  const auto d = params.base.cols();
  const auto num_layers = params.num_layers;

  NgcfGrads grads;
  grads.output = cache.concat.transpose() * grad_out;
  const Matrix grad_concat = grad_out * w.output.transpose();
  grads.layers.resize(num_layers);

  // Gradient flowing into e_k from later layers; e_K only receives the concat term.
  Matrix grad_e = grad_concat.middleCols(static_cast<Eigen::Index>(num_layers) * d, d);
  for (std::size_t k = num_layers; k-- > 0;) {
    const auto& layer = w.layers[k];
    const Matrix& h = cache.inputs[k];
    const Matrix& s = cache.neighbors[k];
    const Matrix& z = cache.preacts[k];

    Matrix grad_z = grad_e;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (z.data()[i] <= 0.0) grad_z.data()[i] *= w.leaky_slope;
    }
    auto& g = grads.layers[k];
    g.w_self = (s + h).transpose() * grad_z;
    g.w_inter = s.cwiseProduct(h).transpose() * grad_z;
    g.bias = grad_z.colwise().sum();

    const Matrix grad_sum = grad_z * layer.w_self.transpose();    // d/d(s + h)
    const Matrix grad_prod = grad_z * layer.w_inter.transpose();  // d/d(s ⊙ h)
    Matrix grad_h = grad_sum + grad_prod.cwiseProduct(s);
    const Matrix grad_s = grad_sum + grad_prod.cwiseProduct(h);
    grad_h += adj.multiply(grad_s);  // A is symmetric
    grad_h += grad_concat.middleCols(static_cast<Eigen::Index>(k) * d, d);
    grad_e = std::move(grad_h);
  }
  grads.base = std::move(grad_e);
  return grads;
}

RowVector interaction_repr(const Matrix& nodes, std::size_t num_users, Index user, Index item) {
  const auto u = static_cast<Eigen::Index>(user);
  const auto v = static_cast<Eigen::Index>(num_users + item);
  if (u >= nodes.rows() || v >= nodes.rows() || user >= num_users) {
    throw std::out_of_range("interaction_repr: index out of range");
  }
  return 0.5 * (nodes.row(u) + nodes.row(v));
}

Matrix interaction_repr(const Matrix& nodes, std::size_t num_users,
                        std::span<const UserItem> pairs) {
  Matrix out(static_cast<Eigen::Index>(pairs.size()), nodes.cols());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = interaction_repr(nodes, num_users, pairs[r].user, pairs[r].item);
  }
  return out;
}

void interaction_repr_backward(std::size_t num_users, std::span<const UserItem> pairs,
                               const Matrix& grad_repr, Matrix& grad_nodes) {
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto row = grad_repr.row(static_cast<Eigen::Index>(r));
    grad_nodes.row(pairs[r].user) += 0.5 * row;
    grad_nodes.row(static_cast<Eigen::Index>(num_users + pairs[r].item)) += 0.5 * row;
  }
}

}  // namespace symcere
