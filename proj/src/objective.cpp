#include "symcere/objective.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace symcere {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("contrastive loss: temperature must be > 0");
  }
}

Matrix similarity_logits(const Matrix& anchors, const Matrix& candidates, double temperature) {
  if (anchors.rows() != candidates.rows() || anchors.cols() != candidates.cols()) {
    throw std::invalid_argument("contrastive loss: input shapes differ");
  }
  Matrix logits = anchors * candidates.transpose() / temperature;
  if (!logits.allFinite()) throw NumericError("contrastive loss: non-finite similarity");
  return logits;
}

// One NCE direction. Anchor i compares against candidates k in {i} ∪ allowed(i, k).
// `logit(i, k)` reads the anchor-i / candidate-k similarity; `grad(i, k)`
// accumulates into the matching cell of dL/dlogits. Returns the mean loss.
template <typename Allowed, typename Logit, typename Grad>
double nce_direction(std::size_t b, Allowed&& allowed, Logit&& logit, Grad&& grad, double scale) {
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double max_logit = logit(i, i);
    for (std::size_t k = 0; k < b; ++k) {
      if (k != i && allowed(i, k)) max_logit = std::max(max_logit, logit(i, k));
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < b; ++k) {
      if (k == i || allowed(i, k)) denom += std::exp(logit(i, k) - max_logit);
    }
    const double lse = max_logit + std::log(denom);
    total += lse - logit(i, i);
    for (std::size_t k = 0; k < b; ++k) {
      if (k == i || allowed(i, k)) {
        const double p = std::exp(logit(i, k) - lse);
        grad(i, k) += scale * (p - (k == i ? 1.0 : 0.0));
      }
    }
  }
  return total / static_cast<double>(b);
}

template <typename Allowed>
PairLoss symmetric_nce(const Matrix& graph, const Matrix& text, Allowed&& allowed,
                       double temperature) {
  check_temperature(temperature);
  const Matrix logits = similarity_logits(graph, text, temperature);  // (graph i, text k)
  const auto b = static_cast<std::size_t>(logits.rows());
  PairLoss out;
  if (b == 0) {
    out.grad_first = Matrix::Zero(graph.rows(), graph.cols());
    out.grad_second = Matrix::Zero(text.rows(), text.cols());
    return out;
  }
  Matrix grad_logits = Matrix::Zero(logits.rows(), logits.cols());
  const double scale = 0.5 / static_cast<double>(b);
  auto at = [](auto i, auto k) { return std::pair{static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)}; };

  const double graph_to_text = nce_direction(
      b, allowed,
      [&](std::size_t i, std::size_t k) { auto [r, c] = at(i, k); return logits(r, c); },
      [&](std::size_t i, std::size_t k) -> double& { auto [r, c] = at(i, k); return grad_logits(r, c); },
      scale);
  // Text anchor i against graph candidate k reads logits(k, i).
  const double text_to_graph = nce_direction(
      b, allowed,
      [&](std::size_t i, std::size_t k) { auto [r, c] = at(k, i); return logits(r, c); },
      [&](std::size_t i, std::size_t k) -> double& { auto [r, c] = at(k, i); return grad_logits(r, c); },
      scale);

  out.value = 0.5 * (graph_to_text + text_to_graph);
  out.grad_first = grad_logits * text / temperature;
  out.grad_second = grad_logits.transpose() * graph / temperature;
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (!(temperature > 0.0)) throw UsageError("loss.temperature must be > 0");
  if (alpha < 0.0 || beta < 0.0 || lambda < 0.0) {
    throw UsageError("loss weights alpha, beta and lambda must be >= 0");
  }
}

RowVector l2_normalize(const RowVector& v) {
  const double n = v.norm();
  if (!(n > kMinNorm)) throw NumericError("l2_normalize: near-zero norm");
  return v / n;
}

NormalizedRows normalize_rows(const Matrix& rows, const std::string& what) {
  NormalizedRows out{Matrix(rows.rows(), rows.cols()), Vector(rows.rows())};
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double n = rows.row(r).norm();
    if (!(n > kMinNorm)) {
      throw NumericError("near-zero norm in " + what + " row " + std::to_string(r));
    }
    out.norms(r) = n;
    out.unit.row(r) = rows.row(r) / n;
  }
  return out;
}

Matrix normalize_rows_backward(const NormalizedRows& fwd, const Matrix& grad_unit) {
  Matrix grad(grad_unit.rows(), grad_unit.cols());
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    const auto u = fwd.unit.row(r);
    const auto g = grad_unit.row(r);
    grad.row(r) = (g - u.dot(g) * u) / fwd.norms(r);
  }
  return grad;
}

PairLoss symcere_cross_modal(const Matrix& graph, const Matrix& text, const ContrastiveBatch& mask,
                             double temperature) {
  if (mask.size() != static_cast<std::size_t>(graph.rows())) {
    throw std::invalid_argument("symcere_cross_modal: mask size does not match batch");
  }
  return symmetric_nce(
      graph, text, [&](std::size_t i, std::size_t k) { return mask.negative(i, k); }, temperature);
}

PairLoss infonce_cross_modal(const Matrix& graph, const Matrix& text, double temperature) {
  return symmetric_nce(graph, text, [](std::size_t, std::size_t) { return true; }, temperature);
}

PairLoss infonce_intra(const Matrix& view, const Matrix& augmented, double temperature) {
  check_temperature(temperature);
  const Matrix logits = similarity_logits(view, augmented, temperature);
  const auto b = static_cast<std::size_t>(logits.rows());
  PairLoss out;
  Matrix grad_logits = Matrix::Zero(logits.rows(), logits.cols());
  if (b > 0) {
    out.value = nce_direction(
        b, [](std::size_t, std::size_t) { return true; },
        [&](std::size_t i, std::size_t k) {
          return logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        },
        [&](std::size_t i, std::size_t k) -> double& {
          return grad_logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        },
        1.0 / static_cast<double>(b));
  }
  out.grad_first = grad_logits * augmented / temperature;
  out.grad_second = grad_logits.transpose() * view / temperature;
  return out;
}

NormalizedAdjacency augment_edge_dropout(const NormalizedAdjacency& adj, double p,
                                         std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("augment_edge_dropout: p must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::vector<NormalizedAdjacency::Edge> kept;
  kept.reserve(adj.edges().size());
  for (const auto& e : adj.edges()) {
    if (unit_uniform(rng) >= p) kept.push_back(e);
  }
  return NormalizedAdjacency::from_pairs(adj.num_users(), adj.num_items(), std::move(kept));
}

Matrix augment_text_mask(const Matrix& text, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("augment_text_mask: p must be in [0, 1)");
  constexpr int kMaxRedraws = 100;
  std::mt19937_64 rng(seed);
  Matrix out(text.rows(), text.cols());
  for (Eigen::Index r = 0; r < text.rows(); ++r) {
    bool ok = false;
    for (int attempt = 0; attempt < kMaxRedraws && !ok; ++attempt) {
      for (Eigen::Index c = 0; c < text.cols(); ++c) {
        out(r, c) = unit_uniform(rng) < p ? 0.0 : text(r, c);
      }
      const double n = out.row(r).norm();
      if (n > kMinNorm) {
        out.row(r) /= n;
        ok = true;
      }
    }
    if (!ok) {
      throw NumericError("augment_text_mask: row " + std::to_string(r) + " zeroed after " +
                         std::to_string(kMaxRedraws) + " redraws");
    }
  }
  return out;
}

BprLoss bpr_loss(const Matrix& nodes, std::size_t num_users, std::span<const BprTriple> triples,
                 const TrainPartition* train) {
  BprLoss out{0.0, Matrix::Zero(nodes.rows(), nodes.cols())};
  const auto item_row = [&](Index item) { return static_cast<Eigen::Index>(num_users + item); };
  for (const auto& t : triples) {
    if (t.user >= num_users || item_row(t.positive) >= nodes.rows() ||
        item_row(t.negative) >= nodes.rows()) {
      throw std::out_of_range("bpr_loss: triple index out of range");
    }
    if (train) {
      if (!train->contains(t.user, t.positive)) {
        throw std::invalid_argument("bpr_loss: positive item not interacted by user");
      }
      if (train->contains(t.user, t.negative)) {
        throw std::invalid_argument("bpr_loss: negative item was interacted by user");
      }
    }
    const auto u = nodes.row(t.user);
    const auto pos = nodes.row(item_row(t.positive));
    const auto neg = nodes.row(item_row(t.negative));
    const double margin = u.dot(pos) - u.dot(neg);
    // -log sigmoid(x) = softplus(-x), evaluated stably.
    const double loss = margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
    out.value += loss;
    const double dmargin = -1.0 / (1.0 + std::exp(margin));  // -sigmoid(-x)
    out.grad.row(t.user) += dmargin * (pos - neg);
    out.grad.row(item_row(t.positive)) += dmargin * u;
    out.grad.row(item_row(t.negative)) -= dmargin * u;
  }
  if (!std::isfinite(out.value)) throw NumericError("bpr_loss: non-finite value");
  return out;
}

Matrix project_text(const ProjectionHead& head, const Matrix& text) {
  if (text.cols() != head.weight.rows() || head.bias.rows() != 1 ||
      head.bias.cols() != head.weight.cols()) {
    throw std::invalid_argument("project_text: shape mismatch (text dim " +
                                std::to_string(text.cols()) + ", head expects " +
                                std::to_string(head.weight.rows()) + ")");
  }
  Matrix out = text * head.weight;
  out.rowwise() += head.bias.row(0);
  return out;
}

ProjectionGrads project_text_backward(const ProjectionHead& head, const Matrix& text,
                                      const Matrix& grad_out) {
  if (grad_out.rows() != text.rows() || grad_out.cols() != head.weight.cols()) {
    throw std::invalid_argument("project_text_backward: shape mismatch");
  }
  return {text.transpose() * grad_out, grad_out.colwise().sum()};
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> terms[] = {{"cross_modal", c.cross_modal},
                                                  {"intra_modal", c.intra_modal},
                                                  {"bpr", c.bpr},
                                                  {"param_sq_norm", c.param_sq_norm}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) throw NumericError(std::string("total_loss: non-finite ") + name + " term");
  }
  return c.cross_modal + w.alpha * c.intra_modal + w.beta * c.bpr + w.lambda * c.param_sq_norm;
}

}  // namespace symcere
