#include "symcere/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace symcere {

namespace {

constexpr std::size_t kBase = 0;
constexpr std::size_t kProjWeight = 1;
constexpr std::size_t kProjBias = 2;
constexpr std::size_t kNgcfFirst = 3;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * unit_uniform(rng) - 1.0) * limit;
  return m;
}

struct Encoded {
  Matrix nodes;
  NgcfCache cache;
};

Encoded encode(const ModelParams& params, Backbone backbone, const NormalizedAdjacency& adj,
               bool keep_cache) {
  Encoded out;
  if (backbone == Backbone::lightgcn) {
    out.nodes = lightgcn_forward(params.graph, adj);
  } else {
    out.nodes = ngcf_forward(params.graph, adj, keep_cache ? &out.cache : nullptr);
  }
  return out;
}

void encode_backward(const ModelParams& params, Backbone backbone, const NormalizedAdjacency& adj,
                     const Encoded& enc, const Matrix& grad_nodes, std::vector<Matrix>& grads) {
  if (backbone == Backbone::lightgcn) {
    grads[kBase] += lightgcn_backward(params.graph, adj, grad_nodes);
    return;
  }
  const NgcfGrads g = ngcf_backward(params.graph, adj, enc.cache, grad_nodes);
  grads[kBase] += g.base;
  for (std::size_t k = 0; k < g.layers.size(); ++k) {
    grads[kNgcfFirst + 3 * k] += g.layers[k].w_self;
    grads[kNgcfFirst + 3 * k + 1] += g.layers[k].w_inter;
    grads[kNgcfFirst + 3 * k + 2] += g.layers[k].bias;
  }
  grads[kNgcfFirst + 3 * g.layers.size()] += g.output;
}

}  // namespace

Matrix encode_nodes(const ModelParams& params, Backbone backbone, const NormalizedAdjacency& adj) {
  if (static_cast<std::size_t>(params.graph.base.rows()) != adj.size()) {
    throw DataError("embedding table has " + std::to_string(params.graph.base.rows()) + " rows, graph has " +
                    std::to_string(adj.size()) + " nodes");
  }
  return encode(params, backbone, adj, false).nodes;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  std::uint64_t h = splitmix64(base);
  for (auto s : stream) h = splitmix64(h ^ splitmix64(s + 0x632be59bd9b4e019ull));
  return h;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw UsageError("train.batch_size must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw UsageError("train.learning_rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw UsageError("train.adam betas must be in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw UsageError("train.adam_epsilon must be > 0");
  if (dim < 1) throw UsageError("model.dim must be >= 1");
  if (!(edge_dropout >= 0.0 && edge_dropout < 1.0)) throw UsageError("loss.edge_dropout must be in [0, 1)");
  if (!(text_mask >= 0.0 && text_mask < 1.0)) throw UsageError("loss.text_mask must be in [0, 1)");
  weights.validate();
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<ModelParams::Tensor> ModelParams::tensors() {
  std::vector<Tensor> out{{"base", &graph.base}, {"proj.weight", &head.weight}, {"proj.bias", &head.bias}};
  if (graph.ngcf) {
    auto& w = *graph.ngcf;
    for (std::size_t k = 0; k < w.layers.size(); ++k) {
      const auto prefix = "ngcf.layer" + std::to_string(k) + ".";
      out.push_back({prefix + "w_self", &w.layers[k].w_self});
      out.push_back({prefix + "w_inter", &w.layers[k].w_inter});
      out.push_back({prefix + "bias", &w.layers[k].bias});
    }
    out.push_back({"ngcf.output", &w.output});
  }
  return out;
}

std::vector<ModelParams::ConstTensor> ModelParams::tensors() const {
  std::vector<ConstTensor> out;
  for (auto& t : const_cast<ModelParams*>(this)->tensors()) out.push_back({t.name, t.value});
  return out;
}

double ModelParams::squared_norm() const {
  double total = 0.0;
  for (const auto& t : tensors()) total += t.value->squaredNorm();
  return total;
}

ModelParams init_params(const TrainConfig& config, std::size_t num_users, std::size_t num_items,
                        std::size_t text_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.01);
  const auto d = static_cast<Eigen::Index>(config.dim);

  ModelParams p;
  p.graph.base.resize(static_cast<Eigen::Index>(num_users + num_items), d);
  for (Eigen::Index i = 0; i < p.graph.base.size(); ++i) p.graph.base.data()[i] = gauss(rng);
  p.graph.num_layers = config.num_layers;
  p.graph.layer_weights = GraphParams::uniform_layer_weights(config.num_layers);

  p.head.weight = glorot_uniform(text_dim, config.dim, rng);
  p.head.bias = Matrix::Zero(1, d);

  if (config.backbone == Backbone::ngcf) {
    NgcfWeights w;
    w.leaky_slope = config.leaky_slope;
    for (std::size_t k = 0; k < config.num_layers; ++k) {
      NgcfLayer layer;
      layer.w_self = glorot_uniform(config.dim, config.dim, rng);
      layer.w_inter = glorot_uniform(config.dim, config.dim, rng);
      layer.bias = Matrix::Zero(1, d);
      w.layers.push_back(std::move(layer));
    }
    w.output = glorot_uniform((config.num_layers + 1) * config.dim, config.dim, rng);
    p.graph.ngcf = std::move(w);
  }
  return p;
}

void adam_step(std::span<const ModelParams::Tensor> params, std::span<const Matrix> grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value->rows() != grads[i].rows() || params[i].value->cols() != grads[i].cols()) {
      throw std::invalid_argument("adam_step: shape mismatch for " + params[i].name);
    }
    if (!grads[i].allFinite()) throw NumericError("adam_step: non-finite gradient in " + params[i].name);
  }
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      state.second.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  if (state.first.size() != params.size()) throw std::invalid_argument("adam_step: moment count mismatch");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first[i];
    auto& v = state.second[i];
    const auto& g = grads[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
    auto& p = *params[i].value;
    p.array() -= config.learning_rate * (m.array() / correction1) /
                 ((v.array() / correction2).sqrt() + config.epsilon);
  }
}

std::vector<BprTriple> sample_bpr_triples(const TrainPartition& train,
                                          std::span<const std::size_t> batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = train.num_train_items();
  std::vector<BprTriple> out;
  out.reserve(batch.size());
  for (const auto r : batch) {
    const auto& row = train.row(r);
    const auto& seen = train.user_items(row.user);
    if (seen.size() >= n) {
      throw DataError("sample_bpr_triples: user " + std::to_string(row.user) +
                      " interacted with every item; no negative exists");
    }
    // k-th item (0-based) of the complement of `seen`, walked in sorted order.
    std::size_t pick = static_cast<std::size_t>(rng() % (n - seen.size()));
    for (const auto item : seen) {
      if (item <= pick) {
        ++pick;
      } else {
        break;
      }
    }
    out.push_back({row.user, row.item, static_cast<Index>(pick)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trainer

struct Trainer::BatchResult {
  LossBreakdown losses;
  std::vector<Matrix> grads;
};

Trainer::Trainer(TrainConfig config, std::shared_ptr<const TrainPartition> train, Matrix text)
    : train_(std::move(train)), text_(std::move(text)) {
  config.validate();
  adjacency_ = build_adjacency(*train_);
  state_.params = init_params(config, train_->num_users(), train_->num_items(),
                              static_cast<std::size_t>(text_.cols()), derive_seed(config.seed, {7}));
  state_.config = std::move(config);
  check_text();
}

Trainer::Trainer(TrainState state, std::shared_ptr<const TrainPartition> train, Matrix text)
    : state_(std::move(state)), train_(std::move(train)), text_(std::move(text)) {
  state_.config.validate();
  adjacency_ = build_adjacency(*train_);
  if (static_cast<std::size_t>(state_.params.graph.base.rows()) != adjacency_.size()) {
    throw DataError("checkpoint embedding table does not match the dataset size");
  }
  if ((state_.config.backbone == Backbone::ngcf) != state_.params.graph.ngcf.has_value()) {
    throw DataError("checkpoint backbone does not match the configuration");
  }
  check_text();
}

void Trainer::check_text() const {
  const auto& cfg = state_.config;
  const bool needs_text = cfg.loss_variant != LossVariant::none || cfg.weights.alpha > 0.0;
  if (needs_text && static_cast<std::size_t>(text_.rows()) != train_->size()) {
    throw DataError("trainer: text embeddings must have one row per train interaction");
  }
  if (text_.rows() > 0 && state_.params.head.weight.rows() != text_.cols()) {
    throw DataError("trainer: projection head input dimension does not match text embeddings");
  }
}

Trainer::BatchResult Trainer::run_batch(std::span<const std::size_t> rows, std::uint64_t batch_seed,
                                        bool with_grads) const {
  const auto& cfg = state_.config;
  const auto& params = state_.params;
  const auto& w = cfg.weights;
  const std::size_t nu = train_->num_users();
  const bool use_cross = cfg.loss_variant != LossVariant::none;
  const bool use_intra = w.alpha > 0.0;
  const bool use_bpr = w.beta > 0.0;

  BatchResult res;
  if (with_grads) {
    for (const auto& t : params.tensors()) res.grads.push_back(Matrix::Zero(t.value->rows(), t.value->cols()));
  }
  auto inspect = [&](std::string_view name, const Matrix& m) {
    if (inspector_) inspector_(name, m);
  };
  // With normalization off the "unit" rows are the raw rows and the backward
  // pass is the identity.
  auto maybe_normalize = [&](const Matrix& x, const std::string& what) {
    if (cfg.normalize) return normalize_rows(x, what);
    return NormalizedRows{x, Vector::Ones(x.rows())};
  };
  auto unnormalize = [&](const NormalizedRows& f, const Matrix& grad) {
    return cfg.normalize ? normalize_rows_backward(f, grad) : grad;
  };

  std::vector<UserItem> pairs;
  pairs.reserve(rows.size());
  for (const auto r : rows) pairs.push_back({train_->row(r).user, train_->row(r).item});

  const Encoded clean = encode(params, cfg.backbone, adjacency_, with_grads);
  Matrix grad_clean;
  if (with_grads) grad_clean = Matrix::Zero(clean.nodes.rows(), clean.nodes.cols());

  const Matrix g = interaction_repr(clean.nodes, nu, pairs);
  const NormalizedRows g_hat = maybe_normalize(g, "interaction repr");
  Matrix d_g_hat = Matrix::Zero(g.rows(), g.cols());

  Matrix text_batch;
  NormalizedRows p_hat;
  Matrix d_p_hat;
  if (use_cross || use_intra) {
    text_batch.resize(static_cast<Eigen::Index>(rows.size()), text_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      text_batch.row(static_cast<Eigen::Index>(i)) =
          text_.row(static_cast<Eigen::Index>(train_->row(rows[i]).embedding_row));
    }
    p_hat = maybe_normalize(project_text(params.head, text_batch), "projected text");
    d_p_hat = Matrix::Zero(p_hat.unit.rows(), p_hat.unit.cols());
  }

  if (use_cross) {
    inspect("cross.graph", g_hat.unit);
    inspect("cross.text", p_hat.unit);
    const PairLoss c = cfg.loss_variant == LossVariant::symcere
                           ? symcere_cross_modal(g_hat.unit, p_hat.unit,
                                                 build_negative_mask(rows, *train_), w.temperature)
                           : infonce_cross_modal(g_hat.unit, p_hat.unit, w.temperature);
    res.losses.cross_modal = c.value;
    d_g_hat += c.grad_first;
    d_p_hat += c.grad_second;
  }

  if (use_intra) {
    const auto dropped_adj = augment_edge_dropout(adjacency_, cfg.edge_dropout, derive_seed(batch_seed, {1}));
    const Encoded dropped = encode(params, cfg.backbone, dropped_adj, with_grads);
    const NormalizedRows g_aug = maybe_normalize(interaction_repr(dropped.nodes, nu, pairs), "augmented graph repr");
    const PairLoss graph_intra = infonce_intra(g_hat.unit, g_aug.unit, w.temperature);

    const Matrix text_aug = augment_text_mask(text_batch, cfg.text_mask, derive_seed(batch_seed, {2}));
    const NormalizedRows p_aug = maybe_normalize(project_text(params.head, text_aug), "augmented text");
    const PairLoss text_intra = infonce_intra(p_hat.unit, p_aug.unit, w.temperature);

    inspect("intra.graph_aug", g_aug.unit);
    inspect("intra.text_aug", p_aug.unit);
    res.losses.intra_modal = graph_intra.value + text_intra.value;
    d_g_hat += w.alpha * graph_intra.grad_first;
    d_p_hat += w.alpha * text_intra.grad_first;

    if (with_grads) {
      Matrix grad_dropped = Matrix::Zero(dropped.nodes.rows(), dropped.nodes.cols());
      interaction_repr_backward(nu, pairs, unnormalize(g_aug, w.alpha * graph_intra.grad_second), grad_dropped);
      encode_backward(params, cfg.backbone, dropped_adj, dropped, grad_dropped, res.grads);
      const auto pg = project_text_backward(params.head, text_aug, unnormalize(p_aug, w.alpha * text_intra.grad_second));
      res.grads[kProjWeight] += pg.weight;
      res.grads[kProjBias] += pg.bias;
    }
  }

  if (use_bpr) {
    const auto triples = sample_bpr_triples(*train_, rows, derive_seed(batch_seed, {3}));
    // Only rows the triples read are normalised; the rest never reach the loss.
    std::vector<Eigen::Index> used;
    for (const auto& t : triples) {
      used.insert(used.end(), {static_cast<Eigen::Index>(t.user), static_cast<Eigen::Index>(nu + t.positive),
                               static_cast<Eigen::Index>(nu + t.negative)});
    }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    const NormalizedRows used_hat = maybe_normalize(clean.nodes(used, Eigen::all), "graph nodes");
    inspect("bpr.nodes", used_hat.unit);
    Matrix nodes_hat = clean.nodes;
    nodes_hat(used, Eigen::all) = used_hat.unit;
    const BprLoss b = bpr_loss(nodes_hat, nu, triples);
    res.losses.bpr = b.value;
    if (with_grads) {
      const Matrix g_used = unnormalize(used_hat, w.beta * b.grad(used, Eigen::all));
      grad_clean(used, Eigen::all) += g_used;
    }
  }

  const double sq_norm = params.squared_norm();
  res.losses.regularization = w.lambda * sq_norm;
  res.losses.total = total_loss({res.losses.cross_modal, res.losses.intra_modal, res.losses.bpr, sq_norm}, w);

  if (with_grads) {
    interaction_repr_backward(nu, pairs, unnormalize(g_hat, d_g_hat), grad_clean);
    encode_backward(params, cfg.backbone, adjacency_, clean, grad_clean, res.grads);
    if (use_cross || use_intra) {
      const auto pg = project_text_backward(params.head, text_batch, unnormalize(p_hat, d_p_hat));
      res.grads[kProjWeight] += pg.weight;
      res.grads[kProjBias] += pg.bias;
    }
    if (w.lambda > 0.0) {
      const auto tensors = params.tensors();
      for (std::size_t i = 0; i < tensors.size(); ++i) res.grads[i] += 2.0 * w.lambda * *tensors[i].value;
    }
  }
  return res;
}

LossBreakdown Trainer::train_batch(std::span<const std::size_t> rows, std::uint64_t batch_seed) {
  BatchResult res = run_batch(rows, batch_seed, true);
  const auto tensors = state_.params.tensors();
  adam_step(tensors, res.grads, state_.adam, state_.config.adam);
  return res.losses;
}

LossBreakdown Trainer::evaluate_batch(std::span<const std::size_t> rows, std::uint64_t batch_seed) const {
  return run_batch(rows, batch_seed, false).losses;
}

EpochLosses Trainer::train_epoch() {
  const auto& cfg = state_.config;
  std::vector<std::size_t> order(train_->size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(cfg.seed, {0, state_.epoch}));
  std::shuffle(order.begin(), order.end(), rng);

  EpochLosses out;
  out.epoch = state_.epoch;
  for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batch_size, ++b) {
    const auto count = std::min(cfg.batch_size, order.size() - start);
    const auto l = train_batch(std::span(order).subspan(start, count),
                               derive_seed(cfg.seed, {1, state_.epoch, b}));
    out.cross_modal += l.cross_modal;
    out.intra_modal += l.intra_modal;
    out.bpr += l.bpr;
    out.regularization += l.regularization;
    out.total += l.total;
    ++out.batches;
  }
  if (out.batches > 0) {
    const auto n = static_cast<double>(out.batches);
    out.cross_modal /= n;
    out.intra_modal /= n;
    out.bpr /= n;
    out.regularization /= n;
    out.total /= n;
  }
  ++state_.epoch;
  return out;
}

Matrix Trainer::node_embeddings() const {
  return encode_nodes(state_.params, state_.config.backbone, adjacency_);
}

Matrix Trainer::projected_text() const { return project_text(state_.params.head, text_); }

}  // namespace symcere
