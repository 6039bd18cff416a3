#include "symcere/config.hpp"

#include "symcere/hashing.hpp"

#include <fstream>
#include <set>

namespace symcere {

using nlohmann::json;

namespace {

class SectionReader {
 public:
  SectionReader(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      obj_ = &root.at(name_);
      if (!obj_->is_object()) throw UsageError("config section '" + name_ + "' must be an object");
    }
  }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (obj_ == nullptr || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw UsageError("config key " + name_ + "." + key + ": " + e.what());
    }
  }

  template <class T, class Parse>
  void read_as(const std::string& key, T& out, Parse parse) {
    std::string text;
    bool present = obj_ != nullptr && obj_->contains(key);
    read(key, text);
    if (present) out = parse(text);
  }

  void finish() const {
    if (obj_ == nullptr) return;
    for (const auto& item : obj_->items()) {
      if (!seen_.contains(item.key())) throw UsageError("unknown config key " + name_ + "." + item.key());
    }
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

void read_model(SectionReader& s, TrainConfig& c) {
  s.read_as("backbone", c.backbone, parse_backbone);
  s.read("dim", c.dim);
  s.read("layers", c.num_layers);
  s.read("leaky_slope", c.leaky_slope);
}

void read_loss(SectionReader& s, TrainConfig& c) {
  s.read_as("variant", c.loss_variant, parse_loss_variant);
  s.read("normalize", c.normalize);
  s.read("temperature", c.weights.temperature);
  s.read("alpha", c.weights.alpha);
  s.read("beta", c.weights.beta);
  s.read("lambda", c.weights.lambda);
  s.read("edge_dropout", c.edge_dropout);
  s.read("text_mask", c.text_mask);
}

void read_train(SectionReader& s, TrainConfig& c) {
  s.read("epochs", c.epochs);
  s.read("batch_size", c.batch_size);
  s.read("learning_rate", c.adam.learning_rate);
  s.read("adam_beta1", c.adam.beta1);
  s.read("adam_beta2", c.adam.beta2);
  s.read("adam_epsilon", c.adam.epsilon);
  s.read("seed", c.seed);
}

void check_sections(const json& j, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw UsageError("unknown config section '" + item.key() + "'");
  }
}

}  // namespace

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::symcere: return "symcere";
    case LossVariant::infonce: return "infonce";
    case LossVariant::none: return "none";
  }
  return "?";
}

std::string to_string(Backbone b) { return b == Backbone::lightgcn ? "lightgcn" : "ngcf"; }

LossVariant parse_loss_variant(std::string_view s) {
  if (s == "symcere") return LossVariant::symcere;
  if (s == "infonce") return LossVariant::infonce;
  if (s == "none") return LossVariant::none;
  throw UsageError("unknown loss variant '" + std::string(s) + "' (expected symcere, infonce or none)");
}

Backbone parse_backbone(std::string_view s) {
  if (s == "lightgcn") return Backbone::lightgcn;
  if (s == "ngcf") return Backbone::ngcf;
  throw UsageError("unknown backbone '" + std::string(s) + "' (expected lightgcn or ngcf)");
}

json train_config_json(const TrainConfig& c) {
  return json{
      {"model", {{"backbone", to_string(c.backbone)}, {"dim", c.dim}, {"layers", c.num_layers},
                 {"leaky_slope", c.leaky_slope}}},
      {"loss", {{"variant", to_string(c.loss_variant)}, {"normalize", c.normalize},
                {"temperature", c.weights.temperature}, {"alpha", c.weights.alpha},
                {"beta", c.weights.beta}, {"lambda", c.weights.lambda},
                {"edge_dropout", c.edge_dropout}, {"text_mask", c.text_mask}}},
      {"train", {{"epochs", c.epochs}, {"batch_size", c.batch_size},
                 {"learning_rate", c.adam.learning_rate}, {"adam_beta1", c.adam.beta1},
                 {"adam_beta2", c.adam.beta2}, {"adam_epsilon", c.adam.epsilon}, {"seed", c.seed}}},
  };
}

std::string TrainConfig::canonical_json() const { return train_config_json(*this).dump(); }

std::string TrainConfig::hash() const { return sha256_hex(canonical_json()); }

TrainConfig TrainConfig::from_canonical_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid stored config: ") + e.what());
  }
  check_sections(j, {"model", "loss", "train"});
  TrainConfig c;
  SectionReader model(j, "model");
  read_model(model, c);
  model.finish();
  SectionReader loss(j, "loss");
  read_loss(loss, c);
  loss.finish();
  SectionReader train(j, "train");
  read_train(train, c);
  train.finish();
  return c;
}

RunConfig parse_run_config(const json& j) {
  check_sections(j, {"data", "model", "loss", "train", "eval", "diagnostics", "synth"});
  RunConfig c;

  SectionReader data(j, "data");
  data.read("input", c.data.input);
  data.read("dir", c.data.dir);
  data.read("embeddings", c.data.embeddings);
  data.read("train_fraction", c.data.train_fraction);
  data.read("kcore", c.data.kcore);
  data.finish();

  SectionReader model(j, "model");
  read_model(model, c.train);
  model.finish();
  SectionReader loss(j, "loss");
  read_loss(loss, c.train);
  loss.finish();
  SectionReader train(j, "train");
  read_train(train, c.train);
  train.finish();

  SectionReader eval(j, "eval");
  eval.read("topk", c.eval.topk);
  json cosine;
  eval.read("cosine", cosine);
  if (cosine.is_boolean()) {
    c.eval.cosine = cosine.get<bool>();
  } else if (!cosine.is_null()) {
    throw UsageError("config key eval.cosine must be true, false or null");
  }
  eval.read("eval_every", c.eval.eval_every);
  eval.read("patience", c.eval.patience);
  eval.read("per_user_ranks", c.eval.per_user_ranks);
  eval.finish();

  SectionReader diag(j, "diagnostics");
  diag.read("num_pairs", c.diagnostics.num_pairs);
  diag.read("histogram_bins", c.diagnostics.histogram_bins);
  diag.read("seed", c.diagnostics.seed);
  diag.finish();

  SectionReader synth(j, "synth");
  synth.read("num_users", c.synth.num_users);
  synth.read("num_items", c.synth.num_items);
  synth.read("num_clusters", c.synth.num_clusters);
  synth.read("interactions_per_user", c.synth.interactions_per_user);
  synth.read("popularity_exponent", c.synth.popularity_exponent);
  synth.read("text_dim", c.synth.text_dim);
  synth.read("subjective_weight", c.synth.subjective_weight);
  synth.read("noise_scale", c.synth.noise_scale);
  synth.read("in_cluster_prob", c.synth.in_cluster_prob);
  synth.read("seed", c.synth.seed);
  synth.finish();

  if (c.eval.topk.empty()) throw UsageError("eval.topk must not be empty");
  for (auto k : c.eval.topk) {
    if (k < 1) throw UsageError("eval.topk entries must be >= 1");
  }
  if (c.eval.eval_every < 1) throw UsageError("eval.eval_every must be >= 1");
  if (!(c.data.train_fraction > 0.0 && c.data.train_fraction < 1.0)) {
    throw UsageError("data.train_fraction must be in (0, 1)");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  json j = train_config_json(c.train);
  j["data"] = {{"input", c.data.input}, {"dir", c.data.dir}, {"embeddings", c.data.embeddings},
               {"train_fraction", c.data.train_fraction}, {"kcore", c.data.kcore}};
  j["eval"] = {{"topk", c.eval.topk}, {"eval_every", c.eval.eval_every},
               {"patience", c.eval.patience}, {"per_user_ranks", c.eval.per_user_ranks}};
  j["eval"]["cosine"] = c.eval.cosine ? json(*c.eval.cosine) : json(nullptr);
  j["diagnostics"] = {{"num_pairs", c.diagnostics.num_pairs},
                      {"histogram_bins", c.diagnostics.histogram_bins},
                      {"seed", c.diagnostics.seed}};
  j["synth"] = {{"num_users", c.synth.num_users},
                {"num_items", c.synth.num_items},
                {"num_clusters", c.synth.num_clusters},
                {"interactions_per_user", c.synth.interactions_per_user},
                {"popularity_exponent", c.synth.popularity_exponent},
                {"text_dim", c.synth.text_dim},
                {"subjective_weight", c.synth.subjective_weight},
                {"noise_scale", c.synth.noise_scale},
                {"in_cluster_prob", c.synth.in_cluster_prob},
                {"seed", c.synth.seed}};
  return j;
}

}  // namespace symcere
