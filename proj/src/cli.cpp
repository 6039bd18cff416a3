#include "symcere/cli.hpp"

#include "symcere/config.hpp"
#include "symcere/diagnostics.hpp"
#include "symcere/driver.hpp"
#include "symcere/hashing.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace symcere::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string loss;
  bool no_norm = false;
  std::string backbone;
  std::size_t k = 0;
  std::string out;
  std::string embeddings;
  std::string topk;
  std::string data;
  std::string input;
  std::string checkpoint;
  std::string resume;
  std::size_t epochs = 0;
  bool allow_config_mismatch = false;
  bool per_user = false;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* k_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
};

std::vector<std::size_t> parse_topk(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &pos);
    } catch (const std::exception&) {
      throw UsageError("--topk expects a comma-separated list of positive integers");
    }
    if (pos != part.size() || v == 0) throw UsageError("--topk expects a comma-separated list of positive integers");
    ks.push_back(static_cast<std::size_t>(v));
  }
  if (ks.empty()) throw UsageError("--topk must not be empty");
  return ks;
}

// File config first, then flags. `k_is_kcore` selects what --k means.
RunConfig effective_config(const Flags& f, bool k_is_kcore) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };
  if (given(f.seed_opt)) {
    c.train.seed = f.seed;
    c.synth.seed = f.seed;
    c.diagnostics.seed = f.seed;
  }
  if (!f.loss.empty()) c.train.loss_variant = parse_loss_variant(f.loss);
  if (f.no_norm) c.train.normalize = false;
  if (!f.backbone.empty()) c.train.backbone = parse_backbone(f.backbone);
  if (given(f.k_opt)) {
    if (k_is_kcore) {
      c.data.kcore = f.k;
    } else {
      c.train.num_layers = f.k;
    }
  }
  if (given(f.epochs_opt)) c.train.epochs = f.epochs;
  if (!f.topk.empty()) c.eval.topk = parse_topk(f.topk);
  if (!f.embeddings.empty()) c.data.embeddings = f.embeddings;
  if (!f.data.empty()) c.data.dir = f.data;
  if (!f.input.empty()) c.data.input = f.input;
  if (f.per_user) c.eval.per_user_ranks = true;
  c.train.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

fs::path require_out(const Flags& f) {
  if (f.out.empty()) throw UsageError("--out DIR is required");
  fs::create_directories(f.out);
  return f.out;
}

fs::path require_data(const RunConfig& c) {
  if (c.data.dir.empty()) throw UsageError("a prepared dataset is required (--data DIR or data.dir)");
  return c.data.dir;
}

std::optional<fs::path> embeddings_override(const RunConfig& c) {
  if (c.data.embeddings.empty()) return std::nullopt;
  return fs::path(c.data.embeddings);
}

// Content hashes of every file a run reads.
json input_hashes(const fs::path& data_dir, const DatasetManifest& m, const RunConfig& c) {
  json j;
  for (const char* name : {"manifest.json", "train.tsv", "test.tsv"}) {
    j[name] = sha256_file(data_dir / name);
  }
  if (!c.data.embeddings.empty()) {
    j["embeddings"] = sha256_file(c.data.embeddings);
  } else if (!m.embedding_file.empty()) {
    j["embeddings"] = m.embedding_sha256;
  }
  return j;
}

void echo_run(const fs::path& out, const RunConfig& c, const json& inputs) {
  write_text(out / "config.json", to_json(c).dump(2) + "\n");
  json j{{"seed", c.train.seed}, {"inputs", inputs}};
  write_text(out / "inputs.json", j.dump(2) + "\n");
}

std::optional<SynthGroundTruth> load_truth(const fs::path& dir, const DatasetManifest& m) {
  if (m.ground_truth_file.empty()) return std::nullopt;
  return read_ground_truth(dir / m.ground_truth_file);
}

json losses_json(const EpochLosses& l) {
  return json{{"epoch", l.epoch + 1},     {"cross_modal", l.cross_modal}, {"intra_modal", l.intra_modal},
              {"bpr", l.bpr},            {"regularization", l.regularization},
              {"total", l.total},        {"batches", l.batches}};
}

void write_metrics(const fs::path& out, const MetricsReport& r) {
  write_text(out / "metrics.json", r.to_json().dump(2) + "\n");
  write_text(out / "metrics.tsv", r.to_table());
  if (!r.per_user.empty()) write_text(out / "per_user_ranks.tsv", r.per_user_table());
}

// ---------------------------------------------------------------------------

json cmd_prepare(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = effective_config(f, true);
  if (c.data.input.empty()) throw UsageError("prepare needs an interaction file (--input PATH or data.input)");
  const fs::path dir = require_out(f);

  const LoadReport report = load_interactions(c.data.input);
  if (report.malformed_lines > 0) err << "skipped " << report.malformed_lines << " malformed line(s)\n";
  const auto records = c.data.kcore > 0 ? k_core_filter(report.records, c.data.kcore) : report.records;
  if (records.empty()) throw DataError("no interactions survive the " + std::to_string(c.data.kcore) + "-core filter");
  const InteractionSet dataset = temporal_split(records, c.data.train_fraction);
  (void)build_adjacency(dataset.train());
  write_split(dir, dataset, records);

  DatasetManifest m;
  m.num_users = dataset.num_users();
  m.num_items = dataset.num_items();
  m.num_train_items = dataset.train().num_train_items();
  m.num_train = dataset.train().size();
  m.num_test = dataset.test().size();
  for (const auto& t : dataset.test_items_by_user()) m.num_eval_users += t.empty() ? 0 : 1;
  m.train_fraction = c.data.train_fraction;
  m.kcore = c.data.kcore;
  m.source_sha256 = sha256_file(c.data.input);
  if (!c.data.embeddings.empty()) {
    const FloatMatrix emb = read_embedding_file(c.data.embeddings);
    if (static_cast<std::size_t>(emb.rows()) != m.num_train) {
      throw DataError("embedding file has " + std::to_string(emb.rows()) + " rows, the train split has " +
                      std::to_string(m.num_train));
    }
    write_embedding_file(dir / "embeddings.bin", emb);
    m.embedding_file = "embeddings.bin";
    m.embedding_sha256 = sha256_file(dir / "embeddings.bin");
    m.embedding_dim = static_cast<std::size_t>(emb.cols());
  }
  write_manifest(dir / "manifest.json", m);
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");

  out << "users " << m.num_users << ", items " << m.num_items << ", train " << m.num_train << ", test "
      << m.num_test << "\n";
  return json{{"out", dir.string()},         {"num_users", m.num_users}, {"num_items", m.num_items},
              {"num_train", m.num_train},    {"num_test", m.num_test},   {"malformed_lines", report.malformed_lines}};
}

json cmd_synth(const Flags& f, std::ostream& out, std::ostream&) {
  const RunConfig c = effective_config(f, true);
  const fs::path dir = require_out(f);
  const SynthDataset synth = generate_synthetic_dataset(c.synth, c.data.train_fraction);
  write_synthetic_dataset(dir, synth, c.synth);
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");
  out << "users " << synth.dataset.num_users() << ", items " << synth.dataset.num_items() << ", train "
      << synth.dataset.train().size() << ", test " << synth.dataset.test().size() << "\n";
  return json{{"out", dir.string()},
              {"num_users", synth.dataset.num_users()},
              {"num_items", synth.dataset.num_items()},
              {"num_train", synth.dataset.train().size()},
              {"num_test", synth.dataset.test().size()}};
}

json cmd_train(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = effective_config(f, false);
  const fs::path data_dir = require_data(c);
  const fs::path run = require_out(f);
  const PreparedDataset data = load_prepared(data_dir, embeddings_override(c));
  echo_run(run, c, input_hashes(data_dir, data.manifest, c));

  std::optional<TrainState> resume;
  if (!f.resume.empty()) {
    CheckpointLoadOptions opts{&c.train, f.allow_config_mismatch, &err};
    resume = load_checkpoint(f.resume, opts);
  }

  const auto truth = load_truth(data_dir, data.manifest);
  const auto row_items = embedding_row_items(data.dataset.train());
  std::ofstream log(run / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  std::ofstream eval_log(run / "eval_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  std::ofstream anchoring;
  auto record_anchoring = [&](std::size_t epoch, const Trainer& t) {
    if (!truth || t.text_dim() == 0) return;
    if (!anchoring.is_open()) {
      anchoring.open(run / "anchoring.tsv", resume ? std::ios::app : std::ios::trunc);
      if (!resume) anchoring << "epoch\tobjective\tsubjective\tresidual\n";
    }
    const auto e = anchoring_energy(t.projected_text(), row_items, *truth, t.state().params.head.weight);
    anchoring.precision(17);
    anchoring << epoch << '\t' << e.objective << '\t' << e.subjective << '\t' << e.residual << '\n';
    anchoring.flush();
  };

  TrainHooks hooks;
  hooks.on_start = [&](const Trainer& t) {
    if (!resume) record_anchoring(0, t);
  };
  hooks.on_epoch = [&](const EpochLosses& l, double secs) {
    json j = losses_json(l);
    j["wall_seconds"] = secs;
    log << j.dump() << '\n';
    log.flush();
    out << "epoch " << l.epoch + 1 << " loss " << l.total << "\n";
  };
  hooks.on_eval = [&](std::size_t epoch, const MetricsReport& r, const Trainer& t) {
    json j{{"epoch", epoch}, {"metrics", r.to_json()["metrics"]}};
    eval_log << j.dump() << '\n';
    eval_log.flush();
    record_anchoring(epoch, t);
    save_checkpoint(t.state(), run / "checkpoint.bin");
  };

  const TrainOutcome result = train_model(c.train, c.eval, data.dataset, text_matrix(data), hooks, std::move(resume));
  save_checkpoint(result.state, run / "checkpoint.bin");
  write_metrics(run, result.final_metrics);
  out << result.final_metrics.to_lines();
  return json{{"run_dir", run.string()},
              {"epochs", result.state.epoch},
              {"stopped_early", result.stopped_early},
              {"best_epoch", result.best_epoch},
              {"metrics", result.final_metrics.to_json()["metrics"]}};
}

struct LoadedModel {
  PreparedDataset data;
  TrainState state;
  NormalizedAdjacency adjacency;
  Matrix nodes;
};

LoadedModel load_model(const Flags& f, const RunConfig& c) {
  if (f.checkpoint.empty()) throw UsageError("--checkpoint PATH is required");
  LoadedModel m{load_prepared(require_data(c), embeddings_override(c)), load_checkpoint(f.checkpoint), {}, {}};
  m.adjacency = build_adjacency(m.data.dataset.train());
  m.nodes = encode_nodes(m.state.params, m.state.config.backbone, m.adjacency);
  return m;
}

json cmd_eval(const Flags& f, std::ostream& out, std::ostream&) {
  const RunConfig c = effective_config(f, false);
  const LoadedModel m = load_model(f, c);
  const EvalOptions options{eval_cosine(c.eval, m.state.config), c.eval.per_user_ranks};
  const MetricsReport r = evaluate_all(m.nodes, m.data.dataset, c.eval.topk, options);
  if (!f.out.empty()) {
    const fs::path run = require_out(f);
    echo_run(run, c, input_hashes(c.data.dir, m.data.manifest, c));
    write_metrics(run, r);
  }
  out << r.to_lines();
  return json{{"metrics", r.to_json()["metrics"]}, {"num_users", r.num_users}};
}

json uniformity_json(const UniformityStats& s) {
  return json{{"mean", s.mean}, {"std_dev", s.std_dev}, {"min", s.min},  {"p25", s.p25},
              {"p75", s.p75},   {"max", s.max},         {"pairs", s.sample_size}, {"seed", s.seed}};
}

json cmd_diagnose(const Flags& f, std::ostream& out, std::ostream&) {
  const RunConfig c = effective_config(f, false);
  const LoadedModel m = load_model(f, c);
  const fs::path run = require_out(f);
  echo_run(run, c, input_hashes(c.data.dir, m.data.manifest, c));

  const auto& train = m.data.dataset.train();
  const std::size_t nu = train.num_users();
  const auto n_items = static_cast<Eigen::Index>(train.num_train_items());
  const Matrix items = m.nodes.middleRows(static_cast<Eigen::Index>(nu), n_items);
  const bool normalize = m.state.config.normalize;
  auto loss_facing = [&](const Matrix& x) { return normalize ? normalize_rows(x).unit : x; };

  auto pairs_for = [&](Eigen::Index rows) {
    const auto n = static_cast<std::size_t>(rows);
    return std::min(c.diagnostics.num_pairs, n * (n - 1) / 2);
  };

  json report;
  report["uniformity"]["graph"] = uniformity_json(cosine_similarity_stats(items, pairs_for(items.rows()), c.diagnostics.seed));

  std::vector<UserItem> pairs;
  for (const auto& row : train.rows()) pairs.push_back({row.user, row.item});
  const Matrix graph_repr = loss_facing(interaction_repr(m.nodes, nu, pairs));
  const Matrix text = text_matrix(m.data);
  if (text.rows() > 0) {
    Matrix projected_rows(text.rows(), m.state.params.head.weight.cols());
    const Matrix projected = project_text(m.state.params.head, text);
    for (const auto& row : train.rows()) {
      projected_rows.row(static_cast<Eigen::Index>(&row - train.rows().data())) =
          projected.row(static_cast<Eigen::Index>(row.embedding_row));
    }
    const Matrix text_side = loss_facing(projected_rows);
    report["uniformity"]["text"] =
        uniformity_json(cosine_similarity_stats(text_side, pairs_for(text_side.rows()), c.diagnostics.seed));
    const Matrix fused = 0.5 * (graph_repr + text_side);
    report["uniformity"]["fused"] =
        uniformity_json(cosine_similarity_stats(fused, pairs_for(fused.rows()), c.diagnostics.seed));

    if (const auto truth = load_truth(c.data.dir, m.data.manifest)) {
      const auto e = anchoring_energy(projected, embedding_row_items(train), *truth, m.state.params.head.weight);
      report["anchoring"] = {{"objective", e.objective}, {"subjective", e.subjective}, {"residual", e.residual}};
    }
  }

  const DimensionVariance dv = dimension_variance(loss_facing(items), c.diagnostics.histogram_bins);
  std::vector<double> dims(dv.variance.size());
  for (std::size_t i = 0; i < dims.size(); ++i) dims[i] = static_cast<double>(i);
  write_text(run / "dimension_variance.tsv", columns_tsv({"dim", "variance"}, {dims, dv.variance}));
  write_text(run / "dimension_histogram.tsv", histogram_tsv(dv.histogram));
  double mean_var = 0.0;
  for (double v : dv.variance) mean_var += v;
  report["dimension_variance"] = {{"mean", mean_var / static_cast<double>(dv.variance.size())},
                                  {"min", *std::min_element(dv.variance.begin(), dv.variance.end())},
                                  {"max", *std::max_element(dv.variance.begin(), dv.variance.end())}};

  auto freq = train.item_frequencies();
  freq.resize(train.num_train_items());
  try {
    const PopularityNorm pn = popularity_norm_correlation(items, freq);
    write_text(run / "popularity_norm.tsv", columns_tsv({"log1p_frequency", "norm"}, {pn.log_frequency, pn.norm}));
    report["popularity_norm_r"] = pn.pearson_r;
  } catch (const NumericError& e) {
    report["popularity_norm_r"] = nullptr;
    report["popularity_norm_note"] = e.what();
  }

  write_text(run / "diagnostics.json", report.dump(2) + "\n");
  out << report.dump() << "\n";
  return json{{"run_dir", run.string()}};
}

json cmd_ablate(const Flags& f, std::ostream& out, std::ostream&) {
  const RunConfig c = effective_config(f, false);
  const fs::path data_dir = require_data(c);
  const fs::path run = require_out(f);
  const PreparedDataset data = load_prepared(data_dir, embeddings_override(c));
  echo_run(run, c, input_hashes(data_dir, data.manifest, c));
  const Matrix text = text_matrix(data);
  const std::size_t k = c.eval.topk.front();

  std::vector<Backbone> backbones{Backbone::lightgcn, Backbone::ngcf};
  if (!f.backbone.empty()) backbones = {c.train.backbone};

  std::ostringstream table;
  table.precision(6);
  table << "backbone\tmetric\tsymcere_norm\tsymcere_no_norm\tinfonce_norm\tinfonce_no_norm\tmin_drop_pct\n";
  std::ostringstream cells_tsv;
  cells_tsv.precision(17);
  cells_tsv << "backbone\tvariant\tnormalize\thr\tndcg\tdrop_hr_pct\tdrop_ndcg_pct\n";
  json result = json::array();

  for (const Backbone b : backbones) {
    std::vector<AblationCell> cells;
    for (const LossVariant v : {LossVariant::symcere, LossVariant::infonce}) {
      for (const bool norm : {true, false}) {
        TrainConfig cfg = c.train;
        cfg.backbone = b;
        cfg.loss_variant = v;
        cfg.normalize = norm;
        const TrainOutcome o = train_model(cfg, c.eval, data.dataset, text);
        cells.push_back({b, v, norm, o.final_metrics.hr_at(k), o.final_metrics.ndcg_at(k)});
        out << to_string(b) << ' ' << to_string(v) << (norm ? " norm" : " no-norm") << " HR@" << k << ' '
            << cells.back().hr << " NDCG@" << k << ' ' << cells.back().ndcg << "\n";
      }
    }
    const AblationSummary s = summarize_ablation(cells);
    const auto& full = s.cells.front();
    // Cells are in grid order: symcere norm, symcere no-norm, infonce norm, infonce no-norm.
    table << to_string(b) << "\tHR@" << k;
    for (const auto& cell : cells) table << '\t' << cell.hr;
    table << '\t' << s.min_drop_hr << '\n';
    table << to_string(b) << "\tNDCG@" << k;
    for (const auto& cell : cells) table << '\t' << cell.ndcg;
    table << '\t' << s.min_drop_ndcg << '\n';

    json jb{{"backbone", to_string(b)}, {"min_drop_hr_pct", s.min_drop_hr}, {"min_drop_ndcg_pct", s.min_drop_ndcg}};
    for (const auto& cell : cells) {
      const double dh = drop_percent(full.hr, cell.hr);
      const double dn = drop_percent(full.ndcg, cell.ndcg);
      cells_tsv << to_string(b) << '\t' << to_string(cell.variant) << '\t' << (cell.normalize ? 1 : 0) << '\t'
                << cell.hr << '\t' << cell.ndcg << '\t' << dh << '\t' << dn << '\n';
      jb["cells"].push_back({{"variant", to_string(cell.variant)},
                             {"normalize", cell.normalize},
                             {"hr", cell.hr},
                             {"ndcg", cell.ndcg},
                             {"drop_hr_pct", dh},
                             {"drop_ndcg_pct", dn}});
    }
    result.push_back(jb);
  }
  write_text(run / "ablation.tsv", table.str());
  write_text(run / "ablation_cells.tsv", cells_tsv.str());
  write_text(run / "ablation.json", result.dump(2) + "\n");
  out << table.str();
  return json{{"run_dir", run.string()}, {"k", k}, {"backbones", result}};
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration");
  sub->add_option("--seed", f.seed, "Seed for training, generation and diagnostics");
  sub->add_option("--out", f.out, "Output directory");
}

void add_model(CLI::App* sub, Flags& f) {
  sub->add_option("--data", f.data, "Prepared dataset directory");
  sub->add_option("--loss", f.loss, "Cross-modal loss: symcere, infonce or none");
  sub->add_flag("--no-norm", f.no_norm, "Disable L2 normalisation before the losses");
  sub->add_option("--backbone", f.backbone, "Graph encoder: lightgcn or ngcf");
  sub->add_option("--k", f.k, "Number of propagation layers");
  sub->add_option("--epochs", f.epochs, "Training epochs");
  sub->add_option("--embeddings", f.embeddings, "Text embedding file replacing the dataset's");
  sub->add_option("--topk", f.topk, "Comma-separated cutoffs, e.g. 10,20");
}

json status_line(const std::string& command, int code, const std::string& kind, const std::string& message) {
  json j{{"status", code == kOk ? "ok" : "error"}, {"command", command}, {"exit_code", code}};
  if (code != kOk) {
    j["error"] = kind;
    j["message"] = message;
  }
  return j;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal contrastive recommendation: data preparation, training, evaluation and diagnostics",
               "symcere"};
  app.require_subcommand(1);
  Flags f;

  auto* prepare = app.add_subcommand("prepare", "Filter, split and index an interaction dump");
  add_common(prepare, f);
  prepare->add_option("--input", f.input, "Tab-separated interactions: user, item, timestamp[, review]");
  prepare->add_option("--k", f.k, "k-core threshold (default 5)");
  prepare->add_option("--embeddings", f.embeddings, "Text embeddings aligned with the train split");

  auto* synth = app.add_subcommand("synth", "Generate a planted-structure synthetic dataset");
  add_common(synth, f);

  std::vector<CLI::App*> model_cmds;
  for (const auto& [name, desc] : std::vector<std::pair<std::string, std::string>>{
           {"train", "Train a model and evaluate it periodically"},
           {"eval", "Evaluate a checkpoint with the all-ranking protocol"},
           {"diagnose", "Geometric diagnostics of a checkpoint"},
           {"ablate", "Loss-variant by normalisation grid with drop percentages"}}) {
    auto* sub = app.add_subcommand(name, desc);
    add_common(sub, f);
    add_model(sub, f);
    model_cmds.push_back(sub);
  }
  for (auto* sub : {model_cmds[1], model_cmds[2]}) {
    sub->add_option("--checkpoint", f.checkpoint, "Checkpoint written by train")->required();
  }
  model_cmds[1]->add_flag("--per-user", f.per_user, "Also write per-user truth ranks");
  model_cmds[0]->add_option("--resume", f.resume, "Continue from a checkpoint");
  model_cmds[0]->add_flag("--allow-config-mismatch", f.allow_config_mismatch,
                          "Resume even if the checkpoint was trained with a different config");

  std::string command = args.empty() ? "" : args.front();
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kOk;
    out << status_line(command, kUsage, "usage", e.what()).dump() << '\n';
    return kUsage;
  }

  // Each subcommand registers its own options; look up the parsed ones.
  CLI::App* active = app.get_subcommands().front();
  f.seed_opt = active->get_option_no_throw("--seed");
  f.k_opt = active->get_option_no_throw("--k");
  f.epochs_opt = active->get_option_no_throw("--epochs");

  int code = kOk;
  std::string kind;
  std::string message;
  json extra;
  try {
    if (active == prepare) {
      extra = cmd_prepare(f, out, err);
    } else if (active == synth) {
      extra = cmd_synth(f, out, err);
    } else if (active == model_cmds[0]) {
      extra = cmd_train(f, out, err);
    } else if (active == model_cmds[1]) {
      extra = cmd_eval(f, out, err);
    } else if (active == model_cmds[2]) {
      extra = cmd_diagnose(f, out, err);
    } else {
      extra = cmd_ablate(f, out, err);
    }
  } catch (const UsageError& e) {
    code = kUsage, kind = "usage", message = e.what();
  } catch (const std::invalid_argument& e) {
    code = kUsage, kind = "usage", message = e.what();
  } catch (const NumericError& e) {
    code = kNumeric, kind = "numeric", message = e.what();
  } catch (const DataError& e) {
    code = kData, kind = "data", message = e.what();
  } catch (const std::exception& e) {
    code = kData, kind = "data", message = e.what();
  }
  if (code != kOk) err << "error: " << message << '\n';
  json status = status_line(active->get_name(), code, kind, message);
  if (code == kOk && extra.is_object()) status.update(extra);
  out << status.dump() << '\n';
  return code;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace symcere::cli
