#include "symcere/synth.hpp"

#include "symcere/hashing.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace symcere {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Inverse-CDF draw from unnormalised weights.
std::size_t draw_weighted(const std::vector<double>& cumulative, std::mt19937_64& rng) {
  const double target = unit_uniform(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

template <typename T>
void put_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T take_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("ground truth file: truncated");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_users == 0 || num_items == 0 || num_clusters == 0 || interactions_per_user == 0) {
    throw UsageError("synth: counts must be positive");
  }
  if (num_clusters > num_items) throw UsageError("synth: num_clusters exceeds num_items");
  if (interactions_per_user > num_items) {
    throw UsageError("synth: infeasible config, interactions_per_user > num_items");
  }
  if (num_clusters + 1 > text_dim) {
    throw UsageError("synth: text_dim must exceed num_clusters (axes must be orthonormal)");
  }
  if (popularity_exponent < 0.0) throw UsageError("synth: popularity_exponent must be >= 0");
  if (!(subjective_weight >= 0.0 && subjective_weight <= 1.0)) {
    throw UsageError("synth: subjective_weight must be in [0, 1]");
  }
  if (noise_scale < 0.0) throw UsageError("synth: noise_scale must be >= 0");
  if (!(in_cluster_prob >= 0.0 && in_cluster_prob <= 1.0)) {
    throw UsageError("synth: in_cluster_prob must be in [0, 1]");
  }
}

SynthDataset generate_synthetic_dataset(const SynthConfig& config, double train_fraction) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto num_clusters = config.num_clusters;
  const auto dim = static_cast<Eigen::Index>(config.text_dim);

  // Orthonormal cluster axes plus the subjective axis from a QR of a gaussian matrix.
  Matrix seed_matrix(dim, static_cast<Eigen::Index>(num_clusters + 1));
  for (Eigen::Index i = 0; i < seed_matrix.size(); ++i) seed_matrix.data()[i] = gauss(rng);
  const Eigen::HouseholderQR<Matrix> qr(seed_matrix);
  const Matrix q = qr.householderQ() * Matrix::Identity(dim, seed_matrix.cols());
  Matrix axes = q.transpose();  // (C+1) x dim
  const RowVector subjective = axes.row(static_cast<Eigen::Index>(num_clusters));
  const Matrix cluster_axes = axes.topRows(static_cast<Eigen::Index>(num_clusters));

  // Items: balanced cluster assignment, popularity ranks from a shuffle.
  std::vector<std::size_t> item_cluster(config.num_items);
  for (std::size_t i = 0; i < config.num_items; ++i) item_cluster[i] = i % num_clusters;
  std::shuffle(item_cluster.begin(), item_cluster.end(), rng);
  std::vector<std::size_t> rank(config.num_items);
  std::iota(rank.begin(), rank.end(), std::size_t{1});
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> popularity(config.num_items);
  for (std::size_t i = 0; i < config.num_items; ++i) {
    popularity[i] = std::pow(static_cast<double>(rank[i]), -config.popularity_exponent);
  }
  const double pop_sum = std::accumulate(popularity.begin(), popularity.end(), 0.0);
  for (auto& p : popularity) p /= pop_sum;

  std::vector<std::vector<std::size_t>> cluster_items(num_clusters);
  for (std::size_t i = 0; i < config.num_items; ++i) cluster_items[item_cluster[i]].push_back(i);
  std::vector<std::vector<double>> cluster_cdf(num_clusters);
  for (std::size_t c = 0; c < num_clusters; ++c) {
    double acc = 0.0;
    for (auto i : cluster_items[c]) cluster_cdf[c].push_back(acc += popularity[i]);
  }
  std::vector<double> global_cdf(config.num_items);
  std::partial_sum(popularity.begin(), popularity.end(), global_cdf.begin());

  std::vector<InteractionRecord> records;
  records.reserve(config.num_users * config.interactions_per_user);
  FloatMatrix record_embeddings(static_cast<Eigen::Index>(config.num_users * config.interactions_per_user), dim);
  std::vector<int> record_sentiment;
  std::vector<std::size_t> generator_user_cluster(config.num_users);

  const double obj_weight = std::sqrt(1.0 - config.subjective_weight * config.subjective_weight);
  std::unordered_set<std::size_t> taken;
  for (std::size_t u = 0; u < config.num_users; ++u) {
    const std::size_t preferred = static_cast<std::size_t>(rng() % num_clusters);
    generator_user_cluster[u] = preferred;
    taken.clear();
    for (std::size_t j = 0; j < config.interactions_per_user; ++j) {
      std::size_t item = 0;
      bool found = false;
      for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
        std::size_t cluster = preferred;
        if (num_clusters > 1 && unit_uniform(rng) >= config.in_cluster_prob) {
          cluster = static_cast<std::size_t>(rng() % (num_clusters - 1));
          if (cluster >= preferred) ++cluster;
        }
        item = cluster_items[cluster][draw_weighted(cluster_cdf[cluster], rng)];
        found = !taken.contains(item);
      }
      if (!found) {
        // Rejection stalled: draw from the remaining catalogue by popularity.
        std::vector<double> cdf(config.num_items);
        double acc = 0.0;
        for (std::size_t i = 0; i < config.num_items; ++i) {
          cdf[i] = acc += taken.contains(i) ? 0.0 : popularity[i];
        }
        item = draw_weighted(cdf, rng);
      }
      taken.insert(item);

      RowVector objective = cluster_axes.row(static_cast<Eigen::Index>(item_cluster[item]));
      if (config.noise_scale > 0.0) {
        RowVector noise(dim);
        for (Eigen::Index c = 0; c < dim; ++c) noise(c) = gauss(rng) * config.noise_scale;
        noise -= noise.dot(subjective) * subjective;  // stay in the objective subspace
        objective += noise;
        objective /= objective.norm();
      }
      const int sentiment = (rng() & 1u) ? 1 : -1;
      const RowVector text = obj_weight * objective + config.subjective_weight * sentiment * subjective;

      record_embeddings.row(static_cast<Eigen::Index>(records.size())) = text.cast<float>();
      record_sentiment.push_back(sentiment);
      records.push_back({"u" + std::to_string(u), "i" + std::to_string(item),
                         static_cast<std::int64_t>(j), std::nullopt});
    }
  }

  InteractionSet dataset = temporal_split(records, train_fraction);
  SynthDataset out{std::move(records), std::move(record_embeddings), std::move(record_sentiment),
                   {}, std::move(dataset), {}, {}, train_fraction};
  const auto& ds = out.dataset;
  out.text.resize(static_cast<Eigen::Index>(ds.train().size()), dim);
  for (std::size_t r = 0; r < ds.train().size(); ++r) {
    out.text.row(static_cast<Eigen::Index>(ds.train().row(r).embedding_row)) =
        out.record_embeddings.row(static_cast<Eigen::Index>(ds.train_sources()[r]));
  }

  // Ground truth re-indexed onto the dataset's item / user indices.
  out.truth.cluster_axes = cluster_axes;
  out.truth.subjective_axis = subjective;
  out.truth.item_cluster.resize(ds.num_items());
  out.truth.item_popularity.resize(ds.num_items());
  double present = 0.0;
  for (std::size_t i = 0; i < ds.num_items(); ++i) {
    const auto gen_item = std::stoul(ds.item_keys()[i].substr(1));
    out.truth.item_cluster[i] = static_cast<Index>(item_cluster[gen_item]);
    out.truth.item_popularity[i] = popularity[gen_item];
    present += popularity[gen_item];
  }
  for (auto& p : out.truth.item_popularity) p /= present;
  out.user_cluster.resize(ds.num_users());
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    out.user_cluster[u] = static_cast<Index>(generator_user_cluster[std::stoul(ds.user_keys()[u].substr(1))]);
  }
  return out;
}

void write_ground_truth(const std::filesystem::path& path, const SynthGroundTruth& truth) {
  std::string out;
  out.append("SYMG", 4);
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint64_t>(out, truth.item_cluster.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(truth.cluster_axes.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(truth.cluster_axes.cols()));
  for (auto c : truth.item_cluster) put_le<std::uint32_t>(out, c);
  for (auto p : truth.item_popularity) put_le<double>(out, p);
  for (Eigen::Index i = 0; i < truth.cluster_axes.size(); ++i) put_le<double>(out, truth.cluster_axes.data()[i]);
  for (Eigen::Index i = 0; i < truth.subjective_axis.size(); ++i) put_le<double>(out, truth.subjective_axis(i));
  write_file_atomic(path, out);
}

SynthGroundTruth read_ground_truth(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  if (in.size() < 4 || in.compare(0, 4, "SYMG") != 0) throw DataError("ground truth file: bad magic");
  std::size_t pos = 4;
  if (take_le<std::uint32_t>(in, pos) != 1) throw DataError("ground truth file: unsupported version");
  const auto num_items = take_le<std::uint64_t>(in, pos);
  const auto num_clusters = take_le<std::uint32_t>(in, pos);
  const auto dim = take_le<std::uint32_t>(in, pos);
  const std::uint64_t expected = pos + num_items * 12 + (std::uint64_t{num_clusters} + 1) * dim * 8;
  if (in.size() != expected) throw DataError("ground truth file: size mismatch (truncated payload?)");

  SynthGroundTruth truth;
  truth.item_cluster.resize(num_items);
  truth.item_popularity.resize(num_items);
  for (auto& c : truth.item_cluster) {
    c = take_le<std::uint32_t>(in, pos);
    if (c >= num_clusters) throw DataError("ground truth file: cluster id out of range");
  }
  for (auto& p : truth.item_popularity) p = take_le<double>(in, pos);
  truth.cluster_axes.resize(num_clusters, dim);
  for (Eigen::Index i = 0; i < truth.cluster_axes.size(); ++i) truth.cluster_axes.data()[i] = take_le<double>(in, pos);
  truth.subjective_axis.resize(dim);
  for (Eigen::Index i = 0; i < truth.subjective_axis.size(); ++i) truth.subjective_axis(i) = take_le<double>(in, pos);
  return truth;
}

void write_synthetic_dataset(const std::filesystem::path& dir, const SynthDataset& synth,
                             const SynthConfig& config) {
  std::filesystem::create_directories(dir);
  write_interactions(dir / "interactions.tsv", synth.records);
  write_split(dir, synth.dataset, synth.records);
  write_embedding_file(dir / "embeddings.bin", synth.text);
  write_ground_truth(dir / "ground_truth.bin", synth.truth);

  DatasetManifest m;
  m.num_users = synth.dataset.num_users();
  m.num_items = synth.dataset.num_items();
  m.num_train_items = synth.dataset.train().num_train_items();
  m.num_train = synth.dataset.train().size();
  m.num_test = synth.dataset.test().size();
  const auto tests = synth.dataset.test_items_by_user();
  m.num_eval_users = static_cast<std::size_t>(
      std::count_if(tests.begin(), tests.end(), [](const auto& t) { return !t.empty(); }));
  m.train_fraction = synth.train_fraction;
  m.kcore = 0;
  m.source_sha256 = sha256_file(dir / "interactions.tsv");
  m.embedding_file = "embeddings.bin";
  m.embedding_sha256 = sha256_file(dir / "embeddings.bin");
  m.embedding_dim = config.text_dim;
  m.ground_truth_file = "ground_truth.bin";
  write_manifest(dir / "manifest.json", m);
}

}  // namespace symcere
