#include "symcere/hashing.hpp"
#include "symcere/trainer.hpp"

#include <bit>
#include <cstring>
#include <ostream>

namespace symcere {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'M', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.append(p, sizeof(T));
  }
  void str(std::string_view s) {
    pod<std::uint64_t>(s.size());
    bytes_.append(s);
  }
  void matrix(const Matrix& m) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    bytes_.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  void raw(const char* p, std::size_t n) { bytes_.append(p, n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <class T>
  T pod() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Matrix matrix() {
    const auto rows = pod<std::uint64_t>();
    const auto cols = pod<std::uint64_t>();
    if (cols != 0 && rows > (bytes_.size() - pos_) / sizeof(double) / cols) throw DataError("checkpoint truncated");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const auto n = sizeof(double) * rows * cols;
    need(n);
    std::memcpy(m.data(), bytes_.data() + pos_, n);
    pos_ += n;
    return m;
  }
  void expect(const char* p, std::size_t n, const char* what) {
    need(n);
    if (std::memcmp(bytes_.data() + pos_, p, n) != 0) throw DataError(std::string("checkpoint: ") + what);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw DataError("checkpoint truncated");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

// Parameter skeleton matching a config; shapes come from the file.
ModelParams skeleton(const TrainConfig& c) {
  ModelParams p;
  p.graph.num_layers = c.num_layers;
  p.graph.layer_weights = GraphParams::uniform_layer_weights(c.num_layers);
  if (c.backbone == Backbone::ngcf) {
    NgcfWeights w;
    w.leaky_slope = c.leaky_slope;
    w.layers.resize(c.num_layers);
    p.graph.ngcf = std::move(w);
  }
  return p;
}

bool same_structure(const TrainConfig& a, const TrainConfig& b) {
  return a.backbone == b.backbone && a.dim == b.dim && a.num_layers == b.num_layers;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, 4);
  w.pod<std::uint32_t>(kVersion);
  w.str(state.config.hash());
  w.str(state.config.canonical_json());
  w.pod<std::uint64_t>(state.epoch);
  w.pod<std::uint64_t>(state.adam.step);
  const auto tensors = state.params.tensors();
  const bool has_moments = !state.adam.first.empty();
  if (has_moments && (state.adam.first.size() != tensors.size() || state.adam.second.size() != tensors.size())) {
    throw std::invalid_argument("save_checkpoint: optimizer moments do not match the parameters");
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  w.pod<std::uint8_t>(has_moments ? 1 : 0);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    w.str(tensors[i].name);
    w.matrix(*tensors[i].value);
    if (has_moments) {
      w.matrix(state.adam.first[i]);
      w.matrix(state.adam.second[i]);
    }
  }
  write_file_atomic(path, w.bytes());
}

TrainState load_checkpoint(const std::filesystem::path& path, const CheckpointLoadOptions& options) {
  Reader r(read_file(path));
  r.expect(kMagic, 4, "bad magic");
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const std::string stored_hash = r.str();
  const std::string config_text = r.str();
  if (sha256_hex(config_text) != stored_hash) throw DataError("checkpoint: config hash does not match stored config");

  TrainState state;
  state.config = TrainConfig::from_canonical_json(config_text);
  state.epoch = r.pod<std::uint64_t>();
  state.adam.step = r.pod<std::uint64_t>();
  state.params = skeleton(state.config);

  const auto count = r.pod<std::uint32_t>();
  const bool has_moments = r.pod<std::uint8_t>() != 0;
  auto tensors = state.params.tensors();
  if (count != tensors.size()) throw DataError("checkpoint: tensor count does not match the stored config");
  for (auto& t : tensors) {
    const auto name = r.str();
    if (name != t.name) throw DataError("checkpoint: expected tensor " + t.name + ", found " + name);
    *t.value = r.matrix();
    if (has_moments) {
      state.adam.first.push_back(r.matrix());
      state.adam.second.push_back(r.matrix());
    }
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");

  if (options.expected != nullptr && options.expected->hash() != stored_hash) {
    if (!options.allow_config_mismatch) {
      throw DataError("checkpoint config hash " + stored_hash.substr(0, 12) +
                      " does not match the requested config " + options.expected->hash().substr(0, 12));
    }
    if (!same_structure(state.config, *options.expected)) {
      throw DataError("checkpoint: backbone, dim or layer count differ; override not possible");
    }
    if (options.warnings != nullptr) {
      *options.warnings << "warning: checkpoint config differs from the requested config; continuing with the requested config\n";
    }
    state.config = *options.expected;
    if (state.params.graph.ngcf) state.params.graph.ngcf->leaky_slope = state.config.leaky_slope;
  }
  return state;
}

}  // namespace symcere
