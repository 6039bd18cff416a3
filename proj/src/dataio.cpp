#include "symcere/dataio.hpp"

#include "symcere/hashing.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace symcere {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

template <typename T>
bool parse_integer(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string sanitize_field(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Loading and filtering

LoadReport load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read interaction file " + path.string());

  LoadReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_tabs(line);
    if (fields.size() < 3 || fields[0].empty() || fields[1].empty()) {
      ++report.malformed_lines;
      report.malformed_line_numbers.push_back(line_no);
      continue;
    }
    std::int64_t ts = 0;
    if (!parse_integer(fields[2], ts)) {
      if (line_no == 1) {
        report.had_header = true;
        continue;
      }
      throw DataError("non-integer timestamp field at line " + std::to_string(line_no));
    }
    if (ts < 0) throw DataError("negative timestamp at line " + std::to_string(line_no));

    InteractionRecord rec{std::string(fields[0]), std::string(fields[1]), ts, std::nullopt};
    if (fields.size() > 3) {
      std::string review(fields[3]);
      for (std::size_t f = 4; f < fields.size(); ++f) {
        review += '\t';
        review += fields[f];
      }
      rec.review_text = std::move(review);
    }
    report.records.push_back(std::move(rec));
  }
  if (report.records.empty()) throw DataError("zero valid records in " + path.string());
  return report;
}

void write_interactions(const std::filesystem::path& path,
                        std::span<const InteractionRecord> records) {
  std::ostringstream out;
  out << "user\titem\ttimestamp\treview\n";
  for (const auto& r : records) {
    out << r.user_key << '\t' << r.item_key << '\t' << r.timestamp;
    if (r.review_text) out << '\t' << sanitize_field(*r.review_text);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<InteractionRecord> k_core_filter(std::span<const InteractionRecord> records,
                                             std::size_t k) {
  if (k == 0) throw std::invalid_argument("k_core_filter: k must be >= 1");

  std::unordered_map<std::string_view, std::size_t> user_ids, item_ids;
  std::vector<std::size_t> rec_user(records.size()), rec_item(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    rec_user[r] = user_ids.try_emplace(records[r].user_key, user_ids.size()).first->second;
    rec_item[r] = item_ids.try_emplace(records[r].item_key, item_ids.size()).first->second;
  }

  std::vector<bool> alive(records.size(), true);
  while (true) {
    // Degrees over distinct (user, item) pairs among surviving records.
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 0; r < records.size(); ++r) {
      if (alive[r]) pairs.emplace(rec_user[r], rec_item[r]);
    }
    std::vector<std::size_t> user_deg(user_ids.size(), 0), item_deg(item_ids.size(), 0);
    for (const auto& [u, i] : pairs) {
      ++user_deg[u];
      ++item_deg[i];
    }
    bool changed = false;
    for (std::size_t r = 0; r < records.size(); ++r) {
      if (alive[r] && (user_deg[rec_user[r]] < k || item_deg[rec_item[r]] < k)) {
        alive[r] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::vector<InteractionRecord> out;
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (alive[r]) out.push_back(records[r]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Indexed datasets

TrainPartition::TrainPartition(std::size_t num_users, std::size_t num_items,
                               std::size_t num_train_items, std::vector<TrainInteraction> rows)
    : num_users_(num_users),
      num_items_(num_items),
      num_train_items_(num_train_items),
      rows_(std::move(rows)),
      user_items_(num_users) {
  for (const auto& r : rows_) {
    if (r.user >= num_users_ || r.item >= num_items_) {
      throw DataError("train row index out of range");
    }
    user_items_[r.user].push_back(r.item);
  }
  for (auto& items : user_items_) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
}

bool TrainPartition::contains(Index user, Index item) const {
  const auto& items = user_items_[user];
  return std::binary_search(items.begin(), items.end(), item);
}

std::vector<std::size_t> TrainPartition::item_frequencies() const {
  std::vector<std::size_t> freq(num_items_, 0);
  for (const auto& r : rows_) ++freq[r.item];
  return freq;
}

InteractionSet::InteractionSet(std::vector<std::string> user_keys,
                               std::vector<std::string> item_keys, std::size_t num_train_items,
                               std::vector<TrainInteraction> train,
                               std::vector<TestInteraction> test)
    : user_keys_(std::move(user_keys)), item_keys_(std::move(item_keys)), test_(std::move(test)) {
  const std::size_t nu = user_keys_.size();
  const std::size_t ni = item_keys_.size();
  if (num_train_items > ni) throw DataError("num_train_items exceeds catalogue size");

  std::vector<bool> seen_row(train.size(), false);
  std::vector<bool> seen_item(num_train_items, false);
  std::vector<std::int64_t> last_train(nu, std::numeric_limits<std::int64_t>::min());
  for (const auto& r : train) {
    if (r.user >= nu || r.item >= ni) throw DataError("train row index out of range");
    if (r.item >= num_train_items) throw DataError("train item outside the train-item block");
    if (r.embedding_row >= train.size() || seen_row[r.embedding_row]) {
      throw DataError("embedding_row values must be unique and dense in [0, |train|)");
    }
    seen_row[r.embedding_row] = true;
    seen_item[r.item] = true;
    last_train[r.user] = std::max(last_train[r.user], r.timestamp);
  }
  if (std::find(seen_item.begin(), seen_item.end(), false) != seen_item.end()) {
    throw DataError("every item below num_train_items must occur in train");
  }
  for (const auto& t : test_) {
    if (t.user >= nu || t.item >= ni) throw DataError("test row index out of range");
    if (t.timestamp < last_train[t.user]) {
      throw DataError("temporal split violated: test row precedes a train row of user " +
                      user_keys_[t.user]);
    }
  }
  train_ = std::make_shared<const TrainPartition>(nu, ni, num_train_items, std::move(train));
}

void InteractionSet::set_sources(std::vector<std::size_t> train_sources,
                                 std::vector<std::size_t> test_sources) {
  if (train_sources.size() != train_->size() || test_sources.size() != test_.size()) {
    throw std::invalid_argument("set_sources: size mismatch");
  }
  train_sources_ = std::move(train_sources);
  test_sources_ = std::move(test_sources);
}

std::vector<std::vector<Index>> InteractionSet::test_items_by_user() const {
  std::vector<std::vector<Index>> out(num_users());
  for (const auto& t : test_) {
    if (!train_->contains(t.user, t.item)) out[t.user].push_back(t.item);
  }
  for (auto& items : out) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return out;
}

std::size_t train_count(std::size_t n, double train_fraction) {
  if (n == 0) return 0;
  // The epsilon keeps e.g. 10 * 0.7 from rounding up to 8.
  auto count = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * train_fraction - 1e-9));
  count = std::max<std::size_t>(count, 1);
  if (n >= 2) count = std::min(count, n - 1);
  return count;
}

InteractionSet temporal_split(std::span<const InteractionRecord> records, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("temporal_split: train_fraction must be in (0, 1)");
  }
  if (records.empty()) throw DataError("temporal_split: no records");

  std::unordered_map<std::string_view, std::vector<std::size_t>> by_user;
  for (std::size_t r = 0; r < records.size(); ++r) by_user[records[r].user_key].push_back(r);

  std::vector<bool> is_train(records.size(), false);
  for (auto& [user, rows] : by_user) {
    // stable_sort keeps input order among equal timestamps.
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return records[a].timestamp < records[b].timestamp;
    });
    const auto n_train = train_count(rows.size(), train_fraction);
    for (std::size_t k = 0; k < n_train; ++k) is_train[rows[k]] = true;
  }

  std::unordered_map<std::string_view, Index> user_index, item_index;
  std::vector<std::string> user_keys, item_keys;
  auto intern = [](std::unordered_map<std::string_view, Index>& index,
                   std::vector<std::string>& keys, const std::string& key) {
    auto [it, inserted] = index.try_emplace(key, static_cast<Index>(keys.size()));
    if (inserted) keys.push_back(key);
    return it->second;
  };

  std::vector<TrainInteraction> train;
  std::vector<std::size_t> train_sources, test_sources;
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (!is_train[r]) continue;
    const auto u = intern(user_index, user_keys, records[r].user_key);
    const auto i = intern(item_index, item_keys, records[r].item_key);
    train.push_back({u, i, records[r].timestamp, train.size()});
    train_sources.push_back(r);
  }
  const std::size_t num_train_items = item_keys.size();

  std::vector<TestInteraction> test;
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (is_train[r]) continue;
    const auto u = user_index.at(records[r].user_key);
    const auto i = intern(item_index, item_keys, records[r].item_key);
    test.push_back({u, i, records[r].timestamp});
    test_sources.push_back(r);
  }

  InteractionSet set(std::move(user_keys), std::move(item_keys), num_train_items,
                     std::move(train), std::move(test));
  set.set_sources(std::move(train_sources), std::move(test_sources));
  return set;
}

// ---------------------------------------------------------------------------
// Negative masks

ContrastiveBatch::ContrastiveBatch(std::vector<std::size_t> anchors, std::vector<std::uint8_t> mask)
    : anchors_(std::move(anchors)), mask_(std::move(mask)) {
  if (mask_.size() != anchors_.size() * anchors_.size()) {
    throw std::invalid_argument("ContrastiveBatch: mask must be |B| x |B|");
  }
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    if (mask_[i * anchors_.size() + i]) {
      throw std::invalid_argument("ContrastiveBatch: diagonal must be false");
    }
  }
}

ContrastiveBatch ContrastiveBatch::all_negatives(std::vector<std::size_t> anchors) {
  const auto b = anchors.size();
  std::vector<std::uint8_t> mask(b * b, 1);
  for (std::size_t i = 0; i < b; ++i) mask[i * b + i] = 0;
  return ContrastiveBatch(std::move(anchors), std::move(mask));
}

std::size_t ContrastiveBatch::excluded_count() const {
  const auto b = anchors_.size();
  const auto negatives = static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1));
  return b * (b > 0 ? b - 1 : 0) - negatives;
}

ContrastiveBatch build_negative_mask(std::span<const std::size_t> batch,
                                     const TrainPartition& train) {
  const auto b = batch.size();
  std::vector<std::uint8_t> mask(b * b, 0);
  for (std::size_t i = 0; i < b; ++i) {
    if (batch[i] >= train.size()) throw std::out_of_range("build_negative_mask: bad train row");
    const auto user = train.row(batch[i]).user;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      mask[i * b + j] = train.contains(user, train.row(batch[j]).item) ? 0 : 1;
    }
  }
  return ContrastiveBatch(std::vector<std::size_t>(batch.begin(), batch.end()), std::move(mask));
}

// ---------------------------------------------------------------------------
// Manifest and split files

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  nlohmann::json j;
  j["format"] = "symcere-dataset";
  j["version"] = 1;
  j["num_users"] = m.num_users;
  j["num_items"] = m.num_items;
  j["num_train_items"] = m.num_train_items;
  j["num_train"] = m.num_train;
  j["num_test"] = m.num_test;
  j["num_eval_users"] = m.num_eval_users;
  j["train_fraction"] = m.train_fraction;
  j["kcore"] = m.kcore;
  j["source_sha256"] = m.source_sha256;
  j["embedding_file"] = m.embedding_file;
  j["embedding_sha256"] = m.embedding_sha256;
  j["embedding_dim"] = m.embedding_dim;
  j["ground_truth_file"] = m.ground_truth_file;
  write_file_atomic(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid manifest " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "symcere-dataset" || j.value("version", 0) != 1) {
    throw DataError("unsupported manifest format in " + path.string());
  }
  DatasetManifest m;
  try {
    m.num_users = j.at("num_users");
    m.num_items = j.at("num_items");
    m.num_train_items = j.at("num_train_items");
    m.num_train = j.at("num_train");
    m.num_test = j.at("num_test");
    m.num_eval_users = j.at("num_eval_users");
    m.train_fraction = j.at("train_fraction");
    m.kcore = j.at("kcore");
    m.source_sha256 = j.at("source_sha256");
    m.embedding_file = j.at("embedding_file");
    m.embedding_sha256 = j.at("embedding_sha256");
    m.embedding_dim = j.at("embedding_dim");
    m.ground_truth_file = j.value("ground_truth_file", "");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void write_split(const std::filesystem::path& dir, const InteractionSet& dataset,
                 std::span<const InteractionRecord> records) {
  const bool with_text = !records.empty() && !dataset.train_sources().empty();
  std::ostringstream train;
  train << "user_idx\titem_idx\ttimestamp\tembedding_row\tuser\titem\treview\n";
  const auto& rows = dataset.train().rows();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& t = rows[r];
    train << t.user << '\t' << t.item << '\t' << t.timestamp << '\t' << t.embedding_row << '\t'
          << dataset.user_keys()[t.user] << '\t' << dataset.item_keys()[t.item] << '\t';
    if (with_text) {
      const auto& rec = records[dataset.train_sources()[r]];
      if (rec.review_text) train << sanitize_field(*rec.review_text);
    }
    train << '\n';
  }
  write_file_atomic(dir / "train.tsv", train.str());

  std::ostringstream test;
  test << "user_idx\titem_idx\ttimestamp\tuser\titem\n";
  for (const auto& t : dataset.test()) {
    test << t.user << '\t' << t.item << '\t' << t.timestamp << '\t' << dataset.user_keys()[t.user]
         << '\t' << dataset.item_keys()[t.item] << '\n';
  }
  write_file_atomic(dir / "test.tsv", test.str());
}

InteractionSet read_split(const std::filesystem::path& dir, const DatasetManifest& m) {
  std::vector<std::string> user_keys(m.num_users), item_keys(m.num_items);
  auto assign_key = [](std::vector<std::string>& keys, std::size_t idx, std::string_view key,
                       const char* what) {
    if (idx >= keys.size()) throw DataError(std::string(what) + " index out of range");
    if (keys[idx].empty()) {
      keys[idx] = std::string(key);
    } else if (keys[idx] != key) {
      throw DataError(std::string("inconsistent ") + what + " key for index " + std::to_string(idx));
    }
  };

  auto read_rows = [&](const std::filesystem::path& path, std::size_t min_fields, auto&& on_row) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no == 1) continue;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto f = split_tabs(line);
      if (f.size() < min_fields) {
        throw DataError(path.string() + ": malformed line " + std::to_string(line_no));
      }
      on_row(f, line_no);
    }
  };

  std::vector<TrainInteraction> train;
  read_rows(dir / "train.tsv", 6, [&](const auto& f, std::size_t line_no) {
    TrainInteraction t;
    if (!parse_integer(f[0], t.user) || !parse_integer(f[1], t.item) ||
        !parse_integer(f[2], t.timestamp) || !parse_integer(f[3], t.embedding_row)) {
      throw DataError("train.tsv: bad integer at line " + std::to_string(line_no));
    }
    assign_key(user_keys, t.user, f[4], "user");
    assign_key(item_keys, t.item, f[5], "item");
    train.push_back(t);
  });
  std::vector<TestInteraction> test;
  read_rows(dir / "test.tsv", 5, [&](const auto& f, std::size_t line_no) {
    TestInteraction t;
    if (!parse_integer(f[0], t.user) || !parse_integer(f[1], t.item) ||
        !parse_integer(f[2], t.timestamp)) {
      throw DataError("test.tsv: bad integer at line " + std::to_string(line_no));
    }
    assign_key(user_keys, t.user, f[3], "user");
    assign_key(item_keys, t.item, f[4], "item");
    test.push_back(t);
  });

  if (train.size() != m.num_train || test.size() != m.num_test) {
    throw DataError("split sizes disagree with manifest");
  }
  for (const auto& k : user_keys) {
    if (k.empty()) throw DataError("user without rows in split files");
  }
  for (const auto& k : item_keys) {
    if (k.empty()) throw DataError("item without rows in split files");
  }
  return InteractionSet(std::move(user_keys), std::move(item_keys), m.num_train_items,
                        std::move(train), std::move(test));
}

PreparedDataset load_prepared(const std::filesystem::path& dir,
                              const std::optional<std::filesystem::path>& embeddings_override) {
  auto manifest = read_manifest(dir / "manifest.json");
  auto dataset = read_split(dir, manifest);

  std::optional<FloatMatrix> embeddings;
  std::filesystem::path emb_path;
  if (embeddings_override) {
    emb_path = *embeddings_override;
  } else if (!manifest.embedding_file.empty()) {
    emb_path = dir / manifest.embedding_file;
    if (!manifest.embedding_sha256.empty() && sha256_file(emb_path) != manifest.embedding_sha256) {
      throw DataError("embedding file hash does not match manifest: " + emb_path.string());
    }
  }
  if (!emb_path.empty()) {
    embeddings = read_embedding_file(emb_path);
    if (static_cast<std::size_t>(embeddings->rows()) != dataset.train().size()) {
      throw DataError("embedding file has " + std::to_string(embeddings->rows()) +
                      " rows but the train split has " + std::to_string(dataset.train().size()));
    }
  }
  return {std::move(manifest), std::move(dataset), std::move(embeddings)};
}

}  // namespace symcere
