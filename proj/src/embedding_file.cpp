#include "symcere/dataio.hpp"

#include "symcere/hashing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace symcere {

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_embedding_file(const std::filesystem::path& path, const FloatMatrix& rows) {
  const auto count = static_cast<std::uint64_t>(rows.rows());
  const auto dim = static_cast<std::uint32_t>(rows.cols());
  std::string out;
  out.reserve(kEmbeddingHeaderBytes + count * dim * 4);
  out.append(kMagic, 4);
  put_le(out, kVersion);
  put_le(out, count);
  put_le(out, dim);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      const float v = rows(r, c);
      if (!std::isfinite(v)) {
        throw NumericError("write_embedding_file: non-finite value (NaN/Inf) at row " +
                           std::to_string(r));
      }
      put_le(out, v);
    }
  }
  write_file_atomic(path, out);
}

FloatMatrix read_embedding_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < kEmbeddingHeaderBytes) throw DataError("embedding file: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("embedding file: bad magic");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kVersion) {
    throw DataError("embedding file: unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(bytes.data() + 8);
  const auto dim = get_le<std::uint32_t>(bytes.data() + 16);
  const std::uint64_t payload = bytes.size() - kEmbeddingHeaderBytes;
  if (dim != 0 && count > payload / 4 / dim + 1) throw DataError("embedding file: truncated payload");
  const std::uint64_t expected = count * dim * 4ull;
  if (payload < expected) throw DataError("embedding file: truncated payload");
  if (payload > expected) throw DataError("embedding file: trailing bytes after payload");

  FloatMatrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  const char* p = bytes.data() + kEmbeddingHeaderBytes;
  for (std::uint64_t r = 0; r < count; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c, p += 4) {
      const auto v = get_le<float>(p);
      if (!std::isfinite(v)) {
        throw DataError("embedding file: non-finite value at row " + std::to_string(r));
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return out;
}

}  // namespace symcere
