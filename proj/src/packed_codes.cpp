#include "rmsh/packed_codes.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "rmsh/error.hpp"

namespace rmsh {

PackedCodes::PackedCodes(int code_bits, std::size_t count, std::vector<std::uint64_t> words,
                         std::vector<std::string> ids)
    : code_bits_(code_bits), count_(count),
      words_per_code_((static_cast<std::size_t>(code_bits) + 63) / 64),
      words_(std::move(words)), ids_(std::move(ids)) {
  if (code_bits_ < 1) throw invalid_argument("packed codes need code_bits >= 1");
  if (words_.size() != count_ * words_per_code_) {
    throw invalid_argument("packed code word count does not match count*words_per_code");
  }
  if (ids_.size() != count_) {
    throw invalid_argument("identifier count does not match code count");
  }
  // Padding must be zero or distances would be corrupted.
  const int tail_bits = code_bits_ % 64;
  if (tail_bits != 0) {
    const std::uint64_t pad_mask = ~((std::uint64_t{1} << tail_bits) - 1);
    for (std::size_t n = 0; n < count_; ++n) {
      if (words_[n * words_per_code_ + words_per_code_ - 1] & pad_mask) {
        throw invalid_argument("nonzero padding bits in packed code " + std::to_string(n));
      }
    }
  }
}

std::size_t PackedCodes::index_of(const std::string& id) const {
  for (std::size_t n = 0; n < count_; ++n) {
    if (ids_[n] == id) return n;
  }
  throw invalid_argument("unknown identifier: " + id);
}

Eigen::VectorXd PackedCodes::unpack(std::size_t n) const {
  Eigen::VectorXd row(code_bits_);
  const std::uint64_t* w = words_.data() + n * words_per_code_;
  for (int i = 0; i < code_bits_; ++i) {
    row(i) = (w[i / 64] >> (i % 64)) & 1 ? 1.0 : -1.0;
  }
  return row;
}

PackedCodes pack(const Eigen::MatrixXd& codes, std::vector<std::string> ids) {
  const auto n = static_cast<std::size_t>(codes.rows());
  const int k = static_cast<int>(codes.cols());
  if (n == 0 || k == 0) throw invalid_argument("cannot pack an empty code matrix");
  const std::size_t words_per_code = (static_cast<std::size_t>(k) + 63) / 64;
  std::vector<std::uint64_t> words(n * words_per_code, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (int c = 0; c < k; ++c) {
      const double v = codes(static_cast<Eigen::Index>(r), c);
      if (v == 1.0) {
        words[r * words_per_code + static_cast<std::size_t>(c) / 64] |=
            std::uint64_t{1} << (c % 64);
      } else if (v != -1.0) {
        throw invalid_argument("code entry at row " + std::to_string(r) + ", bit " +
                               std::to_string(c) + " is not +1/-1");
      }
    }
  }
  if (ids.empty()) {
    ids.resize(n);
    for (std::size_t r = 0; r < n; ++r) ids[r] = std::to_string(r);
  }
  return PackedCodes(k, n, std::move(words), std::move(ids));
}

int hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) throw invalid_argument("hamming: word counts differ");
  int d = 0;
  for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

int hamming(const PackedCodes& a, std::size_t i, const PackedCodes& b, std::size_t j) {
  if (a.code_bits() != b.code_bits()) throw invalid_argument("hamming: code lengths differ");
  return hamming(a.code(i), b.code(j));
}

std::vector<std::size_t> rank_all(const PackedCodes& index, std::span<const std::uint64_t> query,
                                  int query_bits) {
  if (query_bits != index.code_bits()) {
    throw invalid_argument("query code length " + std::to_string(query_bits) +
                           " does not match index code length " +
                           std::to_string(index.code_bits()));
  }
  const std::size_t n = index.count();
  std::vector<int> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = hamming(index.code(i), query);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (dist[x] != dist[y]) return dist[x] < dist[y];
    return index.id(x) < index.id(y);
  });
  return order;
}

SearchResult search_topk(const PackedCodes& index, std::span<const std::uint64_t> query,
                         int query_bits, std::size_t k) {
  if (k < 1) throw invalid_argument("search_topk needs k >= 1");
  const std::vector<std::size_t> order = rank_all(index, query, query_bits);
  const std::size_t take = std::min(k, order.size());
  SearchResult result;
  result.hits.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    result.hits.push_back({index.id(order[r]), hamming(index.code(order[r]), query)});
  }
  return result;
}

std::uint64_t DistanceHistogram::total() const {
  std::uint64_t t = 0;
  for (const auto& bucket : counts) {
    for (std::uint64_t c : bucket) t += c;
  }
  return t;
}

DistanceHistogram distance_histogram(const PackedCodes& a, const PackedCodes& b,
                                     const SimilarityMatrix& similarity,
                                     std::vector<double> bucket_edges) {
  if (a.code_bits() != b.code_bits()) {
    throw invalid_argument("distance_histogram: code lengths differ");
  }
  if (similarity.rows() != a.count() || similarity.cols() != b.count()) {
    throw invalid_argument("distance_histogram: similarity shape does not match code counts");
  }
  if (bucket_edges.empty() || !std::is_sorted(bucket_edges.begin(), bucket_edges.end()) ||
      bucket_edges.back() < 1.0) {
    throw invalid_argument("bucket edges must be ascending and cover similarity up to 1");
  }
  DistanceHistogram hist;
  hist.bucket_edges = std::move(bucket_edges);
  hist.counts.assign(hist.bucket_edges.size(),
                     std::vector<std::uint64_t>(static_cast<std::size_t>(a.code_bits()) + 1, 0));
  std::vector<double> sim_row;
  for (std::size_t i = 0; i < a.count(); ++i) {
    similarity.dense_row(i, sim_row);
    for (std::size_t j = 0; j < b.count(); ++j) {
      const double s = sim_row[j];
      std::size_t bucket = 0;
      while (hist.bucket_edges[bucket] < s) ++bucket;
      const int d = hamming(a.code(i), b.code(j));
      ++hist.counts[bucket][static_cast<std::size_t>(d)];
    }
  }
  return hist;
}

namespace {

constexpr char kCodeMagic[8] = {'R', 'M', 'S', 'H', 'C', 'O', 'D', 'E'};

template <typename T>
void write_le(std::ofstream& out, T value) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& what) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (static_cast<std::size_t>(in.gcount()) != sizeof(T)) {
    throw io_error("truncated code file while reading " + what);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void save_codes(const std::string& path, const PackedCodes& codes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot create file: " + path);
  out.write(kCodeMagic, sizeof(kCodeMagic));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(codes.code_bits()));
  write_le<std::uint64_t>(out, codes.count());
  for (std::size_t n = 0; n < codes.count(); ++n) {
    for (std::uint64_t w : codes.code(n)) write_le<std::uint64_t>(out, w);
  }
  for (std::size_t n = 0; n < codes.count(); ++n) {
    const std::string& id = codes.id(n);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  if (!out) throw io_error("write failed: " + path);
}

PackedCodes load_codes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kCodeMagic, sizeof(magic)) != 0) {
    throw io_error("bad magic in code file: " + path);
  }
  const auto k = read_le<std::uint32_t>(in, "code length");
  const auto n = read_le<std::uint64_t>(in, "code count");
  if (k == 0 || n == 0) throw io_error("code file declares an empty index: " + path);
  if (k > (1u << 20) || n > (std::uint64_t{1} << 32)) {
    throw io_error("code file declares implausible dimensions: " + path);
  }
  const std::size_t words_per_code = (static_cast<std::size_t>(k) + 63) / 64;
  std::vector<std::uint64_t> words(static_cast<std::size_t>(n) * words_per_code);
  for (std::uint64_t& w : words) w = read_le<std::uint64_t>(in, "code words");
  std::vector<std::string> ids(static_cast<std::size_t>(n));
  for (auto& id : ids) {
    const auto len = read_le<std::uint32_t>(in, "identifier length");
    if (len > (1u << 20)) throw io_error("implausible identifier length in " + path);
    id.resize(len);
    in.read(id.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(in.gcount()) != len) {
      throw io_error("truncated code file while reading identifiers");
    }
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw io_error("trailing bytes in code file: " + path);
  }
  return PackedCodes(static_cast<int>(k), static_cast<std::size_t>(n), std::move(words),
                     std::move(ids));
}

}  // namespace rmsh
