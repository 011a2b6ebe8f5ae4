#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rmsh/similarity.hpp"

namespace rmsh {

// N K-bit binary codes packed into 64-bit words for popcount distance.
// Convention used everywhere codes exist: +1 maps to bit 1, -1 to bit 0.
// Bit i of code n lives in words[n*W + i/64] at position i%64; padding bits
// beyond K are always zero.
class PackedCodes {
 public:
  PackedCodes() = default;
  PackedCodes(int code_bits, std::size_t count, std::vector<std::uint64_t> words,
              std::vector<std::string> ids);

  int code_bits() const { return code_bits_; }
  std::size_t count() const { return count_; }
  std::size_t words_per_code() const { return words_per_code_; }

  std::span<const std::uint64_t> code(std::size_t n) const {
    return {words_.data() + n * words_per_code_, words_per_code_};
  }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t n) const { return ids_[n]; }

  // Index of the code with the given identifier; throws naming the id when absent.
  std::size_t index_of(const std::string& id) const;

  // Unpacks code n back to a +1/-1 row.
  Eigen::VectorXd unpack(std::size_t n) const;

 private:
  int code_bits_ = 0;
  std::size_t count_ = 0;
  std::size_t words_per_code_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<std::string> ids_;
};

// Packs a matrix of +1/-1 codes (one row per sample). Rejects entries other
// than exactly +1 or -1. Empty `ids` defaults to decimal row indices.
PackedCodes pack(const Eigen::MatrixXd& codes, std::vector<std::string> ids = {});

int hamming(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
int hamming(const PackedCodes& a, std::size_t i, const PackedCodes& b, std::size_t j);

struct SearchHit {
  std::string id;
  int distance = 0;
};

struct SearchResult {
  std::vector<SearchHit> hits;  // ascending distance, ties by ascending id
};

// Exact top-k by linear scan. k > N returns all N entries.
SearchResult search_topk(const PackedCodes& index, std::span<const std::uint64_t> query,
                         int query_bits, std::size_t k);

// Ranks the whole database for one query: row indices of `index` ordered by
// (distance, id). The building block behind search_topk and the evaluator.
std::vector<std::size_t> rank_all(const PackedCodes& index, std::span<const std::uint64_t> query,
                                  int query_bits);

// Cross-modal Hamming-distance distributions conditioned on similarity level.
// Pair (i,j) lands in the first bucket whose upper edge is >= S_ij, with
// S = 0 always in bucket 0 when the first edge is 0. Histogram h has
// counts[bucket][distance] with distance in [0, K].
struct DistanceHistogram {
  std::vector<double> bucket_edges;
  std::vector<std::vector<std::uint64_t>> counts;

  std::uint64_t total() const;
};

DistanceHistogram distance_histogram(const PackedCodes& a, const PackedCodes& b,
                                     const SimilarityMatrix& similarity,
                                     std::vector<double> bucket_edges);

// Code file: magic "RMSHCODE", K u32, N u64, words little-endian, then N
// length-prefixed (u32) identifier strings.
void save_codes(const std::string& path, const PackedCodes& codes);
PackedCodes load_codes(const std::string& path);

}  // namespace rmsh
