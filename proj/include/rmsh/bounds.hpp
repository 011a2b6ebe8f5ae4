#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmsh/labels.hpp"
#include "rmsh/similarity.hpp"

namespace rmsh {

using BigInt = boost::multiprecision::cpp_int;

// Per-tag Bernoulli parameters estimated from a label matrix.
struct TagDistribution {
  std::vector<double> thetas;
};

enum class NeighborMode { kCardinality, kExact };
NeighborMode parse_neighbor_mode(const std::string& name);
std::string neighbor_mode_name(NeighborMode mode);

// Everything needed to pick the robust parameter for a given code length:
// the label-entropy estimate, the neighbor-information moments, and the
// resulting interval [delta_min, delta_max]. An empty interval is a
// first-class result, never silently clamped away.
struct BoundsReport {
  int code_bits = 0;                  // K
  double h_label = 0.0;               // estimated H(L), bits
  double neighbor_entropy_mean = 0.0; // E(H_*), bits
  double neighbor_entropy_var = 0.0;  // D(H_*), bits^2
  double confidence = 0.9;            // Chebyshev level p
  int delta_min = 0;
  int delta_max = 0;                  // 0 when the entropy constraint admits no delta
  bool interval_empty = false;
  std::string note;

  // Midpoint of a non-empty interval, rounded down; what delta=auto resolves to.
  int midpoint() const { return (delta_min + delta_max) / 2; }
};

// Binary codebook with guaranteed pairwise minimum distance; the constructive
// witness backing the covering-argument lower bound on small instances.
struct BinaryCodebook {
  int code_bits = 0;
  int min_distance = 0;
  std::vector<std::uint32_t> words;

  std::size_t size() const { return words.size(); }
};

// H(p) = -p log2 p - (1-p) log2 (1-p), with 0 log 0 = 0. Bits everywhere in
// this module; the training losses use natural log and the two never mix.
double binary_entropy(double p);

// |B^K_delta| = sum_{i=0}^{delta} C(K,i), exact.
BigInt hamming_ball_volume(int code_bits, int radius);

// ceil(2^K / sum_{i=0}^{delta-1} C(K,i)): a lower bound on the maximum number
// of K-bit codewords with pairwise distance >= delta.
BigInt gv_lower_bound(int code_bits, int min_distance);

// 2^{H(delta/K) K}, an upper bound on the ball volume for delta/K <= 1/2.
double ball_entropy_bound(int code_bits, int radius);

// Lexicographic first-fit codebook over all K-bit words; size is always at
// least gv_lower_bound(K, delta). Enumeration-bounded to K <= 20.
BinaryCodebook greedy_codebook(int code_bits, int min_distance);

// Verifies the min-distance invariant by brute force (test/oracle helper).
bool codebook_distance_holds(const BinaryCodebook& book);

TagDistribution estimate_tag_probs(const LabelMatrix& labels);

// H(L) = sum_i H(theta_i), assuming independent tags.
double label_entropy(const TagDistribution& dist);

// Largest delta in [1, K/2] with H((delta-1)/K) <= 1 - h_label/K, or nullopt
// when even delta=1 fails (h_label > K).
std::optional<int> delta_upper_bound(int code_bits, double h_label);

struct NeighborStats {
  double mean = 0.0;
  double variance = 0.0;
};

// Per-sample neighbor-information summary. Cardinality mode scores each row
// by its tag count; exact mode evaluates the empirical entropy of the row's
// similarity-level distribution.
NeighborStats neighbor_entropy_stats(const LabelMatrix& labels,
                                     const SimilarityMatrix& similarity,
                                     NeighborMode mode);

// ceil(sqrt(variance / (1 - confidence)) + mean), confidence in (1/2, 1).
int delta_lower_bound(double mean, double variance, double confidence);

// Full composition over a label matrix; `mode` selects the neighbor-stats
// estimator. Deterministic: identical inputs give identical reports.
BoundsReport effective_delta_range(const LabelMatrix& labels, int code_bits,
                                   double confidence, NeighborMode mode);

}  // namespace rmsh
