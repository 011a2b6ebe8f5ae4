#include "rmsh/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "rmsh/error.hpp"

namespace rmsh {

NeighborMode parse_neighbor_mode(const std::string& name) {
  if (name == "cardinality") return NeighborMode::kCardinality;
  if (name == "exact") return NeighborMode::kExact;
  throw invalid_argument("unknown neighbor mode: " + name + " (expected cardinality|exact)");
}

std::string neighbor_mode_name(NeighborMode mode) {
  return mode == NeighborMode::kCardinality ? "cardinality" : "exact";
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw invalid_argument("binary_entropy needs p in [0,1], got " + std::to_string(p));
  }
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

namespace {

// sum_{i=0}^{upto} C(n,i) exactly, via the multiplicative recurrence.
BigInt partial_binomial_sum(int n, int upto) {
  BigInt sum = 0;
  BigInt term = 1;  // C(n,0)
  for (int i = 0; i <= upto; ++i) {
    sum += term;
    term = term * (n - i) / (i + 1);
  }
  return sum;
}

}  // namespace

BigInt hamming_ball_volume(int code_bits, int radius) {
  if (code_bits < 0 || radius < 0 || radius > code_bits) {
    throw invalid_argument("hamming_ball_volume needs 0 <= radius <= code_bits");
  }
  return partial_binomial_sum(code_bits, radius);
}

BigInt gv_lower_bound(int code_bits, int min_distance) {
  if (code_bits < 1 || min_distance < 1 || min_distance > code_bits) {
    throw invalid_argument("gv_lower_bound needs 1 <= min_distance <= code_bits");
  }
  const BigInt space = BigInt(1) << code_bits;
  const BigInt denom = partial_binomial_sum(code_bits, min_distance - 1);
  return (space + denom - 1) / denom;
}

double ball_entropy_bound(int code_bits, int radius) {
  if (code_bits < 1 || radius < 0) {
    throw invalid_argument("ball_entropy_bound needs code_bits >= 1 and radius >= 0");
  }
  const double ratio = static_cast<double>(radius) / static_cast<double>(code_bits);
  if (ratio > 0.5) {
    throw invalid_argument("ball_entropy_bound requires radius/code_bits <= 1/2");
  }
  return std::exp2(binary_entropy(ratio) * static_cast<double>(code_bits));
}

BinaryCodebook greedy_codebook(int code_bits, int min_distance) {
  if (code_bits < 1 || min_distance < 1 || min_distance > code_bits) {
    throw invalid_argument("greedy_codebook needs 1 <= min_distance <= code_bits");
  }
  if (code_bits > 20) {
    throw invalid_argument("greedy_codebook enumerates all words; code_bits must be <= 20");
  }
  const std::uint32_t space = std::uint32_t{1} << code_bits;
  BinaryCodebook book{code_bits, min_distance, {}};

  if (min_distance == 1) {
    // Distance >= 1 is just distinctness.
    book.words.resize(space);
    for (std::uint32_t w = 0; w < space; ++w) book.words[w] = w;
    return book;
  }

  // First-fit scan. A word survives iff it lies in no radius-(delta-1) ball
  // around an already kept word, so keeping a coverage bitmap turns the scan
  // into one ball enumeration per kept word.
  std::vector<std::uint32_t> ball_offsets;
  for (std::uint32_t m = 0; m < space; ++m) {
    if (std::popcount(m) <= min_distance - 1) ball_offsets.push_back(m);
  }
  std::vector<bool> covered(space, false);
  for (std::uint32_t w = 0; w < space; ++w) {
    if (covered[w]) continue;
    book.words.push_back(w);
    for (std::uint32_t m : ball_offsets) covered[w ^ m] = true;
  }
  return book;
}

bool codebook_distance_holds(const BinaryCodebook& book) {
  for (std::size_t i = 0; i < book.words.size(); ++i) {
    for (std::size_t j = i + 1; j < book.words.size(); ++j) {
      if (std::popcount(book.words[i] ^ book.words[j]) < book.min_distance) return false;
    }
  }
  return true;
}

TagDistribution estimate_tag_probs(const LabelMatrix& labels) {
  TagDistribution dist;
  dist.thetas.assign(labels.tags(), 0.0);
  for (std::size_t r = 0; r < labels.rows(); ++r) {
    for (std::size_t t = 0; t < labels.tags(); ++t) {
      dist.thetas[t] += labels.at(r, t);
    }
  }
  for (double& theta : dist.thetas) theta /= static_cast<double>(labels.rows());
  return dist;
}

double label_entropy(const TagDistribution& dist) {
  double h = 0.0;
  for (double theta : dist.thetas) h += binary_entropy(theta);
  return h;
}

std::optional<int> delta_upper_bound(int code_bits, double h_label) {
  if (code_bits < 2) throw invalid_argument("delta_upper_bound needs code_bits >= 2");
  if (h_label < 0.0) throw invalid_argument("delta_upper_bound needs h_label >= 0");
  const double budget = 1.0 - h_label / static_cast<double>(code_bits);
  std::optional<int> best;
  for (int delta = 1; delta <= code_bits / 2; ++delta) {
    const double ratio = static_cast<double>(delta - 1) / static_cast<double>(code_bits);
    if (binary_entropy(ratio) <= budget) best = delta;
  }
  return best;
}

NeighborStats neighbor_entropy_stats(const LabelMatrix& labels,
                                     const SimilarityMatrix& similarity,
                                     NeighborMode mode) {
  const std::size_t n = labels.rows();
  std::vector<double> info(n, 0.0);

  if (mode == NeighborMode::kCardinality) {
    for (std::size_t i = 0; i < n; ++i) info[i] = labels.tag_count(i);
  } else {
    if (similarity.rows() != n || similarity.cols() != n) {
      throw invalid_argument("exact neighbor stats need a square similarity matrix over the labels");
    }
    // Empirical entropy of the similarity-level distribution per row, all in
    // integers: S_{i,*} = j/|l_i|  <=>  inter * |l_i| = j * max(|l_i|,|l_*|),
    // and the normalizer counts points * with inter = 0 or |l_*| <= |l_i|.
    std::vector<std::int64_t> level_counts;
    for (std::size_t i = 0; i < n; ++i) {
      const int cap = labels.tag_count(i);
      level_counts.assign(static_cast<std::size_t>(cap) + 1, 0);
      std::int64_t denom = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const int inter = labels.intersection(i, j);
        const int other = labels.tag_count(j);
        const int widest = std::max(cap, other);
        if (inter == 0 || other <= cap) ++denom;
        if (inter > 0) {
          const std::int64_t num = static_cast<std::int64_t>(inter) * cap;
          if (num % widest == 0) {
            const std::int64_t level = num / widest;
            if (level >= 1 && level <= cap) ++level_counts[static_cast<std::size_t>(level)];
          }
        }
      }
      double h = 0.0;
      for (int level = 1; level <= cap; ++level) {
        const double p = static_cast<double>(level_counts[static_cast<std::size_t>(level)]) /
                         static_cast<double>(denom);
        if (p > 0.0) h -= p * std::log2(p);
      }
      info[i] = h;
    }
  }

  NeighborStats stats;
  for (double v : info) stats.mean += v;
  stats.mean /= static_cast<double>(n);
  for (double v : info) stats.variance += (v - stats.mean) * (v - stats.mean);
  stats.variance /= static_cast<double>(n);
  return stats;
}

int delta_lower_bound(double mean, double variance, double confidence) {
  if (!(confidence > 0.5 && confidence < 1.0)) {
    throw invalid_argument("confidence must lie in (1/2, 1), got " + std::to_string(confidence));
  }
  if (variance < 0.0) throw invalid_argument("variance must be non-negative");
  const double bound = std::sqrt(variance / (1.0 - confidence)) + mean;
  return static_cast<int>(std::ceil(bound));
}

BoundsReport effective_delta_range(const LabelMatrix& labels, int code_bits,
                                   double confidence, NeighborMode mode) {
  BoundsReport report;
  report.code_bits = code_bits;
  report.confidence = confidence;
  report.h_label = label_entropy(estimate_tag_probs(labels));

  SimilarityMatrix sim;
  if (mode == NeighborMode::kExact) sim = build_similarity(labels, labels);
  const NeighborStats stats = neighbor_entropy_stats(labels, sim, mode);
  report.neighbor_entropy_mean = stats.mean;
  report.neighbor_entropy_var = stats.variance;
  report.delta_min = std::max(1, delta_lower_bound(stats.mean, stats.variance, confidence));

  const std::optional<int> upper = delta_upper_bound(code_bits, report.h_label);
  if (!upper.has_value()) {
    report.delta_max = 0;
    report.interval_empty = true;
    std::ostringstream note;
    note << "label entropy " << report.h_label << " exceeds the " << code_bits
         << "-bit coding budget; no delta satisfies the entropy constraint";
    report.note = note.str();
    return report;
  }
  report.delta_max = *upper;
  report.interval_empty = report.delta_min > report.delta_max;
  if (report.interval_empty) {
    std::ostringstream note;
    note << "neighbor information needs delta >= " << report.delta_min
         << " but the entropy constraint caps delta at " << report.delta_max
         << "; increase code_bits or lower the confidence level";
    report.note = note.str();
  }
  return report;
}

}  // namespace rmsh
