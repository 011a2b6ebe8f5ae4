#include "rmsh/triplets.hpp"

#include <algorithm>
#include <array>

#include "rmsh/error.hpp"

namespace rmsh {

Triplet order_triplet(const LabelMatrix& labels, std::uint32_t i, std::uint32_t j,
                      std::uint32_t k, int delta) {
  std::array<std::uint32_t, 3> idx{i, j, k};

  // Reference: most tags, ties to the lowest index.
  std::uint32_t ref = idx[0];
  for (std::uint32_t c : idx) {
    if (labels.tag_count(c) > labels.tag_count(ref) ||
        (labels.tag_count(c) == labels.tag_count(ref) && c < ref)) {
      ref = c;
    }
  }
  std::array<std::uint32_t, 2> rest{};
  std::size_t r = 0;
  for (std::uint32_t c : idx) {
    if (c != ref) rest[r++] = c;
  }

  const double s0 = labels.similarity(ref, rest[0]);
  const double s1 = labels.similarity(ref, rest[1]);
  std::uint32_t pos = rest[0], neg = rest[1];
  if (s1 > s0 || (s1 == s0 && rest[1] < rest[0])) {
    pos = rest[1];
    neg = rest[0];
  }

  Triplet t;
  t.ref_index = ref;
  t.pos_index = pos;
  t.neg_index = neg;
  const int inter_pos = labels.intersection(ref, pos);
  const int inter_neg = labels.intersection(ref, neg);
  t.margin_alpha = static_cast<double>(delta) *
                   static_cast<double>(inter_pos - inter_neg) /
                   static_cast<double>(labels.tag_count(ref));
  t.y_ref_pos = inter_pos > 0;
  t.y_ref_neg = inter_neg > 0;
  return t;
}

std::vector<Triplet> sample_triplet_batch(const LabelMatrix& labels,
                                          const SimilarityMatrix& similarity,
                                          std::size_t count, int delta, Rng& rng) {
  const std::size_t n = labels.rows();
  if (n < 3) {
    throw invalid_argument("triplet sampling needs at least 3 samples");
  }
  if (similarity.rows() != n || similarity.cols() != n) {
    throw invalid_argument("similarity matrix shape does not match label matrix");
  }
  std::vector<Triplet> batch;
  batch.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const auto i = static_cast<std::uint32_t>(rng.uniform_index(n));
    std::uint32_t j = i;
    while (j == i) j = static_cast<std::uint32_t>(rng.uniform_index(n));
    std::uint32_t k = i;
    while (k == i || k == j) k = static_cast<std::uint32_t>(rng.uniform_index(n));
    batch.push_back(order_triplet(labels, i, j, k, delta));
  }
  return batch;
}

}  // namespace rmsh
