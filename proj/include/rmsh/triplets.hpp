#pragma once

#include <cstdint>
#include <vector>

#include "rmsh/labels.hpp"
#include "rmsh/rng.hpp"
#include "rmsh/similarity.hpp"

namespace rmsh {

// One sampled training triplet, already ordered: ref carries the most tags,
// pos is the member more similar to ref. margin_alpha and the similarity
// flags are the values used by the ranking loss for the (ref,pos,neg) group.
struct Triplet {
  std::uint32_t ref_index = 0;
  std::uint32_t pos_index = 0;
  std::uint32_t neg_index = 0;
  double margin_alpha = 0.0;
  bool y_ref_pos = false;
  bool y_ref_neg = false;
};

// Draws `count` triplets of pairwise-distinct indices uniformly, then orders
// each one: ref = max tag count (tie -> lowest index); among the remaining
// two, pos = higher similarity to ref (tie -> lowest index). The margin is
// delta * (|l_ref n l_pos| - |l_ref n l_neg|) / |l_ref|.
std::vector<Triplet> sample_triplet_batch(const LabelMatrix& labels,
                                          const SimilarityMatrix& similarity,
                                          std::size_t count, int delta, Rng& rng);

// Ordering rule applied to three concrete indices; exposed for reuse and for
// direct testing of the tie-break conventions.
Triplet order_triplet(const LabelMatrix& labels, std::uint32_t i, std::uint32_t j,
                      std::uint32_t k, int delta);

}  // namespace rmsh
