#pragma once

#include <cstdint>
#include <vector>

#include "rmsh/features.hpp"
#include "rmsh/labels.hpp"

namespace rmsh {

// Desk-scale stand-in for precomputed backbone features: labels are drawn
// per-tag Bernoulli (rows resampled until non-empty), and each modality's
// features are the label row pushed through a fixed random projection plus
// Gaussian noise. Cross-modal semantic structure therefore exists by
// construction, with `noise` controlling how clean it is.
struct SyntheticConfig {
  std::size_t count = 2000;
  std::size_t tags = 8;
  std::size_t dim_image = 64;
  std::size_t dim_text = 32;
  std::vector<double> tag_probs;  // size `tags`, each strictly in (0,1)
  double noise = 0.1;
  std::uint64_t seed = 1;
};

struct SyntheticDataset {
  FeatureMatrix image;
  FeatureMatrix text;
  LabelMatrix labels;
};

SyntheticDataset generate_synthetic(const SyntheticConfig& config);

}  // namespace rmsh
