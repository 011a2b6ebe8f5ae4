#include "rmsh/synthetic.hpp"

#include <cmath>

#include "rmsh/error.hpp"
#include "rmsh/rng.hpp"

namespace rmsh {

namespace {

// Projection matrices are drawn first from a dedicated stream so the mapping
// label -> clean feature depends only on (seed, shape), not on sample count.
Eigen::MatrixXd draw_projection(std::size_t tags, std::size_t dim, Rng& rng) {
  Eigen::MatrixXd w(tags, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(tags));
  for (std::size_t t = 0; t < tags; ++t) {
    for (std::size_t d = 0; d < dim; ++d) {
      w(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = scale * rng.normal();
    }
  }
  return w;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.count == 0 || config.tags == 0 || config.dim_image == 0 || config.dim_text == 0) {
    throw invalid_argument("synthetic config has a zero dimension");
  }
  if (config.tag_probs.size() != config.tags) {
    throw invalid_argument("tag probability count does not match tag count");
  }
  for (double p : config.tag_probs) {
    if (!(p > 0.0 && p < 1.0)) {
      throw invalid_argument("tag probabilities must lie strictly in (0,1)");
    }
  }

  Rng rng(config.seed);
  const Eigen::MatrixXd w_image = draw_projection(config.tags, config.dim_image, rng);
  const Eigen::MatrixXd w_text = draw_projection(config.tags, config.dim_text, rng);

  const std::size_t n = config.count;
  const std::size_t c = config.tags;
  std::vector<std::uint8_t> entries(n * c, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    while (count == 0) {
      count = 0;
      for (std::size_t t = 0; t < c; ++t) {
        const std::uint8_t v = rng.bernoulli(config.tag_probs[t]) ? 1 : 0;
        entries[i * c + t] = v;
        count += v;
      }
    }
  }
  LabelMatrix labels(n, c, std::move(entries));

  FeatureMatrix image{Eigen::MatrixXf(n, config.dim_image), Modality::kImage};
  FeatureMatrix text{Eigen::MatrixXf(n, config.dim_text), Modality::kText};
  Eigen::VectorXd row(c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < c; ++t) row(static_cast<Eigen::Index>(t)) = labels.at(i, t);
    const Eigen::VectorXd clean_image = w_image.transpose() * row;
    const Eigen::VectorXd clean_text = w_text.transpose() * row;
    for (std::size_t d = 0; d < config.dim_image; ++d) {
      image.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          static_cast<float>(clean_image(static_cast<Eigen::Index>(d)) + config.noise * rng.normal());
    }
    for (std::size_t d = 0; d < config.dim_text; ++d) {
      text.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          static_cast<float>(clean_text(static_cast<Eigen::Index>(d)) + config.noise * rng.normal());
    }
  }
  return SyntheticDataset{std::move(image), std::move(text), std::move(labels)};
}

}  // namespace rmsh
