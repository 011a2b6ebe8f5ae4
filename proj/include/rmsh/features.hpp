#pragma once

#include <Eigen/Core>
#include <string>

namespace rmsh {

enum class Modality { kImage, kText };

std::string modality_name(Modality m);
Modality parse_modality(const std::string& name);

// N x D real-valued feature rows for one modality. Stored as float to match
// the on-disk format exactly; model math widens to double on the fly.
struct FeatureMatrix {
  Eigen::MatrixXf rows;  // N x D
  Modality modality = Modality::kImage;

  std::size_t count() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }
};

// Throws if any entry is NaN or infinite.
void validate_finite(const FeatureMatrix& features);

}  // namespace rmsh
