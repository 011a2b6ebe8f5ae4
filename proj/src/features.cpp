#include "rmsh/features.hpp"

#include <cmath>

#include "rmsh/error.hpp"

namespace rmsh {

std::string modality_name(Modality m) {
  return m == Modality::kImage ? "image" : "text";
}

Modality parse_modality(const std::string& name) {
  if (name == "image") return Modality::kImage;
  if (name == "text") return Modality::kText;
  throw invalid_argument("unknown modality: " + name + " (expected image|text)");
}

void validate_finite(const FeatureMatrix& features) {
  for (Eigen::Index r = 0; r < features.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.rows.cols(); ++c) {
      if (!std::isfinite(features.rows(r, c))) {
        throw invalid_argument("non-finite feature at row " + std::to_string(r) +
                               ", column " + std::to_string(c));
      }
    }
  }
}

}  // namespace rmsh
