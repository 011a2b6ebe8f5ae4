#pragma once

#include <string>

#include "rmsh/features.hpp"
#include "rmsh/labels.hpp"

namespace rmsh {

// Binary dataset formats, little-endian throughout.
//
// Feature file:  magic "RMSHFEAT", version u16, N u64, D u64,
//                then N*D float32 row-major.
// Label file:    magic "RMSHLBL0", N u64, C u64, then N*C bytes of 0/1.
//
// Loaders validate magic, declared sizes against actual file length, and the
// matrix invariants (finite features, non-empty 0/1 label rows). Each failure
// mode raises a distinct io_error naming the offending location.

void save_features(const std::string& path, const FeatureMatrix& features);
FeatureMatrix load_features(const std::string& path, Modality modality = Modality::kImage);

void save_labels(const std::string& path, const LabelMatrix& labels);
LabelMatrix load_labels(const std::string& path);

}  // namespace rmsh
