#include "rmsh/labels.hpp"

#include <algorithm>
#include <bit>

#include "rmsh/error.hpp"

namespace rmsh {

LabelMatrix::LabelMatrix(std::size_t rows, std::size_t tags,
                         std::vector<std::uint8_t> entries,
                         std::vector<std::string> tag_names)
    : rows_(rows), tags_(tags), entries_(std::move(entries)), tag_names_(std::move(tag_names)) {
  if (rows_ == 0 || tags_ == 0) {
    throw invalid_argument("label matrix must have at least one row and one tag");
  }
  if (entries_.size() != rows_ * tags_) {
    throw invalid_argument("label matrix entry count does not match rows*tags");
  }
  if (!tag_names_.empty() && tag_names_.size() != tags_) {
    throw invalid_argument("tag name count does not match tag count");
  }
  words_ = (tags_ + 63) / 64;
  masks_.assign(rows_ * words_, 0);
  tag_counts_.assign(rows_, 0);
  for (std::size_t r = 0; r < rows_; ++r) {
    int count = 0;
    for (std::size_t c = 0; c < tags_; ++c) {
      const std::uint8_t v = entries_[r * tags_ + c];
      if (v > 1) {
        throw invalid_argument("label entry at row " + std::to_string(r) + ", tag " +
                               std::to_string(c) + " is not 0/1");
      }
      if (v) {
        masks_[r * words_ + c / 64] |= std::uint64_t{1} << (c % 64);
        ++count;
      }
    }
    if (count == 0) {
      throw invalid_argument("label row " + std::to_string(r) + " has no tags");
    }
    tag_counts_[r] = count;
  }
}

int LabelMatrix::intersection(std::size_t a, std::size_t b) const {
  const std::uint64_t* ma = masks_.data() + a * words_;
  const std::uint64_t* mb = masks_.data() + b * words_;
  int inter = 0;
  for (std::size_t w = 0; w < words_; ++w) inter += std::popcount(ma[w] & mb[w]);
  return inter;
}

double LabelMatrix::similarity(std::size_t a, std::size_t b) const {
  const int inter = intersection(a, b);
  const int denom = std::max(tag_counts_[a], tag_counts_[b]);
  return static_cast<double>(inter) / static_cast<double>(denom);
}

double similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) {
    throw invalid_argument("label rows have different tag counts");
  }
  int ca = 0, cb = 0, inter = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += a[i] ? 1 : 0;
    cb += b[i] ? 1 : 0;
    inter += (a[i] && b[i]) ? 1 : 0;
  }
  if (ca == 0 || cb == 0) {
    throw invalid_argument("similarity needs label rows with at least one tag each");
  }
  return static_cast<double>(inter) / static_cast<double>(std::max(ca, cb));
}

}  // namespace rmsh
