#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rmsh {

// N x C binary tag assignments. Every row carries at least one tag; rows
// without tags are rejected at construction (unlabeled points are dropped by
// the pipeline before they get here). Rows are additionally kept as packed
// 64-bit masks so intersection counts are a few popcounts.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t rows, std::size_t tags, std::vector<std::uint8_t> entries,
              std::vector<std::string> tag_names = {});

  std::size_t rows() const { return rows_; }
  std::size_t tags() const { return tags_; }
  const std::vector<std::string>& tag_names() const { return tag_names_; }

  std::uint8_t at(std::size_t row, std::size_t tag) const {
    return entries_[row * tags_ + tag];
  }
  std::span<const std::uint8_t> row(std::size_t r) const {
    return {entries_.data() + r * tags_, tags_};
  }
  std::span<const std::uint8_t> raw() const { return entries_; }

  // Packed mask words for one row (ceil(C/64) words).
  std::span<const std::uint64_t> mask(std::size_t r) const {
    return {masks_.data() + r * words_, words_};
  }
  std::size_t mask_words() const { return words_; }

  int tag_count(std::size_t r) const { return tag_counts_[r]; }
  int intersection(std::size_t a, std::size_t b) const;

  // |a n b| / max(|a|,|b|) for two rows of this matrix.
  double similarity(std::size_t a, std::size_t b) const;

 private:
  std::size_t rows_ = 0;
  std::size_t tags_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint8_t> entries_;
  std::vector<std::uint64_t> masks_;
  std::vector<int> tag_counts_;
  std::vector<std::string> tag_names_;
};

// Similarity of two standalone label rows given as 0/1 spans. Both rows must
// carry at least one tag.
double similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace rmsh
