#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rmsh/labels.hpp"

namespace rmsh {

// Cross-modal similarity S_ij = |l_i n l_j| / max(|l_i|,|l_j|) between the
// rows of two label matrices, stored row-compressed because zero entries
// dominate on realistic tag data.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::size_t rows, std::size_t cols,
                   std::vector<std::size_t> row_ptr,
                   std::vector<std::uint32_t> col_idx,
                   std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  double at(std::size_t row, std::size_t col) const;
  void dense_row(std::size_t row, std::vector<double>& out) const;

  std::span<const std::uint32_t> row_cols(std::size_t row) const;
  std::span<const double> row_values(std::size_t row) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

// Elementwise similarity between all row pairs of `a` and `b`. Both matrices
// must agree on the tag count.
SimilarityMatrix build_similarity(const LabelMatrix& a, const LabelMatrix& b);

}  // namespace rmsh
