#include "rmsh/similarity.hpp"

#include <algorithm>
#include <bit>

#include "rmsh/error.hpp"

namespace rmsh {

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols,
                                   std::vector<std::size_t> row_ptr,
                                   std::vector<std::uint32_t> col_idx,
                                   std::vector<double> values)
    : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)), values_(std::move(values)) {
  if (row_ptr_.size() != rows_ + 1 || col_idx_.size() != values_.size()) {
    throw invalid_argument("inconsistent sparse similarity layout");
  }
}

double SimilarityMatrix::at(std::size_t row, std::size_t col) const {
  const auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
  const auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
  const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(col));
  if (it == end || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

void SimilarityMatrix::dense_row(std::size_t row, std::vector<double>& out) const {
  out.assign(cols_, 0.0);
  for (std::size_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) {
    out[col_idx_[k]] = values_[k];
  }
}

std::span<const std::uint32_t> SimilarityMatrix::row_cols(std::size_t row) const {
  return {col_idx_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
}

std::span<const double> SimilarityMatrix::row_values(std::size_t row) const {
  return {values_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
}

SimilarityMatrix build_similarity(const LabelMatrix& a, const LabelMatrix& b) {
  if (a.tags() != b.tags()) {
    throw invalid_argument("label matrices disagree on tag count");
  }
  const std::size_t n = a.rows();
  const std::size_t m = b.rows();
  const std::size_t words = a.mask_words();

  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t* ma = a.mask(i).data();
    const int ca = a.tag_count(i);
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint64_t* mb = b.mask(j).data();
      int inter = 0;
      for (std::size_t w = 0; w < words; ++w) inter += std::popcount(ma[w] & mb[w]);
      if (inter > 0) {
        col_idx.push_back(static_cast<std::uint32_t>(j));
        values.push_back(static_cast<double>(inter) /
                         static_cast<double>(std::max(ca, b.tag_count(j))));
      }
    }
    row_ptr[i + 1] = values.size();
  }
  return SimilarityMatrix(n, m, std::move(row_ptr), std::move(col_idx), std::move(values));
}

}  // namespace rmsh
