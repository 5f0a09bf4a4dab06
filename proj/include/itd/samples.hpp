#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace itd {

/// Row-major matrix of training examples, one row per example.
class Samples {
public:
  Samples() = default;
  Samples(std::size_t rows, std::size_t dim) : dim_(dim), values_(rows * dim, 0.0) {}

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }

  void push_back(std::span<const double> row) {
    if (dim_ == 0 && values_.empty()) dim_ = row.size();
    if (row.size() != dim_) throw std::invalid_argument("Samples: row width mismatch");
    values_.insert(values_.end(), row.begin(), row.end());
  }

  /// Copy of the selected rows, in the given order.
  Samples gather(std::span<const std::size_t> indices) const {
    Samples out(indices.size(), dim_);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto src = row(indices[k]);
      std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
  }

private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

} // namespace itd
