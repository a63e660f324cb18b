#include "occ/tensor.hpp"

#include <cmath>
#include <numeric>

#include "occ/errors.hpp"

namespace occ {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw InvalidInput("Tensor2: data length does not equal rows*cols");
    }
}

bool Tensor2::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor2 Tensor2::transposed() const {
    Tensor2 out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double l2_norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

}  // namespace occ
