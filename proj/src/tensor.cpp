#include "wasrt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace wasrt {

namespace {

std::size_t element_count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("negative tensor dimension in " + shape_string(shape));
        n *= static_cast<std::size_t>(d);
    }
    return shape.empty() ? 0 : n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, Real fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

std::size_t Tensor::slice_size() const noexcept {
    if (shape_.empty() || shape_[0] == 0) return 0;
    return data_.size() / static_cast<std::size_t>(shape_[0]);
}

std::span<Real> Tensor::slice(int i) {
    const std::size_t n = slice_size();
    return std::span<Real>(data_).subspan(static_cast<std::size_t>(i) * n, n);
}

std::span<const Real> Tensor::slice(int i) const {
    const std::size_t n = slice_size();
    return std::span<const Real>(data_).subspan(static_cast<std::size_t>(i) * n, n);
}

void Tensor::fill(Real v) noexcept {
    std::fill(data_.begin(), data_.end(), v);
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (!same_shape(other))
        throw std::invalid_argument("tensor shape mismatch: " + shape_string(shape_) + " vs " +
                                    shape_string(other.shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(Real s) noexcept {
    for (Real& v : data_) v *= s;
    return *this;
}

bool Tensor::all_finite() const noexcept {
    for (Real v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Real max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("max_abs_diff shape mismatch: " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    Real m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Real squared_norm(std::span<const Real> v) noexcept {
    return std::inner_product(v.begin(), v.end(), v.begin(), Real{0});
}

}  // namespace wasrt
