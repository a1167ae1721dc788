#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace wasrt {

using Real = double;

/// Dense row-major array of rank 1..5. Layouts used across the project:
///   image / feature map   [C][H][W]
///   context volume        [T+1][C][H][W]
///   conv2d weight         [O][C][k][k]
///   conv3d weight         [O][C][D][k][k]
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, Real fill = 0);
    Tensor(std::initializer_list<int> shape, Real fill = 0)
        : Tensor(std::vector<int>(shape), fill) {}

    const std::vector<int>& shape() const noexcept { return shape_; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<Real> values() noexcept { return data_; }
    std::span<const Real> values() const noexcept { return data_; }
    Real* data() noexcept { return data_.data(); }
    const Real* data() const noexcept { return data_.data(); }

    Real& operator[](std::size_t i) noexcept { return data_[i]; }
    Real operator[](std::size_t i) const noexcept { return data_[i]; }

    // rank-3 accessors ([C][H][W])
    Real& at(int c, int y, int x) noexcept {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    Real at(int c, int y, int x) const noexcept {
        return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    /// Contiguous view of the i-th slice along the leading dimension.
    std::span<Real> slice(int i);
    std::span<const Real> slice(int i) const;
    std::size_t slice_size() const noexcept;

    void fill(Real v) noexcept;
    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(Real s) noexcept;

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<int> shape_;
    std::vector<Real> data_;
};

std::string shape_string(const std::vector<int>& shape);

/// Largest absolute element-wise difference; throws on shape mismatch.
Real max_abs_diff(const Tensor& a, const Tensor& b);

Real squared_norm(std::span<const Real> v) noexcept;

}  // namespace wasrt
