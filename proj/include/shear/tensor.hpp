#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace shear {

// Dense row-major tensor of 32-bit floats. No strides, no broadcasting;
// every kernel takes explicit shapes. Reductions accumulate in 64-bit
// floats in a fixed left-to-right order, so results are bit-reproducible
// across runs and thread counts.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<int64_t> shape);

    static Tensor from_data(std::vector<int64_t> shape, std::vector<float> data);

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }

    // Row view of a rank-2 tensor.
    std::span<const float> row(int64_t r) const;
    std::span<float> row(int64_t r);

    float at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
    float& at(int64_t i) { return data_[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<int64_t> shape_;
    std::vector<float> data_;
};

// Throws ValidationError if any element is NaN or infinite.
void check_finite(const Tensor& t, const char* context);
void check_finite(std::span<const float> values, const char* context);

// a[m×k] · b[k×n]. Inner sums run left to right over k in 64-bit floats.
Tensor matmul(const Tensor& a, const Tensor& b);

// a[m×k] · b[n×k]ᵀ. Same accumulation contract as matmul; bitwise equal to
// matmul(a, transpose(b)).
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& t);

// Row-wise softmax with max subtraction. Caller guarantees finite input.
Tensor softmax_rows(const Tensor& x);
void softmax_row(std::span<const float> x, std::span<float> out);

// x / sqrt(mean(x²) + eps) ⊙ weight, mean accumulated in 64-bit.
Tensor rms_norm(const Tensor& x, const Tensor& weight, float eps);
void rms_norm_row(std::span<const float> x, std::span<const float> weight, float eps,
                  std::span<float> out);

// Elementwise x · sigmoid(x).
Tensor silu(const Tensor& x);

// Rotary rotation of adjacent (even, odd) pairs of a [T × head_dim] tensor.
// Pair i turns by angle position[t] · theta^(-2i/head_dim).
Tensor rope_apply(const Tensor& q_or_k, float theta, std::span<const int64_t> positions);

} // namespace shear
