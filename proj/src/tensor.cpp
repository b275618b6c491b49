#include "shear/tensor.hpp"

#include <cmath>
#include <string>

#include "shear/error.hpp"

namespace shear {

namespace {

int64_t shape_product(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) {
            throw ValidationError("tensor dimension must be non-negative");
        }
        n *= d;
    }
    return n;
}

} // namespace

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0f);
}

Tensor Tensor::from_data(std::vector<int64_t> shape, std::vector<float> data) {
    if (shape_product(shape) != static_cast<int64_t>(data.size())) {
        throw ValidationError("tensor data length does not match shape");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

std::span<const float> Tensor::row(int64_t r) const {
    int64_t cols = shape_[1];
    return std::span<const float>(data_).subspan(static_cast<size_t>(r * cols),
                                                 static_cast<size_t>(cols));
}

std::span<float> Tensor::row(int64_t r) {
    int64_t cols = shape_[1];
    return std::span<float>(data_).subspan(static_cast<size_t>(r * cols),
                                           static_cast<size_t>(cols));
}

void check_finite(std::span<const float> values, const char* context) {
    for (float v : values) {
        if (!std::isfinite(v)) {
            throw ValidationError(std::string("non-finite value produced by ") + context);
        }
    }
}

void check_finite(const Tensor& t, const char* context) {
    check_finite(t.data(), context);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ValidationError("matmul expects rank-2 tensors");
    }
    if (a.dim(1) != b.dim(0)) {
        throw ValidationError("matmul inner dimensions do not match: " +
                              std::to_string(a.dim(1)) + " vs " + std::to_string(b.dim(0)));
    }
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* po = out.data().data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t kk = 0; kk < k; ++kk) {
                acc += static_cast<double>(pa[i * k + kk]) * static_cast<double>(pb[kk * n + j]);
            }
            po[i * n + j] = static_cast<float>(acc);
        }
    }
    check_finite(out, "matmul");
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ValidationError("matmul_nt expects rank-2 tensors");
    }
    if (a.dim(1) != b.dim(1)) {
        throw ValidationError("matmul_nt inner dimensions do not match: " +
                              std::to_string(a.dim(1)) + " vs " + std::to_string(b.dim(1)));
    }
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor out({m, n});
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* po = out.data().data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t kk = 0; kk < k; ++kk) {
                acc += static_cast<double>(pa[i * k + kk]) * static_cast<double>(pb[j * k + kk]);
            }
            po[i * n + j] = static_cast<float>(acc);
        }
    }
    check_finite(out, "matmul_nt");
    return out;
}

Tensor transpose(const Tensor& t) {
    if (t.rank() != 2) {
        throw ValidationError("transpose expects a rank-2 tensor");
    }
    const int64_t r = t.dim(0), c = t.dim(1);
    Tensor out({c, r});
    for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < c; ++j) {
            out.at(j * r + i) = t.at(i * c + j);
        }
    }
    return out;
}

void softmax_row(std::span<const float> x, std::span<float> out) {
    if (x.empty()) {
        throw ValidationError("softmax_row requires at least one element");
    }
    float max_v = x[0];
    for (float v : x) {
        max_v = v > max_v ? v : max_v;
    }
    double sum = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double e = std::exp(static_cast<double>(x[i]) - static_cast<double>(max_v));
        out[i] = static_cast<float>(e);
        sum += e;
    }
    for (size_t i = 0; i < x.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(out[i]) / sum);
    }
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() < 1 || x.dim(x.rank() - 1) < 1) {
        throw ValidationError("softmax_rows requires a non-empty last dimension");
    }
    const int64_t cols = x.dim(x.rank() - 1);
    const int64_t rows = x.size() / cols;
    Tensor out(x.shape());
    for (int64_t r = 0; r < rows; ++r) {
        auto in = x.data().subspan(static_cast<size_t>(r * cols), static_cast<size_t>(cols));
        auto dst = out.data().subspan(static_cast<size_t>(r * cols), static_cast<size_t>(cols));
        softmax_row(in, dst);
    }
    check_finite(out, "softmax_rows");
    return out;
}

void rms_norm_row(std::span<const float> x, std::span<const float> weight, float eps,
                  std::span<float> out) {
    if (x.size() != weight.size() || x.size() != out.size()) {
        throw ValidationError("rms_norm length mismatch");
    }
    double sum_sq = 0.0;
    for (float v : x) {
        sum_sq += static_cast<double>(v) * static_cast<double>(v);
    }
    double inv = 1.0 / std::sqrt(sum_sq / static_cast<double>(x.size()) +
                                 static_cast<double>(eps));
    for (size_t i = 0; i < x.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(x[i]) * inv *
                                    static_cast<double>(weight[i]));
    }
    check_finite(out, "rms_norm");
}

Tensor rms_norm(const Tensor& x, const Tensor& weight, float eps) {
    if (x.rank() != 1 || weight.rank() != 1 || x.dim(0) != weight.dim(0)) {
        throw ValidationError("rms_norm expects two rows of equal length");
    }
    Tensor out(x.shape());
    rms_norm_row(x.data(), weight.data(), eps, out.data());
    return out;
}

Tensor silu(const Tensor& x) {
    Tensor out(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
        float v = x.at(i);
        out.at(i) = v / (1.0f + std::exp(-v));
    }
    check_finite(out, "silu");
    return out;
}

Tensor rope_apply(const Tensor& q_or_k, float theta, std::span<const int64_t> positions) {
    if (q_or_k.rank() != 2) {
        throw ValidationError("rope_apply expects a [T × head_dim] tensor");
    }
    const int64_t t_len = q_or_k.dim(0);
    const int64_t head_dim = q_or_k.dim(1);
    if (head_dim % 2 != 0) {
        throw ValidationError("rope_apply requires an even head_dim");
    }
    if (static_cast<int64_t>(positions.size()) != t_len) {
        throw ValidationError("rope_apply positions length must equal row count");
    }
    Tensor out(q_or_k.shape());
    for (int64_t t = 0; t < t_len; ++t) {
        auto in = q_or_k.row(t);
        auto dst = out.row(t);
        for (int64_t i = 0; i < head_dim / 2; ++i) {
            double freq = std::pow(static_cast<double>(theta),
                                   -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
            double angle = static_cast<double>(positions[static_cast<size_t>(t)]) * freq;
            double c = std::cos(angle);
            double s = std::sin(angle);
            double x0 = in[static_cast<size_t>(2 * i)];
            double x1 = in[static_cast<size_t>(2 * i + 1)];
            dst[static_cast<size_t>(2 * i)] = static_cast<float>(x0 * c - x1 * s);
            dst[static_cast<size_t>(2 * i + 1)] = static_cast<float>(x0 * s + x1 * c);
        }
    }
    check_finite(out, "rope_apply");
    return out;
}

} // namespace shear
