#include <doctest.h>

#include <cmath>
#include <vector>

#include "shear/error.hpp"
#include "shear/rng.hpp"
#include "shear/tensor.hpp"

using namespace shear;

namespace {

Tensor random_tensor(int64_t r, int64_t c, uint64_t seed) {
    SplitMix64 rng(seed);
    Tensor t({r, c});
    for (int64_t i = 0; i < t.size(); ++i) {
        t.at(i) = rng.next_symmetric(1.0f);
    }
    return t;
}

Tensor identity(int64_t n) {
    Tensor t({n, n});
    for (int64_t i = 0; i < n; ++i) {
        t.at(i * n + i) = 1.0f;
    }
    return t;
}

// Oracle: plain float accumulation in i-k-j order, nothing shared with the
// implementation.
std::vector<float> naive_matmul(const Tensor& a, const Tensor& b) {
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<float> out(static_cast<size_t>(m * n), 0.0f);
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t kk = 0; kk < k; ++kk) {
            for (int64_t j = 0; j < n; ++j) {
                out[static_cast<size_t>(i * n + j)] +=
                    a.at(i * k + kk) * b.at(kk * n + j);
            }
        }
    }
    return out;
}

double max_abs_diff(const Tensor& t, const std::vector<float>& ref) {
    double worst = 0.0;
    for (int64_t i = 0; i < t.size(); ++i) {
        worst = std::max(worst, std::fabs(static_cast<double>(t.at(i)) -
                                          static_cast<double>(ref[static_cast<size_t>(i)])));
    }
    return worst;
}

} // namespace

TEST_CASE("matmul identity leaves the input unchanged") {
    Tensor a = random_tensor(2, 2, 1);
    Tensor out = matmul(identity(2), a);
    for (int64_t i = 0; i < a.size(); ++i) {
        CHECK(out.at(i) == a.at(i));
    }
}

TEST_CASE("matmul hand case") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_data({2, 1}, {1, 1});
    Tensor out = matmul(a, b);
    CHECK(out.at(0) == 3.0f);
    CHECK(out.at(1) == 7.0f);
}

TEST_CASE("matmul matches the naive oracle on random shapes") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
        Tensor a = random_tensor(8, 8, 100 + seed);
        Tensor b = random_tensor(8, 8, 200 + seed);
        CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-6);
    }
    // Non-square too.
    Tensor a = random_tensor(5, 7, 300);
    Tensor b = random_tensor(7, 3, 301);
    CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-6);
}

TEST_CASE("matmul associativity with identity on both sides") {
    Tensor a = random_tensor(6, 6, 42);
    Tensor left = matmul(identity(6), a);
    Tensor right = matmul(a, identity(6));
    for (int64_t i = 0; i < a.size(); ++i) {
        CHECK(left.at(i) == a.at(i));
        CHECK(right.at(i) == a.at(i));
    }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Tensor a({2, 3});
    Tensor b({4, 2});
    CHECK_THROWS_AS(matmul(a, b), ValidationError);
}

TEST_CASE("matmul surfaces overflow instead of returning inf") {
    Tensor a = Tensor::from_data({1, 2}, {1e30f, 1e30f});
    Tensor b = Tensor::from_data({2, 1}, {1e30f, 1e30f});
    CHECK_THROWS_AS(matmul(a, b), ValidationError);
}

TEST_CASE("matmul_nt is bitwise identical to matmul against the transpose") {
    Tensor a = random_tensor(5, 9, 7);
    Tensor b = random_tensor(4, 9, 8);
    Tensor via_nt = matmul_nt(a, b);
    Tensor via_t = matmul(a, transpose(b));
    for (int64_t i = 0; i < via_nt.size(); ++i) {
        CHECK(via_nt.at(i) == via_t.at(i));
    }
}

TEST_CASE("matmul with zero inner dimension yields zeros") {
    Tensor a({3, 0});
    Tensor b({0, 2});
    Tensor out = matmul(a, b);
    REQUIRE(out.size() == 6);
    for (int64_t i = 0; i < out.size(); ++i) {
        CHECK(out.at(i) == 0.0f);
    }
}

TEST_CASE("softmax of a constant row is uniform") {
    Tensor x = Tensor::from_data({1, 4}, {0, 0, 0, 0});
    Tensor out = softmax_rows(x);
    for (int64_t i = 0; i < 4; ++i) {
        CHECK(out.at(i) == doctest::Approx(0.25).epsilon(1e-7));
    }
}

TEST_CASE("softmax closed form [ln2, 0]") {
    Tensor x = Tensor::from_data({1, 2}, {std::log(2.0f), 0.0f});
    Tensor out = softmax_rows(x);
    CHECK(out.at(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(out.at(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("softmax does not overflow on large margins") {
    Tensor x = Tensor::from_data({1, 2}, {1000.0f, 0.0f});
    Tensor out = softmax_rows(x);
    CHECK(std::fabs(out.at(0) - 1.0f) < 1e-6);
    CHECK(std::fabs(out.at(1)) < 1e-6);
}

TEST_CASE("softmax rows sum to one across magnitudes up to 1e4") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x({1, 16});
        for (int64_t i = 0; i < 16; ++i) {
            x.at(i) = rng.next_symmetric(1e4f);
        }
        Tensor out = softmax_rows(x);
        double sum = 0.0;
        for (int64_t i = 0; i < 16; ++i) {
            CHECK(out.at(i) >= 0.0f);
            sum += out.at(i);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("rms_norm with unit inputs") {
    Tensor x = Tensor::from_data({4}, {1, 1, 1, 1});
    Tensor w = Tensor::from_data({4}, {1, 1, 1, 1});
    Tensor out = rms_norm(x, w, 0.0f);
    for (int64_t i = 0; i < 4; ++i) {
        CHECK(out.at(i) == 1.0f);
    }
}

TEST_CASE("rms_norm divides by the root mean square") {
    Tensor x = Tensor::from_data({2}, {2, 2});
    Tensor w = Tensor::from_data({2}, {1, 1});
    Tensor out = rms_norm(x, w, 0.0f);
    CHECK(out.at(0) == 1.0f);
    CHECK(out.at(1) == 1.0f);
}

TEST_CASE("rms_norm hand oracle with weights") {
    Tensor x = Tensor::from_data({2}, {3, 4});
    Tensor w = Tensor::from_data({2}, {2, 2});
    Tensor out = rms_norm(x, w, 0.0f);
    const double rms = std::sqrt(12.5);
    CHECK(out.at(0) == doctest::Approx(2.0 * 3.0 / rms).epsilon(1e-7));
    CHECK(out.at(1) == doctest::Approx(2.0 * 4.0 / rms).epsilon(1e-7));
}

TEST_CASE("rms_norm rejects mismatched lengths") {
    Tensor x({3});
    Tensor w({4});
    CHECK_THROWS_AS(rms_norm(x, w, 1e-5f), ValidationError);
}

TEST_CASE("silu fixed points") {
    Tensor x = Tensor::from_data({3}, {0.0f, 100.0f, 1.0f});
    Tensor out = silu(x);
    CHECK(out.at(0) == 0.0f);
    CHECK(out.at(1) == doctest::Approx(100.0).epsilon(1e-7));
    CHECK(out.at(2) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-6));
}

TEST_CASE("rope at position zero is the identity") {
    Tensor q = random_tensor(1, 8, 5);
    std::vector<int64_t> pos = {0};
    Tensor out = rope_apply(q, 10000.0f, pos);
    for (int64_t i = 0; i < q.size(); ++i) {
        CHECK(out.at(i) == doctest::Approx(q.at(i)).epsilon(1e-7));
    }
}

TEST_CASE("rope with head_dim 2 rotates the single pair by one radian") {
    Tensor q = Tensor::from_data({1, 2}, {1.0f, 0.0f});
    std::vector<int64_t> pos = {1};
    Tensor out = rope_apply(q, 123.0f, pos); // theta^0 == 1 for the only pair
    CHECK(out.at(0) == doctest::Approx(std::cos(1.0)).epsilon(1e-6));
    CHECK(out.at(1) == doctest::Approx(std::sin(1.0)).epsilon(1e-6));
}

TEST_CASE("rope preserves the norm of every pair") {
    SplitMix64 rng(17);
    Tensor q = random_tensor(6, 16, 55);
    std::vector<int64_t> pos;
    for (int64_t t = 0; t < 6; ++t) {
        pos.push_back(static_cast<int64_t>(rng.next_below(1000)));
    }
    Tensor out = rope_apply(q, 10000.0f, pos);
    for (int64_t t = 0; t < 6; ++t) {
        for (int64_t i = 0; i < 8; ++i) {
            double before = std::hypot(q.at(t * 16 + 2 * i), q.at(t * 16 + 2 * i + 1));
            double after = std::hypot(out.at(t * 16 + 2 * i), out.at(t * 16 + 2 * i + 1));
            CHECK(after == doctest::Approx(before).epsilon(1e-6));
        }
    }
}

TEST_CASE("rope rejects odd head_dim") {
    Tensor q({2, 3});
    std::vector<int64_t> pos = {0, 1};
    CHECK_THROWS_AS(rope_apply(q, 10000.0f, pos), ValidationError);
}

TEST_CASE("tensor shape and data length must agree") {
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0f}), ValidationError);
}
