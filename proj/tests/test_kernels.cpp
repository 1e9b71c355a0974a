#include <doctest.h>

#include <cmath>
#include <vector>

#include "smoothie/kernels.hpp"
#include "smoothie/rng.hpp"

using namespace smoothie;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

}  // namespace

// The dispatched backend must agree with the scalar reference on random
// inputs, including lengths that exercise the vector tail.
TEST_CASE("simd variants match scalar reference") {
    Rng rng(17);
    for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 33u, 257u}) {
        const auto x = random_vec(rng, n);
        const auto y = random_vec(rng, n);

        CHECK(kernels::dot(x.data(), y.data(), n) ==
              doctest::Approx(kernels::scalar::dot(x.data(), y.data(), n))
                  .epsilon(1e-12));
        CHECK(kernels::sqdist(x.data(), y.data(), n) ==
              doctest::Approx(kernels::scalar::sqdist(x.data(), y.data(), n))
                  .epsilon(1e-12));

        auto a = y, b = y;
        kernels::axpy(0.37, x.data(), a.data(), n);
        kernels::scalar::axpy(0.37, x.data(), b.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

        std::vector<double> c(n), d(n);
        kernels::axpby(-1.5, x.data(), 2.25, y.data(), c.data(), n);
        kernels::scalar::axpby(-1.5, x.data(), 2.25, y.data(), d.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(c[i] == doctest::Approx(d[i]).epsilon(1e-12));

        auto s1 = x, s2 = x;
        kernels::softmax_row(s1.data(), n);
        kernels::scalar::softmax_row(s2.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-12));
    }
}

TEST_CASE("neg_half_sqdist_row matches brute force") {
    Rng rng(5);
    const std::size_t rows = 13, dim = 6;
    const auto emb = random_vec(rng, rows * dim);
    const auto x = random_vec(rng, dim);
    std::vector<double> got(rows), ref(rows);
    kernels::neg_half_sqdist_row(x.data(), emb.data(), rows, dim, got.data());
    kernels::scalar::neg_half_sqdist_row(x.data(), emb.data(), rows, dim,
                                         ref.data());
    for (std::size_t j = 0; j < rows; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double diff = x[k] - emb[j * dim + k];
            acc += diff * diff;
        }
        CHECK(got[j] == doctest::Approx(-0.5 * acc).epsilon(1e-12));
        CHECK(ref[j] == doctest::Approx(-0.5 * acc).epsilon(1e-12));
    }
}

TEST_CASE("softmax_row is normalized and stable") {
    std::vector<double> big = {1e6, 1e6 - 1.0};
    kernels::softmax_row(big.data(), big.size());
    CHECK(big[0] + big[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(big[0] > big[1]);

    // shift invariance
    std::vector<double> a = {0.3, -1.2, 2.0};
    std::vector<double> b = {0.3 + 7.3, -1.2 + 7.3, 2.0 + 7.3};
    kernels::softmax_row(a.data(), 3);
    kernels::softmax_row(b.data(), 3);
    for (int i = 0; i < 3; ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("backend name reports the live dispatch") {
    const auto name = kernels::backend_name();
    CHECK((name == "avx2" || name == "scalar"));
}
