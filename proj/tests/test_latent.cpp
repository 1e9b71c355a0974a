#include <doctest.h>

#include <cmath>

#include "smoothie/latent.hpp"
#include "smoothie/rng.hpp"

using namespace smoothie;

namespace {

EmbeddingMatrix small_emb(std::uint64_t seed = 2, std::size_t V = 8,
                          std::size_t d = 4) {
    return EmbeddingMatrix::init_random(V, d, seed).normalized();
}

// brute-force distance grid, no shared code with compute_D0
Mat d0_oracle(const EmbeddingMatrix& E, const std::vector<TokenId>& tgt) {
    Mat out(tgt.size(), E.V());
    for (std::size_t i = 0; i < tgt.size(); ++i)
        for (std::size_t j = 0; j < E.V(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < E.d(); ++k) {
                const double diff = E.mat()(static_cast<std::size_t>(tgt[i]), k) -
                                    E.mat()(j, k);
                acc += diff * diff;
            }
            out(i, j) = -0.5 * acc;
        }
    return out;
}

}  // namespace

TEST_CASE("euclidean D0 matches brute force and is zero at the target") {
    const auto E = small_emb();
    const std::vector<TokenId> tgt = {3, 0, 7, 3};
    const Mat D0 = compute_D0(E, tgt, MetricKind{});
    const Mat ref = d0_oracle(E, tgt);
    CHECK(max_abs_diff(D0, ref) < 1e-12);
    for (std::size_t i = 0; i < tgt.size(); ++i) {
        CHECK(D0(i, static_cast<std::size_t>(tgt[i])) ==
              doctest::Approx(0.0).epsilon(1e-12));
        for (std::size_t j = 0; j < E.V(); ++j) CHECK(D0(i, j) <= 0.0);
    }
    CHECK_THROWS(compute_D0(E, {static_cast<TokenId>(E.V())}, MetricKind{}));
}

TEST_CASE("trivial metric D0 is the 0/-1 grid") {
    const auto E = small_emb();
    MetricKind metric;
    metric.kind = Metric::kTrivial;
    const Mat D0 = compute_D0(E, {2, 5}, metric);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < E.V(); ++j) {
            const TokenId tgt = i == 0 ? 2 : 5;
            CHECK(D0(i, j) == (static_cast<TokenId>(j) == tgt ? 0.0 : -1.0));
        }
}

TEST_CASE("compute_D0_from_embeddings agrees with compute_D0 on exact rows") {
    const auto E = small_emb();
    const std::vector<TokenId> tgt = {1, 6};
    const Mat from_pred = compute_D0_from_embeddings(E.lookup(tgt), E);
    CHECK(max_abs_diff(from_pred, compute_D0(E, tgt, MetricKind{})) < 1e-12);
}

TEST_CASE("simplex latent has +k on target, -k elsewhere") {
    const Mat S0 = simplex_latent({1, 3}, 5.0, 4);
    CHECK(S0.rows() == 2);
    CHECK(S0.cols() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(S0(0, j) == (j == 1 ? 5.0 : -5.0));
        CHECK(S0(1, j) == (j == 3 ? 5.0 : -5.0));
    }
}

TEST_CASE("softmax_rows normalizes each row and rejects non-finite input") {
    Rng rng(9);
    const Mat grid = rng.normal_mat(5, 7);
    const Mat p = softmax_rows(grid);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
            CHECK(p(i, j) > 0.0);
            total += p(i, j);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    Mat bad(1, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS(softmax_rows(bad));
}

TEST_CASE("model input interpolates embeddings") {
    const auto E = small_emb();
    // a one-hot row recovers the embedding exactly
    Mat p(1, E.V(), 0.0);
    p(0, 4) = 1.0;
    const Mat x = model_input(p, E);
    for (std::size_t k = 0; k < E.d(); ++k)
        CHECK(x(0, k) == doctest::Approx(E.mat()(4, k)).epsilon(1e-12));

    // the uniform row recovers the column means
    Mat u(1, E.V(), 1.0 / static_cast<double>(E.V()));
    const Mat xu = model_input(u, E);
    for (std::size_t k = 0; k < E.d(); ++k) {
        double mean = 0.0;
        for (std::size_t j = 0; j < E.V(); ++j) mean += E.mat()(j, k);
        mean /= static_cast<double>(E.V());
        CHECK(xu(0, k) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("decode_argmax picks the max, lowest id on ties") {
    const Mat grid = Mat::from(3, 4, {0, 5, 2, 1,   //
                                      7, 7, 1, 0,   //
                                      -3, -1, -1, -2});
    CHECK(decode_argmax(grid) == std::vector<TokenId>{1, 0, 1});
}

TEST_CASE("decode_nearest recovers exact and perturbed rows") {
    const auto E = small_emb(4, 10, 6);
    const std::vector<TokenId> ids = {9, 0, 4};
    Mat x = E.lookup(ids);
    CHECK(decode_nearest(x, E) == ids);
    Rng rng(1);
    for (double& v : x.vec()) v += 0.01 * rng.normal();
    CHECK(decode_nearest(x, E) == ids);
}

TEST_CASE("simplex forward process equals trivial-metric smoothie forward") {
    // softmax(phi*S0 + gamma*eps) == softmax(2k*phi*D0_trivial + gamma*eps)
    // because s^w - k = 2k * d^w shifts every row by a constant.
    Rng rng(33);
    const std::size_t V = 12;
    const std::vector<TokenId> tgt = {0, 3, 11, 7};
    for (double phi : {0.03, 0.4, 1.0}) {
        for (double gamma : {0.0, 0.7}) {
            const Mat noise = rng.normal_mat(tgt.size(), V);
            CHECK(verify_simplex_equivalence(tgt, 5.0, phi, gamma, noise, V) <
                  1e-10);
        }
    }
}

TEST_CASE("distance-to-expectation offset is constant across the vocab") {
    Rng rng(21);
    const auto E = small_emb(12, 20, 8);
    std::vector<double> dist(E.V());
    double total = 0.0;
    for (double& p : dist) total += (p = rng.uniform() + 0.01);
    for (double& p : dist) p /= total;

    const auto report = verify_theorem_offset(E, dist);
    CHECK(report.max_row_deviation < 1e-10);
    CHECK(report.max_offset_mismatch < 1e-10);

    // degenerate distribution: the expectation is an embedding row, so the
    // variance term and the deviation both vanish
    std::vector<double> onehot(E.V(), 0.0);
    onehot[3] = 1.0;
    const auto degen = verify_theorem_offset(E, onehot);
    CHECK(degen.max_row_deviation < 1e-10);
    CHECK(degen.max_offset_mismatch < 1e-10);
}
