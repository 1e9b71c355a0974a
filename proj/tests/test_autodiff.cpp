#include <doctest.h>

#include <cmath>
#include <functional>

#include "smoothie/autodiff.hpp"
#include "smoothie/rng.hpp"

using namespace smoothie;
using ad::Tape;

namespace {

// Central finite differences of a scalar-valued function of one matrix leaf
// against the analytic gradient produced by backward().
void check_grad(const Mat& x0,
                const std::function<Tape::VarId(Tape&, Tape::VarId)>& build,
                double h = 1e-6, double tol = 1e-5) {
    Tape tape;
    const auto x = tape.leaf(x0);
    const auto loss = build(tape, x);
    REQUIRE(tape.value(loss).rows() == 1);
    REQUIRE(tape.value(loss).cols() == 1);
    tape.backward(loss);
    const Mat analytic = tape.grad(x);

    for (std::size_t i = 0; i < x0.rows(); ++i)
        for (std::size_t j = 0; j < x0.cols(); ++j) {
            Mat plus = x0, minus = x0;
            plus(i, j) += h;
            minus(i, j) -= h;
            Tape tp, tm;
            const double fp = tp.value(build(tp, tp.leaf(plus)))(0, 0);
            const double fm = tm.value(build(tm, tm.leaf(minus)))(0, 0);
            const double numeric = (fp - fm) / (2.0 * h);
            const double denom =
                std::max({std::fabs(numeric), std::fabs(analytic(i, j)), 1e-8});
            CHECK(std::fabs(numeric - analytic(i, j)) / denom < tol);
        }
}

}  // namespace

TEST_CASE("forward values of the primitive ops") {
    Tape t;
    const auto a = t.leaf(Mat::from(2, 2, {1, 2, 3, 4}));
    const auto b = t.leaf(Mat::from(2, 2, {5, 6, 7, 8}));

    CHECK(t.value(t.add(a, b))(1, 0) == 10.0);
    CHECK(t.value(t.scale(a, -2.0))(0, 1) == -4.0);
    CHECK(t.value(t.matmul(a, b))(0, 0) == 19.0);           // 1*5 + 2*7
    CHECK(t.value(t.matmul_nt(a, b))(0, 0) == 17.0);        // 1*5 + 2*6
    CHECK(t.value(t.relu(t.scale(a, -1.0)))(0, 0) == 0.0);

    const auto cat = t.concat_cols({a, b});
    CHECK(t.value(cat).cols() == 4);
    CHECK(t.value(cat)(0, 2) == 5.0);

    const auto sl = t.slice_rows(a, 1);
    CHECK(t.value(sl).rows() == 1);
    CHECK(t.value(sl)(0, 1) == 2.0);

    const auto bias = t.leaf(Mat::from(1, 2, {10, 20}));
    CHECK(t.value(t.add_rowvec(a, bias))(1, 1) == 24.0);
    CHECK(t.value(t.broadcast_row(bias, 3)).rows() == 3);
}

TEST_CASE("softmax rows forward normalization and mask") {
    Tape t;
    const auto x = t.leaf(Mat::from(1, 3, {1.0, 2.0, 3.0}));
    const Mat p = t.value(t.softmax_rows(x));
    CHECK(p(0, 0) + p(0, 1) + p(0, 2) == doctest::Approx(1.0).epsilon(1e-12));

    Mat mask(1, 3, 0.0);
    mask(0, 2) = -1e30;
    const Mat pm = t.value(t.softmax_rows(x, &mask));
    CHECK(pm(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(pm(0, 0) + pm(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gradient of matmul chain with relu and bias") {
    Rng rng(1);
    const Mat x0 = rng.normal_mat(3, 4);
    const Mat w = rng.normal_mat(4, 5);
    const Mat bias = rng.normal_mat(1, 5);
    const Mat target = rng.normal_mat(3, 5);
    check_grad(x0, [&](Tape& t, Tape::VarId x) {
        const auto h = t.relu(t.add_rowvec(t.matmul(x, t.constant(w)),
                                           t.constant(bias)));
        return t.mse_loss(h, target);
    });
}

TEST_CASE("gradient of matmul_nt and scale") {
    Rng rng(2);
    const Mat x0 = rng.normal_mat(2, 6);
    const Mat w = rng.normal_mat(3, 6);
    const Mat target = rng.normal_mat(2, 3);
    check_grad(x0, [&](Tape& t, Tape::VarId x) {
        return t.mse_loss(t.scale(t.matmul_nt(x, t.constant(w)), 0.7), target);
    });
}

TEST_CASE("gradient flows through both matmul operands") {
    Rng rng(12);
    const Mat a = rng.normal_mat(3, 3);
    const Mat target = rng.normal_mat(3, 3);
    // use the leaf on the right-hand side of the product
    check_grad(a, [&](Tape& t, Tape::VarId x) {
        return t.mse_loss(t.matmul(t.constant(a), x), target);
    });
}

TEST_CASE("gradient of masked softmax") {
    Rng rng(3);
    const Mat x0 = rng.normal_mat(4, 5);
    Mat mask(4, 5, 0.0);
    mask(0, 4) = -1e30;
    mask(2, 0) = -1e30;
    const Mat target = rng.normal_mat(4, 5);
    check_grad(x0, [&](Tape& t, Tape::VarId x) {
        return t.mse_loss(t.softmax_rows(x, &mask), target);
    });
}

TEST_CASE("gradient of layer norm w.r.t. input, gain and shift") {
    Rng rng(4);
    const Mat x0 = rng.normal_mat(3, 6);
    const Mat gamma = rng.normal_mat(1, 6);
    const Mat beta = rng.normal_mat(1, 6);
    const Mat target = rng.normal_mat(3, 6);

    check_grad(x0, [&](Tape& t, Tape::VarId x) {
        return t.mse_loss(
            t.layer_norm(x, t.constant(gamma), t.constant(beta)), target);
    });
    check_grad(gamma, [&](Tape& t, Tape::VarId g) {
        return t.mse_loss(t.layer_norm(t.constant(x0), g, t.constant(beta)),
                          target);
    });
    check_grad(beta, [&](Tape& t, Tape::VarId b) {
        return t.mse_loss(t.layer_norm(t.constant(x0), t.constant(gamma), b),
                          target);
    });
}

TEST_CASE("gradient of concat, slice, broadcast and mean") {
    Rng rng(5);
    const Mat x0 = rng.normal_mat(4, 3);
    const Mat other = rng.normal_mat(4, 2);
    const Mat target = rng.normal_mat(4, 5);
    check_grad(x0, [&](Tape& t, Tape::VarId x) {
        return t.mse_loss(t.concat_cols({x, t.constant(other)}), target);
    });

    const Mat target2 = rng.normal_mat(2, 3);
    check_grad(x0, [&](Tape& t, Tape::VarId x) {
        return t.mse_loss(t.slice_rows(x, 2), target2);
    });

    const std::vector<double> w = {0.4, 0.1, 0.3, 0.2};
    const Mat target3 = rng.normal_mat(5, 3);
    check_grad(x0, [&](Tape& t, Tape::VarId x) {
        return t.mse_loss(t.broadcast_row(t.mean_rows(x, w), 5), target3);
    });
}

TEST_CASE("gradient of interp_row on a fractional timestep") {
    Rng rng(6);
    const Mat table = rng.normal_mat(6, 4);
    const Mat target = rng.normal_mat(1, 4);
    for (double tval : {0.0, 2.0, 3.7, 5.0}) {
        check_grad(table, [&](Tape& t, Tape::VarId x) {
            return t.mse_loss(t.interp_row(x, tval), target);
        });
    }
    // forward check at an exact fraction
    Tape t;
    const auto tab = t.leaf(table);
    const Mat row = t.value(t.interp_row(tab, 1.25));
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(row(0, j) == doctest::Approx(0.75 * table(1, j) +
                                           0.25 * table(2, j))
                               .epsilon(1e-12));
}

TEST_CASE("mse loss value and gradient") {
    Tape t;
    const auto x = t.leaf(Mat::from(1, 2, {1.0, 3.0}));
    const auto loss = t.mse_loss(x, Mat::from(1, 2, {0.0, 1.0}));
    CHECK(t.value(loss)(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
    t.backward(loss);
    CHECK(t.grad(x)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.grad(x)(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cross entropy loss value and gradient") {
    // uniform logits: loss is log(V), gradient is (softmax - onehot) / rows
    Tape t;
    const auto x = t.leaf(Mat(2, 4, 0.0));
    const auto loss = t.cross_entropy_loss(x, {1, 3});
    CHECK(t.value(loss)(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    t.backward(loss);
    CHECK(t.grad(x)(0, 1) == doctest::Approx((0.25 - 1.0) / 2.0).epsilon(1e-12));
    CHECK(t.grad(x)(0, 0) == doctest::Approx(0.25 / 2.0).epsilon(1e-12));

    Rng rng(7);
    const Mat logits = rng.normal_mat(3, 5);
    check_grad(logits, [&](Tape& tp, Tape::VarId v) {
        return tp.cross_entropy_loss(v, {4, 0, 2});
    });
}

TEST_CASE("gradients accumulate through shared subexpressions") {
    // f(x) = mse(x + x, 0) = 4 * mean(x^2); df/dx = 8x / n
    Tape t;
    const auto x = t.leaf(Mat::from(1, 2, {1.0, -2.0}));
    const auto loss = t.mse_loss(t.add(x, x), Mat(1, 2, 0.0));
    t.backward(loss);
    CHECK(t.grad(x)(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(t.grad(x)(0, 1) == doctest::Approx(-8.0).epsilon(1e-12));
}
