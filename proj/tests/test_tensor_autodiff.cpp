#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "sigflow/autodiff.hpp"
#include "sigflow/ops.hpp"
#include "sigflow/rng.hpp"
#include "sigflow/tensor.hpp"

using namespace sigflow;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("tensor construction and invariants") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);

    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), NumericError);
    CHECK_THROWS_AS(Tensor({1}, {INFINITY}), NumericError);

    Tensor r = Tensor({2, 3}, {1, 2, 3, 4, 5, 6}).reshaped({3, 2});
    CHECK(r(2, 1) == 6.0);
    CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
}

TEST_CASE("conv1d identity kernel") {
    Conv1dParams p;
    p.kernels = Tensor({1, 1, 1}, {1.0});
    p.bias = Tensor({1});
    Tensor x({1, 3}, {3, -1, 4});
    Tensor y = conv1d(x, p);
    CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv1d box kernel with zero padding") {
    Conv1dParams p;
    p.kernels = Tensor({1, 1, 3}, {1.0, 1.0, 1.0});
    p.bias = Tensor({1});
    Tensor y = conv1d(Tensor({1, 3}, {1, 2, 3}), p);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[1] == doctest::Approx(6.0));
    CHECK(y[2] == doctest::Approx(5.0));
}

TEST_CASE("conv1d channel sum plus bias") {
    Conv1dParams p;
    p.kernels = Tensor({1, 2, 1}, {1.0, 1.0});
    p.bias = Tensor({1}, {0.5});
    Tensor y = conv1d(Tensor({2, 2}, {1, 2, 3, 4}), p);
    CHECK(y[0] == doctest::Approx(4.5));
    CHECK(y[1] == doctest::Approx(6.5));
}

TEST_CASE("conv1d shape errors name the offending dimension") {
    Conv1dParams p;
    p.kernels = Tensor({1, 2, 3});
    p.bias = Tensor({1});
    CHECK_THROWS_WITH_AS(conv1d(Tensor({3, 4}), p), doctest::Contains("C_in"),
                         ShapeError);
    Conv1dParams even;
    even.kernels = Tensor({1, 1, 2});
    even.bias = Tensor({1});
    CHECK_THROWS_AS(conv1d(Tensor({1, 4}), even), ShapeError);
    Conv1dParams wide;
    wide.kernels = Tensor({1, 1, 9});
    wide.bias = Tensor({1});
    CHECK_THROWS_WITH_AS(conv1d(Tensor({1, 4}), wide), doctest::Contains("2T-1"),
                         ShapeError);
}

TEST_CASE("conv1d is linear") {
    Rng rng(7);
    Conv1dParams p;
    p.kernels = random_tensor({3, 2, 5}, rng);
    p.bias = Tensor({3});  // bias breaks linearity, keep it zero here
    Tensor x = random_tensor({2, 16}, rng);
    Tensor y = random_tensor({2, 16}, rng);
    const double a = 1.7, b = -0.4;
    Tensor lhs = conv1d(add(scale(x, a), scale(y, b)), p);
    Tensor rhs = add(scale(conv1d(x, p), a), scale(conv1d(y, p), b));
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("relu") {
    Tensor y = relu(Tensor({3}, {-1, 0, 2}));
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);

    Tensor neg = relu(Tensor({3}, {-5, -1, -0.1}));
    CHECK(max_abs(neg) == 0.0);
    Tensor pos({3}, {5, 1, 0.1});
    CHECK(max_abs_diff(relu(pos), pos) == 0.0);
}

TEST_CASE("backward of sum is ones") {
    ad::Tape tape;
    ad::Var x = tape.leaf(Tensor({3}, {1, 2, 3}), true);
    auto grads = tape.backward(ad::sum(x));
    const Tensor& g = grads.at(x.id);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 1.0);
    CHECK(g[2] == 1.0);
}

TEST_CASE("relu subgradient convention") {
    ad::Tape tape;
    ad::Var x = tape.leaf(Tensor({2}, {-1, 2}), true);
    auto grads = tape.backward(ad::sum(ad::relu(x)));
    CHECK(grads.at(x.id)[0] == 0.0);
    CHECK(grads.at(x.id)[1] == 1.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    ad::Tape tape;
    ad::Var x = tape.leaf(Tensor({3}, {1, 2, 3}), true);
    CHECK_THROWS_AS(tape.backward(ad::relu(x)), ShapeError);
}

TEST_CASE("backward twice is deterministic") {
    ad::Tape tape;
    ad::Var x = tape.leaf(Tensor({4}, {0.3, -1.2, 2.0, 0.7}), true);
    ad::Var loss = ad::sum(ad::mul(ad::vexp(x), ad::relu(x)));
    auto g1 = tape.backward(loss);
    auto g2 = tape.backward(loss);
    CHECK(max_abs_diff(g1.at(x.id), g2.at(x.id)) == 0.0);
}

// composite of conv1d/relu/exp/log/sum against the finite-difference oracle
TEST_CASE("gradients match finite differences on random composites") {
    Rng rng(42);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t c_in = 1 + rng.integer(3);
        const std::size_t c_out = 1 + rng.integer(3);
        const std::size_t K = 1 + 2 * rng.integer(3);
        const std::size_t T = std::max<std::size_t>((K + 1) / 2, 3 + rng.integer(6));

        Tensor x0 = random_tensor({c_in, T}, rng);
        Tensor k0 = random_tensor({c_out, c_in, K}, rng, -0.8, 0.8);
        Tensor b0 = random_tensor({c_out}, rng, -0.5, 0.5);

        // relu input shifted by 0.75 keeps most activations away from the kink
        ad::Tape tape;
        ad::Var xv = tape.leaf(x0, true);
        ad::Var kv = tape.leaf(k0, true);
        ad::Var bv = tape.leaf(b0, true);
        ad::Var h = ad::conv1d(xv, kv, bv);
        ad::Var r = ad::relu(ad::add_scalar(h, 0.75));
        ad::Var e = ad::vexp(ad::scale(h, 0.3));
        ad::Var l = ad::vlog(ad::add_scalar(ad::mul(e, e), 1.5));
        ad::Var loss = ad::add(ad::sum(ad::mul(r, e)), ad::sum(l));
        auto grads = tape.backward(loss);

        auto scalar_loss = [&](const Tensor& x, const Tensor& k, const Tensor& b) {
            ad::Tape t2;
            ad::Var xv2 = t2.leaf(x);
            ad::Var kv2 = t2.leaf(k);
            ad::Var bv2 = t2.leaf(b);
            ad::Var h2 = ad::conv1d(xv2, kv2, bv2);
            ad::Var r2 = ad::relu(ad::add_scalar(h2, 0.75));
            ad::Var e2 = ad::vexp(ad::scale(h2, 0.3));
            ad::Var l2 = ad::vlog(ad::add_scalar(ad::mul(e2, e2), 1.5));
            return ad::add(ad::sum(ad::mul(r2, e2)), ad::sum(l2)).value()[0];
        };

        Tensor fd_x = fd::gradient(
            [&](const Tensor& x) { return scalar_loss(x, k0, b0); }, x0);
        Tensor fd_k = fd::gradient(
            [&](const Tensor& k) { return scalar_loss(x0, k, b0); }, k0);
        Tensor fd_b = fd::gradient(
            [&](const Tensor& b) { return scalar_loss(x0, k0, b); }, b0);

        worst = std::max(worst, fd::max_rel_err(grads.at(xv.id), fd_x));
        worst = std::max(worst, fd::max_rel_err(grads.at(kv.id), fd_k));
        worst = std::max(worst, fd::max_rel_err(grads.at(bv.id), fd_b));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("structural ops round-trip and backprop") {
    Rng rng(3);
    Tensor x0 = random_tensor({4, 8}, rng);

    CHECK(max_abs_diff(unsqueeze2(squeeze2(x0)), x0) == 0.0);
    CHECK(dot(x0, x0) == doctest::Approx(dot(squeeze2(x0), squeeze2(x0))));
    CHECK(max_abs_diff(rotate_channels(rotate_channels(x0, 1), -1), x0) == 0.0);

    // (1,4) [a,b,c,d] -> (2,2) [[a,c],[b,d]]
    Tensor s = squeeze2(Tensor({1, 4}, {1, 2, 3, 4}));
    CHECK(s(0, 0) == 1.0);
    CHECK(s(0, 1) == 3.0);
    CHECK(s(1, 0) == 2.0);
    CHECK(s(1, 1) == 4.0);

    CHECK_THROWS_AS(squeeze2(Tensor({2, 5})), ShapeError);

    ad::Tape tape;
    ad::Var xv = tape.leaf(x0, true);
    ad::Var y = ad::rotate_channels(ad::squeeze2(xv), 1);
    ad::Var w = tape.leaf(random_tensor(y.value().shape(), rng));
    auto grads = tape.backward(ad::sum(ad::mul(y, w)));
    Tensor fdg = fd::gradient(
        [&](const Tensor& x) {
            return dot(sigflow::rotate_channels(squeeze2(x), 1), w.value());
        },
        x0);
    CHECK(fd::max_rel_err(grads.at(xv.id), fdg) < 1e-6);
}

TEST_CASE("hartley is orthonormal and involutory") {
    Rng rng(11);
    for (std::size_t T : {2u, 3u, 8u, 15u, 32u}) {
        Tensor x = random_tensor({2, T}, rng);
        Tensor hx = hartley(x);
        CHECK(norm2(hx) == doctest::Approx(norm2(x)).epsilon(1e-10));
        CHECK(max_abs_diff(hartley(hx), x) < 1e-10);
    }
    // T=2, x=[1,0] -> [1/sqrt(2), 1/sqrt(2)]
    Tensor h = hartley(Tensor({1, 2}, {1, 0}));
    CHECK(h[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(h[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("row/element/cmax ops backprop correctly") {
    ad::Tape tape;
    Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
    ad::Var mv = tape.leaf(m, true);
    ad::Var r = ad::row(mv, 1);
    CHECK(r.value()[0] == 4.0);
    auto grads = tape.backward(ad::sum(r));
    CHECK(grads.at(mv.id)(0, 0) == 0.0);
    CHECK(grads.at(mv.id)(1, 2) == 1.0);

    ad::Tape t2;
    ad::Var v = t2.leaf(Tensor({3}, {0.5, -2.0, 3.0}), true);
    ad::Var clamped = ad::cmax(v, 0.0);
    CHECK(clamped.value()[1] == 0.0);
    auto g2 = t2.backward(ad::sum(clamped));
    CHECK(g2.at(v.id)[0] == 1.0);
    CHECK(g2.at(v.id)[1] == 0.0);

    ad::Var e = ad::element(v, 2);
    CHECK(e.value()[0] == 3.0);
}
