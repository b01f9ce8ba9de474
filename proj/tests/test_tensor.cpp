/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gsr/optim.hpp"
#include "gsr/parallel.hpp"
#include "gsr/tensor.hpp"
#include "testutil.hpp"

using namespace gsr;
using gsr::test::fd_check_viol;

TEST_CASE("matmul identity") {
    auto I = Tensor::from_vector({2, 2}, {1, 0, 0, 1});
    auto v = Tensor::from_vector({2, 1}, {3, 4});
    auto r = matmul(I, v);
    CHECK(r.data()[0] == 3.0f);
    CHECK(r.data()[1] == 4.0f);
}

TEST_CASE("reduce_sum basics") {
    auto t = Tensor::from_vector({3}, {1, 2, 3});
    CHECK(sum_all(t).item() == 6.0f);
}

TEST_CASE("conv2d identity kernel") {
    Rng rng(7);
    auto img = Tensor::randn({1, 1, 5, 5}, rng);
    auto k = Tensor::from_vector({1, 1, 1, 1}, {1.0f});
    auto out = conv2d(img, k, {}, 1, 0);
    REQUIRE(out.shape() == Shape{1, 1, 5, 5});
    for (int i = 0; i < 25; ++i) CHECK(out.data()[i] == img.data()[i]);
}

TEST_CASE("shape mismatch errors name both shapes") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({4, 5});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(add(Tensor::zeros({3}), Tensor::zeros({4})), doctest::Contains("[4]"),
                         std::invalid_argument);
}

TEST_CASE("grad of sum(w*w) is 2w") {
    auto w = Tensor::from_vector({2}, {1, 2}, true);
    backward(sum_all(mul(w, w)));
    CHECK(w.grad()[0] == doctest::Approx(2.0f));
    CHECK(w.grad()[1] == doctest::Approx(4.0f));
}

TEST_CASE("grad of sum(A x) equals column sums of A") {
    Rng rng(3);
    auto A = Tensor::randn({4, 3}, rng);
    auto x = Tensor::randn({3, 1}, rng, 1.0f, true);
    const double err = fd_check_viol([&] { return sum_all(matmul(A, x)); }, {x});
    CHECK(err <= 1.0);
    // column sums
    for (int c = 0; c < 3; ++c) {
        float want = 0.0f;
        for (int r = 0; r < 4; ++r) want += A.data()[r * 3 + c];
        CHECK(x.grad()[c] == doctest::Approx(want).epsilon(1e-4));
    }
}

TEST_CASE("constant leaf gets no grad") {
    auto w = Tensor::from_vector({2}, {1, 2}, true);
    auto c = Tensor::from_vector({2}, {5, 6});
    backward(sum_all(mul(w, c)));
    CHECK(w.has_grad());
    CHECK(!c.has_grad());
}

TEST_CASE("non-scalar backward root rejected") {
    auto w = Tensor::from_vector({2}, {1, 2}, true);
    CHECK_THROWS_AS(backward(mul(w, w)), std::invalid_argument);
}

TEST_CASE("finite differences across the op set") {
    Rng rng(11);
    set_thread_count(1);
    SUBCASE("elementwise and broadcast") {
        auto a = Tensor::randn({2, 3, 4, 4}, rng, 1.0f, true);
        auto b = Tensor::randn({3, 1, 1}, rng, 1.0f, true);
        auto c = Tensor::randn({2, 3, 4, 4}, rng, 1.0f, true);
        const double err = fd_check_viol(
            [&] {
                auto s = add(mul(a, b), div(c, add_scalar(square(b), 1.5f)));
                return mean_all(mul(s, s));
            },
            {a, b, c});
        CHECK(err <= 1.0);
    }
    SUBCASE("activations") {
        auto a = Tensor::randn({2, 17}, rng, 0.8f, true);
        const double err = fd_check_viol(
            [&] {
                auto h = add(silu(a), add(sigmoid(a), add(tanh(a), exp(mul_scalar(a, 0.3f)))));
                return mean_all(square(h));
            },
            {a});
        CHECK(err <= 1.0);
    }
    SUBCASE("log sqrt abs on positive inputs") {
        std::vector<float> vals(12);
        Rng r2(5);
        for (auto& v : vals) v = 0.5f + r2.uniform_f();
        auto a = Tensor::from_vector({12}, vals, true);
        const double err = fd_check_viol(
            [&] { return mean_all(add(log(a), add(sqrt(a), abs(a)))); }, {a});
        CHECK(err <= 1.0);
    }
    SUBCASE("matmul both sides") {
        auto A = Tensor::randn({3, 5}, rng, 1.0f, true);
        auto B = Tensor::randn({5, 2}, rng, 1.0f, true);
        const double err = fd_check_viol([&] { return mean_all(square(matmul(A, B))); }, {A, B});
        CHECK(err <= 1.0);
    }
    SUBCASE("conv2d stride 1 and 2 with bias") {
        auto x = Tensor::randn({2, 3, 8, 8}, rng, 1.0f, true);
        auto w = Tensor::randn({4, 3, 3, 3}, rng, 0.4f, true);
        auto b = Tensor::randn({4}, rng, 0.2f, true);
        const double e1 =
            fd_check_viol([&] { return mean_all(square(conv2d(x, w, b, 1, 1))); }, {x, w, b});
        CHECK(e1 <= 1.0);
        const double e2 =
            fd_check_viol([&] { return mean_all(square(conv2d(x, w, b, 2, 1))); }, {x, w, b});
        CHECK(e2 <= 1.0);
    }
    SUBCASE("upsample avgpool slice concat reshape") {
        auto x = Tensor::randn({1, 2, 4, 4}, rng, 1.0f, true);
        const double err = fd_check_viol(
            [&] {
                auto u = upsample_nearest2(x);
                auto p = avgpool2(u);
                auto s0 = slice(p, 1, 0, 1);
                auto s1 = slice(p, 1, 1, 1);
                auto cat = concat({s0, s1, s0}, 1);
                return mean_all(square(reshape(cat, {3, 16})));
            },
            {x});
        CHECK(err <= 1.0);
    }
    SUBCASE("sum_axis") {
        auto x = Tensor::randn({2, 3, 4, 4}, rng, 1.0f, true);
        const double err =
            fd_check_viol([&] { return mean_all(square(sum_axis(x, 1))); }, {x});
        CHECK(err <= 1.0);
    }
}

TEST_CASE("backward deterministic across identical graphs") {
    Rng rng(23);
    auto x = Tensor::randn({2, 3, 8, 8}, rng, 1.0f, true);
    auto w = Tensor::randn({4, 3, 3, 3}, rng, 0.4f, true);
    auto run = [&] {
        x.zero_grad();
        w.zero_grad();
        backward(mean_all(square(conv2d(x, w, {}, 1, 1))));
        return std::vector<float>(w.grad().begin(), w.grad().end());
    };
    const auto g1 = run();
    const auto g2 = run();
    CHECK(g1 == g2);
}

TEST_CASE("thread count does not change results") {
    Rng rng(29);
    auto x = Tensor::randn({2, 8, 16, 16}, rng, 1.0f, true);
    auto w = Tensor::randn({8, 8, 3, 3}, rng, 0.2f, true);
    auto run = [&](int threads) {
        set_thread_count(threads);
        x.zero_grad();
        w.zero_grad();
        backward(mean_all(square(conv2d(x, w, {}, 1, 1))));
        std::vector<float> out(w.grad().begin(), w.grad().end());
        set_thread_count(1);
        return out;
    };
    CHECK(run(1) == run(4));
}

TEST_CASE("gradient accumulation equals combined pass") {
    Rng rng(31);
    std::vector<float> vals(6);
    for (auto& v : vals) v = rng.normal_f();
    auto mk = [&] { return Tensor::from_vector({6}, vals, true); };

    auto w1 = mk();
    backward(add(sum_all(mul(w1, w1)), sum_all(exp(w1))));
    std::vector<float> combined(w1.grad().begin(), w1.grad().end());

    auto w2 = mk();
    backward(sum_all(mul(w2, w2)));
    backward(sum_all(exp(w2)));  // accumulates
    for (size_t i = 0; i < combined.size(); ++i)
        CHECK(w2.grad()[i] == doctest::Approx(combined[i]).epsilon(1e-5));
}

// ---- AdamW ---------------------------------------------------------------

namespace {

// Independent double-precision AdamW reference for one scalar parameter.
double reference_adamw_scalar(double w0, double lr, double wd, int steps,
                              const std::function<double(double)>& grad_fn) {
    double w = w0, m = 0.0, v = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= steps; ++t) {
        const double g = grad_fn(w);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        w -= lr * wd * w;
        w -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    return w;
}

}  // namespace

TEST_CASE("adamw zero gradient leaves parameters unchanged") {
    ParamStore ps;
    auto p = ps.add("w", Tensor::from_vector({3}, {1, 2, 3}, true));
    p.grad_buffer();  // zeros
    AdamW opt({.lr = 0.1f, .weight_decay = 0.0f});
    opt.step(ps);
    CHECK(p.data()[0] == 1.0f);
    CHECK(p.data()[1] == 2.0f);
    CHECK(p.data()[2] == 3.0f);
}

TEST_CASE("adamw clips the global gradient norm") {
    ParamStore ps;
    auto a = ps.add("a", Tensor::from_vector({1}, {0.0f}, true));
    auto b = ps.add("b", Tensor::from_vector({1}, {0.0f}, true));
    a.grad_buffer()[0] = 6.0f;
    b.grad_buffer()[0] = 8.0f;  // norm 10
    AdamW opt({.lr = 1.0f, .clip_norm = 1.0f});
    opt.step(ps);
    CHECK(opt.last_grad_norm() == doctest::Approx(10.0));
    // effective gradients scaled by 0.1 -> first-step adam update ~ lr * sign
    // with bias correction; verify against the scalar reference.
    const double want_a = reference_adamw_scalar(0.0, 1.0, 0.0, 1, [](double) { return 0.6; });
    CHECK(a.data()[0] == doctest::Approx(want_a).epsilon(1e-5));
}

TEST_CASE("adamw drives (w-3)^2 to the minimum") {
    ParamStore ps;
    auto p = ps.add("w", Tensor::from_vector({1}, {0.5f}, true));
    AdamW opt({.lr = 0.1f});
    for (int i = 0; i < 100; ++i) {
        ps.zero_grad();
        backward(sum_all(square(add_scalar(p, -3.0f))));
        opt.step(ps);
    }
    const double ref =
        reference_adamw_scalar(0.5, 0.1, 0.0, 100, [](double w) { return 2.0 * (w - 3.0); });
    CHECK(std::fabs(p.data()[0] - 3.0) < 1e-2);
    CHECK(p.data()[0] == doctest::Approx(ref).epsilon(1e-3));
}

TEST_CASE("adamw rejects non-finite gradients naming the parameter") {
    ParamStore ps;
    auto p = ps.add("bad_param", Tensor::from_vector({1}, {0.0f}, true));
    p.grad_buffer()[0] = std::numeric_limits<float>::quiet_NaN();
    AdamW opt({.lr = 0.1f});
    CHECK_THROWS_WITH_AS(opt.step(ps), doctest::Contains("bad_param"), std::runtime_error);
}
