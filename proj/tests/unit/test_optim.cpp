#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mclpd/optim.hpp"

using namespace mclpd;

namespace {

ParamSet scalar_params(std::initializer_list<std::pair<const char*, double>> init) {
    ParamSet set;
    for (const auto& [name, value] : init) {
        Tensor t({1});
        t.v[0] = value;
        set.add(name, 1, std::move(t));
    }
    return set;
}

}  // namespace

TEST_CASE("layer_lr follows the decay rule") {
    CHECK(layer_lr(1e-3, 0.5, 4, 4) == doctest::Approx(1e-3));
    CHECK(layer_lr(1e-3, 0.5, 4, 2) == doctest::Approx(2.5e-4));
    CHECK(layer_lr(1e-3, 1.0, 4, 1) == doctest::Approx(1e-3));
    CHECK_THROWS_AS(layer_lr(1e-3, 0.5, 4, 0), std::out_of_range);
    CHECK_THROWS_AS(layer_lr(1e-3, 0.5, 4, 5), std::out_of_range);
    CHECK_THROWS_AS(layer_lr(1e-3, 0.0, 4, 1), std::invalid_argument);
    // monotone non-decreasing in l
    double prev = 0.0;
    for (int l = 1; l <= 6; ++l) {
        const double lr = layer_lr(1e-3, 0.65, 6, l);
        CHECK(lr >= prev);
        prev = lr;
    }
}

TEST_CASE("unfrozen_set") {
    CHECK(unfrozen_set(4, 1) == std::vector<int>{4});
    CHECK(unfrozen_set(4, 2) == std::vector<int>{4, 3});
    CHECK(unfrozen_set(4, 4) == std::vector<int>{4, 3, 2, 1});
    CHECK_THROWS_AS(unfrozen_set(4, 5), std::out_of_range);
    CHECK_THROWS_AS(unfrozen_set(4, 0), std::out_of_range);
}

TEST_CASE("cosine_warm_restarts") {
    const double mx = 1e-3, mn = 1e-5;
    CHECK(cosine_warm_restarts(0.0, 10, 2, mx, mn) == doctest::Approx(mx));
    CHECK(cosine_warm_restarts(5.0, 10, 2, mx, mn) == doctest::Approx((mx + mn) / 2.0));
    // restart boundaries: cycles are 10, 20, 40 -> restarts at 10, 30, 70
    CHECK(cosine_warm_restarts(10.0, 10, 2, mx, mn) == doctest::Approx(mx));
    CHECK(cosine_warm_restarts(30.0, 10, 2, mx, mn) == doctest::Approx(mx));
    CHECK(cosine_warm_restarts(20.0, 10, 2, mx, mn) == doctest::Approx((mx + mn) / 2.0));
    // mult = 1 keeps a fixed cycle
    CHECK(cosine_warm_restarts(25.0, 10, 1, mx, mn) == doctest::Approx((mx + mn) / 2.0));
    CHECK_THROWS_AS(cosine_warm_restarts(0.0, 0.5, 2, mx, mn), std::invalid_argument);
    CHECK_THROWS_AS(cosine_warm_restarts(0.0, 10, 0.5, mx, mn), std::invalid_argument);
}

TEST_CASE("adamw: zero gradients") {
    Tensor value({2});
    value.v = {1.0, -2.0};
    Tensor grad({2});
    MomentPair mom;
    adamw_step(value, grad, mom, 0.01, 0.0);
    CHECK(value.v[0] == 1.0);
    CHECK(value.v[1] == -2.0);

    // decoupled decay shrinks weights by (1 - lr*wd) per step
    const double lr = 0.01, wd = 1e-4;
    adamw_step(value, grad, mom, lr, wd);
    CHECK(value.v[0] == doctest::Approx(1.0 * (1.0 - lr * wd)).epsilon(1e-12));
    adamw_step(value, grad, mom, lr, wd);
    CHECK(value.v[0] == doctest::Approx(1.0 * std::pow(1.0 - lr * wd, 2)).epsilon(1e-12));
}

TEST_CASE("adamw converges on a quadratic") {
    Tensor theta({1});
    theta.v = {0.0};
    MomentPair mom;
    for (int t = 0; t < 200; ++t) {
        Tensor grad({1});
        grad.v = {2.0 * (theta.v[0] - 3.0)};
        adamw_step(theta, grad, mom, 0.05, 0.0);
    }
    CHECK(std::abs(theta.v[0] - 3.0) < 0.1);
}

TEST_CASE("adamw rejects non-finite gradients") {
    Tensor value({1});
    value.v = {1.0};
    Tensor grad({1});
    grad.v = {std::nan("")};
    MomentPair mom;
    CHECK_THROWS_AS(adamw_step(value, grad, mom, 0.01, 0.0), std::runtime_error);
    CHECK(value.v[0] == 1.0);
}

TEST_CASE("lookahead: sync arithmetic of the slow weights") {
    // slow=0, fast=2, beta=0.5 at a sync point -> slow'=1 and fast reset to 1
    ParamSet set = scalar_params({{"p", 2.0}});
    TrainState st;
    st.inner_k = 1;
    st.slow_rate = 0.5;
    Tensor zero({1});
    st.slow.emplace("p", zero);
    lookahead_step(st, set, {{"p", 0.0}}, 0.0);  // zero lr: inner step is a no-op
    CHECK(st.slow.at("p").v[0] == doctest::Approx(1.0));
    CHECK(set.get("p").value.v[0] == doctest::Approx(1.0));
}

TEST_CASE("lookahead: beta=1 k=1 equals the inner optimizer") {
    ParamSet wrapped = scalar_params({{"p", 5.0}});
    ParamSet plain = scalar_params({{"p", 5.0}});
    TrainState st_wrapped, st_plain;
    st_wrapped.inner_k = 1;
    st_wrapped.slow_rate = 1.0;
    st_plain.inner_k = 0;
    for (int t = 0; t < 25; ++t) {
        const double g = 2.0 * (wrapped.get("p").value.v[0] - 1.0);
        wrapped.get("p").grad.v[0] = g;
        plain.get("p").grad.v[0] = 2.0 * (plain.get("p").value.v[0] - 1.0);
        lookahead_step(st_wrapped, wrapped, {{"p", 0.02}}, 0.0);
        lookahead_step(st_plain, plain, {{"p", 0.02}}, 0.0);
        CHECK(std::abs(wrapped.get("p").value.v[0] - plain.get("p").value.v[0]) < 1e-12);
    }
}

TEST_CASE("lookahead descends on a convex quadratic") {
    ParamSet set = scalar_params({{"p", 4.0}});
    TrainState st;
    st.inner_k = 5;
    st.slow_rate = 0.5;
    auto f = [&]() {
        const double d = set.get("p").value.v[0];
        return d * d;
    };
    const double before = f();
    for (int t = 0; t < 20; ++t) {
        set.get("p").grad.v[0] = 2.0 * set.get("p").value.v[0];
        lookahead_step(st, set, {{"p", 0.05}}, 0.0);
    }
    CHECK(f() < before);
}

TEST_CASE("lookahead rejects non-finite gradients without touching state") {
    ParamSet set = scalar_params({{"a", 1.0}, {"b", 2.0}});
    TrainState st;
    st.inner_k = 2;
    set.get("a").grad.v[0] = 0.5;
    set.get("b").grad.v[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(lookahead_step(st, set, {{"a", 0.01}, {"b", 0.01}}, 0.0),
                    std::runtime_error);
    CHECK(set.get("a").value.v[0] == 1.0);
    CHECK(set.get("b").value.v[0] == 2.0);
    CHECK(st.step == 0);
}

TEST_CASE("swa: averaging, permutation invariance, rejection when empty") {
    ParamSet a = scalar_params({{"w", 0.0}});
    ParamSet b = scalar_params({{"w", 2.0}});

    TrainState st;
    swa_update(st, a);
    ParamSet out = scalar_params({{"w", -1.0}});
    swa_finalize(st, out);
    CHECK(out.get("w").value.v[0] == 0.0);  // single checkpoint equals itself

    swa_update(st, b);
    swa_finalize(st, out);
    CHECK(out.get("w").value.v[0] == doctest::Approx(1.0));

    // permutation invariance
    TrainState fwd, rev;
    ParamSet c = scalar_params({{"w", 0.7}});
    swa_update(fwd, a);
    swa_update(fwd, b);
    swa_update(fwd, c);
    swa_update(rev, c);
    swa_update(rev, b);
    swa_update(rev, a);
    ParamSet o1 = scalar_params({{"w", 0.0}});
    ParamSet o2 = scalar_params({{"w", 0.0}});
    swa_finalize(fwd, o1);
    swa_finalize(rev, o2);
    CHECK(std::abs(o1.get("w").value.v[0] - o2.get("w").value.v[0]) < 1e-12);

    // bounded by min/max of the checkpoints
    CHECK(o1.get("w").value.v[0] >= 0.0);
    CHECK(o1.get("w").value.v[0] <= 2.0);

    TrainState empty;
    CHECK_THROWS_AS(swa_finalize(empty, out), std::logic_error);
}
