#include <doctest.h>

#include <cmath>
#include <random>

#include "kan/knots.hpp"

using namespace kan;

TEST_CASE("uniform knots, r=2 on [0,1] with n=2") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 2, 2);
    REQUIRE(kv.count() == 5);
    CHECK(kv.t(-1) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(kv.t(0) == 0.0);
    CHECK(kv.t(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(kv.t(2) == 1.0);
    CHECK(kv.t(3) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(kv.dim() == 3);
}

TEST_CASE("uniform knots, r=1 adds no extension") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 4, 1);
    REQUIRE(kv.count() == 5);
    for (int i = 0; i <= 4; ++i)
        CHECK(kv.t(i) == doctest::Approx(0.25 * i).epsilon(1e-15));
}

TEST_CASE("uniform knots on [-3,3] with n=6") {
    KnotVector kv = make_uniform_knots(-3.0, 3.0, 6, 2);
    for (int i = 0; i <= 6; ++i)
        CHECK(kv.t(i) == doctest::Approx(-3.0 + i).epsilon(1e-15));
}

TEST_CASE("uniform knots rejects bad arguments") {
    CHECK_THROWS_AS(make_uniform_knots(1.0, 0.0, 4, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_uniform_knots(0.0, 1.0, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_uniform_knots(0.0, 1.0, 4, 0), std::invalid_argument);
}

TEST_CASE("zero logits give uniform knots") {
    FreeKnotParam p = FreeKnotParam::zeros(4, 2);
    KnotVector kv = knots_from_params(0.0, 1.0, p, 2);
    for (int i = 0; i <= 4; ++i)
        CHECK(kv.t(i) == doctest::Approx(0.25 * i).epsilon(1e-14));
    CHECK(kv.t(-1) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(kv.t(5) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("closed-form softmax placement") {
    FreeKnotParam p = FreeKnotParam::zeros(2, 2);
    p.s_interior << std::log(3.0), 0.0;
    KnotVector kv = knots_from_params(0.0, 1.0, p, 2);
    CHECK(kv.t(1) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(kv.t(2) == 1.0);
}

TEST_CASE("extreme logit keeps knots strictly increasing") {
    FreeKnotParam p = FreeKnotParam::zeros(5, 3);
    p.s_interior[2] = 50.0;
    KnotVector kv = knots_from_params(0.0, 1.0, p, 3);
    CHECK(kv.strictly_increasing());
}

TEST_CASE("free-knot monotonicity over random draws") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int r = 2 + static_cast<int>(rng() % 3);
        const int n = 2 + static_cast<int>(rng() % 6);
        FreeKnotParam p = FreeKnotParam::zeros(n, r);
        for (int j = 0; j < n; ++j) p.s_interior[j] = g(rng);
        for (int j = 0; j < r - 1; ++j) {
            p.s_left[j] = g(rng);
            p.s_right[j] = g(rng);
        }
        KnotVector kv = knots_from_params(-1.0, 2.0, p, r);
        REQUIRE(kv.strictly_increasing());
        CHECK(kv.t(0) == -1.0);
        CHECK(kv.t(n) == 2.0);
    }
}

TEST_CASE("params_from_knots round trip") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    FreeKnotParam p = FreeKnotParam::zeros(5, 3);
    for (int j = 0; j < 5; ++j) p.s_interior[j] = g(rng);
    p.s_left << 0.3, -0.7;
    p.s_right << 1.1, 0.2;
    KnotVector kv = knots_from_params(0.0, 1.0, p, 3);
    FreeKnotParam q = params_from_knots(kv);
    KnotVector kv2 = knots_from_params(0.0, 1.0, q, 3);
    CHECK((kv.knots - kv2.knots).cwiseAbs().maxCoeff() < 1e-12);
}
