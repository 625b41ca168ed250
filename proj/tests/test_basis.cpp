#include <doctest.h>

#include <cmath>
#include <random>

#include "kan/basis.hpp"

using namespace kan;

namespace {

KnotVector random_knots(std::mt19937_64& rng, int n, int r) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Eigen::VectorXd interior(n + 1);
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        interior[i] = acc;
        acc += u(rng);
    }
    interior *= 1.0 / interior[n];
    return make_knots(interior, r);
}

}  // namespace

TEST_CASE("r=1 basis is an interval indicator") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 4, 1);
    Eigen::VectorXd b = eval_bspline_basis(kv, 0.3);
    REQUIRE(b.size() == 4);
    CHECK(b[1] == 1.0);
    CHECK(b.sum() == 1.0);
}

TEST_CASE("r=2 hat peaks at the middle knot") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 4, 2);
    // b^{[2]}_i is supported on [t_i, t_{i+2}] and peaks at t_{i+1}.
    for (int i = -1; i <= 2; ++i) {
        Eigen::VectorXd b = eval_bspline_basis(kv, kv.t(i + 1));
        CHECK(b[i + 1] == doctest::Approx(1.0).epsilon(1e-14));
    }
    Eigen::VectorXd at_left = eval_bspline_basis(kv, kv.t(1));
    CHECK(at_left[2] == doctest::Approx(0.0).epsilon(1e-14));  // b_1 at t_1
}

TEST_CASE("partition of unity on random knots") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0.0, 1.0);
    for (int r = 1; r <= 4; ++r) {
        KnotVector kv = random_knots(rng, 6, r);
        for (int trial = 0; trial < 10000 / 4; ++trial) {
            const double x = kv.a + (kv.b - kv.a) * ux(rng);
            Eigen::VectorXd b = eval_bspline_basis(kv, x);
            CHECK(std::abs(b.sum() - 1.0) <= 1e-12);
        }
        // Endpoints included.
        CHECK(std::abs(eval_bspline_basis(kv, kv.a).sum() - 1.0) <= 1e-12);
        CHECK(std::abs(eval_bspline_basis(kv, kv.b).sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("local support of b_i") {
    std::mt19937_64 rng(5);
    for (int r : {2, 3}) {
        KnotVector kv = random_knots(rng, 5, r);
        std::uniform_real_distribution<double> ux(kv.a, kv.b);
        for (int trial = 0; trial < 200; ++trial) {
            const double x = ux(rng);
            Eigen::VectorXd b = eval_bspline_basis(kv, x);
            for (int k = 0; k < kv.dim(); ++k) {
                const int i = 1 - r + k;
                if (x < kv.t(i) || x > kv.t(i + r)) CHECK(b[k] == 0.0);
            }
        }
    }
}

TEST_CASE("continuity at knots for r >= 2") {
    std::mt19937_64 rng(9);
    for (int r : {2, 3, 4}) {
        KnotVector kv = random_knots(rng, 5, r);
        for (int i = 1; i < kv.n; ++i) {
            const double t = kv.t(i);
            Eigen::VectorXd lo = eval_bspline_basis(kv, t - 1e-11);
            Eigen::VectorXd hi = eval_bspline_basis(kv, t + 1e-11);
            CHECK((lo - hi).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("truncated powers: zero left of every knot") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 4, 3);
    Eigen::VectorXd psi = eval_trunc_power_basis(kv, kv.t(1 - kv.r) - 0.1);
    CHECK(psi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("truncated power ramps") {
    KnotVector kv2 = make_uniform_knots(0.0, 1.0, 4, 2);
    Eigen::VectorXd psi2 = eval_trunc_power_basis(kv2, kv2.t(0) + 0.3);
    CHECK(psi2[1] == doctest::Approx(0.3).epsilon(1e-14));  // entry for t_0

    KnotVector kv3 = make_uniform_knots(0.0, 2.0, 4, 3);
    Eigen::VectorXd psi3 = eval_trunc_power_basis(kv3, kv3.t(0) + 0.5);
    CHECK(psi3[2] == doctest::Approx(0.25).epsilon(1e-14));  // entry for t_0
}

TEST_CASE("NaN input rejected") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 4, 2);
    CHECK_THROWS_AS(eval_bspline_basis(kv, std::nan("")),
                    std::invalid_argument);
}
