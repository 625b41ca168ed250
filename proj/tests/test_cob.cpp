#include <doctest.h>

#include <Eigen/SVD>
#include <random>

#include "kan/basis.hpp"
#include "kan/cob.hpp"

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

double basis_residual(const KnotVector& kv, std::mt19937_64& rng, int samples) {
    const ChangeOfBasis A = build_Ar(kv, kv.r);
    std::uniform_real_distribution<double> ux(kv.a, kv.b);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double x = ux(rng);
        Eigen::VectorXd lhs = eval_bspline_basis(kv, x);
        Eigen::VectorXd rhs = A.apply(eval_trunc_power_basis(kv, x));
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace

TEST_CASE("A1 entries and telescoping") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 2, 1);  // dim 2
    KnotVector kv3 = make_uniform_knots(0.0, 1.0, 3, 1);  // dim 3
    ChangeOfBasis A = build_A1(kv3);
    Eigen::MatrixXd D = A.dense();
    Eigen::MatrixXd expect(3, 3);
    expect << 1, -1, 0, 0, 1, -1, 0, 0, 1;
    CHECK((D - expect).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(3);
    Eigen::VectorXd y = A.apply(ones);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 1.0);
}

TEST_CASE("indicator equals difference of steps") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 5, 1);
    ChangeOfBasis A = build_A1(kv);
    for (double x : {0.05, 0.31, 0.77, 0.99}) {
        Eigen::VectorXd lhs = eval_bspline_basis(kv, x);
        Eigen::VectorXd rhs = A.apply(eval_trunc_power_basis(kv, x));
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("uniform r=2 stencil is (1,-2,1)/h") {
    const double h = 0.25;
    KnotVector kv = make_uniform_knots(0.0, 1.0, 4, 2);
    ChangeOfBasis A = build_Ar(kv, 2);
    for (int i = 0; i < kv.dim(); ++i) {
        CHECK(A.band(i, 0) == doctest::Approx(1.0 / h).epsilon(1e-12));
        if (i + 1 < kv.dim())
            CHECK(A.band(i, 1) == doctest::Approx(-2.0 / h).epsilon(1e-12));
        if (i + 2 < kv.dim())
            CHECK(A.band(i, 2) == doctest::Approx(1.0 / h).epsilon(1e-12));
    }
}

TEST_CASE("uniform r=3 stencil matches the closed form") {
    ChangeOfBasis A = build_Ar_uniform(1.0, 6, 3);
    CHECK(A.band(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(A.band(0, 1) == doctest::Approx(-1.5).epsilon(1e-14));
    CHECK(A.band(0, 2) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(A.band(0, 3) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("closed form agrees with the recursion on uniform knots") {
    for (int r : {2, 3, 4}) {
        for (int n : {4, 16, 125 - r + 1}) {
            KnotVector kv = make_uniform_knots(0.0, 1.0, n, r);
            const double h = 1.0 / n;
            Eigen::MatrixXd rec = build_Ar(kv, r).dense();
            Eigen::MatrixXd direct = build_Ar_uniform(h, kv.dim(), r).dense();
            const double scale = std::pow(h, 1 - r);
            CHECK((rec - direct).cwiseAbs().maxCoeff() <= 1e-12 * scale);
        }
    }
}

TEST_CASE("basis equivalence residual on uniform and random knots") {
    std::mt19937_64 rng(17);
    for (int r : {2, 3, 4}) {
        KnotVector uni = make_uniform_knots(0.0, 1.0, 8, r);
        CHECK(basis_residual(uni, rng, 1000) <= 1e-10);
        KnotVector rnd = random_knots(rng, 8, r);
        CHECK(basis_residual(rnd, rng, 1000) <= 1e-10);
    }
}

TEST_CASE("ReLU power recursion identity") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    auto relu_pow = [](double v, int k) {
        return v > 0 ? std::pow(v, k) : 0.0;
    };
    for (int trial = 0; trial < 200; ++trial) {
        const double x = u(rng), a = u(rng), b = u(rng);
        for (int rho = 1; rho <= 3; ++rho) {
            const double lhs = (x - a) * relu_pow(x - b, rho);
            const double rhs = relu_pow(x - b, rho + 1) + (b - a) * relu_pow(x - b, rho);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("band structure: entries outside the band vanish") {
    std::mt19937_64 rng(29);
    for (int r : {2, 3, 4}) {
        KnotVector kv = random_knots(rng, 7, r);
        Eigen::MatrixXd A = build_Ar(kv, r).dense();
        for (int i = 0; i < kv.dim(); ++i)
            for (int j = 0; j < kv.dim(); ++j)
                if (j < i || j > i + r) CHECK(A(i, j) == 0.0);
    }
}

TEST_CASE("apply_cob basics and round trip") {
    std::mt19937_64 rng(31);
    KnotVector kv = random_knots(rng, 6, 3);
    ChangeOfBasis A = build_Ar(kv, 3);

    Tensor3 W(2, 3, kv.dim());
    std::normal_distribution<double> g(0.0, 1.0);
    for (int q = 0; q < 2; ++q)
        for (int p = 0; p < 3; ++p)
            for (int i = 0; i < kv.dim(); ++i) W(q, p, i) = g(rng);

    // Identity map leaves the tensor unchanged.
    ChangeOfBasis I(3, kv.dim());
    for (int i = 0; i < kv.dim(); ++i) I.band(i, 0) = 1.0;
    Tensor3 same = apply_cob(W, I);
    for (int q = 0; q < 2; ++q)
        CHECK((same[q] - W[q]).cwiseAbs().maxCoeff() == 0.0);

    // Zero maps to zero.
    Tensor3 Z(2, 3, kv.dim());
    CHECK(apply_cob(Z, A).max_abs() == 0.0);

    // Round trip through the triangular solve.
    Tensor3 mapped = apply_cob(W, A);
    Tensor3 back = apply_cob_inverse(mapped, A);
    for (int q = 0; q < 2; ++q)
        CHECK((back[q] - W[q]).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("toeplitz spectral bound values") {
    CHECK(toeplitz_spectral_bound(1) == doctest::Approx(2.0));
    CHECK(toeplitz_spectral_bound(2) == doctest::Approx(4.0));
    CHECK(toeplitz_spectral_bound(3) == doctest::Approx(4.0));
    CHECK(toeplitz_spectral_bound(4) == doctest::Approx(16.0 / 6.0));
}

TEST_CASE("scaled matrix singular values respect the generator bound") {
    for (int r : {1, 2, 3, 4}) {
        for (int dim : {8, 32, 256}) {
            const int n = dim - r + 1;
            if (n < 1) continue;
            const double h = 1.0 / n;
            ChangeOfBasis A = build_Ar_uniform(h, dim, r);
            Eigen::MatrixXd S = scale_cob(A, h).dense();
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
            CHECK(svd.singularValues()[0] <= toeplitz_spectral_bound(r) + 1e-12);
        }
    }
}
