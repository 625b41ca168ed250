#include <doctest.h>

#include <random>

#include "kan/basis.hpp"
#include "kan/spectra.hpp"

using namespace kan;

TEST_CASE("r=1 Gram matrix is diagonal with entries h") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 5, 1);
    Eigen::MatrixXd G = gram_matrix(kv, BasisKind::Spline, 2);
    Eigen::MatrixXd expect =
        0.2 * Eigen::MatrixXd::Identity(kv.dim(), kv.dim());
    CHECK((G - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("r=2 uniform interior Gram rows match the classical mass matrix") {
    const int n = 8;
    const double h = 1.0 / n;
    KnotVector kv = make_uniform_knots(0.0, 1.0, n, 2);
    Eigen::MatrixXd G = gram_matrix(kv, BasisKind::Spline, 3);
    for (int i = 1; i + 1 < kv.dim(); ++i) {
        CHECK(G(i, i) == doctest::Approx(2.0 * h / 3.0).epsilon(1e-12));
        CHECK(G(i, i + 1) == doctest::Approx(h / 6.0).epsilon(1e-12));
        CHECK(G(i, i - 1) == doctest::Approx(h / 6.0).epsilon(1e-12));
        if (i + 2 < kv.dim()) CHECK(std::abs(G(i, i + 2)) <= 1e-15);
    }
}

namespace {

KnotVector random_knots(int n, int r, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Eigen::VectorXd interior(n + 1);
    interior[0] = 0.0;
    for (int i = 1; i <= n; ++i) interior[i] = interior[i - 1] + u(rng);
    interior /= interior[n];
    return make_knots(interior, r);
}

}  // namespace

TEST_CASE("Gram matrices are symmetric PSD for random knots") {
    for (int r : {2, 3}) {
        for (unsigned long long seed = 0; seed < 3; ++seed) {
            KnotVector kv = random_knots(6, r, 60 + seed);
            for (BasisKind basis :
                 {BasisKind::Spline, BasisKind::TruncatedPower}) {
                Eigen::MatrixXd G = gram_matrix(kv, basis, r + 1);
                CHECK((G - G.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
                CHECK(es.eigenvalues().minCoeff() >=
                      -1e-12 * es.eigenvalues().maxCoeff());
            }
        }
    }
}

TEST_CASE("quadrature matches a dense Riemann check") {
    KnotVector kv = random_knots(4, 3, 2);
    Eigen::MatrixXd G = gram_matrix(kv, BasisKind::Spline, 4);
    const int N = 200000;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(kv.dim(), kv.dim());
    const double dx = (kv.b - kv.a) / N;
    for (int i = 0; i < N; ++i) {
        double x = kv.a + (i + 0.5) * dx;
        Eigen::VectorXd phi = eval_bspline_basis(kv, x);
        R += dx * phi * phi.transpose();
    }
    CHECK((G - R).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("condition number basics") {
    CHECK(condition_number(Eigen::MatrixXd::Identity(4, 4)).kappa ==
          doctest::Approx(1.0));
    Eigen::MatrixXd D = Eigen::Vector2d(1.0, 10.0).asDiagonal();
    CHECK(condition_number(D).kappa == doctest::Approx(10.0));
    // Singular directions are excluded and counted.
    Eigen::MatrixXd S = Eigen::Vector3d(0.0, 2.0, 8.0).asDiagonal();
    CondResult res = condition_number(S);
    CHECK(res.kappa == doctest::Approx(4.0));
    CHECK(res.excluded == 1);
    CHECK_THROWS_AS(condition_number(Eigen::MatrixXd::Zero(3, 3)),
                    std::invalid_argument);
}

TEST_CASE("spline Gram conditioning stays bounded while ReLU blows up") {
    std::vector<double> ks, kr;
    for (int n : {8, 16, 32, 64, 128}) {
        KnotVector kv = make_uniform_knots(0.0, 1.0, n, 2);
        ks.push_back(
            condition_number(gram_matrix(kv, BasisKind::Spline, 3)).kappa);
        kr.push_back(
            condition_number(gram_matrix(kv, BasisKind::TruncatedPower, 3))
                .kappa);
    }
    for (std::size_t i = 1; i < kr.size(); ++i) CHECK(kr[i] > kr[i - 1]);
    double smax = *std::max_element(ks.begin(), ks.end());
    double smin = *std::min_element(ks.begin(), ks.end());
    CHECK(smax / smin <= 4.0);
    CHECK(kr.back() / kr.front() >= 10.0);
}

TEST_CASE("empirical Hessian identities") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 5, 3);
    ChangeOfBasis A = build_Ar(kv, kv.r);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Single sample: rank-1 outer product.
    Eigen::VectorXd one(1);
    one << u(rng);
    Eigen::MatrixXd H1 = empirical_hessian(kv, BasisKind::Spline, one);
    Eigen::VectorXd phi = eval_bspline_basis(kv, one[0]);
    CHECK((H1 - phi * phi.transpose()).cwiseAbs().maxCoeff() <= 1e-14);

    // H_S = A H_R A^T on shared samples.
    Eigen::VectorXd X(500);
    for (int i = 0; i < 500; ++i) X[i] = u(rng);
    Eigen::MatrixXd HS = empirical_hessian(kv, BasisKind::Spline, X);
    Eigen::MatrixXd HR = empirical_hessian(kv, BasisKind::TruncatedPower, X);
    Eigen::MatrixXd Ad = A.dense();
    CHECK((HS - Ad * HR * Ad.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("empirical Hessian converges to the Gram matrix over (b-a)") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 4, 2);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int D = 100000;
    Eigen::VectorXd X(D);
    for (int i = 0; i < D; ++i) X[i] = u(rng);
    Eigen::MatrixXd H = empirical_hessian(kv, BasisKind::Spline, X);
    Eigen::MatrixXd G = gram_matrix(kv, BasisKind::Spline, 3);
    // Entries are means of [0,1]-bounded products: std error <= 1/(2 sqrt D).
    CHECK((H - G).cwiseAbs().maxCoeff() <= 5.0 * 0.5 / std::sqrt(double(D)));
}

TEST_CASE("zero-weight single-layer NTK matches the feature inner products") {
    const int n = 6, r = 2;
    Network net = make_kan_network({2, 1}, n, r, BasisKind::TruncatedPower,
                                   false);
    net.norm = NormKind::None;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd X(20, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    Eigen::MatrixXd K = empirical_ntk(net, X);
    const KnotVector kv = std::get<KanLayer>(net.layers[0]).kv;
    const double h = 1.0 / n;
    const double scale = std::pow(h, 2 * (1 - r));
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(20, 20);
    for (int p = 0; p < 2; ++p) {
        Eigen::MatrixXd F =
            basis_features(kv, X.col(p), BasisKind::TruncatedPower);
        expect += scale * F * F.transpose();
    }
    CHECK((K - expect).cwiseAbs().maxCoeff() <=
          1e-10 * expect.cwiseAbs().maxCoeff());
}

TEST_CASE("NTK is PSD and the spline radius is within 4x of the ReLU radius") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double max_ratio = 0.0;
    for (int r : {2, 3}) {
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::MatrixXd X(50, 2);
            for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
            Network spline =
                make_kan_network({2, 3, 1}, 8, r, BasisKind::Spline, false);
            init_network(spline, 500 + 37 * r + trial);
            Network relu = spline;
            for (auto& l : relu.layers) {
                KanLayer& k = std::get<KanLayer>(l);
                k.basis = BasisKind::TruncatedPower;
                k.weights = apply_cob(k.weights, build_Ar(k.kv, r));
            }
            Eigen::MatrixXd KS = empirical_ntk(spline, X);
            Eigen::MatrixXd KR = empirical_ntk(relu, X);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_s(KS), es_r(KR);
            CHECK(es_s.eigenvalues().minCoeff() >=
                  -1e-10 * es_s.eigenvalues().maxCoeff());
            CHECK(es_r.eigenvalues().minCoeff() >=
                  -1e-10 * es_r.eigenvalues().maxCoeff());
            double ratio =
                es_s.eigenvalues().maxCoeff() / es_r.eigenvalues().maxCoeff();
            CHECK(ratio <= 4.0);
            max_ratio = std::max(max_ratio, ratio);
        }
    }
    CHECK(max_ratio > 0.0);
}

TEST_CASE("minimum batch size formula") {
    // N(0,1) mass outside the outermost interval [2, 3] of the grid
    // T = {-3..3}: p = 1 - (cdf(3) - cdf(2)).
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    double p_outside = 1.0 - (cdf(3.0) - cdf(2.0));
    int B = min_batch_size(0.999, p_outside);
    CHECK(B >= 310);
    CHECK(B <= 330);
    CHECK(min_batch_size(1e-12, 0.5) == 1);
    CHECK(min_batch_size(0.999, 0.5) == 10);
    CHECK_THROWS_AS(min_batch_size(1.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(min_batch_size(0.5, 0.0), std::invalid_argument);
}

TEST_CASE("stacked features have the partition-of-unity kernel for P >= 2") {
    KnotVector kv = make_uniform_knots(0.0, 1.0, 5, 3);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd X(100, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    NullspaceDemo demo = nullspace_demo(kv, 2, X);
    CHECK(demo.sigma_min <= 1e-10 * demo.sigma_max);
    CHECK(demo.kernel_residual <= 1e-12);
    CHECK(demo.kernel.head(kv.dim()).minCoeff() == 1.0);
    CHECK(demo.kernel.tail(kv.dim()).maxCoeff() == -1.0);

    // P = 1 has no structural kernel: single-input features are full rank.
    Eigen::MatrixXd F = basis_features(kv, X.col(0), BasisKind::Spline);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(F);
    CHECK(svd.singularValues().minCoeff() >
          1e-6 * svd.singularValues().maxCoeff());
}

TEST_CASE("spectra report rows are well formed") {
    SpectraReport rep = build_spectra_report(1);
    CHECK(!rep.rows.empty());
    for (const auto& row : rep.rows) {
        if (row.quantity.rfind("kappa", 0) == 0) CHECK(row.value >= 1.0);
        if (row.quantity == "sigma_max_scaled_cob") CHECK(row.value <= 4.0 + 1e-12);
        if (row.quantity == "ntk_radius_ratio") CHECK(row.value <= 4.0);
    }
    std::string csv = rep.to_csv();
    CHECK(csv.rfind("quantity,size,value\n", 0) == 0);
}
