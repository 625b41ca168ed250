#include "kan/spectra.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kan/basis.hpp"
#include "kan/cob.hpp"

namespace kan {

namespace {

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_k.
void gauss_legendre(int k, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
    nodes.resize(k);
    weights.resize(k);
    for (int i = 0; i < k; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (k + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            if (k == 1) p1 = t;
            for (int j = 2; j <= k; ++j) {
                double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            double pk = (k == 1) ? t : p1;
            double pk1 = (k == 1) ? 1.0 : p0;
            dp = k * (t * pk - pk1) / (t * t - 1.0);
            double dt = pk / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        nodes[i] = t;
        weights[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

}  // namespace

Eigen::MatrixXd gram_matrix(const KnotVector& kv, BasisKind basis,
                            int quad_points) {
    if (quad_points < kv.r)
        throw std::invalid_argument("gram_matrix: need quad_points >= r");
    Eigen::VectorXd nodes, weights;
    gauss_legendre(quad_points, nodes, weights);
    const int dim = kv.dim();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < kv.n; ++i) {
        const double lo = kv.t(i), hi = kv.t(i + 1);
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int q = 0; q < quad_points; ++q) {
            const double x = mid + half * nodes[q];
            Eigen::VectorXd phi =
                basis == BasisKind::Spline ? eval_bspline_basis(kv, x)
                                           : eval_trunc_power_basis(kv, x);
            G.noalias() += (half * weights[q]) * phi * phi.transpose();
        }
    }
    return 0.5 * (G + G.transpose());
}

CondResult condition_number(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (M + M.transpose()));
    const Eigen::VectorXd ev = es.eigenvalues();
    const double lmax = ev.maxCoeff();
    if (!(lmax > 0.0))
        throw std::invalid_argument("condition_number: matrix has no positive spectrum");
    const double thresh = 1e-12 * lmax;
    CondResult res;
    double lmin = lmax;
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i] <= thresh)
            ++res.excluded;
        else
            lmin = std::min(lmin, ev[i]);
    }
    res.kappa = lmax / lmin;
    return res;
}

Eigen::MatrixXd empirical_hessian(const KnotVector& kv, BasisKind basis,
                                  const Eigen::VectorXd& X) {
    if (X.size() < 1) throw std::invalid_argument("empirical_hessian: empty");
    Eigen::MatrixXd F = basis_features(kv, X, basis);
    return F.transpose() * F / double(X.size());
}

Eigen::MatrixXd empirical_ntk(Network& net, const Eigen::MatrixXd& X) {
    if (net.output_width() != 1)
        throw std::invalid_argument("empirical_ntk: needs scalar output");
    if (X.rows() > 200)
        throw std::invalid_argument("empirical_ntk: too many samples");
    for (const auto& l : net.layers)
        if (std::holds_alternative<KanLayer>(l) &&
            std::get<KanLayer>(l).free_knots)
            throw std::invalid_argument("empirical_ntk: free knots unsupported");
    const int nw = count_trainable(net);
    if (nw > 10000) throw std::invalid_argument("empirical_ntk: too many weights");

    // Per-layer h^{r-1} factor that moves a TruncatedPower weight gradient
    // into the h-scaled ReLU basis (gradients get divided by it).
    std::vector<double> block_scale;
    std::vector<int> block_size;
    for (const auto& l : net.layers) {
        if (std::holds_alternative<KanLayer>(l)) {
            const KanLayer& k = std::get<KanLayer>(l);
            double s = 1.0;
            if (k.basis == BasisKind::TruncatedPower) {
                const double h = (k.kv.b - k.kv.a) / k.kv.n;
                s = std::pow(h, 1 - k.kv.r);
            }
            block_scale.push_back(s);
            block_size.push_back(k.P * k.Q * k.kv.dim());
        } else {
            const MlpLayer& m = std::get<MlpLayer>(l);
            block_scale.push_back(1.0);
            block_size.push_back(static_cast<int>(m.W.size() + m.t.size()));
        }
    }

    // Freeze normalization statistics on the whole batch, then take
    // per-sample output gradients with frozen statistics.
    network_forward(net, X, ForwardMode::Train);
    const int D = static_cast<int>(X.rows());
    Eigen::MatrixXd J(D, nw);
    for (int d = 0; d < D; ++d) {
        Eigen::MatrixXd x = X.row(d);
        Eigen::MatrixXd pred = network_forward(net, x, ForwardMode::Frozen);
        // With one sample and target pred - 1/2, d(mse)/d(pred) = 1, so the
        // loss gradient is the output gradient.
        Eigen::MatrixXd target = pred.array() - 0.5;
        Eigen::VectorXd g;
        network_loss_grad(net, x, target, ForwardMode::Frozen, &g);
        int at = 0;
        for (std::size_t b = 0; b < block_size.size(); ++b) {
            g.segment(at, block_size[b]) *= block_scale[b];
            at += block_size[b];
        }
        J.row(d) = g.transpose();
    }
    return J * J.transpose();
}

int min_batch_size(double tau, double p_outside) {
    if (!(tau > 0.0 && tau < 1.0) || !(p_outside > 0.0 && p_outside < 1.0))
        throw std::invalid_argument("min_batch_size: arguments must be in (0,1)");
    return static_cast<int>(
        std::ceil(std::log(1.0 - tau) / std::log(p_outside)));
}

NullspaceDemo nullspace_demo(const KnotVector& kv, int P,
                             const Eigen::MatrixXd& X) {
    if (P < 2) throw std::invalid_argument("nullspace_demo: need P >= 2");
    if (X.cols() != P) throw std::invalid_argument("nullspace_demo: shape");
    const int dim = kv.dim();
    Eigen::MatrixXd F(X.rows(), P * dim);
    for (int p = 0; p < P; ++p)
        F.middleCols(p * dim, dim) =
            basis_features(kv, X.col(p), BasisKind::Spline);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(F);
    NullspaceDemo out;
    out.sigma_max = svd.singularValues().maxCoeff();
    out.sigma_min = svd.singularValues().minCoeff();
    // The constant family: +1 on input 0, -1/(P-1) on the rest; each input's
    // features sum to one, so F * kernel = 1 - (P-1)/(P-1) = 0.
    out.kernel = Eigen::VectorXd::Zero(P * dim);
    out.kernel.head(dim).setOnes();
    out.kernel.tail((P - 1) * dim).setConstant(-1.0 / (P - 1));
    out.kernel_residual = (F * out.kernel).norm() / out.kernel.norm();
    return out;
}

std::string SpectraReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "quantity,size,value\n";
    for (const auto& r : rows)
        os << r.quantity << "," << r.size << "," << r.value << "\n";
    return os.str();
}

SpectraReport build_spectra_report(unsigned long long seed) {
    SpectraReport rep;
    for (int n : {8, 16, 32, 64, 128}) {
        KnotVector kv = make_uniform_knots(0.0, 1.0, n, 2);
        rep.rows.push_back({"kappa_gram_spline", double(n),
                            condition_number(
                                gram_matrix(kv, BasisKind::Spline, 3))
                                .kappa});
        rep.rows.push_back({"kappa_gram_relu", double(n),
                            condition_number(
                                gram_matrix(kv, BasisKind::TruncatedPower, 3))
                                .kappa});
    }
    for (int r : {1, 2, 3, 4}) {
        KnotVector kv = make_uniform_knots(0.0, 1.0, 16, r);
        const double h = 1.0 / 16.0;
        ChangeOfBasis At = scale_cob(build_Ar(kv, r), h);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(At.dense());
        rep.rows.push_back({"sigma_max_scaled_cob", double(r),
                            svd.singularValues().maxCoeff()});
    }
    std::mt19937_64 rng(seed);
    for (int r : {2, 3}) {
        for (int trial = 0; trial < 5; ++trial) {
            Eigen::MatrixXd X(64, 2);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
            Network spline =
                make_kan_network({2, 3, 1}, 8, r, BasisKind::Spline, false);
            init_network(spline, seed + 100 * r + trial);
            Network relu = spline;
            for (auto& l : relu.layers) {
                KanLayer& k = std::get<KanLayer>(l);
                k.basis = BasisKind::TruncatedPower;
                k.weights = apply_cob(k.weights, build_Ar(k.kv, r));
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_s(
                empirical_ntk(spline, X));
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_r(
                empirical_ntk(relu, X));
            const double rho_s = es_s.eigenvalues().maxCoeff();
            const double rho_r = es_r.eigenvalues().maxCoeff();
            rep.rows.push_back(
                {"ntk_radius_ratio", double(r), rho_s / rho_r});
        }
    }
    return rep;
}

}  // namespace kan
