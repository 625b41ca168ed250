#ifndef KAN_SPECTRA_HPP_
#define KAN_SPECTRA_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kan/knots.hpp"
#include "kan/network.hpp"

namespace kan {

/// G_{ij} = integral over [a,b] of phi_i phi_j dx via composite
/// Gauss-Legendre quadrature with quad_points nodes per knot interval
/// (exact for the piecewise-polynomial integrands when quad_points >= r).
Eigen::MatrixXd gram_matrix(const KnotVector& kv, BasisKind basis,
                            int quad_points);

struct CondResult {
    double kappa = 1.0;
    int excluded = 0;  // eigenvalues below 1e-12 * lambda_max
};

/// lambda_max over the smallest eigenvalue above the zero threshold.
/// Throws on an all-zero matrix.
CondResult condition_number(const Eigen::MatrixXd& M);

/// (1/D) Phi(X) Phi(X)^T over the given samples.
Eigen::MatrixXd empirical_hessian(const KnotVector& kv, BasisKind basis,
                                  const Eigen::VectorXd& X);

/// D x D tangent kernel J J^T where J holds per-sample output gradients
/// with respect to every weight (knot logits excluded; scalar output).
/// TruncatedPower layer blocks are rescaled to the h-normalized ReLU
/// basis ReLU((x - t_i)/h)^{r-1} so spectra are comparable across bases.
/// Guards: <= 1e4 weights, <= 200 samples, no free knots.
Eigen::MatrixXd empirical_ntk(Network& net, const Eigen::MatrixXd& X);

int min_batch_size(double tau, double p_outside);

struct NullspaceDemo {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    Eigen::VectorXd kernel;    // the partition-of-unity constant family
    double kernel_residual = 0.0;  // ||F * kernel|| / ||kernel||
};

/// Stacked per-input spline feature matrix [Phi(x_1) | ... | Phi(x_P)] and
/// its structural rank deficiency for P >= 2.
NullspaceDemo nullspace_demo(const KnotVector& kv, int P,
                             const Eigen::MatrixXd& X);

struct SpectraReport {
    struct Row {
        std::string quantity;
        double size = 0.0;
        double value = 0.0;
    };
    std::vector<Row> rows;
    std::string to_csv() const;
};

/// Condition-number sweep in both bases, scaled change-of-basis spectral
/// norms, and NTK spectral-radius ratios on random small networks.
SpectraReport build_spectra_report(unsigned long long seed);

}  // namespace kan

#endif  // KAN_SPECTRA_HPP_
