#ifndef KAN_BASIS_HPP_
#define KAN_BASIS_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "kan/cob.hpp"
#include "kan/knots.hpp"

namespace kan {

/// ReLU(x - t_i)^{r-1} for i = 1-r .. n-1. Defined on all of R. For r = 1
/// the entries are unit steps 1{x >= t_i}.
inline Eigen::VectorXd eval_trunc_power_basis(const KnotVector& kv, double x) {
    Eigen::VectorXd psi(kv.dim());
    for (int j = 0; j < kv.dim(); ++j) {
        const double d = x - kv.t(1 - kv.r + j);
        if (kv.r == 1) {
            psi[j] = (d >= 0.0) ? 1.0 : 0.0;
        } else {
            psi[j] = (d > 0.0) ? std::pow(d, kv.r - 1) : 0.0;
        }
    }
    return psi;
}

namespace detail {

/// Cox-de Boor evaluation of (b^{[r]}_{1-r}(x), ..., b^{[r]}_{n-1}(x)) for
/// x in [a, b]. Order-1 functions are indicators of [t_i, t_{i+1}), with the
/// final interval closed at t_n so the partition of unity holds at b.
inline Eigen::VectorXd cox_de_boor(const KnotVector& kv, double x) {
    const int r = kv.r, n = kv.n;
    // Order-1 values over the index range 1-r .. n+r-2 (all that order r needs).
    const int m = n + 2 * r - 2;
    Eigen::VectorXd vals = Eigen::VectorXd::Zero(m);
    const int idx0 = 1 - r;  // signed index of vals[0]
    for (int k = 0; k < m; ++k) {
        const int i = idx0 + k;
        const bool inside = (x == kv.t(n))
                                ? (i == n - 1)
                                : (x >= kv.t(i) && x < kv.t(i + 1));
        vals[k] = inside ? 1.0 : 0.0;
    }
    for (int s = 2; s <= r; ++s) {
        const int count = n + 2 * r - 1 - s;  // order-s functions available
        for (int k = 0; k < count; ++k) {
            const int i = idx0 + k;
            const double d1 = kv.t(i + s - 1) - kv.t(i);
            const double d2 = kv.t(i + s) - kv.t(i + 1);
            const double left = (x - kv.t(i)) / d1 * vals[k];
            const double right = (kv.t(i + s) - x) / d2 * vals[k + 1];
            vals[k] = left + right;
        }
    }
    return vals.head(kv.dim());
}

}  // namespace detail

/// B-spline basis (b^{[r]}_{1-r}(x), ..., b^{[r]}_{n-1}(x)). On [a, b] this
/// uses the Cox-de Boor recursion; outside [a, b] the evaluation goes through
/// the truncated-power expansion A^[r] Phi^[r], which is defined on all of R
/// and agrees with the recursion on [a, b].
inline Eigen::VectorXd eval_bspline_basis(const KnotVector& kv, double x) {
    if (std::isnan(x)) throw std::invalid_argument("eval_bspline_basis: NaN input");
    if (x >= kv.a && x <= kv.b) return detail::cox_de_boor(kv, x);
    const ChangeOfBasis A = build_Ar(kv, kv.r);
    return A.apply(eval_trunc_power_basis(kv, x));
}

/// Batched feature matrices (rows: samples, cols: basis functions).
inline Eigen::MatrixXd basis_features(const KnotVector& kv,
                                      const Eigen::VectorXd& x, BasisKind kind) {
    Eigen::MatrixXd F(x.size(), kv.dim());
    if (kind == BasisKind::TruncatedPower) {
        for (int d = 0; d < x.size(); ++d)
            F.row(d) = eval_trunc_power_basis(kv, x[d]).transpose();
    } else {
        for (int d = 0; d < x.size(); ++d)
            F.row(d) = eval_bspline_basis(kv, x[d]).transpose();
    }
    return F;
}

}  // namespace kan

#endif  // KAN_BASIS_HPP_
