#ifndef KAN_COB_HPP_
#define KAN_COB_HPP_

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "kan/knots.hpp"

namespace kan {

/// Weight 3-tensor W_{qpi} stored as Q slices of shape P x C. The channel
/// axis i indexes basis functions.
struct Tensor3 {
    int Q = 0, P = 0, C = 0;
    std::vector<Eigen::MatrixXd> slices;  // Q entries, each P x C

    Tensor3() = default;
    Tensor3(int q, int p, int c)
        : Q(q), P(p), C(c), slices(q, Eigen::MatrixXd::Zero(p, c)) {}

    Eigen::MatrixXd& operator[](int q) { return slices[q]; }
    const Eigen::MatrixXd& operator[](int q) const { return slices[q]; }

    double& operator()(int q, int p, int i) { return slices[q](p, i); }
    double operator()(int q, int p, int i) const { return slices[q](p, i); }

    Tensor3& operator+=(const Tensor3& o) {
        for (int q = 0; q < Q; ++q) slices[q] += o.slices[q];
        return *this;
    }
    double max_abs() const {
        double m = 0;
        for (const auto& s : slices) m = std::max(m, s.cwiseAbs().maxCoeff());
        return m;
    }
};

/// Upper-banded change-of-basis matrix A^[r] with B^[r] = A^[r] Phi^[r]:
/// rows i, columns j are nonzero only for i <= j <= i+r. Stored as a band,
/// band(i, k) = A_{i, i+k} for k = 0..r.
class ChangeOfBasis {
  public:
    ChangeOfBasis(int r, int dim, bool scaled = false)
        : r_(r), dim_(dim), scaled_(scaled),
          band_(Eigen::MatrixXd::Zero(dim, r + 1)) {}

    int order() const { return r_; }
    int dim() const { return dim_; }
    bool scaled() const { return scaled_; }

    double& band(int i, int k) { return band_(i, k); }
    double band(int i, int k) const { return band_(i, k); }

    double entry(int i, int j) const {
        const int k = j - i;
        return (k >= 0 && k <= r_) ? band_(i, k) : 0.0;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim_, dim_);
        for (int i = 0; i < dim_; ++i)
            for (int k = 0; k <= r_ && i + k < dim_; ++k) A(i, i + k) = band_(i, k);
        return A;
    }

    /// y = A x in O(dim * r).
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(dim_);
        for (int i = 0; i < dim_; ++i)
            for (int k = 0; k <= r_ && i + k < dim_; ++k)
                y[i] += band_(i, k) * x[i + k];
        return y;
    }

    /// Row-vector form: out = in * A, applied to each row of a matrix whose
    /// columns index channels. This is the per-slice action of the mode-3
    /// tensor product W = W_tilde x_3 A, i.e. W_{qpj} = sum_i W_{qpi} A_{ij}.
    Eigen::MatrixXd apply_right(const Eigen::MatrixXd& in) const {
        if (in.cols() != dim_) throw std::invalid_argument("apply_right: shape");
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(in.rows(), dim_);
        for (int j = 0; j < dim_; ++j)
            for (int i = std::max(0, j - r_); i <= j; ++i)
                out.col(j) += band_(i, j - i) * in.col(i);
        return out;
    }

    /// Solves w * A = rhs for each row of rhs by forward substitution on the
    /// banded triangular structure (A has a nonzero diagonal).
    Eigen::MatrixXd solve_right(const Eigen::MatrixXd& rhs) const {
        if (rhs.cols() != dim_) throw std::invalid_argument("solve_right: shape");
        Eigen::MatrixXd w(rhs.rows(), dim_);
        for (int j = 0; j < dim_; ++j) {
            Eigen::VectorXd acc = rhs.col(j);
            for (int i = std::max(0, j - r_); i < j; ++i)
                acc -= band_(i, j - i) * w.col(i);
            w.col(j) = acc / band_(j, 0);
        }
        return w;
    }

  private:
    int r_;
    int dim_;
    bool scaled_;
    Eigen::MatrixXd band_;
};

/// A^[1]: identity on the diagonal, -1 on the superdiagonal. Expresses each
/// interval indicator as a difference of unit steps.
inline ChangeOfBasis build_A1(const KnotVector& kv) {
    ChangeOfBasis A(1, kv.dim());
    for (int i = 0; i < kv.dim(); ++i) {
        A.band(i, 0) = 1.0;
        if (i + 1 < kv.dim()) A.band(i, 1) = -1.0;
    }
    return A;
}

namespace detail {

/// One step of the order recurrence
///   A^[s]_{ij} = A^[s-1]_{ij} / (t_{i+s-1} - t_i)
///              - A^[s-1]_{i+1,j} / (t_{i+s} - t_{i+1}),
/// with the phantom row past the end taken as zero. Row index i corresponds
/// to the signed knot index 1-r+i.
inline ChangeOfBasis cob_raise_order(const ChangeOfBasis& prev,
                                     const KnotVector& kv, int s) {
    const int dim = kv.dim();
    const int r = kv.r;
    ChangeOfBasis A(s, dim);
    for (int i = 0; i < dim; ++i) {
        const int ti = 1 - r + i;  // signed knot index of row i
        const double d1 = kv.t(ti + s - 1) - kv.t(ti);
        const double d2 = kv.t(ti + s) - kv.t(ti + 1);
        if (d1 <= 0.0 || d2 <= 0.0)
            throw std::invalid_argument("build_Ar: degenerate knot spacing");
        for (int k = 0; k <= s; ++k) {
            if (i + k >= dim) break;
            double v = 0.0;
            if (k <= s - 1) v += prev.band(i, k) / d1;
            if (k >= 1 && i + 1 < dim) v -= prev.band(i + 1, k - 1) / d2;
            A.band(i, k) = v;
        }
    }
    return A;
}

}  // namespace detail

/// Builds A^[r] on arbitrary non-degenerate knots by raising the order of
/// A^[1] one step at a time on the same knot set.
inline ChangeOfBasis build_Ar(const KnotVector& kv, int r) {
    if (r != kv.r) throw std::invalid_argument("build_Ar: order mismatch");
    ChangeOfBasis A = build_A1(kv);
    for (int s = 2; s <= r; ++s) A = detail::cob_raise_order(A, kv, s);
    return A;
}

/// Closed form for uniform spacing h: an upper triangular Toeplitz matrix
/// with stencil A_{ij} = (-1)^{j-i} r / ((j-i)! (r-j+i)! h^{r-1}).
inline ChangeOfBasis build_Ar_uniform(double h, int dim, int r) {
    if (!(h > 0)) throw std::invalid_argument("build_Ar_uniform: need h > 0");
    ChangeOfBasis A(r, dim);
    double hfac = 1.0;
    for (int s = 1; s < r; ++s) hfac *= h;
    Eigen::VectorXd stencil(r + 1);
    for (int k = 0; k <= r; ++k) {
        double kfac = 1.0, rkfac = 1.0;
        for (int s = 2; s <= k; ++s) kfac *= s;
        for (int s = 2; s <= r - k; ++s) rkfac *= s;
        stencil[k] = ((k % 2 == 0) ? 1.0 : -1.0) * r / (kfac * rkfac * hfac);
    }
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k <= r && i + k < dim; ++k) A.band(i, k) = stencil[k];
    return A;
}

/// The scaled matrix h^{r-1} A^[r], whose Toeplitz generator is bounded by
/// 2^r / (r-1)! independent of h and dim.
inline ChangeOfBasis scale_cob(const ChangeOfBasis& A, double h) {
    ChangeOfBasis S(A.order(), A.dim(), true);
    double hfac = 1.0;
    for (int s = 1; s < A.order(); ++s) hfac *= h;
    for (int i = 0; i < A.dim(); ++i)
        for (int k = 0; k <= A.order(); ++k) S.band(i, k) = hfac * A.band(i, k);
    return S;
}

inline double toeplitz_spectral_bound(int r) {
    if (r < 1) throw std::invalid_argument("toeplitz_spectral_bound: r >= 1");
    double fac = 1.0;
    for (int s = 2; s <= r - 1; ++s) fac *= s;
    return std::pow(2.0, r) / fac;
}

/// Mode-3 product W_{qpj} = sum_i W_{qpi} A_{ij}.
inline Tensor3 apply_cob(const Tensor3& W, const ChangeOfBasis& A) {
    if (W.C != A.dim()) throw std::invalid_argument("apply_cob: shape mismatch");
    Tensor3 out(W.Q, W.P, W.C);
    for (int q = 0; q < W.Q; ++q) out[q] = A.apply_right(W[q]);
    return out;
}

/// Inverse of apply_cob via triangular solve.
inline Tensor3 apply_cob_inverse(const Tensor3& W, const ChangeOfBasis& A) {
    if (W.C != A.dim())
        throw std::invalid_argument("apply_cob_inverse: shape mismatch");
    Tensor3 out(W.Q, W.P, W.C);
    for (int q = 0; q < W.Q; ++q) out[q] = A.solve_right(W[q]);
    return out;
}

}  // namespace kan

#endif  // KAN_COB_HPP_
