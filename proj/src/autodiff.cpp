#include "kan/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace kan::ad {

namespace {

inline double relu_pow_val(double v, int k) {
    return v > 0.0 ? std::pow(v, k) : 0.0;
}

}  // namespace

VarPtr Tape::record(Eigen::MatrixXd value, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->grad = Eigen::MatrixXd::Zero(node->value.rows(), node->value.cols());
    node->requires_grad = requires_grad;
    order_.push_back(node);
    return node;
}

VarPtr Tape::leaf(const Eigen::MatrixXd& v, bool requires_grad) {
    return record(v, requires_grad);
}

VarPtr Tape::constant(double v) {
    return record(Eigen::MatrixXd::Constant(1, 1, v), false);
}

VarPtr Tape::add(VarPtr a, VarPtr b) {
    if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
        throw std::invalid_argument("ad::add: shape mismatch");
    VarPtr out = record(a->value + b->value, a->requires_grad || b->requires_grad);
    out->backprop = [a, b, out]() {
        if (a->requires_grad) a->grad += out->grad;
        if (b->requires_grad) b->grad += out->grad;
    };
    return out;
}

VarPtr Tape::sub(VarPtr a, VarPtr b) {
    if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
        throw std::invalid_argument("ad::sub: shape mismatch");
    VarPtr out = record(a->value - b->value, a->requires_grad || b->requires_grad);
    out->backprop = [a, b, out]() {
        if (a->requires_grad) a->grad += out->grad;
        if (b->requires_grad) b->grad -= out->grad;
    };
    return out;
}

VarPtr Tape::mul(VarPtr a, VarPtr b) {
    if (a->value.rows() != b->value.rows() || a->value.cols() != b->value.cols())
        throw std::invalid_argument("ad::mul: shape mismatch");
    VarPtr out = record(a->value.cwiseProduct(b->value),
                        a->requires_grad || b->requires_grad);
    out->backprop = [a, b, out]() {
        if (a->requires_grad) a->grad += out->grad.cwiseProduct(b->value);
        if (b->requires_grad) b->grad += out->grad.cwiseProduct(a->value);
    };
    return out;
}

VarPtr Tape::affine(VarPtr a, double alpha, double beta) {
    VarPtr out = record((a->value.array() * alpha + beta).matrix(),
                        a->requires_grad);
    out->backprop = [a, out, alpha]() {
        if (a->requires_grad) a->grad += alpha * out->grad;
    };
    return out;
}

VarPtr Tape::matmul(VarPtr a, VarPtr b) {
    if (a->value.cols() != b->value.rows())
        throw std::invalid_argument("ad::matmul: shape mismatch");
    VarPtr out = record(a->value * b->value, a->requires_grad || b->requires_grad);
    out->backprop = [a, b, out]() {
        if (a->requires_grad) a->grad += out->grad * b->value.transpose();
        if (b->requires_grad) b->grad += a->value.transpose() * out->grad;
    };
    return out;
}

VarPtr Tape::matmul_nt(VarPtr a, VarPtr b) {
    if (a->value.cols() != b->value.cols())
        throw std::invalid_argument("ad::matmul_nt: shape mismatch");
    VarPtr out = record(a->value * b->value.transpose(),
                        a->requires_grad || b->requires_grad);
    out->backprop = [a, b, out]() {
        if (a->requires_grad) a->grad += out->grad * b->value;
        if (b->requires_grad) b->grad += out->grad.transpose() * a->value;
    };
    return out;
}

VarPtr Tape::relu(VarPtr a) {
    VarPtr out = record(a->value.cwiseMax(0.0), a->requires_grad);
    out->backprop = [a, out]() {
        if (!a->requires_grad) return;
        a->grad += out->grad.cwiseProduct(
            (a->value.array() > 0.0).cast<double>().matrix());
    };
    return out;
}

VarPtr Tape::relu_pow(VarPtr a, int k) {
    if (k < 1) throw std::invalid_argument("ad::relu_pow: need k >= 1");
    Eigen::MatrixXd v = a->value.unaryExpr(
        [k](double x) { return relu_pow_val(x, k); });
    VarPtr out = record(std::move(v), a->requires_grad);
    out->backprop = [a, out, k]() {
        if (!a->requires_grad) return;
        a->grad += out->grad.cwiseProduct(a->value.unaryExpr([k](double x) {
            return k * relu_pow_val(x, k - 1);
        }));
    };
    return out;
}

VarPtr Tape::softmax(VarPtr v) {
    if (v->value.cols() != 1)
        throw std::invalid_argument("ad::softmax: column vector expected");
    Eigen::ArrayXd e = (v->value.col(0).array() - v->value.maxCoeff()).exp();
    Eigen::VectorXd y = (e / e.sum()).matrix();
    VarPtr out = record(y, v->requires_grad);
    out->backprop = [v, out]() {
        if (!v->requires_grad) return;
        const Eigen::VectorXd& y = out->value.col(0);
        const Eigen::VectorXd& g = out->grad.col(0);
        const double dot = g.dot(y);
        v->grad.col(0) += y.cwiseProduct(g.array().matrix() -
                                         Eigen::VectorXd::Constant(y.size(), dot));
    };
    return out;
}

VarPtr Tape::cumsum(VarPtr v) {
    if (v->value.cols() != 1)
        throw std::invalid_argument("ad::cumsum: column vector expected");
    Eigen::VectorXd y(v->value.rows());
    double acc = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        acc += v->value(i, 0);
        y[i] = acc;
    }
    VarPtr out = record(y, v->requires_grad);
    out->backprop = [v, out]() {
        if (!v->requires_grad) return;
        double acc = 0.0;
        for (int i = static_cast<int>(out->grad.rows()) - 1; i >= 0; --i) {
            acc += out->grad(i, 0);
            v->grad(i, 0) += acc;
        }
    };
    return out;
}

VarPtr Tape::concat_rows(const std::vector<VarPtr>& parts) {
    int rows = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p->value.cols() != 1)
            throw std::invalid_argument("ad::concat_rows: column vectors expected");
        rows += static_cast<int>(p->value.rows());
        rg = rg || p->requires_grad;
    }
    Eigen::VectorXd y(rows);
    int at = 0;
    for (const auto& p : parts) {
        y.segment(at, p->value.rows()) = p->value.col(0);
        at += static_cast<int>(p->value.rows());
    }
    VarPtr out = record(y, rg);
    out->backprop = [parts, out]() {
        int at = 0;
        for (const auto& p : parts) {
            const int len = static_cast<int>(p->value.rows());
            if (p->requires_grad) p->grad.col(0) += out->grad.col(0).segment(at, len);
            at += len;
        }
    };
    return out;
}

VarPtr Tape::col(VarPtr m, int j) {
    VarPtr out = record(m->value.col(j), m->requires_grad);
    out->backprop = [m, out, j]() {
        if (m->requires_grad) m->grad.col(j) += out->grad.col(0);
    };
    return out;
}

VarPtr Tape::sum(VarPtr a) {
    VarPtr out = record(Eigen::MatrixXd::Constant(1, 1, a->value.sum()),
                        a->requires_grad);
    out->backprop = [a, out]() {
        if (a->requires_grad) a->grad.array() += out->grad(0, 0);
    };
    return out;
}

VarPtr Tape::mse(VarPtr pred, const Eigen::MatrixXd& target) {
    if (pred->value.rows() != target.rows() || pred->value.cols() != target.cols())
        throw std::invalid_argument("ad::mse: shape mismatch");
    const double count = static_cast<double>(target.size());
    Eigen::MatrixXd diff = pred->value - target;
    VarPtr out = record(
        Eigen::MatrixXd::Constant(1, 1, diff.squaredNorm() / count),
        pred->requires_grad);
    out->backprop = [pred, out, diff, count]() {
        if (pred->requires_grad)
            pred->grad += (2.0 / count) * out->grad(0, 0) * diff;
    };
    return out;
}

VarPtr Tape::trunc_power_features(VarPtr x, VarPtr knots, int r, int dim) {
    if (x->value.cols() != 1 || knots->value.cols() != 1)
        throw std::invalid_argument("ad::trunc_power_features: column vectors");
    if (knots->value.rows() < dim)
        throw std::invalid_argument("ad::trunc_power_features: too few knots");
    const int D = static_cast<int>(x->value.rows());
    Eigen::MatrixXd F(D, dim);
    for (int j = 0; j < dim; ++j) {
        const double tj = knots->value(j, 0);
        for (int d = 0; d < D; ++d)
            F(d, j) = (r == 1) ? (x->value(d, 0) >= tj ? 1.0 : 0.0)
                               : relu_pow_val(x->value(d, 0) - tj, r - 1);
    }
    VarPtr out = record(std::move(F), x->requires_grad || knots->requires_grad);
    out->backprop = [x, knots, out, r, dim]() {
        if (r == 1) return;  // step functions carry zero gradient
        const int D = static_cast<int>(x->value.rows());
        for (int j = 0; j < dim; ++j) {
            const double tj = knots->value(j, 0);
            double tbar = 0.0;
            for (int d = 0; d < D; ++d) {
                const double g = out->grad(d, j);
                if (g == 0.0) continue;
                const double slope =
                    (r - 1) * relu_pow_val(x->value(d, 0) - tj, r - 2);
                if (x->requires_grad) x->grad(d, 0) += g * slope;
                tbar -= g * slope;
            }
            if (knots->requires_grad) knots->grad(j, 0) += tbar;
        }
    };
    return out;
}

VarPtr Tape::cob_matrix(VarPtr knots, int r, int n) {
    const int dim = n + r - 1;
    if (knots->value.cols() != 1 || knots->value.rows() != n + 2 * r - 1)
        throw std::invalid_argument("ad::cob_matrix: knot shape mismatch");
    const Eigen::VectorXd k = knots->value.col(0);

    // Forward: all intermediate orders kept for the reverse sweep.
    auto levels = std::make_shared<std::vector<Eigen::MatrixXd>>();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
        A(i, i) = 1.0;
        if (i + 1 < dim) A(i, i + 1) = -1.0;
    }
    levels->push_back(A);
    for (int s = 2; s <= r; ++s) {
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(dim, dim);
        const Eigen::MatrixXd& prev = levels->back();
        for (int i = 0; i < dim; ++i) {
            const double d1 = k[i + s - 1] - k[i];
            const double d2 = k[i + s] - k[i + 1];
            for (int j = i; j <= std::min(i + s, dim - 1); ++j) {
                double v = prev(i, j) / d1;
                if (i + 1 < dim) v -= prev(i + 1, j) / d2;
                next(i, j) = v;
            }
        }
        levels->push_back(next);
    }

    VarPtr out = record(levels->back(), knots->requires_grad);
    out->backprop = [knots, out, levels, r, dim]() {
        if (!knots->requires_grad) return;
        const Eigen::VectorXd k = knots->value.col(0);
        Eigen::MatrixXd abar = out->grad;
        for (int s = r; s >= 2; --s) {
            const Eigen::MatrixXd& prev = (*levels)[s - 2];
            Eigen::MatrixXd pbar = Eigen::MatrixXd::Zero(dim, dim);
            for (int i = 0; i < dim; ++i) {
                const double d1 = k[i + s - 1] - k[i];
                const double d2 = k[i + s] - k[i + 1];
                double d1bar = 0.0, d2bar = 0.0;
                for (int j = i; j <= std::min(i + s, dim - 1); ++j) {
                    const double g = abar(i, j);
                    if (g == 0.0) continue;
                    pbar(i, j) += g / d1;
                    d1bar -= g * prev(i, j) / (d1 * d1);
                    if (i + 1 < dim) {
                        pbar(i + 1, j) -= g / d2;
                        d2bar += g * prev(i + 1, j) / (d2 * d2);
                    }
                }
                knots->grad(i + s - 1, 0) += d1bar;
                knots->grad(i, 0) -= d1bar;
                knots->grad(i + s, 0) += d2bar;
                knots->grad(i + 1, 0) -= d2bar;
            }
            abar = std::move(pbar);
        }
        // A^[1] has constant entries; nothing flows below order 2.
    };
    return out;
}

VarPtr Tape::shift_relu(VarPtr X, VarPtr t) {
    if (t->value.cols() != 1 || X->value.cols() != t->value.rows())
        throw std::invalid_argument("ad::shift_relu: shape mismatch");
    Eigen::MatrixXd y = X->value;
    for (int p = 0; p < y.cols(); ++p)
        y.col(p) = (y.col(p).array() - t->value(p, 0)).max(0.0);
    VarPtr out = record(std::move(y), X->requires_grad || t->requires_grad);
    out->backprop = [X, t, out]() {
        for (int p = 0; p < X->value.cols(); ++p) {
            Eigen::ArrayXd mask =
                (X->value.col(p).array() - t->value(p, 0) > 0.0).cast<double>();
            Eigen::ArrayXd g = out->grad.col(p).array() * mask;
            if (X->requires_grad) X->grad.col(p).array() += g;
            if (t->requires_grad) t->grad(p, 0) -= g.sum();
        }
    };
    return out;
}

VarPtr Tape::minmax_norm(VarPtr X, double lo, double hi, AffineRecord* record_out) {
    const int D = static_cast<int>(X->value.rows());
    const int P = static_cast<int>(X->value.cols());
    Eigen::MatrixXd y(D, P);
    auto lo_idx = std::make_shared<std::vector<int>>(P);
    auto hi_idx = std::make_shared<std::vector<int>>(P);
    auto degen = std::make_shared<std::vector<bool>>(P);
    AffineRecord rec;
    rec.scale.resize(P);
    rec.shift.resize(P);
    rec.degenerate.resize(P);
    for (int p = 0; p < P; ++p) {
        int imin = 0, imax = 0;
        X->value.col(p).minCoeff(&imin);
        X->value.col(p).maxCoeff(&imax);
        (*lo_idx)[p] = imin;
        (*hi_idx)[p] = imax;
        const double m = X->value(imin, p), M = X->value(imax, p);
        if (M > m) {
            const double s = (hi - lo) / (M - m);
            y.col(p) = lo + s * (X->value.col(p).array() - m);
            (*degen)[p] = false;
            rec.scale[p] = s;
            rec.shift[p] = lo - s * m;
            rec.degenerate[p] = false;
        } else {
            y.col(p).setConstant(0.5 * (lo + hi));
            (*degen)[p] = true;
            rec.scale[p] = 1.0;
            rec.shift[p] = 0.5 * (lo + hi) - m;
            rec.degenerate[p] = true;
        }
    }
    if (record_out) *record_out = rec;
    VarPtr out = record(std::move(y), X->requires_grad);
    out->backprop = [X, out, lo_idx, hi_idx, degen, lo, hi]() {
        if (!X->requires_grad) return;
        for (int p = 0; p < X->value.cols(); ++p) {
            if ((*degen)[p]) continue;
            const int imin = (*lo_idx)[p], imax = (*hi_idx)[p];
            const double m = X->value(imin, p), M = X->value(imax, p);
            const double s = (hi - lo) / (M - m);
            const Eigen::VectorXd g = out->grad.col(p);
            const double gsum = g.sum();
            const double c =
                g.dot(((X->value.col(p).array() - m) / (M - m)).matrix());
            X->grad.col(p) += s * g;
            X->grad(imin, p) += s * (c - gsum);
            X->grad(imax, p) -= s * c;
        }
    };
    return out;
}

VarPtr Tape::apply_affine(VarPtr X, const AffineRecord& rec) {
    if (X->value.cols() != rec.scale.size())
        throw std::invalid_argument("ad::apply_affine: shape mismatch");
    Eigen::MatrixXd y = X->value;
    for (int p = 0; p < y.cols(); ++p)
        y.col(p) = (y.col(p).array() * rec.scale[p] + rec.shift[p]).matrix();
    VarPtr out = record(std::move(y), X->requires_grad);
    Eigen::VectorXd scale = rec.scale;
    out->backprop = [X, out, scale]() {
        if (!X->requires_grad) return;
        for (int p = 0; p < X->value.cols(); ++p)
            X->grad.col(p) += scale[p] * out->grad.col(p);
    };
    return out;
}

void Tape::backward(VarPtr loss) {
    if (loss->value.size() != 1)
        throw std::invalid_argument("ad::backward: loss must be scalar");
    loss->grad.setConstant(1.0);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop();
}

double grad_check(const std::function<double(const Eigen::VectorXd&)>& f,
                  const Eigen::VectorXd& params,
                  const Eigen::VectorXd& analytic_grad, double step) {
    double worst = 0.0;
    Eigen::VectorXd p = params;
    for (int i = 0; i < params.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + step;
        const double fp = f(p);
        p[i] = saved - step;
        const double fm = f(p);
        p[i] = saved;
        const double fd = (fp - fm) / (2.0 * step);
        const double err =
            std::abs(analytic_grad[i] - fd) / (std::abs(fd) + 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace kan::ad
