#ifndef KAN_KNOTS_HPP_
#define KAN_KNOTS_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kan {

/// Which basis a layer's weight tensor is expressed in.
enum class BasisKind { Spline, TruncatedPower };

/// Gap logits for trainable knot locations. softmax over each block of
/// logits gives relative gap widths, so any real values produce a strictly
/// increasing knot set. All-zero logits give uniform spacing.
struct FreeKnotParam {
    Eigen::VectorXd s_interior;  // n gaps on [a, b]
    Eigen::VectorXd s_left;      // r-1 gaps on [a-(b-a), a]
    Eigen::VectorXd s_right;     // r-1 gaps on [b, b+(b-a)]

    static FreeKnotParam zeros(int n, int r) {
        FreeKnotParam p;
        p.s_interior = Eigen::VectorXd::Zero(n);
        p.s_left = Eigen::VectorXd::Zero(r - 1);
        p.s_right = Eigen::VectorXd::Zero(r - 1);
        return p;
    }
};

/// Extended knot set t_{1-r} < ... < t_{n+r-1} for the spline space S_r(T)
/// on [a, b], with t_0 = a and t_n = b. Storage is 0-based; t(i) accepts
/// the signed index used in the spline literature.
struct KnotVector {
    double a = 0.0;
    double b = 1.0;
    int r = 2;  // spline order, piecewise degree r-1
    int n = 1;  // interior subdivision count
    Eigen::VectorXd knots;  // size n + 2r - 1, knots[0] == t_{1-r}

    int dim() const { return n + r - 1; }
    int count() const { return n + 2 * r - 1; }

    double t(int i) const { return knots[i + r - 1]; }
    double& t(int i) { return knots[i + r - 1]; }

    bool strictly_increasing() const {
        for (int k = 0; k + 1 < knots.size(); ++k)
            if (!(knots[k] < knots[k + 1])) return false;
        return true;
    }
};

inline KnotVector make_uniform_knots(double a, double b, int n, int r) {
    if (!(a < b)) throw std::invalid_argument("make_uniform_knots: need a < b");
    if (n < 1) throw std::invalid_argument("make_uniform_knots: need n >= 1");
    if (r < 1) throw std::invalid_argument("make_uniform_knots: need r >= 1");
    KnotVector kv;
    kv.a = a;
    kv.b = b;
    kv.r = r;
    kv.n = n;
    kv.knots.resize(kv.count());
    const double h = (b - a) / n;
    for (int i = 1 - r; i <= n + r - 1; ++i) kv.t(i) = a + i * h;
    kv.t(0) = a;
    kv.t(n) = b;
    return kv;
}

/// Builds a knot vector from an explicit list of interior knots
/// t_0 < ... < t_n. The extension knots use uniform gaps sized so the
/// outermost knots sit at t_0 - (b-a) and t_n + (b-a).
inline KnotVector make_knots(const Eigen::VectorXd& interior, int r) {
    const int n = static_cast<int>(interior.size()) - 1;
    if (n < 1 || r < 1) throw std::invalid_argument("make_knots: bad sizes");
    KnotVector kv;
    kv.a = interior[0];
    kv.b = interior[n];
    kv.r = r;
    kv.n = n;
    kv.knots.resize(kv.count());
    const double w = kv.b - kv.a;
    if (!(w > 0)) throw std::invalid_argument("make_knots: need t_0 < t_n");
    for (int i = 0; i <= n; ++i) kv.t(i) = interior[i];
    for (int k = 1; k <= r - 1; ++k) {
        kv.t(-k) = kv.a - w * k / (r - 1);
        kv.t(n + k) = kv.b + w * k / (r - 1);
    }
    if (!kv.strictly_increasing())
        throw std::invalid_argument("make_knots: knots not strictly increasing");
    return kv;
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& s) {
    const double m = s.maxCoeff();
    Eigen::VectorXd e = (s.array() - m).exp();
    return e / e.sum();
}

/// Realizes knots from gap logits: t_i = a + (b-a) * cumsum(softmax(s))_i on
/// the interior, with the same construction on [a-(b-a), a] and [b, b+(b-a)]
/// for the extension knots. Endpoints t_{1-r}, t_0, t_n, t_{n+r-1} are fixed.
inline KnotVector knots_from_params(double a, double b, const FreeKnotParam& p,
                                    int r) {
    const int n = static_cast<int>(p.s_interior.size());
    if (n < 1 || r < 1) throw std::invalid_argument("knots_from_params: bad sizes");
    if (r >= 2 && (p.s_left.size() != r - 1 || p.s_right.size() != r - 1))
        throw std::invalid_argument("knots_from_params: side logit shape mismatch");
    KnotVector kv;
    kv.a = a;
    kv.b = b;
    kv.r = r;
    kv.n = n;
    kv.knots.resize(kv.count());
    const double w = b - a;

    auto fill = [w](Eigen::Ref<Eigen::VectorXd> out, const Eigen::VectorXd& s,
                    double left) {
        Eigen::VectorXd g = softmax(s);
        double acc = 0.0;
        for (int j = 0; j < s.size(); ++j) {
            acc += g[j];
            out[j] = left + w * acc;
        }
    };

    kv.t(0) = a;
    fill(kv.knots.segment(r, n), p.s_interior, a);  // t_1 .. t_n
    kv.t(n) = b;
    if (r >= 2) {
        kv.t(1 - r) = a - w;
        fill(kv.knots.segment(1, r - 1), p.s_left, a - w);  // t_{2-r} .. t_0
        kv.t(0) = a;
        fill(kv.knots.segment(n + r, r - 1), p.s_right, b);  // t_{n+1} ..
        kv.t(n + r - 1) = b + w;
    }
    // Extreme logits can make a softmax gap smaller than one ulp, collapsing
    // adjacent knots. Nudge such knots down by an ulp so the vector stays
    // strictly increasing with the four anchor knots untouched.
    for (int k = static_cast<int>(kv.knots.size()) - 2; k >= 1; --k) {
        if (kv.knots[k] >= kv.knots[k + 1])
            kv.knots[k] = std::nextafter(
                kv.knots[k + 1], -std::numeric_limits<double>::infinity());
    }
    return kv;
}

/// Recovers gap logits that reproduce kv through knots_from_params (up to the
/// softmax shift invariance). Used when refining free-knot layers.
inline FreeKnotParam params_from_knots(const KnotVector& kv) {
    FreeKnotParam p;
    auto logs = [](const KnotVector& kv, int lo, int count) {
        Eigen::VectorXd s(count);
        for (int j = 0; j < count; ++j)
            s[j] = std::log(kv.t(lo + j + 1) - kv.t(lo + j));
        return s;
    };
    p.s_interior = logs(kv, 0, kv.n);
    p.s_left = logs(kv, 1 - kv.r, kv.r - 1);
    p.s_right = logs(kv, kv.n, kv.r - 1);
    return p;
}

}  // namespace kan

#endif  // KAN_KNOTS_HPP_
