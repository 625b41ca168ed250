#include "kan/refine.hpp"

#include <stdexcept>
#include <vector>

#include "kan/cob.hpp"

namespace kan {

KnotVector subdivide_knots(const KnotVector& kv) {
    KnotVector fine;
    fine.a = kv.a;
    fine.b = kv.b;
    fine.r = kv.r;
    fine.n = 2 * kv.n;
    fine.knots.resize(fine.count());
    const int r = kv.r;
    for (int k = 1; k <= r - 1; ++k) {
        fine.t(1 - k - 1) = kv.t(1 - k - 1);  // t_{-k} on both grids
        fine.t(fine.n + k) = kv.t(kv.n + k);
    }
    for (int i = 0; i < kv.n; ++i) {
        fine.t(2 * i) = kv.t(i);
        fine.t(2 * i + 1) = 0.5 * (kv.t(i) + kv.t(i + 1));
    }
    fine.t(fine.n) = kv.b;
    return fine;
}

namespace {

/// Boehm single-knot insertion: returns the (dim+1) x dim coefficient map B
/// with c' = B c, inserting x into storage interval [T[l], T[l+1]).
Eigen::MatrixXd boehm_step(const std::vector<double>& T, int r, double x,
                           int l) {
    const int dim = static_cast<int>(T.size()) - r;  // n + r - 1
    const int p = r - 1;
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dim + 1, dim);
    for (int j = 0; j <= dim; ++j) {
        double alpha;
        if (j <= l - p)
            alpha = 1.0;
        else if (j >= l + 1)
            alpha = 0.0;
        else
            alpha = (x - T[j]) / (T[j + p] - T[j]);
        if (j < dim) B(j, j) += alpha;
        if (j > 0) B(j, j - 1) += 1.0 - alpha;
    }
    return B;
}

}  // namespace

RefinementOp build_interpolation(const KnotVector& coarse,
                                 const KnotVector& fine) {
    if (coarse.r != fine.r)
        throw std::invalid_argument("build_interpolation: order mismatch");
    std::vector<double> cur(coarse.knots.data(),
                            coarse.knots.data() + coarse.knots.size());
    Eigen::MatrixXd M =
        Eigen::MatrixXd::Identity(coarse.dim(), coarse.dim());
    std::size_t at = 0;  // position in cur matched so far
    for (int k = 0; k < fine.knots.size(); ++k) {
        const double x = fine.knots[k];
        if (at < cur.size() && cur[at] == x) {
            ++at;
            continue;
        }
        if (at == 0 || at >= cur.size() || !(cur[at - 1] < x && x < cur[at]))
            throw std::invalid_argument(
                "build_interpolation: knot sets are not nested");
        Eigen::MatrixXd B =
            boehm_step(cur, coarse.r, x, static_cast<int>(at) - 1);
        M = (B * M).eval();
        cur.insert(cur.begin() + at, x);
        ++at;
    }
    if (cur.size() != static_cast<std::size_t>(fine.knots.size()))
        throw std::invalid_argument(
            "build_interpolation: knot sets are not nested");
    RefinementOp op;
    op.coarse = coarse;
    op.fine = fine;
    op.interp = M.transpose();
    return op;
}

KanLayer refine_layer(const KanLayer& layer, const RefinementOp& op) {
    KanLayer out;
    out.P = layer.P;
    out.Q = layer.Q;
    out.kv = op.fine;
    out.basis = layer.basis;
    out.weights = Tensor3(layer.Q, layer.P, op.fine.dim());

    Tensor3 spline = layer.weights;
    if (layer.basis == BasisKind::TruncatedPower)
        spline = apply_cob_inverse(spline, build_Ar(op.coarse, op.coarse.r));
    for (int q = 0; q < layer.Q; ++q)
        out.weights[q] = spline[q] * op.interp;
    if (layer.basis == BasisKind::TruncatedPower)
        out.weights = apply_cob(out.weights, build_Ar(op.fine, op.fine.r));

    if (layer.free_knots) out.free_knots = params_from_knots(op.fine);
    return out;
}

Network refine_network(const Network& net,
                       std::vector<std::optional<RefinementOp>>* ops) {
    Network out = net;
    if (ops) ops->assign(out.layers.size(), std::nullopt);
    for (std::size_t i = 0; i < out.layers.size(); ++i) {
        if (!std::holds_alternative<KanLayer>(out.layers[i])) continue;
        KanLayer& k = std::get<KanLayer>(out.layers[i]);
        // Free-knot layers subdivide their realized grid, not the nominal
        // uniform one.
        KnotVector coarse = k.realized_kv();
        KanLayer frozen = k;
        frozen.kv = coarse;
        RefinementOp op = build_interpolation(coarse, subdivide_knots(coarse));
        k = refine_layer(frozen, op);
        if (ops) (*ops)[i] = std::move(op);
    }
    return out;
}

}  // namespace kan
