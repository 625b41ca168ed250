#include "kan/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace kan {

namespace {

int layer_in(const Layer& l) {
    if (std::holds_alternative<KanLayer>(l)) return std::get<KanLayer>(l).P;
    return static_cast<int>(std::get<MlpLayer>(l).W.cols());
}

int layer_out(const Layer& l) {
    if (std::holds_alternative<KanLayer>(l)) return std::get<KanLayer>(l).Q;
    return static_cast<int>(std::get<MlpLayer>(l).W.rows());
}

}  // namespace

int Network::input_width() const { return layer_in(layers.front()); }
int Network::output_width() const { return layer_out(layers.back()); }

Eigen::MatrixXd kan_layer_forward(const KanLayer& layer,
                                  const Eigen::MatrixXd& X) {
    if (X.cols() != layer.P)
        throw std::invalid_argument("kan_layer_forward: width mismatch");
    if (!X.allFinite())
        throw std::invalid_argument("kan_layer_forward: non-finite input");
    const KnotVector kv = layer.realized_kv();
    const int dim = kv.dim();
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(X.rows(), layer.Q);
    // The spline path evaluates through A * Phi so the layer is defined on
    // all of R, matching the recorded training graph exactly.
    ChangeOfBasis A = build_Ar(kv, kv.r);
    for (int p = 0; p < layer.P; ++p) {
        Eigen::MatrixXd F =
            basis_features(kv, X.col(p), BasisKind::TruncatedPower);
        if (layer.basis == BasisKind::Spline) F = F * A.dense().transpose();
        for (int q = 0; q < layer.Q; ++q)
            Y.col(q) += F * layer.weights[q].row(p).transpose();
    }
    return Y;
}

Eigen::MatrixXd mlp_layer_forward(const MlpLayer& layer,
                                  const Eigen::MatrixXd& X) {
    if (layer.t.size() == 0) return X * layer.W.transpose();
    Eigen::MatrixXd H = X;
    for (int p = 0; p < H.cols(); ++p)
        H.col(p) = (H.col(p).array() - layer.t[p]).max(0.0);
    return H * layer.W.transpose();
}

std::pair<Eigen::MatrixXd, ad::AffineRecord> normalize_uniform(
    const Eigen::MatrixXd& batch, double lo, double hi) {
    ad::Tape tape;
    ad::AffineRecord rec;
    ad::VarPtr out = tape.minmax_norm(tape.leaf(batch), lo, hi, &rec);
    return {out->value, rec};
}

namespace {

Eigen::MatrixXd apply_record(const Eigen::MatrixXd& X,
                             const ad::AffineRecord& rec) {
    Eigen::MatrixXd y = X;
    for (int p = 0; p < y.cols(); ++p)
        y.col(p) = (y.col(p).array() * rec.scale[p] + rec.shift[p]).matrix();
    return y;
}

}  // namespace

Eigen::MatrixXd network_forward(Network& net, const Eigen::MatrixXd& X,
                                ForwardMode mode) {
    if (mode == ForwardMode::Train ||
        net.frozen_norms.size() != net.layers.size())
        net.frozen_norms.assign(net.layers.size(), ad::AffineRecord{});
    Eigen::MatrixXd cur = X;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (std::holds_alternative<KanLayer>(net.layers[l])) {
            const KanLayer& layer = std::get<KanLayer>(net.layers[l]);
            if (net.norm == NormKind::UniformMinMax) {
                if (mode == ForwardMode::Train) {
                    auto [normed, rec] =
                        normalize_uniform(cur, layer.kv.a, layer.kv.b);
                    net.frozen_norms[l] = rec;
                    cur = normed;
                } else {
                    cur = apply_record(cur, net.frozen_norms[l]);
                }
            }
            cur = kan_layer_forward(layer, cur);
        } else {
            cur = mlp_layer_forward(std::get<MlpLayer>(net.layers[l]), cur);
        }
    }
    return cur;
}

namespace {

bool kan_has_logits(const KanLayer& k) { return k.free_knots.has_value(); }

int kan_logit_count(const KanLayer& k) {
    if (!k.free_knots) return 0;
    return static_cast<int>(k.free_knots->s_interior.size() +
                            k.free_knots->s_left.size() +
                            k.free_knots->s_right.size());
}

}  // namespace

int count_trainable(const Network& net) {
    int total = 0;
    for (const auto& l : net.layers) {
        if (std::holds_alternative<KanLayer>(l)) {
            const KanLayer& k = std::get<KanLayer>(l);
            total += k.P * k.Q * k.kv.dim() + kan_logit_count(k);
        } else {
            const MlpLayer& m = std::get<MlpLayer>(l);
            total += static_cast<int>(m.W.size() + m.t.size());
        }
    }
    return total;
}

Eigen::VectorXd get_params(const Network& net) {
    Eigen::VectorXd flat(count_trainable(net));
    int at = 0;
    auto put = [&](const Eigen::MatrixXd& m) {
        flat.segment(at, m.size()) =
            Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        at += static_cast<int>(m.size());
    };
    for (const auto& l : net.layers) {
        if (std::holds_alternative<KanLayer>(l)) {
            const KanLayer& k = std::get<KanLayer>(l);
            const int dim = k.kv.dim();
            for (int p = 0; p < k.P; ++p) {
                Eigen::MatrixXd Wp(dim, k.Q);
                for (int q = 0; q < k.Q; ++q)
                    Wp.col(q) = k.weights[q].row(p).transpose();
                put(Wp);
            }
            if (k.free_knots) {
                put(k.free_knots->s_interior);
                put(k.free_knots->s_left);
                put(k.free_knots->s_right);
            }
        } else {
            const MlpLayer& m = std::get<MlpLayer>(l);
            put(m.W);
            put(m.t);
        }
    }
    return flat;
}

void set_params(Network& net, const Eigen::VectorXd& flat) {
    if (flat.size() != count_trainable(net))
        throw std::invalid_argument("set_params: size mismatch");
    int at = 0;
    auto take = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m =
            Eigen::Map<const Eigen::MatrixXd>(flat.data() + at, rows, cols);
        at += static_cast<int>(rows * cols);
        return m;
    };
    for (auto& l : net.layers) {
        if (std::holds_alternative<KanLayer>(l)) {
            KanLayer& k = std::get<KanLayer>(l);
            const int dim = k.kv.dim();
            for (int p = 0; p < k.P; ++p) {
                Eigen::MatrixXd Wp = take(dim, k.Q);
                for (int q = 0; q < k.Q; ++q)
                    k.weights[q].row(p) = Wp.col(q).transpose();
            }
            if (k.free_knots) {
                k.free_knots->s_interior = take(k.free_knots->s_interior.size(), 1);
                k.free_knots->s_left = take(k.free_knots->s_left.size(), 1);
                k.free_knots->s_right = take(k.free_knots->s_right.size(), 1);
            }
        } else {
            MlpLayer& m = std::get<MlpLayer>(l);
            m.W = take(m.W.rows(), m.W.cols());
            m.t = take(m.t.size(), 1);
        }
    }
}

namespace {

/// Knot Var for a KAN layer: a constant leaf for fixed knots, or the
/// softmax-gap construction recorded on the tape for trainable knots.
ad::VarPtr knots_var(ad::Tape& tape, const KanLayer& k,
                     std::vector<ad::VarPtr>* param_vars) {
    if (!k.free_knots) {
        return tape.leaf(k.kv.knots, false);
    }
    const double a = k.kv.a, b = k.kv.b, w = b - a;
    ad::VarPtr s_int = tape.leaf(k.free_knots->s_interior, true);
    ad::VarPtr s_left = tape.leaf(k.free_knots->s_left, true);
    ad::VarPtr s_right = tape.leaf(k.free_knots->s_right, true);
    ad::VarPtr interior =
        tape.affine(tape.cumsum(tape.softmax(s_int)), w, a);  // t_1..t_n
    ad::VarPtr left = tape.affine(tape.cumsum(tape.softmax(s_left)), w,
                                  a - w);  // t_{2-r}..t_0
    ad::VarPtr right =
        tape.affine(tape.cumsum(tape.softmax(s_right)), w, b);  // t_{n+1}..
    ad::VarPtr first = tape.leaf(Eigen::MatrixXd::Constant(1, 1, a - w), false);
    ad::VarPtr full = tape.concat_rows({first, left, interior, right});
    if (param_vars) {
        param_vars->push_back(s_int);
        param_vars->push_back(s_left);
        param_vars->push_back(s_right);
    }
    return full;
}

}  // namespace

ad::VarPtr network_loss_graph(ad::Tape& tape, Network& net,
                              const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Y, ForwardMode mode,
                              std::vector<ad::VarPtr>* param_vars) {
    if (mode == ForwardMode::Train ||
        net.frozen_norms.size() != net.layers.size())
        net.frozen_norms.assign(net.layers.size(), ad::AffineRecord{});
    ad::VarPtr cur = tape.leaf(X, false);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (std::holds_alternative<KanLayer>(net.layers[l])) {
            KanLayer& k = std::get<KanLayer>(net.layers[l]);
            if (net.norm == NormKind::UniformMinMax) {
                if (mode == ForwardMode::Train)
                    cur = tape.minmax_norm(cur, k.kv.a, k.kv.b,
                                           &net.frozen_norms[l]);
                else
                    cur = tape.apply_affine(cur, net.frozen_norms[l]);
            }
            const int dim = k.kv.dim();
            // Weight leaves first so the flat gradient ordering matches
            // get_params.
            std::vector<ad::VarPtr> Wp(k.P);
            for (int p = 0; p < k.P; ++p) {
                Eigen::MatrixXd w(dim, k.Q);
                for (int q = 0; q < k.Q; ++q)
                    w.col(q) = k.weights[q].row(p).transpose();
                Wp[p] = tape.leaf(w, true);
                if (param_vars) param_vars->push_back(Wp[p]);
            }
            ad::VarPtr knots = knots_var(tape, k, param_vars);
            ad::VarPtr A;
            if (k.basis == BasisKind::Spline)
                A = tape.cob_matrix(knots, k.kv.r, k.kv.n);
            ad::VarPtr y;
            for (int p = 0; p < k.P; ++p) {
                ad::VarPtr feat = tape.trunc_power_features(
                    tape.col(cur, p), knots, k.kv.r, dim);
                if (k.basis == BasisKind::Spline)
                    feat = tape.matmul_nt(feat, A);
                ad::VarPtr term = tape.matmul(feat, Wp[p]);
                y = y ? tape.add(y, term) : term;
            }
            cur = y;
        } else {
            MlpLayer& m = std::get<MlpLayer>(net.layers[l]);
            ad::VarPtr W = tape.leaf(m.W, true);
            ad::VarPtr t = tape.leaf(m.t, true);
            if (param_vars) {
                param_vars->push_back(W);
                param_vars->push_back(t);
            }
            if (m.t.size() > 0) cur = tape.shift_relu(cur, t);
            cur = tape.matmul_nt(cur, W);
        }
    }
    return tape.mse(cur, Y);
}

double network_loss_grad(Network& net, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Y, ForwardMode mode,
                         Eigen::VectorXd* grad) {
    ad::Tape tape;
    std::vector<ad::VarPtr> params;
    ad::VarPtr loss = network_loss_graph(tape, net, X, Y, mode, &params);
    if (grad) {
        tape.backward(loss);
        grad->resize(count_trainable(net));
        int at = 0;
        for (const auto& p : params) {
            grad->segment(at, p->grad.size()) = Eigen::Map<const Eigen::VectorXd>(
                p->grad.data(), p->grad.size());
            at += static_cast<int>(p->grad.size());
        }
    }
    return loss->scalar();
}

int count_params(const Network& net) { return count_trainable(net); }

long count_flops_per_sample(const Network& net) {
    // c = 2 (multiply-add) per contraction entry.
    long total = 0;
    for (const auto& l : net.layers) {
        if (std::holds_alternative<KanLayer>(l)) {
            const KanLayer& k = std::get<KanLayer>(l);
            total += 2L * k.P * k.Q * (k.kv.n + k.kv.r);
        } else {
            const MlpLayer& m = std::get<MlpLayer>(l);
            total += 2L * m.W.size() + m.t.size();
        }
    }
    return total;
}

void init_network(Network& net, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    for (auto& l : net.layers) {
        if (std::holds_alternative<KanLayer>(l)) {
            KanLayer& k = std::get<KanLayer>(l);
            const double sigma = 1.0 / std::sqrt(double(k.P) * k.kv.dim());
            std::uniform_real_distribution<double> u(-sigma, sigma);
            for (int q = 0; q < k.Q; ++q)
                for (int p = 0; p < k.P; ++p)
                    for (int i = 0; i < k.kv.dim(); ++i) k.weights(q, p, i) = u(rng);
            if (k.free_knots)
                *k.free_knots = FreeKnotParam::zeros(k.kv.n, k.kv.r);
        } else {
            MlpLayer& m = std::get<MlpLayer>(l);
            const double sigma = 1.0 / std::sqrt(double(m.W.cols()));
            std::uniform_real_distribution<double> u(-sigma, sigma);
            for (Eigen::Index i = 0; i < m.W.size(); ++i)
                m.W.data()[i] = u(rng);
            m.t.setZero();
        }
    }
    net.frozen_norms.clear();
}

Network make_kan_network(const std::vector<int>& widths, int n, int r,
                         BasisKind basis, bool free_knots, double a, double b) {
    if (widths.size() < 2)
        throw std::invalid_argument("make_kan_network: need >= 2 widths");
    Network net;
    net.norm = NormKind::UniformMinMax;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        KanLayer k;
        k.P = widths[l];
        k.Q = widths[l + 1];
        k.kv = make_uniform_knots(a, b, n, r);
        k.basis = basis;
        k.weights = Tensor3(k.Q, k.P, k.kv.dim());
        if (free_knots) k.free_knots = FreeKnotParam::zeros(n, r);
        net.layers.push_back(std::move(k));
    }
    return net;
}

Network make_mlp_network(const std::vector<int>& widths) {
    if (widths.size() < 2)
        throw std::invalid_argument("make_mlp_network: need >= 2 widths");
    Network net;
    net.norm = NormKind::None;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        MlpLayer m;
        m.W = Eigen::MatrixXd::Zero(widths[l + 1], widths[l]);
        m.t = (l == 0) ? Eigen::VectorXd()
                       : Eigen::VectorXd::Zero(widths[l]);
        net.layers.push_back(std::move(m));
    }
    return net;
}

}  // namespace kan
