#include "kan/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "kan/refine.hpp"

namespace kan {

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state, const AdamConfig& cfg) {
    if (!grads.allFinite())
        throw std::runtime_error("adam_step: non-finite gradient");
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    if (state.m.size() != params.size()) {
        state.m = Eigen::VectorXd::Zero(params.size());
        state.v = Eigen::VectorXd::Zero(params.size());
        state.t = 0;
    }
    if (cfg.weight_decay != 0.0) params *= 1.0 - cfg.lr * cfg.weight_decay;
    ++state.t;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads;
    state.v =
        cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
    params.array() -= cfg.lr * (state.m.array() / bc1) /
                      ((state.v.array() / bc2).sqrt() + cfg.eps);
}

namespace {

Eigen::VectorXd two_loop_direction(const Eigen::VectorXd& g,
                                   const LbfgsState& state) {
    const int k = static_cast<int>(state.s_list.size());
    if (k == 0) return -g;
    Eigen::VectorXd q = g;
    std::vector<double> alpha(k), rho(k);
    for (int i = k - 1; i >= 0; --i) {
        rho[i] = 1.0 / state.y_list[i].dot(state.s_list[i]);
        alpha[i] = rho[i] * state.s_list[i].dot(q);
        q -= alpha[i] * state.y_list[i];
    }
    const double gamma = state.s_list[k - 1].dot(state.y_list[k - 1]) /
                         state.y_list[k - 1].squaredNorm();
    q *= gamma;
    for (int i = 0; i < k; ++i) {
        const double beta = rho[i] * state.y_list[i].dot(q);
        q += (alpha[i] - beta) * state.s_list[i];
    }
    return -q;
}

}  // namespace

double lbfgs_step(Eigen::VectorXd& params, const LossClosure& closure,
                  LbfgsState& state, const LbfgsConfig& cfg) {
    Eigen::VectorXd g;
    double fx;
    // The line search of the previous step already evaluated the current
    // point; reuse its loss and gradient instead of re-running the closure.
    if (state.have_prev && state.prev_x.size() == params.size() &&
        (state.prev_x.array() == params.array()).all()) {
        g = state.prev_grad;
        fx = state.prev_fx;
    } else {
        fx = closure(params, &g);
    }
    if (!g.allFinite())
        throw std::runtime_error("lbfgs_step: non-finite gradient");
    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
        state.converged = true;
        state.prev_x = params;
        state.prev_grad = g;
        state.prev_fx = fx;
        state.have_prev = true;
        return fx;
    }

    Eigen::VectorXd d = two_loop_direction(g, state);
    double dphi0 = d.dot(g);
    if (!(dphi0 < 0.0)) {  // not a descent direction; discard the history
        d = -g;
        dphi0 = d.dot(g);
    }

    // Strong Wolfe line search (bracket + zoom). Every trial evaluates the
    // closure once and keeps the gradient for the curvature pair.
    Eigen::VectorXd x_trial, g_trial;
    double f_trial = 0.0;
    auto eval = [&](double a) {
        x_trial = params + a * d;
        f_trial = closure(x_trial, &g_trial);
        return f_trial;
    };

    const double phi0 = fx;
    if (cfg.line_search == LineSearch::Fixed) {
        // Fixed mode: step of length lr, except the very first iteration
        // which is damped by the gradient 1-norm; curvature pairs
        // accepted on an absolute s.y tolerance.
        double step = cfg.lr;
        if (state.s_list.empty() && !state.have_prev)
            step = std::min(1.0, 1.0 / g.lpNorm<1>()) * cfg.lr;
        x_trial = params + step * d;
        f_trial = closure(x_trial, &g_trial);
        Eigen::VectorXd s = x_trial - params;
        Eigen::VectorXd y = g_trial - g;
        const double sy = s.dot(y);
        if (g_trial.allFinite() && sy > 1e-10) {
            state.s_list.push_back(std::move(s));
            state.y_list.push_back(std::move(y));
            while (static_cast<int>(state.s_list.size()) > cfg.history) {
                state.s_list.pop_front();
                state.y_list.pop_front();
            }
        }
        params = x_trial;
        state.prev_x = params;
        state.prev_grad = g_trial;
        state.prev_fx = f_trial;
        state.have_prev = true;
        if (g_trial.allFinite() &&
            g_trial.lpNorm<Eigen::Infinity>() <= cfg.grad_tol)
            state.converged = true;
        return f_trial;
    }
    double a_accept = -1.0;
    double a_prev = 0.0, f_prev = phi0, dphi_prev = dphi0;
    double a = cfg.lr;
    double zoom_lo = 0.0, zoom_hi = 0.0, f_lo = 0.0;
    bool do_zoom = false;
    for (int it = 0; it < cfg.max_line_search && a_accept < 0.0; ++it) {
        double fa = eval(a);
        if (fa > phi0 + cfg.c1 * a * dphi0 || (it > 0 && fa >= f_prev)) {
            zoom_lo = a_prev;
            f_lo = f_prev;
            zoom_hi = a;
            do_zoom = true;
            break;
        }
        double dphi = g_trial.dot(d);
        if (std::abs(dphi) <= -cfg.c2 * dphi0) {
            a_accept = a;
            break;
        }
        if (dphi >= 0.0) {
            zoom_lo = a;
            f_lo = fa;
            zoom_hi = a_prev;
            do_zoom = true;
            break;
        }
        a_prev = a;
        f_prev = fa;
        dphi_prev = dphi;
        a *= 2.0;
    }
    (void)dphi_prev;
    if (do_zoom) {
        for (int it = 0; it < cfg.max_line_search && a_accept < 0.0; ++it) {
            double am = 0.5 * (zoom_lo + zoom_hi);
            double fm = eval(am);
            if (fm > phi0 + cfg.c1 * am * dphi0 || fm >= f_lo) {
                zoom_hi = am;
            } else {
                double dphi = g_trial.dot(d);
                if (std::abs(dphi) <= -cfg.c2 * dphi0) {
                    a_accept = am;
                    break;
                }
                if (dphi * (zoom_hi - zoom_lo) >= 0.0) zoom_hi = zoom_lo;
                zoom_lo = am;
                f_lo = fm;
            }
            if (std::abs(zoom_hi - zoom_lo) < 1e-16) break;
        }
    }

    if (a_accept < 0.0) {
        // Wolfe search failed: backtrack a plain gradient step until the
        // loss does not increase.
        ++state.line_search_failures;
        d = -g;
        double a_fb = cfg.lr;
        for (int it = 0; it < cfg.max_line_search; ++it, a_fb *= 0.5)
            if (eval(a_fb) <= phi0) break;
        a_accept = a_fb;
    }

    Eigen::VectorXd s = x_trial - params;
    Eigen::VectorXd y = g_trial - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
        state.s_list.push_back(std::move(s));
        state.y_list.push_back(std::move(y));
        while (static_cast<int>(state.s_list.size()) > cfg.history) {
            state.s_list.pop_front();
            state.y_list.pop_front();
        }
    }

    params = x_trial;
    state.prev_x = params;
    state.prev_grad = g_trial;
    state.prev_fx = f_trial;
    state.have_prev = true;
    if (g_trial.lpNorm<Eigen::Infinity>() <= cfg.grad_tol)
        state.converged = true;
    return f_trial;
}

void preconditioned_gd_step(Tensor3& W, const Tensor3& grad,
                            const ChangeOfBasis& A, double eta) {
    if (W.Q != grad.Q || W.P != grad.P || W.C != grad.C)
        throw std::invalid_argument("preconditioned_gd_step: shape mismatch");
    Eigen::MatrixXd M = A.dense();
    Eigen::MatrixXd AtA = M.transpose() * M;
    for (int q = 0; q < W.Q; ++q) W[q] -= eta * grad[q] * AtA;
}

namespace {

/// Maps a flat optimizer-moment vector from the coarse to the fine
/// parameter layout: KAN weight slices go through the interpolation
/// transpose, knot-logit moments restart at zero, MLP blocks copy over.
Eigen::VectorXd prolong_flat(const Network& coarse, const Network& fine,
                             const std::vector<std::optional<RefinementOp>>& ops,
                             const Eigen::VectorXd& flat) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(count_trainable(fine));
    int ca = 0, fa = 0;
    for (std::size_t l = 0; l < coarse.layers.size(); ++l) {
        if (std::holds_alternative<KanLayer>(coarse.layers[l])) {
            const KanLayer& ck = std::get<KanLayer>(coarse.layers[l]);
            const KanLayer& fk = std::get<KanLayer>(fine.layers[l]);
            const int dc = ck.kv.dim(), df = fk.kv.dim();
            const Eigen::MatrixXd& I = ops[l]->interp;
            for (int p = 0; p < ck.P; ++p) {
                Eigen::Map<const Eigen::MatrixXd> mc(flat.data() + ca, dc,
                                                     ck.Q);
                Eigen::MatrixXd mf = I.transpose() * mc;
                out.segment(fa, df * ck.Q) =
                    Eigen::Map<const Eigen::VectorXd>(mf.data(), mf.size());
                ca += dc * ck.Q;
                fa += df * ck.Q;
            }
            if (ck.free_knots) {
                ca += ck.kv.n + 2 * (ck.kv.r - 1);
                fa += fk.kv.n + 2 * (fk.kv.r - 1);  // left at zero
            }
        } else {
            const MlpLayer& m = std::get<MlpLayer>(coarse.layers[l]);
            const int sz = static_cast<int>(m.W.size() + m.t.size());
            out.segment(fa, sz) = flat.segment(ca, sz);
            ca += sz;
            fa += sz;
        }
    }
    return out;
}

}  // namespace

TrainResult train_multilevel(Network& net, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& Y,
                             const std::vector<int>& epochs_per_level,
                             const TrainConfig& cfg) {
    if (epochs_per_level.empty())
        throw std::invalid_argument("train_multilevel: empty schedule");
    TrainResult result;
    AdamState adam;
    LbfgsState lbfgs;

    auto closure = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        set_params(net, x);
        return network_loss_grad(net, X, Y, ForwardMode::Train, g);
    };

    for (std::size_t level = 0; level < epochs_per_level.size(); ++level) {
        if (level > 0) {
            std::vector<std::optional<RefinementOp>> ops;
            Network fine = refine_network(net, &ops);
            if (cfg.kind == OptKind::Adam && adam.m.size() > 0) {
                adam.m = prolong_flat(net, fine, ops, adam.m);
                adam.v = prolong_flat(net, fine, ops, adam.v);
            }
            lbfgs = LbfgsState{};  // curvature pairs live in the old space
            net = std::move(fine);
        }
        Eigen::VectorXd x = get_params(net);
        Eigen::VectorXd g;
        double fx = network_loss_grad(net, X, Y, ForwardMode::Train, &g);
        result.history.push_back({static_cast<int>(level), 0, fx,
                                  g.lpNorm<Eigen::Infinity>()});
        result.final_loss = fx;
        for (int e = 1; e <= epochs_per_level[level]; ++e) {
            const double epoch_start_fx = fx;
            if (cfg.kind == OptKind::Adam) {
                adam_step(x, g, adam, cfg.adam);
                fx = closure(x, &g);
            } else {
                // One epoch = a budget of inner L-BFGS iterations; stop
                // early on convergence or when the loss stops moving.
                const int budget = std::max(1, cfg.lbfgs.iters_per_epoch);
                for (int it = 0; it < budget; ++it) {
                    const double prev_fx = fx;
                    fx = lbfgs_step(x, closure, lbfgs, cfg.lbfgs);
                    if (lbfgs.converged) break;
                    if (it > 0 &&
                        std::abs(prev_fx - fx) <=
                            1e-9 * std::max(1.0, std::abs(prev_fx)))
                        break;
                }
                g = lbfgs.prev_grad;
                set_params(net, x);
            }
            result.history.push_back({static_cast<int>(level), e, fx,
                                      g.lpNorm<Eigen::Infinity>()});
            result.final_loss = fx;
            if (cfg.kind == OptKind::Lbfgs &&
                (lbfgs.converged ||
                 (e > 1 && std::abs(epoch_start_fx - fx) <=
                               1e-10 * std::max(1.0, std::abs(fx)))))
                break;  // level converged; remaining epochs are no-ops
        }
        set_params(net, x);
    }
    return result;
}

}  // namespace kan
