#ifndef KAN_OPTIM_HPP_
#define KAN_OPTIM_HPP_

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <vector>

#include "kan/cob.hpp"
#include "kan/network.hpp"

namespace kan {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    Eigen::VectorXd m, v;
    long t = 0;
};

/// Bias-corrected Adam with decoupled weight decay (applied before the
/// moment step). Throws on non-finite gradients.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state, const AdamConfig& cfg);

enum class LineSearch {
    Fixed,  // step of length lr along the L-BFGS direction (no search)
    Wolfe,  // strong Wolfe bracket + zoom
};

struct LbfgsConfig {
    double lr = 1.0;       // step length (Fixed) or first trial step (Wolfe)
    int history = 10;      // curvature pairs kept
    double grad_tol = 1e-12;  // infinity-norm convergence threshold
    double c1 = 1e-4;      // Armijo constant
    double c2 = 0.9;       // curvature (strong Wolfe) constant
    int max_line_search = 30;
    int iters_per_epoch = 12;  // inner iterations per training epoch
    LineSearch line_search = LineSearch::Wolfe;
};

struct LbfgsState {
    std::deque<Eigen::VectorXd> s_list, y_list;
    Eigen::VectorXd prev_x, prev_grad;
    double prev_fx = 0.0;
    bool have_prev = false;
    bool converged = false;
    int line_search_failures = 0;
};

/// Loss closure: returns the loss at x and, when grad is non-null, fills the
/// gradient. Must be deterministic.
using LossClosure =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

/// One outer L-BFGS iteration: two-loop-recursion direction, strong-Wolfe
/// line search, curvature pair update. Returns the loss at the updated
/// params; sets state.converged when the gradient norm is at tolerance.
double lbfgs_step(Eigen::VectorXd& params, const LossClosure& closure,
                  LbfgsState& state, const LbfgsConfig& cfg);

/// One preconditioned gradient step in the truncated-power basis,
/// W <- W - eta * (grad x_3 A^T A); equivalent to a plain spline-basis step
/// mapped through the change of basis.
void preconditioned_gd_step(Tensor3& W, const Tensor3& grad,
                            const ChangeOfBasis& A, double eta);

enum class OptKind { Adam, Lbfgs };

struct TrainConfig {
    OptKind kind = OptKind::Lbfgs;
    AdamConfig adam;
    LbfgsConfig lbfgs;
};

struct HistoryRow {
    int level = 0;
    int epoch = 0;  // 0 = loss at level entry, before any step
    double loss = 0.0;
    double grad_norm = 0.0;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    double final_loss = 0.0;
};

/// Full-batch multilevel training: epochs_per_level[0] steps on the initial
/// grid, then refine_network and continue. The loss is continuous across
/// each refinement boundary. Adam moments are prolonged with the refinement
/// interpolation; L-BFGS curvature history is reset (it lives in the old
/// parameter space).
TrainResult train_multilevel(Network& net, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& Y,
                             const std::vector<int>& epochs_per_level,
                             const TrainConfig& cfg);

}  // namespace kan

#endif  // KAN_OPTIM_HPP_
