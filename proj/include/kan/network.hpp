#ifndef KAN_NETWORK_HPP_
#define KAN_NETWORK_HPP_

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

#include "kan/autodiff.hpp"
#include "kan/basis.hpp"
#include "kan/cob.hpp"
#include "kan/knots.hpp"

namespace kan {

enum class NormKind { None, UniformMinMax };

/// One KAN layer: P inputs, Q outputs, a knot vector shared by the layer's
/// inputs, and a weight 3-tensor in the chosen basis. When free_knots is
/// present the knot vector is regenerated from the logits before every
/// forward pass.
struct KanLayer {
    int P = 0, Q = 0;
    KnotVector kv;
    BasisKind basis = BasisKind::Spline;
    Tensor3 weights;  // Q x P x dim
    std::optional<FreeKnotParam> free_knots;

    KnotVector realized_kv() const {
        return free_knots ? knots_from_params(kv.a, kv.b, *free_knots, kv.r)
                          : kv;
    }
};

/// Restricted MLP layer y_q = sum_p W_qp ReLU(x_p - t_p); with t empty the
/// layer is a pure linear map (used for the input layer of the reordered
/// architecture).
struct MlpLayer {
    Eigen::MatrixXd W;  // Q x P
    Eigen::VectorXd t;  // P biases, or empty
};

using Layer = std::variant<KanLayer, MlpLayer>;

struct Network {
    std::vector<Layer> layers;
    NormKind norm = NormKind::UniformMinMax;
    // Input normalization affine per layer, refreshed in Train mode and
    // reused verbatim in Frozen mode.
    std::vector<ad::AffineRecord> frozen_norms;

    int input_width() const;
    int output_width() const;
};

enum class ForwardMode { Train, Frozen };

/// Plain (tape-free) layer and network evaluation.
Eigen::MatrixXd kan_layer_forward(const KanLayer& layer,
                                  const Eigen::MatrixXd& X);
Eigen::MatrixXd mlp_layer_forward(const MlpLayer& layer,
                                  const Eigen::MatrixXd& X);
std::pair<Eigen::MatrixXd, ad::AffineRecord> normalize_uniform(
    const Eigen::MatrixXd& batch, double lo, double hi);
Eigen::MatrixXd network_forward(Network& net, const Eigen::MatrixXd& X,
                                ForwardMode mode = ForwardMode::Frozen);

/// Trainable parameter flattening. Ordering is fixed: per layer, KAN weight
/// slices p = 0..P-1 (column-major dim x Q), then interior/left/right knot
/// logits when present; MLP weights (column-major), then biases.
int count_trainable(const Network& net);
Eigen::VectorXd get_params(const Network& net);
void set_params(Network& net, const Eigen::VectorXd& flat);

/// Builds the full forward graph for a batch and returns the scalar MSE
/// loss Var; param_vars receives the leaf Vars in flat-parameter order so
/// gradients can be collected after backward().
ad::VarPtr network_loss_graph(ad::Tape& tape, Network& net,
                              const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Y, ForwardMode mode,
                              std::vector<ad::VarPtr>* param_vars);

/// Convenience: loss and flat gradient in one call (Train mode refreshes
/// the normalization records).
double network_loss_grad(Network& net, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Y, ForwardMode mode,
                         Eigen::VectorXd* grad);

int count_params(const Network& net);
long count_flops_per_sample(const Network& net);

/// Seeded uniform initialization: KAN weights U[-s, s] with
/// s = (P * dim)^{-1/2}; MLP weights with s = P^{-1/2}, biases zero; knot
/// logits zero (uniform knots).
void init_network(Network& net, unsigned long long seed);

/// Builds a KAN network from layer widths, one knot config for all layers.
Network make_kan_network(const std::vector<int>& widths, int n, int r,
                         BasisKind basis, bool free_knots, double a = 0.0,
                         double b = 1.0);
/// Reordered-MLP network: linear input layer, then shift-ReLU layers.
Network make_mlp_network(const std::vector<int>& widths);

}  // namespace kan

#endif  // KAN_NETWORK_HPP_
