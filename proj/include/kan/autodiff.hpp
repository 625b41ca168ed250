#ifndef KAN_AUTODIFF_HPP_
#define KAN_AUTODIFF_HPP_

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

namespace kan::ad {

struct Node;
using VarPtr = std::shared_ptr<Node>;

/// One recorded value in the computation graph. grad always has the shape of
/// value and is accumulated during the reverse sweep.
struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    std::function<void()> backprop;  // accumulates into the inputs' grads

    double scalar() const { return value(0, 0); }
};

/// Per-column affine record produced by min-max normalization, kept so a
/// trained network can be evaluated with frozen statistics.
struct AffineRecord {
    Eigen::VectorXd scale;   // multiplicative factor per column
    Eigen::VectorXd shift;   // additive term per column
    std::vector<bool> degenerate;  // constant input column mapped to midpoint
};

/// Append-only reverse-mode tape. Nodes are recorded in creation order,
/// which is a topological order by construction; backward() replays it in
/// reverse with deterministic accumulation.
class Tape {
  public:
    // Backprop lambdas capture their own output node, which makes a
    // shared_ptr cycle; clearing them lets the graph free itself.
    ~Tape() {
        for (auto& n : order_) n->backprop = nullptr;
    }

    VarPtr leaf(const Eigen::MatrixXd& v, bool requires_grad = false);
    VarPtr constant(double v);

    VarPtr add(VarPtr a, VarPtr b);
    VarPtr sub(VarPtr a, VarPtr b);
    VarPtr mul(VarPtr a, VarPtr b);            // elementwise
    VarPtr affine(VarPtr a, double alpha, double beta);  // alpha*x + beta
    VarPtr matmul(VarPtr a, VarPtr b);
    VarPtr matmul_nt(VarPtr a, VarPtr b);      // a * b^T
    VarPtr relu(VarPtr a);
    VarPtr relu_pow(VarPtr a, int k);          // max(x,0)^k, k >= 1
    VarPtr softmax(VarPtr v);                  // column vector
    VarPtr cumsum(VarPtr v);                   // column vector
    VarPtr concat_rows(const std::vector<VarPtr>& parts);
    VarPtr col(VarPtr m, int j);
    VarPtr sum(VarPtr a);
    VarPtr mse(VarPtr pred, const Eigen::MatrixXd& target);

    /// out(d, j) = max(x_d - knots_j, 0)^{r-1} for the first dim knots.
    VarPtr trunc_power_features(VarPtr x, VarPtr knots, int r, int dim);

    /// Dense change-of-basis matrix A^[r] assembled from a knot vector Var
    /// (all n+2r-1 extended knots) via the order recurrence; differentiable
    /// with respect to every knot.
    VarPtr cob_matrix(VarPtr knots, int r, int n);

    /// out(d, p) = max(X(d,p) - t_p, 0).
    VarPtr shift_relu(VarPtr X, VarPtr t);

    /// Per-column min-max map onto [lo, hi]; constant columns map to the
    /// midpoint. Gradients flow through the batch statistics. The realized
    /// affine is written to *record when non-null.
    VarPtr minmax_norm(VarPtr X, double lo, double hi, AffineRecord* record);

    /// Applies a frozen AffineRecord (no dependence on batch statistics).
    VarPtr apply_affine(VarPtr X, const AffineRecord& rec);

    void backward(VarPtr loss);

    std::size_t size() const { return order_.size(); }

  private:
    VarPtr record(Eigen::MatrixXd value, bool requires_grad);
    std::vector<VarPtr> order_;
};

/// Max relative error between an analytic gradient and central finite
/// differences of f at params.
double grad_check(const std::function<double(const Eigen::VectorXd&)>& f,
                  const Eigen::VectorXd& params,
                  const Eigen::VectorXd& analytic_grad, double step = 1e-5);

}  // namespace kan::ad

#endif  // KAN_AUTODIFF_HPP_
