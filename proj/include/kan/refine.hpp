#ifndef KAN_REFINE_HPP_
#define KAN_REFINE_HPP_

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "kan/knots.hpp"
#include "kan/network.hpp"

namespace kan {

/// Prolongation from a coarse knot vector to a nested fine one. interp is
/// the coarse-dim x fine-dim matrix with b_{i,T} = sum_j interp(i,j) b_{j,T'}
/// exactly; its transpose is a product of Boehm insertion steps, so every
/// fine coefficient is a convex combination of coarse coefficients.
struct RefinementOp {
    KnotVector coarse;
    KnotVector fine;
    Eigen::MatrixXd interp;
};

/// Inserts the midpoint of every interior interval [t_i, t_{i+1}],
/// i = 0..n-1, keeping the extension knots, so T is a subset of T' and
/// n' = 2n.
KnotVector subdivide_knots(const KnotVector& kv);

/// Builds the exact prolongation by repeated single-knot (Boehm) insertion.
/// Throws if the coarse knots are not a subset of the fine knots or the
/// orders differ.
RefinementOp build_interpolation(const KnotVector& coarse,
                                 const KnotVector& fine);

/// Refines one layer onto the once-subdivided grid; the forward map is
/// unchanged. TruncatedPower layers are mapped through the change of basis,
/// refined in the spline basis, and mapped back. Free-knot layers are frozen
/// at their realized knots and the fine logits re-derived from the fine gaps.
KanLayer refine_layer(const KanLayer& layer, const RefinementOp& op);

/// Subdivides every KAN layer once; normalization statistics carry over
/// unchanged. When ops is non-null it receives one entry per layer (empty
/// for MLP layers) so optimizer state can be prolonged alongside the
/// weights.
Network refine_network(const Network& net,
                       std::vector<std::optional<RefinementOp>>* ops = nullptr);

}  // namespace kan

#endif  // KAN_REFINE_HPP_
