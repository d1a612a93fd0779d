/// @file tape.hpp
/// @brief Minimal reverse-mode differentiation engine.
///
/// Covers exactly the primitives the registration objective needs: affine
/// maps, ReLU, elementwise sin/cos with a constant frequency, squared L2
/// norm, sum, scalar multiply, fixed-index row gather, per-row dot product,
/// absolute value — plus two linear-plumbing ops (column concatenation,
/// addition/subtraction) and a frozen-direction row-norm sum that realizes
/// the unsquared Chamfer summand: its value is Σ_i ‖row_i‖ and its backward
/// uses the unit directions captured during the forward pass, which is the
/// exact (sub)gradient. Nearest-neighbor correspondences and normal-matching
/// pairs are baked into the graph as constants, so each tape differentiates
/// the piecewise-smooth branch active at build time.
///
/// Values are eagerly evaluated f64 Eigen matrices (scalars are 1x1).
/// `revalue()` re-runs the forward sweep with updated parameter leaves while
/// keeping all frozen structure (gather indices, row-norm directions,
/// constants) fixed — this is what makes central finite differences an exact
/// oracle for `backward()`.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace morphassim::ad {

using Mat = Eigen::MatrixXd;

class Tape {
  public:
    /// Node handles are indices into the tape; inputs always precede users.
    using Id = int;

    Id constant(Mat v);
    Id parameter(Mat v);

    /// Y = X·Wᵀ + 1·bᵀ with X n×in, W out×in, b out×1.
    Id affine(Id x, Id w, Id b);
    /// Column concatenation of equally-tall blocks.
    Id hstack(const std::vector<Id>& parts);
    Id relu(Id x);
    Id sin_cf(Id x, double omega);  ///< sin(omega·x) elementwise
    Id cos_cf(Id x, double omega);  ///< cos(omega·x) elementwise
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id scale(Id x, double alpha);
    /// Row gather with indices frozen at build time.
    Id gather_rows(Id x, std::vector<int> rows);
    /// Per-row dot product of two n×k nodes → n×1.
    Id row_dot(Id a, Id b);
    Id abs(Id x);
    Id sum(Id x);     ///< total sum → 1×1
    Id sqnorm(Id x);  ///< ‖X‖_F² → 1×1
    /// Σ_i ‖row_i‖₂ → 1×1; backward and revalue use directions frozen at
    /// build time (exact value and exact subgradient at the build point).
    Id rownorm_sum(Id x);

    const Mat& value(Id id) const;
    double scalar_value(Id id) const;

    /// Reverse sweep from a 1×1 loss node; gradients of all parameter (and
    /// intermediate) nodes become available via grad(). Throws SchemaError
    /// if the node is not scalar.
    void backward(Id loss);
    const Mat& grad(Id id) const;

    /// Replaces a parameter leaf's value (shape must match).
    void set_parameter(Id id, const Mat& v);
    /// Recomputes every non-leaf value with the frozen structure.
    void revalue();

    std::size_t size() const { return nodes_.size(); }

  private:
    enum class Op {
        Constant,
        Parameter,
        Affine,
        HStack,
        Relu,
        SinCf,
        CosCf,
        Add,
        Sub,
        Scale,
        GatherRows,
        RowDot,
        Abs,
        Sum,
        SqNorm,
        RowNormSum,
    };

    struct Node {
        Op op;
        std::vector<Id> inputs;
        Mat value;
        Mat grad;                 // allocated during backward
        double alpha = 0.0;       // Scale factor or SinCf/CosCf frequency
        std::vector<int> rows;    // GatherRows indices
        Mat frozen;               // RowNormSum unit directions
    };

    Id push(Node n);
    void compute(Node& n);

    std::vector<Node> nodes_;
    bool grads_valid_ = false;
};

}  // namespace morphassim::ad
