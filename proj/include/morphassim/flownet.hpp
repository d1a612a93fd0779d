/// @file flownet.hpp
/// @brief Fourier-feature embedding and the fully connected vector-field
///        network whose time-1 flow realizes the registration map.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "morphassim/tape.hpp"

namespace morphassim {

/// Deterministic power-of-two Fourier features: frequencies 2^i, i<n_rff.
struct RffConfig {
    int n_rff = 8;
    int embed_dim() const { return 3 + 6 * n_rff; }  // 51 for the default
};

/// Embeds one point: (x, cos(2⁰x), …, cos(2^{n_rff−1}x), sin(2⁰x), …),
/// cos/sin applied per coordinate; all cos blocks first, ascending i.
Eigen::VectorXd rff_embed(const Eigen::Vector3d& x, const RffConfig& cfg);

/// Row-wise embedding of a cloud (n×3 → n×embed_dim).
Eigen::MatrixXd rff_embed_rows(const Eigen::MatrixX3d& X, const RffConfig& cfg);

/// Fully connected ReLU network from the embedded input to a 3D velocity.
/// Hidden layers use ReLU, the output layer is linear.
struct FlowNet {
    RffConfig rff;
    std::vector<Eigen::MatrixXd> weights;  ///< layer l: out×in
    std::vector<Eigen::VectorXd> biases;   ///< layer l: out

    std::size_t n_layers() const { return weights.size(); }

    /// He-uniform seeded initialization: W ~ U(−√(6/fan_in), √(6/fan_in)),
    /// biases zero. `hidden` lists the hidden-layer widths (may be empty for
    /// a single linear layer).
    static FlowNet make(const RffConfig& rff, const std::vector<int>& hidden, std::uint64_t seed);

    /// Velocity field f(ψ(x)) for every row of X (plain evaluation).
    Eigen::MatrixX3d velocity(const Eigen::MatrixX3d& X) const;

    void validate() const;  ///< dimension chain + final output dim 3
};

/// Euler discretization of the flow: N steps of size dt = 1/N.
struct FlowConfig {
    int n_steps = 10;
    double dt() const { return 1.0 / static_cast<double>(n_steps); }
};

/// X_{i+1} = X_i + dt·f(ψ(X_i)); returns all clouds X_0..X_N.
/// Throws NumericalError (with the step index) on non-finite values.
std::vector<Eigen::MatrixX3d> flow_forward(const FlowNet& net, const Eigen::MatrixX3d& X,
                                           const FlowConfig& cfg);

/// Parameter handles of a FlowNet registered on a tape.
struct TapeNet {
    std::vector<ad::Tape::Id> w;
    std::vector<ad::Tape::Id> b;
};

/// Registers all weights/biases as tape parameters.
TapeNet tape_parameters(ad::Tape& tape, const FlowNet& net);

/// Builds ψ(X) on the tape via cos/sin primitives and column concatenation.
ad::Tape::Id tape_rff_embed(ad::Tape& tape, ad::Tape::Id X, const RffConfig& cfg);

/// Applies the network to an embedded node.
ad::Tape::Id tape_net_apply(ad::Tape& tape, const TapeNet& params, ad::Tape::Id embedded);

/// Model file: little-endian u64 header length, JSON header (layer dims,
/// n_rff, n_steps), then all weights (row-major) and biases as f64 LE.
void save_flownet(const std::string& path, const FlowNet& net, const FlowConfig& cfg);
std::pair<FlowNet, FlowConfig> load_flownet(const std::string& path);

}  // namespace morphassim
