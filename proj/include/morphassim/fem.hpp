/// @file fem.hpp
/// @brief P1 tetrahedral finite elements: operator assembly, the
///        pressure-Poisson (PPE) and Stokes (STE) pressure estimators with
///        covariance-driven bias corrections, Galerkin reduced-order variants
///        with supremizer enrichment, and section pressure drops.
///
/// Conventions. Scalar fields store one value per vertex; vector fields are
/// interleaved (DOF(vertex j, component a) = 3j + a). All integrals below are
/// exact for P1 data: the state-dependent convection terms have affine or
/// quadratic integrands per element and are evaluated in closed form.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "morphassim/tetmesh.hpp"

namespace morphassim {

/// Blood-flow defaults (SI units).
inline constexpr double kBloodDensity = 1.06e3;       ///< kg/m^3
inline constexpr double kBloodViscosity = 3.5e-3;     ///< Pa.s
inline constexpr double kAssimilationTimeGap = 0.025; ///< s, spacing of the assimilation instants

/// Nodal finite element field with a time tag.
struct FemField {
    Eigen::VectorXd values;
    double time = 0.0;
};

/// Physical and stabilization parameters shared by the estimators.
struct FlowParams {
    double tau = kAssimilationTimeGap;  ///< time gap between velocity frames, s
    double rho = kBloodDensity;
    double mu = kBloodViscosity;
    double c_s = 1.0;  ///< Brezzi-Pitkaranta stabilization constant
};

/// Assembled P1 operators. Sparse, symmetric where applicable, immutable
/// after assembly.
struct P1Operators {
    Eigen::SparseMatrix<double> stiffness_scalar;  ///< (grad p, grad q), n_v x n_v
    Eigen::SparseMatrix<double> mass_scalar;       ///< (p, q), n_v x n_v
    Eigen::SparseMatrix<double> stiffness_vector;  ///< (grad w : grad z), 3n_v x 3n_v
    Eigen::SparseMatrix<double> mass_vector;       ///< (w, z), 3n_v x 3n_v
    /// Pressure-velocity pairing D[(3j+a), b] = (N_b, dN_j/dx_a); the STE
    /// momentum block uses -D and the continuity block D^T.
    Eigen::SparseMatrix<double> coupling;
    /// Transient PPE pairing G[b, (3j+a)] = (N_j, dN_b/dx_a), i.e. (u, grad q).
    Eigen::SparseMatrix<double> grad_pairing;
    /// Brezzi-Pitkaranta term without its constant: sum_K h_K^2 (grad p, grad q)_K.
    Eigen::SparseMatrix<double> stabilization_h2;
    Eigen::VectorXd lumped_mass;  ///< m_b = (N_b, 1), n_v
};

/// Assembles all P1 operators for the mesh.
P1Operators assemble_p1(const TetMesh& mesh);

/// Convection of the P1 field u by itself, tested three ways. All exact:
/// (u . grad u) is affine per element.
///   grad form:  r_b       = (u . grad u, grad N_b)            (n_v)
///   mass form:  r_(3j+a)  = ((u . grad u)_a, N_j)             (3 n_v)
///   stab form:  r_b       = sum_K h_K^2 ((u . grad u), grad N_b)_K  (n_v)
Eigen::VectorXd convection_grad_rhs(const TetMesh& mesh, const Eigen::VectorXd& u);
Eigen::VectorXd convection_mass_rhs(const TetMesh& mesh, const Eigen::VectorXd& u);
Eigen::VectorXd convection_stab_rhs(const TetMesh& mesh, const Eigen::VectorXd& u);

/// Pressure-Poisson estimator: solves
///   (grad p, grad q) = -rho/tau (u_next - u_n, grad q) - rho (u_half . grad u_half, grad q)
/// with p = 0 on every boundary vertex. The returned field carries
/// u_half.time. params.mu is accepted for interface parity but does not
/// enter the equation. Throws SchemaError on layout mismatches and
/// NumericalError if the SPD factorization fails.
FemField ppe_solve(const TetMesh& mesh, const P1Operators& ops, const FemField& u_n,
                   const FemField& u_half, const FemField& u_next, const FlowParams& params);

/// Stokes estimator: solves the stabilized saddle problem
///   (grad w : grad z) - (p, div z)                       = rhs_w(z)
///   (div w, q) + sum_K c_s h_K^2 (grad p, grad q)_K      = rhs_q(q)
/// with w = 0 on the boundary,
///   rhs_w(z) = -rho/tau (u_next - u_n, z) - rho (u_half . grad u_half, z)
///              - mu (grad u_half : grad z)
///   rhs_q(q) = -rho c_s sum_K h_K^2 (u_half . grad u_half, grad q)_K
/// (the Laplacian part of the stabilization rhs vanishes identically for P1
/// velocities and is therefore not computed). Constants are a discrete
/// nullspace of this system -- the boundary rows of the pairing are removed
/// with w, and the stabilization only sees pressure gradients -- so the
/// pressure is pinned to zero lumped-mass mean via one Lagrange multiplier.
/// Returns (w, p).
std::pair<FemField, FemField> ste_solve(const TetMesh& mesh, const P1Operators& ops,
                                        const FemField& u_n, const FemField& u_half,
                                        const FemField& u_next, const FlowParams& params);

/// Sparse-by-adjacency 3x3 covariance blocks between vertex pairs. Only
/// pairs sharing an element can contribute to the bias integrals, so only
/// those need to be present. Storage is canonical (i <= j); Sigma_ji is
/// served as Sigma_ij^T, which enforces block symmetry by construction.
class BlockCovariance {
  public:
    explicit BlockCovariance(Eigen::Index n_nodes) : n_(n_nodes) {}

    Eigen::Index n_nodes() const { return n_; }

    /// Stores the block for (i, j). Diagonal blocks must be symmetric
    /// (within 1e-12 of their transpose); throws SchemaError otherwise or on
    /// out-of-range indices.
    void set(Eigen::Index i, Eigen::Index j, const Eigen::Matrix3d& block);

    bool has(Eigen::Index i, Eigen::Index j) const;

    /// Block for (i, j); throws SchemaError when the pair was never set.
    Eigen::Matrix3d get(Eigen::Index i, Eigen::Index j) const;

  private:
    Eigen::Index n_ = 0;
    std::unordered_map<std::uint64_t, Eigen::Matrix3d> blocks_;
};

/// All-zero blocks for every vertex pair sharing a tet (the complete
/// adjacency support of the bias integrals).
BlockCovariance zero_block_covariance(const TetMesh& mesh);

/// Extracts the element-adjacent 3x3 blocks of a dense 3n_v x 3n_v
/// covariance (e.g. a PBDW posterior). Non-adjacent blocks are dropped: they
/// contribute exactly zero to the bias sums.
BlockCovariance block_covariance_from_dense(const TetMesh& mesh, const Eigen::MatrixXd& sigma);

enum class BiasMode { Ppe, Ste };

/// Result of a bias correction. velocity is empty for BiasMode::Ppe.
struct BiasResult {
    FemField pressure;
    FemField velocity;
};

/// Noise-induced convection bias. The velocity covariance makes
/// E[u . grad u] exceed E[u] . grad E[u] by the field
///   Psi_m(x) = sum_{a,b} sum_c N_a (dN_b/dx_c) (Sigma_ab)_{cm}
///            = sum_{a,b} N_a (Sigma_ab^T grad N_b)_m,
/// affine per element. PPE mode solves (grad b, grad q) = -rho (Psi, grad q)
/// with b = 0 on the boundary; STE mode solves the stabilized Stokes system
/// of ste_solve with momentum rhs +rho (Psi, z) and zero continuity rhs.
/// Missing covariance blocks for an element-adjacent pair raise SchemaError.
BiasResult bias_correction(const TetMesh& mesh, const P1Operators& ops,
                           const BlockCovariance& cov, double rho, BiasMode mode,
                           double c_s = 1.0);

/// Area-weighted mean of p over the section_out faces minus the same over
/// section_in (P1 face integral = area times the 3-node average, exact).
/// Face ids index mesh.boundary_faces. Throws SchemaError on empty sections
/// or bad ids, NumericalError on zero total area.
double pressure_drop(const TetMesh& mesh, const FemField& p, const std::vector<int>& section_in,
                     const std::vector<int>& section_out);

/// Reduced PPE: the Dirichlet-eliminated stiffness projected onto a pressure
/// basis; right-hand sides are assembled full-order per call and projected.
struct PpeRom {
    Eigen::MatrixXd basis;           ///< d_p x r_p
    Eigen::MatrixXd reduced_matrix;  ///< r_p x r_p
};

PpeRom rom_project_ppe(const TetMesh& mesh, const P1Operators& ops, const Eigen::MatrixXd& basis_p);

FemField ppe_rom_solve(const TetMesh& mesh, const P1Operators& ops, const PpeRom& rom,
                       const FemField& u_n, const FemField& u_half, const FemField& u_next,
                       const FlowParams& params);

/// Reduced STE. With enrichment, the velocity basis gains one supremizer per
/// pressure mode (each solves eliminated-vector-stiffness s = coupling p_mode)
/// and is re-orthonormalized, so the reduced unknowns number
/// r_u + 2 r_p (velocity + pressure); the assembled system carries one extra
/// row for the mean-pin multiplier.
struct SteRom {
    Eigen::MatrixXd basis_u;  ///< d_u x (r_u [+ r_p]), orthonormal
    Eigen::MatrixXd basis_p;  ///< d_p x r_p
    Eigen::MatrixXd system;   ///< (dim + 1) x (dim + 1), with multiplier row
    Eigen::Index r_u = 0;     ///< velocity modes before enrichment

    Eigen::Index dimension() const { return basis_u.cols() + basis_p.cols(); }
};

/// Projects the stabilized STE system. Throws NumericalError when the
/// enriched velocity basis loses rank during re-orthonormalization.
SteRom rom_project_ste(const TetMesh& mesh, const P1Operators& ops,
                       const Eigen::MatrixXd& basis_u, const Eigen::MatrixXd& basis_p,
                       double c_s, bool enrich);

std::pair<FemField, FemField> ste_rom_solve(const TetMesh& mesh, const P1Operators& ops,
                                            const SteRom& rom, const FemField& u_n,
                                            const FemField& u_half, const FemField& u_next,
                                            const FlowParams& params);

/// Interpolates an analytic field onto the mesh vertices (exact for P1 data).
FemField interpolate_scalar(const TetMesh& mesh, const std::function<double(const Eigen::Vector3d&)>& f,
                            double time = 0.0);
FemField interpolate_vector(const TetMesh& mesh,
                            const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& f,
                            double time = 0.0);

/// L2 norm of a scalar field (through the consistent mass matrix).
double l2_norm_scalar(const P1Operators& ops, const Eigen::VectorXd& p);

}  // namespace morphassim
