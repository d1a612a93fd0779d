#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>
#include <vector>

#include "morphassim/errors.hpp"
#include "morphassim/fem.hpp"

namespace morphassim {

namespace {

using Triplet = Eigen::Triplet<double>;

/// Zeroes rows and columns at constrained indices and puts 1 on their
/// diagonal. With zero boundary values no right-hand-side lift is needed.
Eigen::SparseMatrix<double> eliminate_dirichlet(const Eigen::SparseMatrix<double>& a,
                                                const std::vector<bool>& constrained) {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(a.nonZeros()) + constrained.size());
    for (int outer = 0; outer < a.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, outer); it; ++it) {
            if (!constrained[static_cast<std::size_t>(it.row())] &&
                !constrained[static_cast<std::size_t>(it.col())]) {
                trip.emplace_back(it.row(), it.col(), it.value());
            }
        }
    }
    for (std::size_t i = 0; i < constrained.size(); ++i) {
        if (constrained[i]) {
            trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), 1.0);
        }
    }
    Eigen::SparseMatrix<double> out(a.rows(), a.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

/// Zeroes whole rows at constrained indices (for couplings whose test rows
/// disappear with the Dirichlet condition).
Eigen::SparseMatrix<double> zero_rows(const Eigen::SparseMatrix<double>& a,
                                      const std::vector<bool>& constrained) {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(a.nonZeros()));
    for (int outer = 0; outer < a.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, outer); it; ++it) {
            if (!constrained[static_cast<std::size_t>(it.row())]) {
                trip.emplace_back(it.row(), it.col(), it.value());
            }
        }
    }
    Eigen::SparseMatrix<double> out(a.rows(), a.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

std::vector<bool> vector_dof_mask(const std::vector<bool>& vertex_mask) {
    std::vector<bool> out(3 * vertex_mask.size(), false);
    for (std::size_t i = 0; i < vertex_mask.size(); ++i) {
        if (vertex_mask[i]) {
            out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = true;
        }
    }
    return out;
}

void check_field_size(const TetMesh& mesh, const FemField& f, const char* name) {
    if (f.values.size() != 3 * mesh.n_vertices()) {
        throw SchemaError(std::string(name) + ": velocity field length " +
                          std::to_string(f.values.size()) + " does not match 3*n_vertices = " +
                          std::to_string(3 * mesh.n_vertices()));
    }
    if (!f.values.allFinite()) {
        throw SchemaError(std::string(name) + ": velocity field contains non-finite values");
    }
}

void check_params(const FlowParams& params, const char* name) {
    if (!(params.tau > 0.0) || !(params.rho > 0.0) || !(params.mu > 0.0) ||
        !(params.c_s > 0.0)) {
        throw SchemaError(std::string(name) + ": tau, rho, mu and c_s must be positive");
    }
}

}  // namespace

FemField ppe_solve(const TetMesh& mesh, const P1Operators& ops, const FemField& u_n,
                   const FemField& u_half, const FemField& u_next, const FlowParams& params) {
    check_field_size(mesh, u_n, "ppe_solve");
    check_field_size(mesh, u_half, "ppe_solve");
    check_field_size(mesh, u_next, "ppe_solve");
    check_params(params, "ppe_solve");

    Eigen::VectorXd rhs = -params.rho / params.tau *
                              (ops.grad_pairing * (u_next.values - u_n.values)) -
                          params.rho * convection_grad_rhs(mesh, u_half.values);

    const std::vector<bool> constrained = boundary_vertex_mask(mesh);
    for (std::size_t i = 0; i < constrained.size(); ++i) {
        if (constrained[i]) {
            rhs[static_cast<Eigen::Index>(i)] = 0.0;
        }
    }
    const Eigen::SparseMatrix<double> a = eliminate_dirichlet(ops.stiffness_scalar, constrained);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("ppe_solve: factorization of the pressure stiffness failed");
    }
    FemField p;
    p.time = u_half.time;
    p.values = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !p.values.allFinite()) {
        throw NumericalError("ppe_solve: pressure solve failed");
    }
    return p;
}

namespace {

/// Assembles the symmetric stabilized Stokes saddle matrix with a lumped-mass
/// mean pin on the pressure:
///   [  A_v   -D    0 ] [w]   [ f_w ]
///   [ -D^T  -c_s St m ] [p] = [ -g_p]
///   [  0     m^T   0 ] [l]   [  0  ]
/// (second row negated to keep the system symmetric). A_v is
/// Dirichlet-eliminated, D has the constrained test rows removed.
Eigen::SparseMatrix<double> assemble_ste_matrix(const TetMesh& mesh, const P1Operators& ops,
                                                double c_s,
                                                const std::vector<bool>& vertex_mask) {
    const Eigen::Index d_u = 3 * mesh.n_vertices();
    const Eigen::Index d_p = mesh.n_vertices();
    const std::vector<bool> dof_mask = vector_dof_mask(vertex_mask);
    const Eigen::SparseMatrix<double> a_v = eliminate_dirichlet(ops.stiffness_vector, dof_mask);
    const Eigen::SparseMatrix<double> d = zero_rows(ops.coupling, dof_mask);

    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(a_v.nonZeros() + 2 * d.nonZeros() +
                                          ops.stabilization_h2.nonZeros()) +
                 2 * static_cast<std::size_t>(d_p));
    for (int outer = 0; outer < a_v.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a_v, outer); it; ++it) {
            trip.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (int outer = 0; outer < d.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(d, outer); it; ++it) {
            trip.emplace_back(it.row(), d_u + it.col(), -it.value());
            trip.emplace_back(d_u + it.col(), it.row(), -it.value());
        }
    }
    for (int outer = 0; outer < ops.stabilization_h2.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(ops.stabilization_h2, outer); it;
             ++it) {
            trip.emplace_back(d_u + it.row(), d_u + it.col(), -c_s * it.value());
        }
    }
    for (Eigen::Index i = 0; i < d_p; ++i) {
        trip.emplace_back(d_u + i, d_u + d_p, ops.lumped_mass[i]);
        trip.emplace_back(d_u + d_p, d_u + i, ops.lumped_mass[i]);
    }
    Eigen::SparseMatrix<double> sys(d_u + d_p + 1, d_u + d_p + 1);
    sys.setFromTriplets(trip.begin(), trip.end());
    sys.makeCompressed();
    return sys;
}

std::pair<FemField, FemField> solve_ste_system(const TetMesh& mesh, const P1Operators& ops,
                                               double c_s, const Eigen::VectorXd& rhs_w_full,
                                               const Eigen::VectorXd& g_p, double time,
                                               const char* name) {
    const Eigen::Index d_u = 3 * mesh.n_vertices();
    const Eigen::Index d_p = mesh.n_vertices();
    const std::vector<bool> vertex_mask = boundary_vertex_mask(mesh);
    const std::vector<bool> dof_mask = vector_dof_mask(vertex_mask);

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d_u + d_p + 1);
    rhs.head(d_u) = rhs_w_full;
    for (std::size_t i = 0; i < dof_mask.size(); ++i) {
        if (dof_mask[i]) {
            rhs[static_cast<Eigen::Index>(i)] = 0.0;
        }
    }
    rhs.segment(d_u, d_p) = -g_p;

    const Eigen::SparseMatrix<double> sys = assemble_ste_matrix(mesh, ops, c_s, vertex_mask);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(sys);
    if (solver.info() != Eigen::Success) {
        throw NumericalError(std::string(name) + ": saddle-system factorization failed");
    }
    const Eigen::VectorXd sol = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !sol.allFinite()) {
        throw NumericalError(std::string(name) + ": saddle-system solve failed");
    }
    FemField w, p;
    w.time = p.time = time;
    w.values = sol.head(d_u);
    p.values = sol.segment(d_u, d_p);
    return {std::move(w), std::move(p)};
}

}  // namespace

std::pair<FemField, FemField> ste_solve(const TetMesh& mesh, const P1Operators& ops,
                                        const FemField& u_n, const FemField& u_half,
                                        const FemField& u_next, const FlowParams& params) {
    check_field_size(mesh, u_n, "ste_solve");
    check_field_size(mesh, u_half, "ste_solve");
    check_field_size(mesh, u_next, "ste_solve");
    check_params(params, "ste_solve");

    const Eigen::VectorXd rhs_w =
        -params.rho / params.tau * (ops.mass_vector * (u_next.values - u_n.values)) -
        params.rho * convection_mass_rhs(mesh, u_half.values) -
        params.mu * (ops.stiffness_vector * u_half.values);
    // Stabilization rhs: the mu*Laplacian(u_half) part is identically zero
    // for P1 velocities, leaving only the convection term.
    const Eigen::VectorXd g_p =
        -params.rho * params.c_s * convection_stab_rhs(mesh, u_half.values);
    return solve_ste_system(mesh, ops, params.c_s, rhs_w, g_p, u_half.time, "ste_solve");
}

void BlockCovariance::set(Eigen::Index i, Eigen::Index j, const Eigen::Matrix3d& block) {
    if (i < 0 || j < 0 || i >= n_ || j >= n_) {
        throw SchemaError("BlockCovariance::set: node index out of range");
    }
    if (i == j && (block - block.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw SchemaError("BlockCovariance::set: diagonal block " + std::to_string(i) +
                          " is not symmetric");
    }
    if (i <= j) {
        blocks_[static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n_) +
                static_cast<std::uint64_t>(j)] = block;
    } else {
        blocks_[static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(n_) +
                static_cast<std::uint64_t>(i)] = block.transpose();
    }
}

bool BlockCovariance::has(Eigen::Index i, Eigen::Index j) const {
    if (i > j) {
        std::swap(i, j);
    }
    return blocks_.count(static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n_) +
                         static_cast<std::uint64_t>(j)) > 0;
}

Eigen::Matrix3d BlockCovariance::get(Eigen::Index i, Eigen::Index j) const {
    const bool swapped = i > j;
    if (swapped) {
        std::swap(i, j);
    }
    const auto it = blocks_.find(static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n_) +
                                 static_cast<std::uint64_t>(j));
    if (it == blocks_.end()) {
        throw SchemaError("BlockCovariance::get: missing block for node pair (" +
                          std::to_string(swapped ? j : i) + ", " + std::to_string(swapped ? i : j) +
                          ")");
    }
    return swapped ? it->second.transpose() : it->second;
}

BlockCovariance zero_block_covariance(const TetMesh& mesh) {
    BlockCovariance cov(mesh.n_vertices());
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        for (int a = 0; a < 4; ++a) {
            for (int b = a; b < 4; ++b) {
                cov.set(mesh.tets(k, a), mesh.tets(k, b), Eigen::Matrix3d::Zero());
            }
        }
    }
    return cov;
}

BlockCovariance block_covariance_from_dense(const TetMesh& mesh, const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != 3 * mesh.n_vertices() || sigma.cols() != 3 * mesh.n_vertices()) {
        throw SchemaError("block_covariance_from_dense: covariance must be 3n_v x 3n_v");
    }
    BlockCovariance cov(mesh.n_vertices());
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        for (int a = 0; a < 4; ++a) {
            for (int b = a; b < 4; ++b) {
                const Eigen::Index va = mesh.tets(k, a);
                const Eigen::Index vb = mesh.tets(k, b);
                Eigen::Matrix3d block = sigma.block<3, 3>(3 * va, 3 * vb);
                if (va == vb) {
                    block = 0.5 * (block + block.transpose());
                }
                cov.set(va, vb, block);
            }
        }
    }
    return cov;
}

BiasResult bias_correction(const TetMesh& mesh, const P1Operators& ops,
                           const BlockCovariance& cov, double rho, BiasMode mode, double c_s) {
    if (cov.n_nodes() != mesh.n_vertices()) {
        throw SchemaError("bias_correction: covariance node count does not match the mesh");
    }
    if (!(rho > 0.0)) {
        throw SchemaError("bias_correction: rho must be positive");
    }
    const Eigen::Index n_v = mesh.n_vertices();

    // Nodal values of the bias field Psi (affine per element):
    //   psi^a = sum_b Sigma_ab^T grad N_b  at local node a.
    // Assembled per element into the two weak-form right-hand sides.
    Eigen::VectorXd rhs_grad = Eigen::VectorXd::Zero(n_v);       // (Psi, grad q)
    Eigen::VectorXd rhs_mass = Eigen::VectorXd::Zero(3 * n_v);   // (Psi, z)
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        const auto& g = mesh.grads[static_cast<std::size_t>(k)];
        const double vol = mesh.volumes[k];
        Eigen::Matrix<double, 4, 3> psi = Eigen::Matrix<double, 4, 3>::Zero();
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                const Eigen::Matrix3d s = cov.get(mesh.tets(k, a), mesh.tets(k, b));
                psi.row(a) += (s.transpose() * g.row(b).transpose()).transpose();
            }
        }
        const Eigen::Vector3d centroid = psi.colwise().mean().transpose();
        for (int d = 0; d < 4; ++d) {
            rhs_grad[mesh.tets(k, d)] += vol * g.row(d).dot(centroid);
            const Eigen::Index vd = mesh.tets(k, d);
            for (int a = 0; a < 4; ++a) {
                const double w = vol * (a == d ? 2.0 : 1.0) / 20.0;
                rhs_mass.segment<3>(3 * vd) += w * psi.row(a).transpose();
            }
        }
    }

    BiasResult out;
    if (mode == BiasMode::Ppe) {
        Eigen::VectorXd rhs = -rho * rhs_grad;
        const std::vector<bool> constrained = boundary_vertex_mask(mesh);
        for (std::size_t i = 0; i < constrained.size(); ++i) {
            if (constrained[i]) {
                rhs[static_cast<Eigen::Index>(i)] = 0.0;
            }
        }
        const Eigen::SparseMatrix<double> a =
            eliminate_dirichlet(ops.stiffness_scalar, constrained);
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
        if (solver.info() != Eigen::Success) {
            throw NumericalError("bias_correction: PPE factorization failed");
        }
        out.pressure.values = solver.solve(rhs);
        if (solver.info() != Eigen::Success || !out.pressure.values.allFinite()) {
            throw NumericalError("bias_correction: PPE solve failed");
        }
    } else {
        auto [w, b] = solve_ste_system(mesh, ops, c_s, rho * rhs_mass,
                                       Eigen::VectorXd::Zero(n_v), 0.0, "bias_correction");
        out.velocity = std::move(w);
        out.pressure = std::move(b);
    }
    return out;
}

double pressure_drop(const TetMesh& mesh, const FemField& p, const std::vector<int>& section_in,
                     const std::vector<int>& section_out) {
    if (p.values.size() != mesh.n_vertices()) {
        throw SchemaError("pressure_drop: expected a scalar nodal field");
    }
    if (section_in.empty() || section_out.empty()) {
        throw SchemaError("pressure_drop: both sections must be nonempty");
    }
    const auto section_mean = [&](const std::vector<int>& faces, const char* which) {
        double area = 0.0;
        double integral = 0.0;
        for (const int f : faces) {
            if (f < 0 || f >= mesh.boundary_faces.rows()) {
                throw SchemaError("pressure_drop: face id " + std::to_string(f) +
                                  " out of range in the " + which + " section");
            }
            const Eigen::Vector3d a = mesh.vertices.row(mesh.boundary_faces(f, 0));
            const Eigen::Vector3d b = mesh.vertices.row(mesh.boundary_faces(f, 1));
            const Eigen::Vector3d c = mesh.vertices.row(mesh.boundary_faces(f, 2));
            const double face_area = 0.5 * (b - a).cross(c - a).norm();
            const double mean_p = (p.values[mesh.boundary_faces(f, 0)] +
                                   p.values[mesh.boundary_faces(f, 1)] +
                                   p.values[mesh.boundary_faces(f, 2)]) /
                                  3.0;
            area += face_area;
            integral += face_area * mean_p;
        }
        if (!(area > 0.0)) {
            throw NumericalError(std::string("pressure_drop: zero total area in the ") + which +
                                 " section");
        }
        return integral / area;
    };
    return section_mean(section_out, "outlet") - section_mean(section_in, "inlet");
}

}  // namespace morphassim
