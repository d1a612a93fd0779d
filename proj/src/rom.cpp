#include <Eigen/SparseCholesky>
#include <cmath>
#include <vector>

#include "morphassim/errors.hpp"
#include "morphassim/fem.hpp"

namespace morphassim {

namespace {

using Triplet = Eigen::Triplet<double>;

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

void check_orthonormal(const Eigen::MatrixXd& basis, const char* name) {
    if (basis.cols() < 1) {
        throw SchemaError(std::string(name) + ": basis needs at least one column");
    }
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    const double defect =
        (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    if (defect > 1e-8) {
        throw SchemaError(std::string(name) + ": basis is not orthonormal (defect " +
                          std::to_string(defect) + ")");
    }
}

void check_field_size(const TetMesh& mesh, const FemField& f, const char* name) {
    if (f.values.size() != 3 * mesh.n_vertices()) {
        throw SchemaError(std::string(name) + ": velocity field length does not match the mesh");
    }
}

}  // namespace

PpeRom rom_project_ppe(const TetMesh& mesh, const P1Operators& ops,
                       const Eigen::MatrixXd& basis_p) {
    if (basis_p.rows() != mesh.n_vertices()) {
        throw SchemaError("rom_project_ppe: basis rows must equal n_vertices");
    }
    check_orthonormal(basis_p, "rom_project_ppe");
    const Eigen::SparseMatrix<double> a =
        eliminate_dirichlet(ops.stiffness_scalar, boundary_vertex_mask(mesh));
    PpeRom rom;
    rom.basis = basis_p;
    rom.reduced_matrix = basis_p.transpose() * (a * basis_p);
    return rom;
}

FemField ppe_rom_solve(const TetMesh& mesh, const P1Operators& ops, const PpeRom& rom,
                       const FemField& u_n, const FemField& u_half, const FemField& u_next,
                       const FlowParams& params) {
    check_field_size(mesh, u_n, "ppe_rom_solve");
    check_field_size(mesh, u_half, "ppe_rom_solve");
    check_field_size(mesh, u_next, "ppe_rom_solve");
    Eigen::VectorXd rhs = -params.rho / params.tau *
                              (ops.grad_pairing * (u_next.values - u_n.values)) -
                          params.rho * convection_grad_rhs(mesh, u_half.values);
    const std::vector<bool> constrained = boundary_vertex_mask(mesh);
    for (std::size_t i = 0; i < constrained.size(); ++i) {
        if (constrained[i]) {
            rhs[static_cast<Eigen::Index>(i)] = 0.0;
        }
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(rom.reduced_matrix);
    if (!lu.isInvertible()) {
        throw NumericalError("ppe_rom_solve: reduced matrix is singular");
    }
    FemField p;
    p.time = u_half.time;
    p.values = rom.basis * lu.solve(rom.basis.transpose() * rhs);
    return p;
}

SteRom rom_project_ste(const TetMesh& mesh, const P1Operators& ops,
                       const Eigen::MatrixXd& basis_u, const Eigen::MatrixXd& basis_p,
                       double c_s, bool enrich) {
    const Eigen::Index d_u = 3 * mesh.n_vertices();
    const Eigen::Index d_p = mesh.n_vertices();
    if (basis_u.rows() != d_u || basis_p.rows() != d_p) {
        throw SchemaError("rom_project_ste: basis row counts must match the mesh DOF layout");
    }
    check_orthonormal(basis_u, "rom_project_ste (velocity)");
    check_orthonormal(basis_p, "rom_project_ste (pressure)");
    if (!(c_s > 0.0)) {
        throw SchemaError("rom_project_ste: c_s must be positive");
    }

    const std::vector<bool> dof_mask = vector_dof_mask(boundary_vertex_mask(mesh));
    const Eigen::SparseMatrix<double> a_v = eliminate_dirichlet(ops.stiffness_vector, dof_mask);
    const Eigen::SparseMatrix<double> d = zero_rows(ops.coupling, dof_mask);

    SteRom rom;
    rom.r_u = basis_u.cols();
    rom.basis_p = basis_p;
    if (enrich) {
        // One supremizer per pressure mode: the Riesz representer of the
        // pressure-gradient pairing in the (eliminated) velocity stiffness
        // inner product. Appending them stabilizes the reduced saddle system.
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a_v);
        if (solver.info() != Eigen::Success) {
            throw NumericalError("rom_project_ste: velocity stiffness factorization failed");
        }
        Eigen::MatrixXd enriched(d_u, basis_u.cols() + basis_p.cols());
        enriched.leftCols(basis_u.cols()) = basis_u;
        for (Eigen::Index j = 0; j < basis_p.cols(); ++j) {
            enriched.col(basis_u.cols() + j) = solver.solve(d * basis_p.col(j));
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(enriched);
        if (qr.rank() < enriched.cols()) {
            throw NumericalError("rom_project_ste: supremizer enrichment lost rank (" +
                                 std::to_string(qr.rank()) + " of " +
                                 std::to_string(enriched.cols()) + " directions survive)");
        }
        rom.basis_u = qr.householderQ() * Eigen::MatrixXd::Identity(d_u, enriched.cols());
    } else {
        rom.basis_u = basis_u;
    }

    const Eigen::Index r_w = rom.basis_u.cols();
    const Eigen::Index r_p = rom.basis_p.cols();
    rom.system = Eigen::MatrixXd::Zero(r_w + r_p + 1, r_w + r_p + 1);
    rom.system.topLeftCorner(r_w, r_w) = rom.basis_u.transpose() * (a_v * rom.basis_u);
    const Eigen::MatrixXd b_r = rom.basis_u.transpose() * (d * rom.basis_p);
    rom.system.block(0, r_w, r_w, r_p) = -b_r;
    rom.system.block(r_w, 0, r_p, r_w) = -b_r.transpose();
    rom.system.block(r_w, r_w, r_p, r_p) =
        -c_s * (rom.basis_p.transpose() * (ops.stabilization_h2 * rom.basis_p));
    const Eigen::VectorXd m_r = rom.basis_p.transpose() * ops.lumped_mass;
    rom.system.block(r_w, r_w + r_p, r_p, 1) = m_r;
    rom.system.block(r_w + r_p, r_w, 1, r_p) = m_r.transpose();
    return rom;
}

std::pair<FemField, FemField> ste_rom_solve(const TetMesh& mesh, const P1Operators& ops,
                                            const SteRom& rom, const FemField& u_n,
                                            const FemField& u_half, const FemField& u_next,
                                            const FlowParams& params) {
    check_field_size(mesh, u_n, "ste_rom_solve");
    check_field_size(mesh, u_half, "ste_rom_solve");
    check_field_size(mesh, u_next, "ste_rom_solve");

    Eigen::VectorXd rhs_w =
        -params.rho / params.tau * (ops.mass_vector * (u_next.values - u_n.values)) -
        params.rho * convection_mass_rhs(mesh, u_half.values) -
        params.mu * (ops.stiffness_vector * u_half.values);
    const std::vector<bool> dof_mask = vector_dof_mask(boundary_vertex_mask(mesh));
    for (std::size_t i = 0; i < dof_mask.size(); ++i) {
        if (dof_mask[i]) {
            rhs_w[static_cast<Eigen::Index>(i)] = 0.0;
        }
    }
    const Eigen::VectorXd g_p =
        -params.rho * params.c_s * convection_stab_rhs(mesh, u_half.values);

    const Eigen::Index r_w = rom.basis_u.cols();
    const Eigen::Index r_p = rom.basis_p.cols();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r_w + r_p + 1);
    rhs.head(r_w) = rom.basis_u.transpose() * rhs_w;
    rhs.segment(r_w, r_p) = rom.basis_p.transpose() * (-g_p);

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(rom.system);
    if (!lu.isInvertible()) {
        throw NumericalError("ste_rom_solve: reduced saddle system is singular");
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    FemField w, p;
    w.time = p.time = u_half.time;
    w.values = rom.basis_u * sol.head(r_w);
    p.values = rom.basis_p * sol.segment(r_w, r_p);
    return {std::move(w), std::move(p)};
}

}  // namespace morphassim
