#include <cmath>
#include <vector>

#include "morphassim/errors.hpp"
#include "morphassim/fem.hpp"

namespace morphassim {

namespace {

using Triplet = Eigen::Triplet<double>;

/// Per-element 3x3 velocity gradient tensor C(k, a) = du_k/dx_a.
Eigen::Matrix3d velocity_gradient(const TetMesh& mesh, const Eigen::VectorXd& u,
                                  Eigen::Index tet) {
    Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
    const auto& g = mesh.grads[static_cast<std::size_t>(tet)];
    for (int j = 0; j < 4; ++j) {
        const Eigen::Index v = mesh.tets(tet, j);
        c += u.segment<3>(3 * v) * g.row(j);
    }
    return c;
}

void check_vector_field(const TetMesh& mesh, const Eigen::VectorXd& u, const char* what) {
    if (u.size() != 3 * mesh.n_vertices()) {
        throw SchemaError(std::string(what) + ": expected a 3-vector nodal field of length " +
                          std::to_string(3 * mesh.n_vertices()) + ", got " +
                          std::to_string(u.size()));
    }
    if (!u.allFinite()) {
        throw SchemaError(std::string(what) + ": field contains non-finite values");
    }
}

}  // namespace

P1Operators assemble_p1(const TetMesh& mesh) {
    const Eigen::Index n_v = mesh.n_vertices();
    const Eigen::Index n_t = mesh.n_tets();
    std::vector<Triplet> t_as, t_ms, t_av, t_mv, t_d, t_g, t_st;
    t_as.reserve(static_cast<std::size_t>(16 * n_t));
    t_ms.reserve(static_cast<std::size_t>(16 * n_t));
    t_av.reserve(static_cast<std::size_t>(48 * n_t));
    t_mv.reserve(static_cast<std::size_t>(48 * n_t));
    t_d.reserve(static_cast<std::size_t>(192 * n_t));
    t_g.reserve(static_cast<std::size_t>(192 * n_t));
    t_st.reserve(static_cast<std::size_t>(16 * n_t));

    P1Operators ops;
    ops.lumped_mass = Eigen::VectorXd::Zero(n_v);

    for (Eigen::Index k = 0; k < n_t; ++k) {
        const double vol = mesh.volumes[k];
        const double h2 = mesh.diameters[k] * mesh.diameters[k];
        const auto& g = mesh.grads[static_cast<std::size_t>(k)];
        for (int a = 0; a < 4; ++a) {
            const Eigen::Index va = mesh.tets(k, a);
            ops.lumped_mass[va] += vol / 4.0;
            for (int b = 0; b < 4; ++b) {
                const Eigen::Index vb = mesh.tets(k, b);
                const double stiff = vol * g.row(a).dot(g.row(b));
                const double mass = vol * (a == b ? 2.0 : 1.0) / 20.0;
                t_as.emplace_back(va, vb, stiff);
                t_ms.emplace_back(va, vb, mass);
                t_st.emplace_back(va, vb, h2 * stiff);
                for (int c = 0; c < 3; ++c) {
                    t_av.emplace_back(3 * va + c, 3 * vb + c, stiff);
                    t_mv.emplace_back(3 * va + c, 3 * vb + c, mass);
                }
                // (N_b, dN_a/dx_c) = vol/4 * g(a, c): the N_b integral is
                // vol/4 at every node of the element.
                for (int c = 0; c < 3; ++c) {
                    t_d.emplace_back(3 * va + c, vb, vol / 4.0 * g(a, c));
                    t_g.emplace_back(va, 3 * vb + c, vol / 4.0 * g(a, c));
                }
            }
        }
    }

    const auto build = [](Eigen::Index rows, Eigen::Index cols, std::vector<Triplet>& trip) {
        Eigen::SparseMatrix<double> m(rows, cols);
        m.setFromTriplets(trip.begin(), trip.end());
        m.makeCompressed();
        return m;
    };
    ops.stiffness_scalar = build(n_v, n_v, t_as);
    ops.mass_scalar = build(n_v, n_v, t_ms);
    ops.stiffness_vector = build(3 * n_v, 3 * n_v, t_av);
    ops.mass_vector = build(3 * n_v, 3 * n_v, t_mv);
    ops.coupling = build(3 * n_v, n_v, t_d);
    ops.grad_pairing = build(n_v, 3 * n_v, t_g);
    ops.stabilization_h2 = build(n_v, n_v, t_st);
    return ops;
}

Eigen::VectorXd convection_grad_rhs(const TetMesh& mesh, const Eigen::VectorXd& u) {
    check_vector_field(mesh, u, "convection_grad_rhs");
    Eigen::VectorXd r = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        const Eigen::Matrix3d c = velocity_gradient(mesh, u, k);
        const auto& g = mesh.grads[static_cast<std::size_t>(k)];
        // (u . grad u)(x) is affine on the element; its centroid value times
        // the volume integrates it exactly against constant gradients.
        Eigen::Vector3d centroid_conv = Eigen::Vector3d::Zero();
        for (int j = 0; j < 4; ++j) {
            centroid_conv += c * u.segment<3>(3 * mesh.tets(k, j));
        }
        centroid_conv /= 4.0;
        for (int b = 0; b < 4; ++b) {
            r[mesh.tets(k, b)] += mesh.volumes[k] * g.row(b).dot(centroid_conv);
        }
    }
    return r;
}

Eigen::VectorXd convection_mass_rhs(const TetMesh& mesh, const Eigen::VectorXd& u) {
    check_vector_field(mesh, u, "convection_mass_rhs");
    Eigen::VectorXd r = Eigen::VectorXd::Zero(3 * mesh.n_vertices());
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        const Eigen::Matrix3d c = velocity_gradient(mesh, u, k);
        const double vol = mesh.volumes[k];
        // Nodal values of the affine integrand; pairing two P1 functions
        // integrates through the exact (1 + delta)/20 element mass weights.
        Eigen::Matrix<double, 4, 3> f;
        for (int j = 0; j < 4; ++j) {
            f.row(j) = (c * u.segment<3>(3 * mesh.tets(k, j))).transpose();
        }
        for (int j = 0; j < 4; ++j) {
            const Eigen::Index vj = mesh.tets(k, j);
            for (int l = 0; l < 4; ++l) {
                const double w = vol * (j == l ? 2.0 : 1.0) / 20.0;
                r.segment<3>(3 * vj) += w * f.row(l).transpose();
            }
        }
    }
    return r;
}

Eigen::VectorXd convection_stab_rhs(const TetMesh& mesh, const Eigen::VectorXd& u) {
    check_vector_field(mesh, u, "convection_stab_rhs");
    Eigen::VectorXd r = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (Eigen::Index k = 0; k < mesh.n_tets(); ++k) {
        const Eigen::Matrix3d c = velocity_gradient(mesh, u, k);
        const auto& g = mesh.grads[static_cast<std::size_t>(k)];
        const double h2 = mesh.diameters[k] * mesh.diameters[k];
        Eigen::Vector3d centroid_conv = Eigen::Vector3d::Zero();
        for (int j = 0; j < 4; ++j) {
            centroid_conv += c * u.segment<3>(3 * mesh.tets(k, j));
        }
        centroid_conv /= 4.0;
        for (int b = 0; b < 4; ++b) {
            r[mesh.tets(k, b)] += h2 * mesh.volumes[k] * g.row(b).dot(centroid_conv);
        }
    }
    return r;
}

FemField interpolate_scalar(const TetMesh& mesh,
                            const std::function<double(const Eigen::Vector3d&)>& f, double time) {
    FemField out;
    out.time = time;
    out.values.resize(mesh.n_vertices());
    for (Eigen::Index i = 0; i < mesh.n_vertices(); ++i) {
        out.values[i] = f(mesh.vertices.row(i).transpose());
    }
    return out;
}

FemField interpolate_vector(const TetMesh& mesh,
                            const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& f,
                            double time) {
    FemField out;
    out.time = time;
    out.values.resize(3 * mesh.n_vertices());
    for (Eigen::Index i = 0; i < mesh.n_vertices(); ++i) {
        out.values.segment<3>(3 * i) = f(mesh.vertices.row(i).transpose());
    }
    return out;
}

double l2_norm_scalar(const P1Operators& ops, const Eigen::VectorXd& p) {
    if (p.size() != ops.mass_scalar.rows()) {
        throw SchemaError("l2_norm_scalar: field length does not match the operators");
    }
    return std::sqrt(std::max(0.0, p.dot(ops.mass_scalar * p)));
}

}  // namespace morphassim
