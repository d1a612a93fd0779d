#include <cmath>
#include <sstream>

#include "morphassim/assimilation.hpp"
#include "morphassim/errors.hpp"

namespace morphassim {

namespace {

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& a, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(std::string("pbdw_solve: ") + what +
                             " is not positive definite");
    }
    return llt;
}

template <typename Lu>
void check_invertible(const Lu& lu, const char* what) {
    if (!lu.isInvertible()) {
        std::ostringstream msg;
        msg << "pbdw_solve: " << what << " is singular (rcond " << lu.rcond() << ")";
        throw NumericalError(msg.str());
    }
}

}  // namespace

PbdwSolution pbdw_solve(const ObservationSystem& obs, const Eigen::MatrixXd& s,
                        const Eigen::VectorXd& y, const PbdwOptions& options) {
    const Eigen::Index m = obs.m();
    const Eigen::Index r = obs.r();
    if (m == 0 || r == 0) {
        throw SchemaError("pbdw_solve: empty observation system");
    }
    if (s.rows() != m || s.cols() != m) {
        throw SchemaError("pbdw_solve: noise covariance must be m x m");
    }
    if (y.size() != m) {
        throw SchemaError("pbdw_solve: data vector must have length m");
    }

    const Eigen::LLT<Eigen::MatrixXd> s_llt = checked_llt(s, "the noise covariance");
    const Eigen::LLT<Eigen::MatrixXd> w_llt = checked_llt(obs.w, "W = K + I");

    // Stage 1: z = (L^T S^-1 W^-1 L)^-1 L^T S^-1 W^-1 y. S^-1 W^-1 is not
    // symmetric, so the normal matrix is formed literally.
    const Eigen::MatrixXd n_z = obs.l.transpose() * s_llt.solve(w_llt.solve(obs.l));
    const Eigen::FullPivLU<Eigen::MatrixXd> lu_z(n_z);
    check_invertible(lu_z, "the reduced normal matrix L^T S^-1 W^-1 L");

    PbdwSolution out;
    out.z = lu_z.solve(obs.l.transpose() * s_llt.solve(w_llt.solve(y)));

    // Stage 2: eta = (K S^-1 K + K S^-1)^-1 K S^-1 (y - L z). With K and S
    // symmetric, K S^-1 = (S^-1 K)^T.
    const Eigen::MatrixXd sinv_k = s_llt.solve(obs.k);
    const Eigen::MatrixXd k_sinv = sinv_k.transpose();
    const Eigen::MatrixXd n_eta = obs.k * sinv_k + k_sinv;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu_eta(n_eta);
    check_invertible(lu_eta, "the correction normal matrix K S^-1 K + K S^-1");

    const Eigen::VectorXd y_err = y - obs.l * out.z;
    out.eta = lu_eta.solve(k_sinv * y_err);
    out.u_hat = obs.phi * out.z + obs.z * out.eta;

    if (options.with_covariance) {
        // L^T S^-1 W^-1 = (W^-1 S^-1 L)^T because S and W are symmetric.
        const Eigen::MatrixXd wsl = w_llt.solve(s_llt.solve(obs.l));
        out.h_z = lu_z.solve(wsl.transpose());
        out.h_eta = lu_eta.solve(k_sinv);
        const Eigen::MatrixXd z_h_eta = obs.z * out.h_eta;
        out.h_u = obs.phi * out.h_z + z_h_eta - z_h_eta * (obs.l * out.h_z);
        out.noise_trace = ((out.h_u * s).array() * out.h_u.array()).sum();
    }
    return out;
}

PbdwCovariance pbdw_state_covariance(const ObservationSystem& obs, const Eigen::MatrixXd& s,
                                     const PbdwSolution& solution) {
    if (solution.h_u.size() == 0) {
        throw SchemaError(
            "pbdw_state_covariance: solution carries no factors; solve with with_covariance");
    }
    if (obs.dim() > 10000) {
        throw SchemaError(
            "pbdw_state_covariance: dense posterior covariance limited to 10^4 unknowns");
    }
    if (solution.h_u.rows() != obs.dim() || solution.h_u.cols() != obs.m() ||
        s.rows() != obs.m() || s.cols() != obs.m()) {
        throw SchemaError("pbdw_state_covariance: factor dimensions do not match");
    }
    PbdwCovariance out;
    out.sigma_u = solution.h_u * s * solution.h_u.transpose();
    out.noise_trace = out.sigma_u.trace();
    return out;
}

}  // namespace morphassim
