/// @file windkessel.hpp
/// @brief Three-element (RCR) Windkessel outlet models: calibration of the
///        per-outlet resistances and capacitances from a template flow split,
///        and single-step time integration of the distal pressure state.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace morphassim {

/// One outlet's lumped parameters and distal pressure state.
struct WindkesselParams {
    double r_p = 0.0;  ///< proximal resistance, Pa s / m^3
    double r_d = 0.0;  ///< distal resistance, Pa s / m^3
    double c_d = 0.0;  ///< distal capacitance, m^3 / Pa
    double pi = 0.0;   ///< distal pressure state, Pa
};

/// Template (hatted) reference values plus the patient-specific inlet flow
/// and outlet areas. The reference mean velocities are the template's
/// per-outlet Q_hat_i / A_hat_i.
struct CalibrationInput {
    double q_in_ref = 0.0;       ///< template inlet flow, m^3/s
    double r_s_ref = 0.0;        ///< template systemic resistance, Pa s / m^3
    double q_in = 0.0;           ///< patient inlet flow, m^3/s
    Eigen::VectorXd u_mean_ref;  ///< per-outlet template mean velocities, m/s
    Eigen::VectorXd areas;       ///< per-outlet patient areas, m^2
    double c_tot = 1e-8;         ///< total capacitance, m^3 / Pa
};

/// Convenience for building CalibrationInput::u_mean_ref from template
/// per-outlet flows and areas (element-wise quotient).
Eigen::VectorXd reference_mean_velocities(const Eigen::VectorXd& flows_ref,
                                          const Eigen::VectorXd& areas_ref);

/// Per-outlet flow fractions sigma_i = u_mean_ref_i A_i / sum_j u_mean_ref_j A_j.
/// They sum to 1 by construction.
Eigen::VectorXd flow_split(const CalibrationInput& input);

/// How the per-outlet total resistance derives from the systemic one.
/// AsWritten uses R_i = sigma_i R_S (larger fractions get larger resistance);
/// ParallelConsistent uses R_i = R_S / sigma_i, which keeps the parallel
/// identity 1/R_S = sum_i 1/R_i exact.
enum class ResistanceConvention { AsWritten, ParallelConsistent };

/// Calibrates all outlets:
///   R_S    = (q_in_ref / q_in) r_s_ref,
///   R_i    per the convention,
///   R_p,i  = 0.1 R_i,  R_d,i = 0.9 R_i,
///   C_i    = (A_i / A_tot) c_tot.
/// Distal pressures start at zero. Throws SchemaError on non-positive
/// inputs or empty outlet lists.
std::vector<WindkesselParams> calibrate_windkessel(
    const CalibrationInput& input, ResistanceConvention convention = ResistanceConvention::AsWritten);

/// Euler step for d pi/dt = (Q - pi / R_d) / C.
enum class WindkesselScheme { Implicit, SemiImplicit };

struct WindkesselStep {
    double pi_next = 0.0;   ///< updated distal pressure, Pa
    double pressure = 0.0;  ///< outlet pressure P = R_p Q + pi_next, Pa
};

/// Advances one outlet by dt (s) under flow q (m^3/s):
///   implicit:      pi+ = (C/dt pi + Q) / (C/dt + 1/R_d),
///   semi-implicit: pi+ = pi + dt/C (Q - pi/R_d),
/// and P = R_p Q + pi+. Throws SchemaError when dt <= 0 or the parameters
/// are non-positive.
WindkesselStep windkessel_step(const WindkesselParams& params, double q, double dt,
                               WindkesselScheme scheme = WindkesselScheme::Implicit);

}  // namespace morphassim
