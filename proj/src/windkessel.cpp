#include "morphassim/windkessel.hpp"

#include "morphassim/errors.hpp"

namespace morphassim {

Eigen::VectorXd reference_mean_velocities(const Eigen::VectorXd& flows_ref,
                                          const Eigen::VectorXd& areas_ref) {
    if (flows_ref.size() != areas_ref.size() || flows_ref.size() == 0) {
        throw SchemaError("reference_mean_velocities: flow and area lists must match");
    }
    if ((areas_ref.array() <= 0.0).any()) {
        throw SchemaError("reference_mean_velocities: areas must be positive");
    }
    return flows_ref.array() / areas_ref.array();
}

Eigen::VectorXd flow_split(const CalibrationInput& input) {
    const Eigen::Index n = input.areas.size();
    if (n == 0 || input.u_mean_ref.size() != n) {
        throw SchemaError("flow_split: need matching non-empty outlet lists");
    }
    if ((input.areas.array() <= 0.0).any() || (input.u_mean_ref.array() <= 0.0).any()) {
        throw SchemaError("flow_split: outlet areas and mean velocities must be positive");
    }
    const Eigen::VectorXd weighted = input.u_mean_ref.array() * input.areas.array();
    return weighted / weighted.sum();
}

std::vector<WindkesselParams> calibrate_windkessel(const CalibrationInput& input,
                                                   ResistanceConvention convention) {
    if (!(input.q_in_ref > 0.0) || !(input.q_in > 0.0) || !(input.r_s_ref > 0.0) ||
        !(input.c_tot > 0.0)) {
        throw SchemaError("calibrate_windkessel: flows, resistance and capacitance "
                          "must be positive");
    }
    const Eigen::VectorXd sigma = flow_split(input);
    const double r_s = (input.q_in_ref / input.q_in) * input.r_s_ref;
    const double a_tot = input.areas.sum();

    std::vector<WindkesselParams> out(static_cast<std::size_t>(sigma.size()));
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        const double r_i = convention == ResistanceConvention::AsWritten
                               ? sigma[i] * r_s
                               : r_s / sigma[i];
        WindkesselParams& p = out[static_cast<std::size_t>(i)];
        p.r_p = 0.1 * r_i;
        p.r_d = 0.9 * r_i;
        p.c_d = (input.areas[i] / a_tot) * input.c_tot;
        p.pi = 0.0;
    }
    return out;
}

WindkesselStep windkessel_step(const WindkesselParams& params, double q, double dt,
                               WindkesselScheme scheme) {
    if (!(dt > 0.0)) {
        throw SchemaError("windkessel_step: dt must be positive");
    }
    if (!(params.r_p > 0.0) || !(params.r_d > 0.0) || !(params.c_d > 0.0)) {
        throw SchemaError("windkessel_step: parameters must be positive");
    }
    WindkesselStep step;
    if (scheme == WindkesselScheme::Implicit) {
        const double c_dt = params.c_d / dt;
        step.pi_next = (c_dt * params.pi + q) / (c_dt + 1.0 / params.r_d);
    } else {
        step.pi_next = params.pi + dt / params.c_d * (q - params.pi / params.r_d);
    }
    step.pressure = params.r_p * q + step.pi_next;
    return step;
}

}  // namespace morphassim
