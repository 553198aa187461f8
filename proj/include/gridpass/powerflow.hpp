#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "gridpass/netmodel.hpp"

namespace gridpass {

/// Reference bus: angle and magnitude fixed.
struct SlackBus {
    double theta = 0.0;
    double V = 1.0;
};
/// Voltage-controlled bus: active power and magnitude fixed.
struct PVBus {
    double P = 0.0;
    double V = 1.0;
};
/// Load bus: active and reactive power fixed.
struct PQBus {
    double P = 0.0;
    double Q = 0.0;
};

using BusRole = std::variant<SlackBus, PVBus, PQBus>;

/// Input-state-output triplet of a closed-loop equilibrium. The power-flow
/// solver fills y_star and u_star; system assembly fills device_states_star.
struct Equilibrium {
    VoltagePhasorVector y_star;
    PowerInjectionVector u_star;
    std::vector<Vector> device_states_star;
};

struct PowerFlowOptions {
    double tol = 1e-10;
    int max_iter = 50;
};

struct PowerFlowSolution {
    Equilibrium equilibrium;
    int iterations = 0;
    double mismatch = 0.0;  // ||mismatch||_inf at exit
};

/// Newton-Raphson in polar form. Unknowns are theta at non-slack buses and V
/// at PQ buses; residuals are P at non-slack buses and Q at PQ buses.
/// Starts from `start` when given (continuation), otherwise from the flat
/// profile with slack/PV magnitudes applied.
/// Throws ConfigError for inconsistent roles, NoConvergence after max_iter,
/// SingularJacobian with the failing iteration index.
PowerFlowSolution solve_power_flow(const NetworkModel& net, const std::vector<BusRole>& roles,
                                   const PowerFlowOptions& options = {},
                                   const std::optional<VoltagePhasorVector>& start = std::nullopt);

/// Multiplies every P and Q setpoint by s (> 0); voltage and angle setpoints stay.
std::vector<BusRole> scale_load(const std::vector<BusRole>& roles, double s);

}  // namespace gridpass
