#include "gridpass/devices.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gridpass/errors.hpp"

namespace gridpass {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::string to_string(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::synchronous_generator: return "sg";
        case DeviceKind::conventional_droop: return "cd";
        case DeviceKind::quadratic_droop: return "qd";
    }
    return "unknown";
}

DeviceKind DeviceModel::kind() const noexcept {
    return std::visit(overloaded{
                          [](const SGParams&) { return DeviceKind::synchronous_generator; },
                          [](const ConventionalDroopParams&) { return DeviceKind::conventional_droop; },
                          [](const QuadraticDroopParams&) { return DeviceKind::quadratic_droop; },
                      },
                      params);
}

SGState sg_rhs(const SGParams& p, const SGState& x, double P, double Q) {
    if (!(x.E_q > 0.0)) throw DomainExit("SG internal voltage E_q left the domain", 0.0);
    const double p_g = -p.K_I * x.zeta - p.K_P * x.omega + p.P_g_star;
    const double e_f = -p.K_E * (x.E_q - p.E_q_star) + p.E_f_star;
    SGState d;
    d.delta = x.omega;
    d.zeta = x.omega;
    d.omega = (-p.D * x.omega - P + p_g) / p.M;
    d.E_q = (-x.E_q - p.reactance_gap() * Q / x.E_q + e_f) / p.Td_prime;
    return d;
}

DroopState cd_rhs(const ConventionalDroopParams& p, const DroopState& x, double P, double Q) {
    return {(-(x.theta - p.theta_star) - p.D1 * (P - p.P_star)) / p.tau1,
            (-(x.V - p.V_star) - p.D2 * (Q - p.Q_star)) / p.tau2};
}

DroopState qd_rhs(const QuadraticDroopParams& p, const DroopState& x, double P, double Q) {
    return {(-(x.theta - p.theta_star) - p.D1 * (P - p.P_star)) / p.tau1,
            (-p.D2 * Q - x.V * (x.V - p.u_star_qd)) / p.tau2};
}

namespace {

double positive_gain(double inverse, const char* what) {
    if (!(inverse > 0.0) || !std::isfinite(inverse))
        throw SynthesisError(std::string(what) + " would be non-positive (inverse gain " + std::to_string(inverse) + ")");
    return 1.0 / inverse;
}

}  // namespace

DeviceModel device_with_gains(const DeviceSpec& spec, const BusOperatingPoint& op, double angle_gain,
                              double voltage_gain) {
    if (!(op.V > 0.0)) throw SynthesisError("equilibrium voltage must be positive");
    if (!std::isfinite(angle_gain) || !std::isfinite(voltage_gain)) throw SynthesisError("gains must be finite");
    DeviceModel device;
    device.sigma_target = std::numeric_limits<double>::quiet_NaN();
    device.equilibrium = op;
    switch (spec.kind) {
        case DeviceKind::synchronous_generator: {
            const SGPhysical& ph = spec.sg;
            if (!(ph.M > 0.0) || !(ph.D >= 0.0) || !(ph.Td_prime > 0.0) || !(ph.xd > ph.xd_prime) ||
                !(ph.xd_prime > 0.0) || !(ph.K_P > 0.0))
                throw SynthesisError("SG physical parameters out of range");
            SGParams p;
            p.M = ph.M;
            p.D = ph.D;
            p.Td_prime = ph.Td_prime;
            p.xd = ph.xd;
            p.xd_prime = ph.xd_prime;
            p.K_P = ph.K_P;
            p.K_I = angle_gain;
            p.K_E = voltage_gain;
            // Terminal output is the internal bus: E_q* = V*, delta* = theta*.
            p.E_q_star = op.V;
            p.delta_star = op.theta;
            p.P_g_star = op.P;
            p.E_f_star = p.E_q_star + p.reactance_gap() * op.Q / p.E_q_star;
            device.params = p;
            break;
        }
        case DeviceKind::conventional_droop:
        case DeviceKind::quadratic_droop: {
            if (!(spec.droop.tau1 > 0.0) || !(spec.droop.tau2 > 0.0))
                throw SynthesisError("droop time constants must be positive");
            if (!(angle_gain > 0.0) || !(voltage_gain > 0.0)) throw SynthesisError("droop gains must be positive");
            if (spec.kind == DeviceKind::conventional_droop) {
                ConventionalDroopParams p;
                p.tau1 = spec.droop.tau1;
                p.tau2 = spec.droop.tau2;
                p.theta_star = op.theta;
                p.V_star = op.V;
                p.P_star = op.P;
                p.Q_star = op.Q;
                p.D1 = angle_gain;
                p.D2 = voltage_gain;
                p.k_cd = p.D2 * p.Q_star + p.V_star;
                device.params = p;
            } else {
                QuadraticDroopParams p;
                p.tau1 = spec.droop.tau1;
                p.tau2 = spec.droop.tau2;
                p.theta_star = op.theta;
                p.V_star = op.V;
                p.P_star = op.P;
                p.Q_star = op.Q;
                p.D1 = angle_gain;
                p.D2 = voltage_gain;
                p.u_star_qd = p.V_star + p.D2 * p.Q_star / p.V_star;
                device.params = p;
            }
            break;
        }
    }
    return device;
}

DeviceModel synthesize_from_sigma(const DeviceSpec& spec, double sigma, const BusOperatingPoint& op,
                                  GainMargins margin) {
    if (!(op.V > 0.0)) throw SynthesisError("equilibrium voltage must be positive");
    double angle = 0.0, voltage = 0.0;
    switch (spec.kind) {
        case DeviceKind::synchronous_generator:
            angle = sigma + margin.angle;
            voltage = (spec.sg.xd - spec.sg.xd_prime) * sigma - 1.0 + margin.voltage;
            break;
        case DeviceKind::conventional_droop:
            angle = positive_gain(sigma + margin.angle, "conventional droop D1");
            voltage = positive_gain((op.V * op.V * sigma - op.Q + margin.voltage * op.V) / op.V, "conventional droop D2");
            break;
        case DeviceKind::quadratic_droop:
            angle = positive_gain(sigma + margin.angle, "quadratic droop D1");
            voltage = positive_gain(sigma + margin.voltage, "quadratic droop D2");
            break;
    }
    DeviceModel device = device_with_gains(spec, op, angle, voltage);
    device.sigma_target = sigma;
    return device;
}

std::vector<NamedMargin> proposition_margins(const DeviceModel& device, double sigma) {
    return std::visit(
        overloaded{
            [&](const SGParams& p) {
                return std::vector<NamedMargin>{{"K_I - sigma", p.K_I - sigma},
                                                {"K_P", p.K_P},
                                                {"K_E - ((xd - xd')sigma - 1)", p.K_E - (p.reactance_gap() * sigma - 1.0)}};
            },
            [&](const ConventionalDroopParams& p) {
                return std::vector<NamedMargin>{
                    {"1/D1 - sigma", 1.0 / p.D1 - sigma},
                    {"1/D2 - (V*^2 sigma - Q*)/V*", 1.0 / p.D2 - (p.V_star * p.V_star * sigma - p.Q_star) / p.V_star}};
            },
            [&](const QuadraticDroopParams& p) {
                return std::vector<NamedMargin>{{"1/D1 - sigma", 1.0 / p.D1 - sigma}, {"1/D2 - sigma", 1.0 / p.D2 - sigma}};
            },
        },
        device.params);
}

std::size_t state_size(const DeviceModel& device) {
    return device.kind() == DeviceKind::synchronous_generator ? 4 : 2;
}

std::vector<std::string> state_names(const DeviceModel& device) {
    if (device.kind() == DeviceKind::synchronous_generator) return {"delta", "omega", "Eq", "zeta"};
    return {"theta", "V"};
}

std::size_t theta_index(const DeviceModel&) { return 0; }

std::size_t voltage_index(const DeviceModel& device) {
    return device.kind() == DeviceKind::synchronous_generator ? 2 : 1;
}

Vector equilibrium_state(const DeviceModel& device) {
    return std::visit(overloaded{
                          [](const SGParams& p) { return Vector{p.delta_star, 0.0, p.E_q_star, 0.0}; },
                          [](const ConventionalDroopParams& p) { return Vector{p.theta_star, p.V_star}; },
                          [](const QuadraticDroopParams& p) { return Vector{p.theta_star, p.V_star}; },
                      },
                      device.params);
}

void rhs_into(const DeviceModel& device, std::span<const double> x, double P, double Q, std::span<double> dx) {
    std::visit(overloaded{
                   [&](const SGParams& p) {
                       const SGState d = sg_rhs(p, {x[0], x[1], x[2], x[3]}, P, Q);
                       dx[0] = d.delta;
                       dx[1] = d.omega;
                       dx[2] = d.E_q;
                       dx[3] = d.zeta;
                   },
                   [&](const ConventionalDroopParams& p) {
                       const DroopState d = cd_rhs(p, {x[0], x[1]}, P, Q);
                       dx[0] = d.theta;
                       dx[1] = d.V;
                   },
                   [&](const QuadraticDroopParams& p) {
                       const DroopState d = qd_rhs(p, {x[0], x[1]}, P, Q);
                       dx[0] = d.theta;
                       dx[1] = d.V;
                   },
               },
               device.params);
}

Vector rhs(const DeviceModel& device, std::span<const double> x, double P, double Q) {
    Vector dx(state_size(device));
    rhs_into(device, x, P, Q, dx);
    return dx;
}

DeviceJacobian rhs_jacobian(const DeviceModel& device, std::span<const double> x, double /*P*/, double Q) {
    const std::size_t k = state_size(device);
    DeviceJacobian j{Matrix(k, k), Matrix(k, 2)};
    std::visit(overloaded{
                   [&](const SGParams& p) {
                       const double e = x[2];
                       j.dx(0, 1) = 1.0;
                       j.dx(1, 1) = -(p.D + p.K_P) / p.M;
                       j.dx(1, 3) = -p.K_I / p.M;
                       j.dx(2, 2) = (-1.0 + p.reactance_gap() * Q / (e * e) - p.K_E) / p.Td_prime;
                       j.dx(3, 1) = 1.0;
                       j.du(1, 0) = -1.0 / p.M;
                       j.du(2, 1) = -p.reactance_gap() / (e * p.Td_prime);
                   },
                   [&](const ConventionalDroopParams& p) {
                       j.dx(0, 0) = -1.0 / p.tau1;
                       j.dx(1, 1) = -1.0 / p.tau2;
                       j.du(0, 0) = -p.D1 / p.tau1;
                       j.du(1, 1) = -p.D2 / p.tau2;
                   },
                   [&](const QuadraticDroopParams& p) {
                       j.dx(0, 0) = -1.0 / p.tau1;
                       j.dx(1, 1) = (-2.0 * x[1] + p.u_star_qd) / p.tau2;
                       j.du(0, 0) = -p.D1 / p.tau1;
                       j.du(1, 1) = -p.D2 / p.tau2;
                   },
               },
               device.params);
    return j;
}

namespace {

// SG storage: the integral gain acts on zeta while sigma acts on the output
// delta. Along trajectories zeta - (delta - delta*) is conserved and is zero
// for every state reachable from the equilibrium, where this equals
//   M w^2/2 + (K_I - sigma)(delta - delta*)^2/2 + ((K_E+1)/(xd-xd') - sigma)(E - E*)^2/2.
// Keeping the split makes S' - w + sigma dy.y' = -(D+K_P) w^2 - Td' E'^2/(xd-xd')
// hold at every state, on or off that set.
double sg_storage(const SGParams& p, std::span<const double> x, double sigma) {
    const double dd = x[0] - p.delta_star;
    const double de = x[2] - p.E_q_star;
    const double ce = (p.K_E + 1.0) / p.reactance_gap() - sigma;
    return 0.5 * p.M * x[1] * x[1] + 0.5 * p.K_I * x[3] * x[3] - 0.5 * sigma * dd * dd + 0.5 * ce * de * de;
}

// The k_cd / D2 log barrier is shifted so the storage vanishes at V*.
double cd_storage(const ConventionalDroopParams& p, std::span<const double> x, double sigma) {
    if (!(x[1] > 0.0)) throw DomainExit("conventional droop storage needs V > 0", 0.0);
    const double dt = x[0] - p.theta_star;
    const double dv = x[1] - p.V_star;
    const double log_part = (p.k_cd / p.D2) * ((x[1] / p.V_star - std::log(x[1])) - (1.0 - std::log(p.V_star)));
    return 0.5 * (1.0 / p.D1 - sigma) * dt * dt + log_part - 0.5 * sigma * dv * dv;
}

double qd_storage(const QuadraticDroopParams& p, std::span<const double> x, double sigma) {
    const double dt = x[0] - p.theta_star;
    const double dv = x[1] - p.V_star;
    return 0.5 * (1.0 / p.D1 - sigma) * dt * dt + 0.5 * (1.0 / p.D2 - sigma) * dv * dv;
}

}  // namespace

Vector storage_gradient(const DeviceModel& device, std::span<const double> x, double sigma) {
    return std::visit(
        overloaded{
            [&](const SGParams& p) {
                const double ce = (p.K_E + 1.0) / p.reactance_gap() - sigma;
                return Vector{-sigma * (x[0] - p.delta_star), p.M * x[1], ce * (x[2] - p.E_q_star), p.K_I * x[3]};
            },
            [&](const ConventionalDroopParams& p) {
                if (!(x[1] > 0.0)) throw DomainExit("conventional droop storage needs V > 0", 0.0);
                return Vector{(1.0 / p.D1 - sigma) * (x[0] - p.theta_star),
                              (p.k_cd / p.D2) * (1.0 / p.V_star - 1.0 / x[1]) - sigma * (x[1] - p.V_star)};
            },
            [&](const QuadraticDroopParams& p) {
                return Vector{(1.0 / p.D1 - sigma) * (x[0] - p.theta_star), (1.0 / p.D2 - sigma) * (x[1] - p.V_star)};
            },
        },
        device.params);
}

StorageSample storage_value_unchecked(const DeviceModel& device, std::span<const double> x,
                                      std::span<const double> xdot, double sigma) {
    StorageSample out;
    out.value = std::visit(overloaded{
                               [&](const SGParams& p) { return sg_storage(p, x, sigma); },
                               [&](const ConventionalDroopParams& p) { return cd_storage(p, x, sigma); },
                               [&](const QuadraticDroopParams& p) { return qd_storage(p, x, sigma); },
                           },
                           device.params);
    if (!xdot.empty()) out.rate = dot(storage_gradient(device, x, sigma), xdot);
    return out;
}

StorageSample storage_value(const DeviceModel& device, std::span<const double> x, std::span<const double> xdot,
                            double sigma) {
    for (const auto& m : proposition_margins(device, sigma)) {
        if (!(m.value > 0.0))
            throw ConfigError("storage function not positive definite: " + m.name + " = " + std::to_string(m.value));
    }
    return storage_value_unchecked(device, x, xdot, sigma);
}

}  // namespace gridpass
