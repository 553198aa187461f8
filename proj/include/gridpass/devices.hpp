#pragma once

// Bus dynamics: flux-decay synchronous generator with PI frequency control
// and proportional excitation feedback, and inverters under conventional or
// quadratic droop. Every device maps injected (P, Q) to its terminal
// (theta, V) and carries the storage function that certifies its
// output-feedback passivity index.

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gridpass/linalg.hpp"

namespace gridpass {

enum class DeviceKind { synchronous_generator, conventional_droop, quadratic_droop };

std::string to_string(DeviceKind kind);

/// Physical SG data as read from a case file. K_P is the frequency
/// proportional gain; only K_P > 0 is required, 0.1 is the default.
struct SGPhysical {
    double M = 0.0;
    double D = 0.0;
    double Td_prime = 0.0;
    double xd = 0.0;
    double xd_prime = 0.0;
    double K_P = 0.1;
};

struct DroopPhysical {
    double tau1 = 0.0;
    double tau2 = 0.0;
};

/// What a case file says about the device at one bus.
struct DeviceSpec {
    DeviceKind kind = DeviceKind::quadratic_droop;
    SGPhysical sg;
    DroopPhysical droop;
};

/// Steady bus quantities the device is synthesized against.
struct BusOperatingPoint {
    double theta = 0.0;
    double V = 1.0;
    double P = 0.0;
    double Q = 0.0;
};

struct SGParams {
    double M = 0.0, D = 0.0, Td_prime = 0.0, xd = 0.0, xd_prime = 0.0;
    double K_I = 0.0, K_P = 0.1, K_E = 0.0;
    double P_g_star = 0.0;
    double E_f_star = 0.0;
    double E_q_star = 1.0;
    double delta_star = 0.0;

    [[nodiscard]] double reactance_gap() const noexcept { return xd - xd_prime; }
};

struct ConventionalDroopParams {
    double tau1 = 0.0, tau2 = 0.0, D1 = 0.0, D2 = 0.0;
    double theta_star = 0.0, V_star = 1.0, P_star = 0.0, Q_star = 0.0;
    double k_cd = 0.0;  // storage constant D2 * Q* + V*
};

struct QuadraticDroopParams {
    double tau1 = 0.0, tau2 = 0.0, D1 = 0.0, D2 = 0.0;
    double theta_star = 0.0, V_star = 1.0, P_star = 0.0, Q_star = 0.0;
    double u_star_qd = 0.0;  // solves 0 = -D2 Q* - V* (V* - u*)
};

using DeviceParams = std::variant<SGParams, ConventionalDroopParams, QuadraticDroopParams>;

struct DeviceModel {
    DeviceParams params;
    double sigma_target = 0.0;
    BusOperatingPoint equilibrium;

    [[nodiscard]] DeviceKind kind() const noexcept;
};

// SG state (delta, omega, E_q, zeta); zeta integrates omega for the PI loop.
struct SGState {
    double delta = 0.0;
    double omega = 0.0;
    double E_q = 1.0;
    double zeta = 0.0;
};

struct DroopState {
    double theta = 0.0;
    double V = 1.0;
};

/// Flux-decay SG under P_g = -K_I zeta - K_P omega + P_g*,
/// E_f = -K_E (E_q - E_q*) + E_f*. Throws DomainExit for E_q <= 0.
SGState sg_rhs(const SGParams& p, const SGState& x, double P, double Q);

/// tau1 theta' = -(theta - theta*) - D1 (P - P*); tau2 V' = -(V - V*) - D2 (Q - Q*).
DroopState cd_rhs(const ConventionalDroopParams& p, const DroopState& x, double P, double Q);

/// tau1 theta' = -(theta - theta*) - D1 (P - P*); tau2 V' = -D2 Q - V (V - u*).
DroopState qd_rhs(const QuadraticDroopParams& p, const DroopState& x, double P, double Q);

/// Per-channel synthesis margins: `angle` adds to K_I (SG) or 1/D1 (droop),
/// `voltage` adds to K_E (SG) or the 1/D2 bound (droop).
struct GainMargins {
    double angle = 0.0;
    double voltage = 0.0;

    static GainMargins uniform(double m) { return {m, m}; }
};

/// Picks the gains that put the device exactly `margin` above its
/// passivity-index bound for `sigma`, and back-computes the steady inputs so
/// the device rests at `op`. Throws SynthesisError for non-positive droop
/// gains or V* <= 0.
DeviceModel synthesize_from_sigma(const DeviceSpec& spec, double sigma, const BusOperatingPoint& op,
                                  GainMargins margin = {});

/// Device with caller-chosen gains: `angle_gain` is K_I (SG) or D1 (droop),
/// `voltage_gain` is K_E (SG) or D2 (droop). Steady inputs are
/// back-computed from `op`; sigma_target is NaN.
DeviceModel device_with_gains(const DeviceSpec& spec, const BusOperatingPoint& op, double angle_gain,
                              double voltage_gain);

struct NamedMargin {
    std::string name;
    double value = 0.0;
};

/// Slack in each proposition inequality at index sigma (positive = satisfied).
std::vector<NamedMargin> proposition_margins(const DeviceModel& device, double sigma);

// Generic state access used by the system assembler.
std::size_t state_size(const DeviceModel& device);
std::vector<std::string> state_names(const DeviceModel& device);
std::size_t theta_index(const DeviceModel& device);
std::size_t voltage_index(const DeviceModel& device);
Vector equilibrium_state(const DeviceModel& device);

/// Writes f(x, u) into dx (sized state_size).
void rhs_into(const DeviceModel& device, std::span<const double> x, double P, double Q, std::span<double> dx);
Vector rhs(const DeviceModel& device, std::span<const double> x, double P, double Q);

struct DeviceJacobian {
    Matrix dx;  // df/dx, k x k
    Matrix du;  // df/d(P, Q), k x 2
};
DeviceJacobian rhs_jacobian(const DeviceModel& device, std::span<const double> x, double P, double Q);

struct StorageSample {
    double value = 0.0;
    double rate = 0.0;  // grad S . xdot
};

/// Storage function at index sigma, zero at the device equilibrium, and its
/// derivative along xdot. Throws ConfigError when the gains sit at or below
/// the proposition bound for sigma (storage would not be positive definite).
StorageSample storage_value(const DeviceModel& device, std::span<const double> x, std::span<const double> xdot,
                            double sigma);

/// Same formula without the positive-definiteness guard.
StorageSample storage_value_unchecked(const DeviceModel& device, std::span<const double> x,
                                      std::span<const double> xdot, double sigma);

Vector storage_gradient(const DeviceModel& device, std::span<const double> x, double sigma);

}  // namespace gridpass
