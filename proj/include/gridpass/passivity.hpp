#pragma once

#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "gridpass/devices.hpp"
#include "gridpass/netmodel.hpp"

namespace gridpass {

/// Network passivity index at an equilibrium.
struct PassivityReport {
    double lambda = 0.0;
    Vector hessian_spectrum;            // full Hessian, ascending
    Vector deflated_spectrum;           // after removing col(1_n, 0_n), ascending
    double structural_kernel_residual = 0.0;  // ||H col(1_n, 0_n)||_inf
    bool deflated = false;
};

/// Smallest eigenvalue of the network energy Hessian on the orthogonal
/// complement of the uniform angle shift. The complement basis comes from a
/// Householder reflector, so exactly one direction is removed and any other
/// zero or negative eigenvalue counts toward lambda.
/// Throws NumericalError when ||H col(1_n, 0_n)||_inf >= 1e-8.
PassivityReport network_lambda(const NetworkModel& net, const VoltagePhasorVector& y_star,
                               EnergyMode mode = EnergyMode::strict);

/// Same deflation applied to a caller-supplied Hessian (used to compare
/// analytic and finite-difference Hessians).
PassivityReport lambda_from_hessian(const Matrix& hessian);

/// Per-bus incremental supply rate -(P - P*) theta' - (Q/V - Q*/V*) V'.
Vector supply_rate(const PowerInjectionVector& u, const PowerInjectionVector& u_star, const VoltagePhasorVector& y,
                   const VoltagePhasorVector& y_star, const VoltagePhasorVector& y_dot);

/// Network storage S_N(y) = W~_N(y) - (lambda - eps)/2 |y - y*|^2 with
/// W~_N(y) = W_N(y) - (y - y*)^T grad W_N(y*) - W_N(y*).
double storage_S_N(const NetworkModel& net, const VoltagePhasorVector& y, const VoltagePhasorVector& y_star,
                   double lambda, double epsilon, EnergyMode mode = EnergyMode::strict);

/// d/dt S_N along y_dot, by the chain rule.
double storage_S_N_rate(const NetworkModel& net, const VoltagePhasorVector& y, const VoltagePhasorVector& y_star,
                        const VoltagePhasorVector& y_dot, double lambda, double epsilon,
                        EnergyMode mode = EnergyMode::strict);

/// Smallest sampled radius (in the stacked y coordinates, sup-norm ball,
/// uniform-shift direction projected out) at which S_N <= 0 was observed, or
/// max_radius when no sample failed. Radii scanned geometrically from
/// max_radius / 2^steps up to max_radius.
double empirical_positivity_radius(const NetworkModel& net, const VoltagePhasorVector& y_star, double lambda,
                                   double epsilon, double max_radius, int steps, int samples_per_radius,
                                   std::mt19937_64& rng, EnergyMode mode = EnergyMode::strict);

// --- device dissipation ---------------------------------------------------

struct DeviceSample {
    double t = 0.0;
    Vector x;
    double P = 0.0;
    double Q = 0.0;
    Vector xdot;
};

using DeviceTrajectory = std::vector<DeviceSample>;

/// Input signal for open-loop device runs: returns (P, Q) at time t.
using InputSignal = std::function<std::pair<double, double>(double)>;

/// Integrates one device under a prescribed injection with RK4 and records
/// every `record_every`-th state together with f(x, u).
DeviceTrajectory record_device_trajectory(const DeviceModel& device, const Vector& x0, const InputSignal& input,
                                          double t_end, double step, int record_every = 1);

/// Per-sample residuals of the OFP(sigma) certificate built from the
/// device's storage at index sigma:
///   rate    = S' + (P - P*) theta' + (Q/V - Q*/V*) V' + sigma (y - y*)^T y'
///   storage = -S(x)
/// Both must be <= 0 for the device to be OFP(sigma) with a non-negative
/// storage. Each is affine in sigma.
struct DissipationResidual {
    double rate = 0.0;
    double storage = 0.0;
};

std::vector<DissipationResidual> dissipation_residuals(const DeviceModel& device, const DeviceTrajectory& trajectory,
                                                       double sigma);

struct DissipationResult {
    double max_violation = 0.0;          // max of the two below
    double max_rate_violation = 0.0;
    double max_storage_violation = 0.0;
};

/// Max residual over a trajectory. Throws DomainExit if a sample has V <= 0.
DissipationResult check_dissipation(const DeviceModel& device, const DeviceTrajectory& trajectory, double sigma);

}  // namespace gridpass
