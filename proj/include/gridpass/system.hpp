#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "gridpass/devices.hpp"
#include "gridpass/netmodel.hpp"
#include "gridpass/powerflow.hpp"

namespace gridpass {

struct StateRange {
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Scratch buffers for allocation-free vector-field evaluation.
struct SystemWorkspace {
    Vector theta, V, P, Q;
    explicit SystemWorkspace(std::size_t n = 0) : theta(n), V(n), P(n), Q(n) {}
};

/// Closed loop x' = f(x, g(h(x))): every device reads its injection from the
/// network evaluated at all device outputs.
class SystemModel {
public:
    [[nodiscard]] const NetworkModel& network() const noexcept { return net_; }
    [[nodiscard]] const std::vector<DeviceModel>& devices() const noexcept { return devices_; }
    [[nodiscard]] const std::vector<StateRange>& layout() const noexcept { return layout_; }
    [[nodiscard]] const Equilibrium& equilibrium() const noexcept { return equilibrium_; }
    [[nodiscard]] const Vector& x_star() const noexcept { return x_star_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return x_star_.size(); }
    [[nodiscard]] std::size_t bus_count() const noexcept { return devices_.size(); }
    [[nodiscard]] const std::vector<std::string>& bus_labels() const noexcept { return bus_labels_; }

    /// Global indices of the theta and V states of bus i.
    [[nodiscard]] std::size_t theta_state(std::size_t bus) const;
    [[nodiscard]] std::size_t voltage_state(std::size_t bus) const;

    /// Vector field against an arbitrary network with the same bus count
    /// (the fault simulator swaps in a shunted copy).
    void rhs_into(const NetworkModel& net, std::span<const double> x, std::span<double> dx,
                  SystemWorkspace& ws) const;
    [[nodiscard]] Vector rhs(std::span<const double> x) const;

    [[nodiscard]] VoltagePhasorVector outputs(std::span<const double> x) const;
    [[nodiscard]] std::vector<std::string> state_labels() const;  // "bus<label>.<state>"

private:
    friend SystemModel assemble(NetworkModel, std::vector<DeviceModel>, Equilibrium, std::vector<std::string>);

    NetworkModel net_;
    std::vector<DeviceModel> devices_;
    std::vector<StateRange> layout_;
    Equilibrium equilibrium_;
    Vector x_star_;
    std::vector<std::string> bus_labels_;
};

/// Builds the closed loop and completes the equilibrium's device states.
/// Throws ConfigError when the device count differs from the bus count or a
/// device was synthesized against a different operating point, and
/// NumericalError when ||f(x*)||_inf > 1e-8.
SystemModel assemble(NetworkModel net, std::vector<DeviceModel> devices, Equilibrium equilibrium,
                     std::vector<std::string> bus_labels = {});

/// Analytic Jacobian: device partials plus df/du * dg/dy * dy/dx.
Matrix jacobian(const SystemModel& sys, std::span<const double> x);

/// Jacobian with each SG integrator state removed through the conserved
/// quantity zeta - delta (its row is identically zero in those
/// coordinates). Its spectrum is the full spectrum minus one zero per SG.
Matrix reduced_jacobian(const SystemModel& sys, const Matrix& full);

enum class Verdict { stable, marginal, unstable };

std::string to_string(Verdict v);

struct StabilityVerdict {
    std::vector<std::complex<double>> eigenvalues;          // full Jacobian
    std::vector<std::complex<double>> reduced_eigenvalues;  // integrator invariants removed
    double max_real_part = 0.0;                             // over reduced_eigenvalues
    Verdict verdict = Verdict::unstable;
    bool stable = false;
    int structural_zero_count = 0;                          // |lambda| < 1e-7 in the full spectrum
};

/// Eigenvalues of the Jacobian at x*; stable when every non-structural mode
/// has real part below -tol_margin, marginal within +/- tol_margin.
StabilityVerdict small_signal(const SystemModel& sys, double tol_margin = 1e-6);

struct LyapunovSample {
    double W = 0.0;
    double W_dot = 0.0;
};

/// W(x) = sum_i S_i(x_i) + S_N(y) + (sigma_min + lambda - eps)/2 |y - y*|^2
/// and its derivative along the closed-loop field.
///
/// With per-bus indices the device storages are taken at sigma_min, not at
/// each sigma_i. OFP(sigma_i) with storage S_i(sigma_i) gives OFP(sigma_min)
/// with S_i(sigma_min) = S_i(sigma_i) + (sigma_i - sigma_min)|y_i - y_i*|^2/2,
/// and that is the form in which the device and network rates cancel term by
/// term, leaving W' = sum_i (S_i' - w_i + sigma_min dy_i.y_i') <= 0.
/// Throws ConfigError unless sigma_i + lambda > eps > 0 for all i.
LyapunovSample lyapunov_W(const SystemModel& sys, std::span<const double> x, std::span<const double> sigma_per_bus,
                          double lambda, double epsilon, EnergyMode mode = EnergyMode::strict);

}  // namespace gridpass
