#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gridpass/linalg.hpp"

namespace gridpass {

/// Series branch between two buses (0-based indices), per-unit impedance.
struct LineParams {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
};

/// Bus voltage phasors. Stacked as y = (theta_1..theta_n, V_1..V_n).
struct VoltagePhasorVector {
    Vector theta;
    Vector V;

    [[nodiscard]] std::size_t size() const noexcept { return theta.size(); }
    [[nodiscard]] Vector stacked() const;
    static VoltagePhasorVector from_stacked(std::span<const double> y);
    static VoltagePhasorVector flat(std::size_t n) { return {Vector(n, 0.0), Vector(n, 1.0)}; }
};

/// Bus power injections. Stacked as u = (P_1..P_n, Q_1..Q_n).
struct PowerInjectionVector {
    Vector P;
    Vector Q;

    [[nodiscard]] std::size_t size() const noexcept { return P.size(); }
    [[nodiscard]] Vector stacked() const;
};

/// Selects which part of the admittance enters the network energy.
/// `strict` refuses lossy networks; `susceptance_only` drops G explicitly.
enum class EnergyMode { strict, susceptance_only };

/// Immutable transmission network with its bus admittance matrix Y = G + jB.
class NetworkModel {
public:
    /// Assembles G and B from the series branches. Throws ConfigError for
    /// n < 2, bad indices, self loops, duplicates, x <= 0, r < 0 or a
    /// disconnected graph.
    static NetworkModel build(std::vector<LineParams> lines, std::size_t n);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] const std::vector<LineParams>& lines() const noexcept { return lines_; }
    [[nodiscard]] const Matrix& G() const noexcept { return g_; }
    [[nodiscard]] const Matrix& B() const noexcept { return b_; }
    [[nodiscard]] bool lossless() const noexcept { return lossless_; }

    /// Copy with a shunt susceptance added to B(bus, bus). Used for faults.
    [[nodiscard]] NetworkModel with_shunt(std::size_t bus, double susceptance) const;

    /// Copy with every B entry multiplied by c (G untouched).
    [[nodiscard]] NetworkModel scaled_susceptance(double c) const;

private:
    std::size_t n_ = 0;
    std::vector<LineParams> lines_;
    Matrix g_;
    Matrix b_;
    bool lossless_ = true;
};

/// u = g(y): active and reactive bus injections, G terms included.
PowerInjectionVector injections(const NetworkModel& net, const VoltagePhasorVector& y);

/// Allocation-free variant used by the simulator; outputs must be sized n.
void injections_into(const NetworkModel& net, std::span<const double> theta, std::span<const double> v,
                     std::span<double> p, std::span<double> q);

/// d(P,Q)/d(theta,V), 2n x 2n, rows (P, Q) and columns (theta, V).
Matrix injection_jacobian(const NetworkModel& net, const VoltagePhasorVector& y);

/// Network energy W_N(y) = sum_i -B_ii V_i^2 / 2 - sum_{i<j} B_ij V_i V_j cos(theta_i - theta_j).
double energy_W(const NetworkModel& net, const VoltagePhasorVector& y, EnergyMode mode = EnergyMode::strict);

/// Analytic gradient of energy_W, stacked (d/dtheta, d/dV).
Vector gradient_W(const NetworkModel& net, const VoltagePhasorVector& y, EnergyMode mode = EnergyMode::strict);

/// Analytic Hessian of energy_W, 2n x 2n.
Matrix hessian_W(const NetworkModel& net, const VoltagePhasorVector& y, EnergyMode mode = EnergyMode::strict);

}  // namespace gridpass
