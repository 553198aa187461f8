#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gridpass/system.hpp"

namespace gridpass {

/// Bolted three-phase fault modeled as a large shunt susceptance at one bus.
struct FaultScenario {
    std::size_t bus = 0;
    double fault_shunt_b = -1000.0;
    double t_fault_on = 0.1;
    double clearing_time = 0.1;
};

struct Trace {
    Vector times;
    std::vector<Vector> states;
    std::vector<VoltagePhasorVector> outputs;
    std::vector<PowerInjectionVector> inputs;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
};

/// Tail-window convergence test: sup_t ||x(t) - x*||_inf < tol over
/// [horizon - window, horizon], and, with require_contraction, the sup over
/// the second half of the window below the sup over the first half.
///
/// The slowest closed-loop mode of a marginally synthesized system decays
/// at a rate proportional to sigma + lambda (a few 1e-2 per second on the
/// 3-bus case), so a tight absolute tolerance would measure decay speed
/// rather than stability. The defaults pair a loose bound with the
/// contraction check: runs that creep toward collapse or settle on another
/// equilibrium fail one or the other.
struct ConvergenceSpec {
    double horizon = 60.0;
    double window = 20.0;
    double tol = 0.5;
    bool require_contraction = true;
};

struct StepSettings {
    double step = 1e-4;
    int record_every = 10;  // keep every k-th step in the trace
};

/// Smallest admissible voltage-type state (V or E_q) during integration.
inline constexpr double kDomainFloor = 1e-4;

/// RK4 over [t0, t1] against `net` (the system's own network by default).
/// The final partial step is shortened so t1 is hit exactly.
/// Throws DomainExit when a V or E_q state drops below 1e-4 or a state
/// becomes non-finite.
Trace integrate(const SystemModel& sys, const Vector& x0, double t0, double t1, const StepSettings& steps);
Trace integrate(const SystemModel& sys, const NetworkModel& net, const Vector& x0, double t0, double t1,
                const StepSettings& steps);

struct FaultRun {
    Trace trace;
    bool converged = false;
    double tail_deviation = 0.0;           // sup over the tail window seen so far
    double tail_first_half = 0.0;
    double tail_second_half = 0.0;
    std::optional<double> domain_exit_time;
    Vector state_at_clearing;
};

/// Pre-fault rest at x*, fault-on with the shunted network, post-fault with
/// the original network. With `stop_early` the run ends as soon as the
/// verdict is known (a tail sample reaches tol, or a divergence bound of
/// 1e3 in the sup-norm is crossed) and the trace is not recorded.
FaultRun simulate_fault(const SystemModel& sys, const FaultScenario& scenario, const ConvergenceSpec& spec,
                        const StepSettings& steps, bool stop_early = false);

struct BracketResult {
    std::optional<double> threshold;  // largest passing value, within tol
    double lower = 0.0;
    double upper = 0.0;
    int probes = 0;
    bool no_failure = false;  // passed everywhere up to max_upper
    std::string note;         // set when no sign change was found
};

/// Bisection for the largest x with passes(x) true, assuming passes is
/// true below and false above a single threshold. The upper end doubles up
/// to max_upper until it fails.
BracketResult bisect_threshold(const std::function<bool(double)>& passes, double lower, double upper, double tol,
                               double max_upper = 5.0);

/// Critical clearing time for a fault at `scenario.bus` (its clearing_time is ignored).
BracketResult find_cct(const SystemModel& sys, FaultScenario scenario, const ConvergenceSpec& spec,
                       const StepSettings& steps, double lower, double upper, double tol_t);

/// CSV: t, every state (bus-qualified), then P_i, Q_i, V_i, theta_i.
void write_trace_csv(const SystemModel& sys, const Trace& trace, std::ostream& out);

}  // namespace gridpass
