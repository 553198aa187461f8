#include "gridpass/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "gridpass/csv.hpp"
#include "gridpass/errors.hpp"
#include "gridpass/ode.hpp"

namespace gridpass {

namespace {

class SegmentRunner {
public:
    SegmentRunner(const SystemModel& sys, const NetworkModel& net)
        : sys_(sys), net_(net), ws_(sys.bus_count()), rk_(sys.dimension()) {}

    // Advances x from t0 to t1 in equal steps no longer than h. Calls
    // visit(t, x) after every step; a false return stops the segment.
    template <class Visit>
    bool run(Vector& x, double t0, double t1, double h, Visit&& visit) {
        if (t1 <= t0) return true;
        const auto count = static_cast<long>(std::ceil((t1 - t0) / h - 1e-9));
        const double dt = (t1 - t0) / static_cast<double>(count);
        auto field = [this](double, std::span<const double> xs, std::span<double> dx) {
            sys_.rhs_into(net_, xs, dx, ws_);
        };
        for (long k = 0; k < count; ++k) {
            const double t = (k + 1 == count) ? t1 : t0 + static_cast<double>(k + 1) * dt;
            try {
                rk_.step(field, t0 + static_cast<double>(k) * dt, x, dt);
            } catch (const DomainExit& e) {
                throw DomainExit(e.what(), t);  // device models do not know the clock
            }
            guard(x, t);
            if (!visit(t, x)) return false;
        }
        return true;
    }

private:
    void guard(const Vector& x, double t) const {
        for (double v : x)
            if (!std::isfinite(v)) throw DomainExit("state became non-finite", t);
        for (std::size_t i = 0; i < sys_.bus_count(); ++i)
            if (x[sys_.voltage_state(i)] < kDomainFloor)
                throw DomainExit("voltage state at bus " + sys_.bus_labels()[i] + " fell below 1e-4", t);
    }

    const SystemModel& sys_;
    const NetworkModel& net_;
    SystemWorkspace ws_;
    Rk4Stepper rk_;
};

void record(const SystemModel& sys, const NetworkModel& net, Trace& trace, double t, const Vector& x) {
    trace.times.push_back(t);
    trace.states.push_back(x);
    VoltagePhasorVector y = sys.outputs(x);
    trace.inputs.push_back(injections(net, y));
    trace.outputs.push_back(std::move(y));
}

double deviation(const Vector& x, const Vector& ref) {
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) d = std::max(d, std::abs(x[k] - ref[k]));
    return d;
}

}  // namespace

Trace integrate(const SystemModel& sys, const NetworkModel& net, const Vector& x0, double t0, double t1,
                const StepSettings& steps) {
    if (!(steps.step > 0.0) || steps.record_every < 1) throw ConfigError("integrate needs step > 0 and record_every >= 1");
    if (x0.size() != sys.dimension()) throw ConfigError("initial state has wrong dimension");
    Trace trace;
    Vector x = x0;
    record(sys, net, trace, t0, x);
    SegmentRunner runner(sys, net);
    long k = 0;
    runner.run(x, t0, t1, steps.step, [&](double t, const Vector& xs) {
        if (++k % steps.record_every == 0 || t == t1) record(sys, net, trace, t, xs);
        return true;
    });
    return trace;
}

Trace integrate(const SystemModel& sys, const Vector& x0, double t0, double t1, const StepSettings& steps) {
    return integrate(sys, sys.network(), x0, t0, t1, steps);
}

FaultRun simulate_fault(const SystemModel& sys, const FaultScenario& scenario, const ConvergenceSpec& spec,
                        const StepSettings& steps, bool stop_early) {
    if (!(scenario.clearing_time > 0.0)) throw ConfigError("clearing time must be positive");
    if (!(scenario.fault_shunt_b < 0.0)) throw ConfigError("fault shunt susceptance must be negative");
    if (scenario.bus >= sys.bus_count()) throw ConfigError("fault bus outside the network");
    if (!(spec.window < spec.horizon)) throw ConfigError("convergence window must be shorter than the horizon");
    if (!(steps.step > 0.0) || steps.record_every < 1) throw ConfigError("simulation needs step > 0 and record_every >= 1");

    const NetworkModel faulted = sys.network().with_shunt(scenario.bus, scenario.fault_shunt_b);
    const Vector& xs = sys.x_star();
    const double t_on = scenario.t_fault_on;
    const double t_clear = t_on + scenario.clearing_time;
    const double tail_start = spec.horizon - spec.window;
    const double tail_mid = spec.horizon - 0.5 * spec.window;
    constexpr double kDivergenceBound = 1e3;

    FaultRun run;
    Vector x = xs;
    const bool keep = !stop_early;
    if (keep) {
        record(sys, sys.network(), run.trace, 0.0, x);
        if (t_on > 0.0) record(sys, sys.network(), run.trace, t_on, x);
    }
    run.tail_deviation = 0.0;
    bool tail_seen = false;
    long k = 0;

    auto observe = [&](const NetworkModel& net, double t, const Vector& state) {
        if (keep && (++k % steps.record_every == 0)) record(sys, net, run.trace, t, state);
        const double dev = deviation(state, xs);
        if (t >= tail_start - 1e-12) {
            tail_seen = true;
            run.tail_deviation = std::max(run.tail_deviation, dev);
            double& half = (t < tail_mid) ? run.tail_first_half : run.tail_second_half;
            half = std::max(half, dev);
            if (stop_early && run.tail_deviation >= spec.tol) return false;
        }
        if (stop_early && dev > kDivergenceBound) {
            run.tail_deviation = std::max(run.tail_deviation, dev);
            return false;
        }
        return true;
    };

    try {
        SegmentRunner on(sys, faulted);
        bool going = on.run(x, t_on, std::min(t_clear, spec.horizon), steps.step,
                            [&](double t, const Vector& s) { return observe(faulted, t, s); });
        run.state_at_clearing = x;
        if (going && t_clear < spec.horizon) {
            SegmentRunner post(sys, sys.network());
            going = post.run(x, t_clear, spec.horizon, steps.step,
                             [&](double t, const Vector& s) { return observe(sys.network(), t, s); });
        }
        if (!going) {
            run.converged = false;
            return run;
        }
        if (keep && run.trace.times.back() != spec.horizon) record(sys, sys.network(), run.trace, spec.horizon, x);
    } catch (const DomainExit& e) {
        run.domain_exit_time = e.time();
        run.converged = false;
        return run;
    }
    run.converged = tail_seen && run.tail_deviation < spec.tol &&
                    (!spec.require_contraction || run.tail_second_half <= run.tail_first_half);
    return run;
}

BracketResult bisect_threshold(const std::function<bool(double)>& passes, double lower, double upper, double tol,
                               double max_upper) {
    BracketResult r;
    r.lower = lower;
    r.upper = upper;
    ++r.probes;
    if (!passes(lower)) {
        r.note = "fails already at the lower bracket";
        return r;
    }
    for (;;) {
        ++r.probes;
        if (!passes(r.upper)) break;
        r.lower = r.upper;
        if (r.upper >= max_upper) {
            r.no_failure = true;
            r.note = "no failure up to the bracket limit";
            return r;
        }
        r.upper = std::min(2.0 * r.upper, max_upper);
    }
    while (r.upper - r.lower > tol) {
        const double mid = 0.5 * (r.lower + r.upper);
        ++r.probes;
        if (passes(mid))
            r.lower = mid;
        else
            r.upper = mid;
    }
    r.threshold = r.lower;
    return r;
}

BracketResult find_cct(const SystemModel& sys, FaultScenario scenario, const ConvergenceSpec& spec,
                       const StepSettings& steps, double lower, double upper, double tol_t) {
    auto converges = [&](double clearing) {
        scenario.clearing_time = clearing;
        return simulate_fault(sys, scenario, spec, steps, true).converged;
    };
    return bisect_threshold(converges, lower, upper, tol_t);
}

void write_trace_csv(const SystemModel& sys, const Trace& trace, std::ostream& out) {
    const std::size_t n = sys.bus_count();
    std::vector<std::string> header{"t"};
    for (auto& s : sys.state_labels()) header.push_back(s);
    for (const char* q : {"P", "Q", "V", "theta"})
        for (std::size_t i = 0; i < n; ++i) header.push_back(std::string(q) + "_" + sys.bus_labels()[i]);
    write_csv_row(out, header);
    std::vector<double> row;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        row.clear();
        row.push_back(trace.times[k]);
        row.insert(row.end(), trace.states[k].begin(), trace.states[k].end());
        row.insert(row.end(), trace.inputs[k].P.begin(), trace.inputs[k].P.end());
        row.insert(row.end(), trace.inputs[k].Q.begin(), trace.inputs[k].Q.end());
        row.insert(row.end(), trace.outputs[k].V.begin(), trace.outputs[k].V.end());
        row.insert(row.end(), trace.outputs[k].theta.begin(), trace.outputs[k].theta.end());
        write_csv_row(out, row);
    }
}

}  // namespace gridpass
