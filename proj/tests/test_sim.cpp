#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "gridpass/errors.hpp"
#include "gridpass/harness.hpp"
#include "gridpass/ode.hpp"
#include "gridpass/sim.hpp"
#include "support.hpp"

using namespace gridpass;

namespace {

const OperatingPoint& base_op() {
    static const OperatingPoint op = solve_operating_point(testsupport::case3(), 1.0, false);
    return op;
}

SystemModel base_system(double rho, double margin) {
    return case_system(testsupport::case3(), base_op(), testsupport::uniform_sigma(base_op(), rho),
                       GainMargins::uniform(margin));
}

}  // namespace

TEST_CASE("RK4 on exponential decay") {
    Rk4Stepper rk(1);
    Vector x{1.0};
    const auto f = [](double, std::span<const double> s, std::span<double> d) { d[0] = -s[0]; };
    for (int k = 0; k < 1000; ++k) rk.step(f, k * 1e-3, x, 1e-3);
    CHECK(std::abs(x[0] - std::exp(-1.0)) < 1e-6);
    CHECK(std::abs(x[0] - 0.367879) < 1e-6);
}

TEST_CASE("integration from x* stays at x*") {
    const auto sys = base_system(0.5, 0.0);
    const auto trace = integrate(sys, sys.x_star(), 0.0, 1.0, {1e-4, 100});
    CHECK(trace.size() == 101);
    CHECK(trace.times.back() == 1.0);
    for (const auto& x : trace.states) CHECK(testsupport::max_abs_diff(x, sys.x_star()) < 1e-12);
    for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace.times[k] > trace.times[k - 1]);
}

TEST_CASE("halving the step barely moves the endpoint") {
    const auto sys = base_system(0.5, 0.0);
    Vector x0 = sys.x_star();
    x0[sys.theta_state(1)] += 0.05;
    x0[sys.voltage_state(2)] -= 0.03;
    const auto a = integrate(sys, x0, 0.0, 1.0, {1e-4, 10000});
    const auto b = integrate(sys, x0, 0.0, 1.0, {5e-5, 20000});
    CHECK(testsupport::max_abs_diff(a.states.back(), b.states.back()) < 1e-7);
}

TEST_CASE("final partial step lands on the end time") {
    const auto sys = base_system(0.5, 0.0);
    const auto trace = integrate(sys, sys.x_star(), 0.0, 0.00025, {1e-4, 1});
    CHECK(trace.times.back() == 0.00025);
    CHECK(trace.size() == 4);
}

TEST_CASE("domain guard") {
    const auto sys = base_system(0.5, 0.0);
    Vector x0 = sys.x_star();
    x0[sys.voltage_state(2)] = 5e-5;
    CHECK_THROWS_AS(integrate(sys, x0, 0.0, 0.01, {1e-4, 1}), DomainExit);
    x0 = sys.x_star();
    x0[0] = std::nan("");
    try {
        integrate(sys, x0, 0.0, 0.01, {1e-4, 1});
        FAIL("expected DomainExit");
    } catch (const DomainExit& e) {
        CHECK(e.time() == doctest::Approx(1e-4));
    }
}

TEST_CASE("vanishing fault converges") {
    const auto sys = base_system(0.0, 0.1);
    const auto run = simulate_fault(sys, {1, -1000.0, 0.1, 1e-4}, {}, {1e-4, 100});
    CHECK(run.converged);
    CHECK(run.tail_deviation < 1e-2);
    CHECK_FALSE(run.domain_exit_time.has_value());
    CHECK(run.trace.times.front() == 0.0);
    CHECK(run.trace.times.back() == doctest::Approx(60.0));
}

TEST_CASE("sustained fault at sigma = -lambda does not converge") {
    const auto sys = base_system(0.0, 0.0);
    const auto run = simulate_fault(sys, {1, -1000.0, 0.1, 10.0}, {}, {1e-4, 100}, true);
    CHECK_FALSE(run.converged);
}

TEST_CASE("fault scenario validation") {
    const auto sys = base_system(0.5, 0.0);
    CHECK_THROWS_AS(simulate_fault(sys, {1, -1000.0, 0.1, 0.0}, {}, {}), ConfigError);
    CHECK_THROWS_AS(simulate_fault(sys, {1, 5.0, 0.1, 0.1}, {}, {}), ConfigError);
    CHECK_THROWS_AS(simulate_fault(sys, {3, -1000.0, 0.1, 0.1}, {}, {}), ConfigError);
    CHECK_THROWS_AS(simulate_fault(sys, {1, -1000.0, 0.1, 0.1}, {10.0, 20.0, 0.5, true}, {}), ConfigError);
}

TEST_CASE("bisection on a synthetic threshold") {
    const auto r = bisect_threshold([](double t) { return t < 0.25; }, 0.001, 0.1, 1e-3);
    REQUIRE(r.threshold.has_value());
    CHECK(std::abs(*r.threshold - 0.25) <= 1e-3);
    CHECK(r.upper - r.lower <= 1e-3);
    CHECK(r.note.empty());

    const auto never = bisect_threshold([](double) { return true; }, 0.001, 0.5, 1e-3);
    CHECK_FALSE(never.threshold.has_value());
    CHECK(never.no_failure);
    CHECK(never.note == "no failure up to the bracket limit");
    CHECK(never.lower == 5.0);

    const auto always = bisect_threshold([](double) { return false; }, 0.001, 0.5, 1e-3);
    CHECK_FALSE(always.threshold.has_value());
    CHECK_FALSE(always.no_failure);
    CHECK(always.note == "fails already at the lower bracket");
}

TEST_CASE("fault simulation is deterministic") {
    const auto sys = base_system(0.0, 0.1);
    const FaultScenario sc{2, -1000.0, 0.1, 0.06};
    const ConvergenceSpec spec{10.0, 4.0, 0.5, true};
    const auto a = simulate_fault(sys, sc, spec, {1e-4, 50});
    const auto b = simulate_fault(sys, sc, spec, {1e-4, 50});
    CHECK(a.trace.times == b.trace.times);
    CHECK(a.trace.states == b.trace.states);
    CHECK(a.tail_deviation == b.tail_deviation);
}

TEST_CASE("critical clearing time is reproducible and step-insensitive") {
    const auto sys = base_system(0.0, 0.1);
    const FaultScenario sc{0, -1000.0, 0.1, 0.0};
    const ConvergenceSpec spec;
    const auto a = find_cct(sys, sc, spec, {1e-4, 100}, 1e-3, 0.5, 1e-3);
    const auto b = find_cct(sys, sc, spec, {1e-4, 100}, 1e-3, 0.5, 1e-3);
    REQUIRE(a.threshold.has_value());
    CHECK(*a.threshold == *b.threshold);
    CHECK(a.probes == b.probes);
    const auto h = find_cct(sys, sc, spec, {5e-5, 100}, 1e-3, 0.5, 1e-3);
    REQUIRE(h.threshold.has_value());
    CHECK(std::abs(*h.threshold - *a.threshold) < 2e-3);
    MESSAGE("bus 1 CCT " << *a.threshold << " s (step 1e-4), " << *h.threshold << " s (step 5e-5)");
}

TEST_CASE("Lyapunov function ends below its clearing value") {
    const auto& op = base_op();
    const auto sys = base_system(0.5, 0.0);
    const Vector sigma = testsupport::uniform_sigma(op, 0.5);
    const auto run = simulate_fault(sys, {1, -1000.0, 0.1, 0.05}, {}, {1e-3, 1000});
    REQUIRE(run.converged);
    const double lam = op.passivity.lambda;
    const double w_clear = lyapunov_W(sys, run.state_at_clearing, sigma, lam, 1e-6).W;
    const double w_end = lyapunov_W(sys, run.trace.states.back(), sigma, lam, 1e-6).W;
    CHECK(w_end < w_clear);
}

TEST_CASE("trace CSV layout") {
    const auto sys = base_system(0.5, 0.0);
    const auto trace = integrate(sys, sys.x_star(), 0.0, 0.002, {1e-3, 1});
    std::ostringstream out;
    write_trace_csv(sys, trace, out);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "t,bus1.delta,bus1.omega,bus1.Eq,bus1.zeta,bus2.theta,bus2.V,bus3.theta,bus3.V,"
          "P_1,P_2,P_3,Q_1,Q_2,Q_3,V_1,V_2,V_3,theta_1,theta_2,theta_3");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 3);
}
