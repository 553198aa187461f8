#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "gridpass/errors.hpp"
#include "gridpass/harness.hpp"
#include "gridpass/sim.hpp"
#include "gridpass/system.hpp"
#include "support.hpp"

using namespace gridpass;
using cd = std::complex<double>;

namespace {

const OperatingPoint& op_at(double s) {
    static const OperatingPoint one = solve_operating_point(testsupport::case3(), 1.0, false);
    static const OperatingPoint heavy = solve_operating_point(testsupport::case3(), 2.5, false);
    return s == 1.0 ? one : heavy;
}

SystemModel system_at(double s, double rho, double margin = 0.0) {
    const auto& op = op_at(s);
    return case_system(testsupport::case3(), op, testsupport::uniform_sigma(op, rho), GainMargins::uniform(margin));
}

double match_distance(std::vector<cd> got, const std::vector<cd>& want) {
    double worst = 0.0;
    for (const cd& w : want) {
        auto it = std::min_element(got.begin(), got.end(),
                                   [&](const cd& a, const cd& b) { return std::abs(a - w) < std::abs(b - w); });
        worst = std::max(worst, std::abs(*it - w));
        got.erase(it);
    }
    return worst;
}

// Random state near x* on the set reachable from the equilibrium, where the
// SG integrator equals delta - delta*.
Vector near_star(const SystemModel& sys, std::mt19937_64& rng, double radius) {
    std::uniform_real_distribution<double> u(-radius, radius);
    Vector x = sys.x_star();
    for (double& v : x) v += u(rng);
    for (std::size_t i = 0; i < sys.bus_count(); ++i) {
        if (sys.devices()[i].kind() != DeviceKind::synchronous_generator) continue;
        const std::size_t o = sys.layout()[i].offset;
        x[o + 3] = x[o] - sys.x_star()[o];
    }
    return x;
}

}  // namespace

TEST_CASE("three-bus assembly") {
    const auto sys = system_at(1.0, 0.5);
    CHECK(sys.dimension() == 8);
    CHECK(sys.bus_count() == 3);
    CHECK(sys.devices()[0].kind() == DeviceKind::synchronous_generator);
    CHECK(sys.devices()[1].kind() == DeviceKind::quadratic_droop);
    CHECK(sys.devices()[2].kind() == DeviceKind::conventional_droop);
    CHECK(norm_inf(sys.rhs(sys.x_star())) < 1e-10);

    // Layout ranges are disjoint and cover the state.
    std::size_t next = 0;
    for (const auto& r : sys.layout()) {
        CHECK(r.offset == next);
        next += r.size;
    }
    CHECK(next == sys.dimension());

    const auto& eq = sys.equilibrium();
    CHECK(eq.device_states_star.size() == 3);
    CHECK(eq.device_states_star[0] == Vector{eq.y_star.theta[0], 0.0, eq.y_star.V[0], 0.0});
    CHECK(sys.state_labels().front() == "bus1.delta");
}

TEST_CASE("assembly rejects missing or mismatched devices") {
    const auto& op = op_at(1.0);
    auto devices = case_devices(testsupport::case3(), op, testsupport::uniform_sigma(op, 0.5));
    auto fewer = devices;
    fewer.pop_back();
    CHECK_THROWS_AS(assemble(op.net, fewer, op.equilibrium), ConfigError);

    auto swapped = devices;
    std::swap(swapped[1], swapped[2]);
    CHECK_THROWS_AS(assemble(op.net, swapped, op.equilibrium), ConfigError);
}

TEST_CASE("analytic Jacobian matches finite differences") {
    std::mt19937_64 rng(1);
    for (double rho : {0.5, -0.05}) {
        const auto sys = system_at(1.0, rho);
        const auto f = [&](const Vector& x) { return sys.rhs(x); };
        CHECK(testsupport::max_abs_diff(jacobian(sys, sys.x_star()),
                                        testsupport::fd_jacobian(f, sys.x_star(), 1e-6)) < 1e-5);
        for (int k = 0; k < 20; ++k) {
            std::uniform_real_distribution<double> u(-0.1, 0.1);
            Vector x = sys.x_star();
            for (double& v : x) v += u(rng);
            CHECK(testsupport::max_abs_diff(jacobian(sys, x), testsupport::fd_jacobian(f, x, 1e-6)) < 1e-5);
        }
    }
}

TEST_CASE("isolated conventional droop Jacobian") {
    const auto d = synthesize_from_sigma(testsupport::case3().buses[2].device, 1.0, {0.0, 1.0, -1.5, -0.1});
    const auto J = rhs_jacobian(d, equilibrium_state(d), -1.5, -0.1);
    CHECK(J.dx(0, 0) == -1.0);
    CHECK(J.dx(1, 1) == -0.1);
    CHECK(J.dx(0, 1) == 0.0);
    CHECK(J.dx(1, 0) == 0.0);
}

TEST_CASE("heavily damped droop network is stable") {
    const auto net = NetworkModel::build({{0, 1, 0.0, 0.12}}, 2);
    const auto pf = solve_power_flow(net, {SlackBus{}, PQBus{}});
    DeviceSpec qd;
    qd.kind = DeviceKind::quadratic_droop;
    qd.droop = {0.5, 2.0};
    const BusOperatingPoint op{0.0, 1.0, 0.0, 0.0};
    const auto d = device_with_gains(qd, op, 1e-6, 1e-6);
    const auto sys = assemble(net, {d, d}, pf.equilibrium);
    const auto v = small_signal(sys);
    CHECK(v.stable);
    CHECK(v.max_real_part == doctest::Approx(-0.5).epsilon(1e-3));
}

TEST_CASE("small-signal verdicts on both sides of -lambda") {
    const auto green = small_signal(system_at(1.0, 0.5));
    CHECK(green.stable);
    CHECK(green.verdict == Verdict::stable);
    CHECK(green.max_real_part < 0.0);
    // The SG integrator conserves zeta - delta: exactly one structural zero.
    CHECK(green.structural_zero_count == 1);
    CHECK(green.eigenvalues.size() == 8);
    CHECK(green.reduced_eigenvalues.size() == 7);

    CHECK(small_signal(system_at(2.5, -0.8)).verdict == Verdict::unstable);
    CHECK(small_signal(system_at(1.0, -0.1)).verdict == Verdict::unstable);
    // At s = 1, -lambda - 0.8 is negative and no positive droop gain exists.
    CHECK_THROWS_AS(system_at(1.0, -0.8), SynthesisError);
}

TEST_CASE("reduced Jacobian drops one zero per generator") {
    const auto sys = system_at(1.0, 0.3);
    const Matrix full = jacobian(sys, sys.x_star());
    const Matrix red = reduced_jacobian(sys, full);
    CHECK(red.rows() == 7);
    auto all = eig_general(full);
    auto part = eig_general(red);
    part.emplace_back(0.0, 0.0);
    CHECK(match_distance(all, part) < 1e-8);
}

TEST_CASE("verdict is invariant under bus reordering") {
    const auto& base = testsupport::case3();
    CaseFile perm = base;
    perm.buses = {base.buses[2], base.buses[0], base.buses[1]};
    for (double rho : {0.4, -0.05}) {
        const auto op1 = solve_operating_point(base, 1.0, false);
        const auto op2 = solve_operating_point(perm, 1.0, false);
        CHECK(op2.passivity.lambda == doctest::Approx(op1.passivity.lambda).epsilon(1e-10));
        const auto v1 = small_signal(case_system(base, op1, testsupport::uniform_sigma(op1, rho)));
        const auto v2 = small_signal(case_system(perm, op2, testsupport::uniform_sigma(op2, rho)));
        CHECK(match_distance(v1.eigenvalues, v2.eigenvalues) < 1e-8);
        CHECK(v1.verdict == v2.verdict);
    }
}

TEST_CASE("heterogeneous indices above -lambda + 0.05 are stable") {
    std::mt19937_64 rng(3);
    for (double s : {1.0, 2.5}) {
        const auto& op = op_at(s);
        std::uniform_real_distribution<double> u(0.05, 2.0);
        for (int trial = 0; trial < 30; ++trial) {
            Vector sigma(3);
            for (double& v : sigma) v = -op.passivity.lambda + u(rng);
            CHECK(small_signal(case_system(testsupport::case3(), op, sigma)).stable);
        }
    }
}

TEST_CASE("Lyapunov function vanishes at x* and is positive nearby") {
    const auto sys = system_at(1.0, 0.5);
    const double lam = op_at(1.0).passivity.lambda;
    const Vector sigma = testsupport::uniform_sigma(op_at(1.0), 0.5);
    const auto w0 = lyapunov_W(sys, sys.x_star(), sigma, lam, 1e-6);
    CHECK(std::abs(w0.W) < 1e-14);
    CHECK(std::abs(w0.W_dot) < 1e-14);

    std::mt19937_64 rng(5);
    int positive = 0;
    for (int k = 0; k < 1000; ++k)
        if (lyapunov_W(sys, near_star(sys, rng, 0.05), sigma, lam, 1e-6).W > 0.0) ++positive;
    CHECK(positive == 1000);

    CHECK_THROWS_AS(lyapunov_W(sys, sys.x_star(), Vector(3, -lam - 0.1), lam, 1e-6), ConfigError);
}

TEST_CASE("Lyapunov derivative matches the time derivative of W") {
    const auto sys = system_at(1.0, 0.5);
    const double lam = op_at(1.0).passivity.lambda;
    const Vector sigma{-lam + 0.5, -lam + 0.9, -lam + 0.7};
    std::mt19937_64 rng(7);
    const Vector x = near_star(sys, rng, 0.05);
    const Vector f = sys.rhs(x);
    const double h = 1e-6;
    Vector xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] += h * f[i];
        xm[i] -= h * f[i];
    }
    const double fd = (lyapunov_W(sys, xp, sigma, lam, 1e-6).W - lyapunov_W(sys, xm, sigma, lam, 1e-6).W) / (2 * h);
    CHECK(std::abs(fd - lyapunov_W(sys, x, sigma, lam, 1e-6).W_dot) < 1e-6);
}

TEST_CASE("Lyapunov function decreases along trajectories") {
    const auto sys = system_at(1.0, 0.5);
    const double lam = op_at(1.0).passivity.lambda;
    const Vector sigma = testsupport::uniform_sigma(op_at(1.0), 0.5);
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const auto trace = integrate(sys, near_star(sys, rng, 0.05), 0.0, 10.0, {1e-3, 10});
        double prev = HUGE_VAL;
        for (const auto& x : trace.states) {
            const auto w = lyapunov_W(sys, x, sigma, lam, 1e-6);
            CHECK(w.W_dot <= 1e-6);
            CHECK(w.W <= prev + 1e-12);
            prev = w.W;
        }
    }
}
