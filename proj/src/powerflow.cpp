#include "gridpass/powerflow.hpp"

#include <cmath>
#include <string>

#include "gridpass/errors.hpp"

namespace gridpass {

namespace {

struct Unknowns {
    std::vector<std::size_t> angle_buses;    // every non-slack bus
    std::vector<std::size_t> voltage_buses;  // PQ buses
};

Unknowns classify(const std::vector<BusRole>& roles) {
    Unknowns u;
    int slack_count = 0;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        if (std::holds_alternative<SlackBus>(roles[i])) {
            ++slack_count;
            continue;
        }
        u.angle_buses.push_back(i);
        if (std::holds_alternative<PQBus>(roles[i])) u.voltage_buses.push_back(i);
    }
    if (slack_count != 1) throw ConfigError("power flow needs exactly one slack bus, got " + std::to_string(slack_count));
    return u;
}

}  // namespace

PowerFlowSolution solve_power_flow(const NetworkModel& net, const std::vector<BusRole>& roles,
                                   const PowerFlowOptions& options, const std::optional<VoltagePhasorVector>& start) {
    const std::size_t n = net.size();
    if (roles.size() != n) throw ConfigError("power flow roles do not match bus count");
    const Unknowns unk = classify(roles);

    VoltagePhasorVector y = start.value_or(VoltagePhasorVector::flat(n));
    if (y.size() != n) throw ConfigError("power flow warm start has wrong size");
    for (std::size_t i = 0; i < n; ++i) {
        if (const auto* sl = std::get_if<SlackBus>(&roles[i])) {
            if (!(sl->V > 0.0)) throw ConfigError("slack voltage must be positive");
            y.theta[i] = sl->theta;
            y.V[i] = sl->V;
        } else if (const auto* pv = std::get_if<PVBus>(&roles[i])) {
            if (!(pv->V > 0.0)) throw ConfigError("PV voltage must be positive");
            y.V[i] = pv->V;
        }
    }

    const std::size_t na = unk.angle_buses.size();
    const std::size_t m = na + unk.voltage_buses.size();
    auto mismatch = [&](const PowerInjectionVector& u) {
        Vector f(m);
        for (std::size_t k = 0; k < na; ++k) {
            const std::size_t i = unk.angle_buses[k];
            const double p_set = std::visit([](const auto& r) {
                if constexpr (requires { r.P; }) return r.P; else return 0.0;
            }, roles[i]);
            f[k] = u.P[i] - p_set;
        }
        for (std::size_t k = 0; k < unk.voltage_buses.size(); ++k) {
            const std::size_t i = unk.voltage_buses[k];
            f[na + k] = u.Q[i] - std::get<PQBus>(roles[i]).Q;
        }
        return f;
    };

    PowerFlowSolution sol;
    for (int iter = 0;; ++iter) {
        const PowerInjectionVector u = injections(net, y);
        const Vector f = mismatch(u);
        sol.mismatch = norm_inf(f);
        if (!std::isfinite(sol.mismatch)) throw NoConvergence("power flow diverged (non-finite mismatch)", iter);
        if (sol.mismatch < options.tol) {
            sol.iterations = iter;
            sol.equilibrium.y_star = y;
            sol.equilibrium.u_star = u;
            return sol;
        }
        if (iter >= options.max_iter)
            throw NoConvergence("power flow did not converge in " + std::to_string(options.max_iter) + " iterations", iter);

        const Matrix full = injection_jacobian(net, y);
        Matrix jac(m, m);
        auto row_of = [&](std::size_t k) { return k < na ? unk.angle_buses[k] : n + unk.voltage_buses[k - na]; };
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < m; ++c) jac(r, c) = full(row_of(r), row_of(c));
        Vector neg_f(m);
        for (std::size_t k = 0; k < m; ++k) neg_f[k] = -f[k];
        Vector step;
        try {
            step = solve_linear(jac, neg_f);
        } catch (const SingularMatrix&) {
            throw SingularJacobian("power flow Jacobian singular at iteration " + std::to_string(iter), iter);
        }
        for (std::size_t k = 0; k < na; ++k) y.theta[unk.angle_buses[k]] += step[k];
        for (std::size_t k = 0; k < unk.voltage_buses.size(); ++k) y.V[unk.voltage_buses[k]] += step[na + k];
        for (double v : y.V)
            if (!(v > 0.0)) throw NoConvergence("power flow iterate left V > 0", iter + 1);
    }
}

std::vector<BusRole> scale_load(const std::vector<BusRole>& roles, double s) {
    if (!(s > 0.0)) throw ConfigError("load scale must be positive");
    std::vector<BusRole> out = roles;
    for (auto& role : out) {
        if (auto* pv = std::get_if<PVBus>(&role)) {
            pv->P *= s;
        } else if (auto* pq = std::get_if<PQBus>(&role)) {
            pq->P *= s;
            pq->Q *= s;
        }
    }
    return out;
}

}  // namespace gridpass
