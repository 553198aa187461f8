#include "gridpass/system.hpp"

#include <algorithm>
#include <cmath>

#include "gridpass/errors.hpp"
#include "gridpass/passivity.hpp"

namespace gridpass {

std::size_t SystemModel::theta_state(std::size_t bus) const {
    return layout_[bus].offset + theta_index(devices_[bus]);
}

std::size_t SystemModel::voltage_state(std::size_t bus) const {
    return layout_[bus].offset + voltage_index(devices_[bus]);
}

void SystemModel::rhs_into(const NetworkModel& net, std::span<const double> x, std::span<double> dx,
                           SystemWorkspace& ws) const {
    const std::size_t n = devices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        ws.theta[i] = x[theta_state(i)];
        ws.V[i] = x[voltage_state(i)];
    }
    injections_into(net, ws.theta, ws.V, ws.P, ws.Q);
    for (std::size_t i = 0; i < n; ++i) {
        const StateRange& r = layout_[i];
        gridpass::rhs_into(devices_[i], x.subspan(r.offset, r.size), ws.P[i], ws.Q[i], dx.subspan(r.offset, r.size));
    }
}

Vector SystemModel::rhs(std::span<const double> x) const {
    SystemWorkspace ws(devices_.size());
    Vector dx(dimension());
    rhs_into(net_, x, dx, ws);
    return dx;
}

VoltagePhasorVector SystemModel::outputs(std::span<const double> x) const {
    const std::size_t n = devices_.size();
    VoltagePhasorVector y{Vector(n), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
        y.theta[i] = x[theta_state(i)];
        y.V[i] = x[voltage_state(i)];
    }
    return y;
}

std::vector<std::string> SystemModel::state_labels() const {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < devices_.size(); ++i)
        for (const auto& name : state_names(devices_[i])) labels.push_back("bus" + bus_labels_[i] + "." + name);
    return labels;
}

SystemModel assemble(NetworkModel net, std::vector<DeviceModel> devices, Equilibrium equilibrium,
                     std::vector<std::string> bus_labels) {
    const std::size_t n = net.size();
    if (devices.size() != n)
        throw ConfigError("system needs one device per bus (" + std::to_string(n) + " buses, " +
                          std::to_string(devices.size()) + " devices)");
    if (equilibrium.y_star.size() != n || equilibrium.u_star.size() != n)
        throw ConfigError("equilibrium size does not match the network");
    if (bus_labels.empty())
        for (std::size_t i = 0; i < n; ++i) bus_labels.push_back(std::to_string(i + 1));
    if (bus_labels.size() != n) throw ConfigError("bus label count does not match the network");

    SystemModel sys;
    std::size_t offset = 0;
    equilibrium.device_states_star.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const BusOperatingPoint& op = devices[i].equilibrium;
        const double tol = 1e-9 * (1.0 + std::abs(equilibrium.u_star.P[i]) + std::abs(equilibrium.u_star.Q[i]));
        if (std::abs(op.theta - equilibrium.y_star.theta[i]) > tol || std::abs(op.V - equilibrium.y_star.V[i]) > tol ||
            std::abs(op.P - equilibrium.u_star.P[i]) > tol || std::abs(op.Q - equilibrium.u_star.Q[i]) > tol)
            throw ConfigError("device at bus " + bus_labels[i] + " was synthesized for a different operating point");
        const std::size_t k = state_size(devices[i]);
        sys.layout_.push_back({offset, k});
        offset += k;
        const Vector xs = equilibrium_state(devices[i]);
        equilibrium.device_states_star.push_back(xs);
        sys.x_star_.insert(sys.x_star_.end(), xs.begin(), xs.end());
    }
    sys.net_ = std::move(net);
    sys.devices_ = std::move(devices);
    sys.equilibrium_ = std::move(equilibrium);
    sys.bus_labels_ = std::move(bus_labels);

    const double residual = norm_inf(sys.rhs(sys.x_star_));
    if (!(residual <= 1e-8))
        throw NumericalError("closed loop is not at rest at x* (||f(x*)|| = " + std::to_string(residual) + ")");
    return sys;
}

Matrix jacobian(const SystemModel& sys, std::span<const double> x) {
    const std::size_t n = sys.bus_count();
    const std::size_t dim = sys.dimension();
    const VoltagePhasorVector y = sys.outputs(x);
    const PowerInjectionVector u = injections(sys.network(), y);
    const Matrix dg = injection_jacobian(sys.network(), y);

    Matrix jac(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const StateRange& r = sys.layout()[i];
        const DeviceJacobian dj = rhs_jacobian(sys.devices()[i], x.subspan(r.offset, r.size), u.P[i], u.Q[i]);
        for (std::size_t a = 0; a < r.size; ++a) {
            for (std::size_t b = 0; b < r.size; ++b) jac(r.offset + a, r.offset + b) += dj.dx(a, b);
            const double dp = dj.du(a, 0), dq = dj.du(a, 1);
            if (dp == 0.0 && dq == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                jac(r.offset + a, sys.theta_state(j)) += dp * dg(i, j) + dq * dg(n + i, j);
                jac(r.offset + a, sys.voltage_state(j)) += dp * dg(i, n + j) + dq * dg(n + i, n + j);
            }
        }
    }
    return jac;
}

Matrix reduced_jacobian(const SystemModel& sys, const Matrix& full) {
    // In coordinates eta = zeta - delta the eta row vanishes; dropping it and
    // its column leaves J with column delta replaced by (col delta + col zeta).
    const std::size_t dim = sys.dimension();
    std::vector<bool> drop(dim, false);
    Matrix folded = full;
    for (std::size_t i = 0; i < sys.bus_count(); ++i) {
        if (sys.devices()[i].kind() != DeviceKind::synchronous_generator) continue;
        const std::size_t d = sys.layout()[i].offset;      // delta
        const std::size_t z = sys.layout()[i].offset + 3;  // zeta
        for (std::size_t r = 0; r < dim; ++r) folded(r, d) += folded(r, z);
        drop[z] = true;
    }
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < dim; ++k)
        if (!drop[k]) keep.push_back(k);
    Matrix reduced(keep.size(), keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a)
        for (std::size_t b = 0; b < keep.size(); ++b) reduced(a, b) = folded(keep[a], keep[b]);
    return reduced;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::stable: return "green";
        case Verdict::marginal: return "marginal";
        case Verdict::unstable: return "red";
    }
    return "unknown";
}

StabilityVerdict small_signal(const SystemModel& sys, double tol_margin) {
    const Matrix full = jacobian(sys, sys.x_star());
    StabilityVerdict v;
    v.eigenvalues = eig_general(full);
    v.reduced_eigenvalues = eig_general(reduced_jacobian(sys, full));
    v.structural_zero_count = static_cast<int>(
        std::count_if(v.eigenvalues.begin(), v.eigenvalues.end(), [](auto z) { return std::abs(z) < 1e-7; }));
    v.max_real_part = -HUGE_VAL;
    for (const auto& z : v.reduced_eigenvalues) v.max_real_part = std::max(v.max_real_part, z.real());
    if (v.max_real_part < -tol_margin)
        v.verdict = Verdict::stable;
    else if (v.max_real_part <= tol_margin)
        v.verdict = Verdict::marginal;
    else
        v.verdict = Verdict::unstable;
    v.stable = v.verdict == Verdict::stable;
    return v;
}

LyapunovSample lyapunov_W(const SystemModel& sys, std::span<const double> x, std::span<const double> sigma_per_bus,
                          double lambda, double epsilon, EnergyMode mode) {
    const std::size_t n = sys.bus_count();
    if (sigma_per_bus.size() != n) throw ConfigError("lyapunov_W needs one sigma per bus");
    if (!(epsilon > 0.0)) throw ConfigError("lyapunov_W needs epsilon > 0");
    for (double s : sigma_per_bus)
        if (!(s + lambda > epsilon)) throw ConfigError("lyapunov_W needs sigma_i + lambda > epsilon at every bus");
    const double sigma_min = *std::min_element(sigma_per_bus.begin(), sigma_per_bus.end());

    const Vector dx = sys.rhs(x);
    LyapunovSample out;
    for (std::size_t i = 0; i < n; ++i) {
        const StateRange& r = sys.layout()[i];
        const StorageSample s =
            storage_value_unchecked(sys.devices()[i], x.subspan(r.offset, r.size),
                                    std::span<const double>(dx).subspan(r.offset, r.size), sigma_min);
        out.W += s.value;
        out.W_dot += s.rate;
    }
    const VoltagePhasorVector y = sys.outputs(x);
    const VoltagePhasorVector& ys = sys.equilibrium().y_star;
    const VoltagePhasorVector y_dot = sys.outputs(dx);
    out.W += storage_S_N(sys.network(), y, ys, lambda, epsilon, mode);
    out.W_dot += storage_S_N_rate(sys.network(), y, ys, y_dot, lambda, epsilon, mode);

    const double c = sigma_min + lambda - epsilon;
    double q = 0.0, q_dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = y.theta[i] - ys.theta[i];
        const double dv = y.V[i] - ys.V[i];
        q += dt * dt + dv * dv;
        q_dot += dt * y_dot.theta[i] + dv * y_dot.V[i];
    }
    out.W += 0.5 * c * q;
    out.W_dot += c * q_dot;
    return out;
}

}  // namespace gridpass
