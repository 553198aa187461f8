#include "gridpass/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <string>
#include <utility>

#include "gridpass/errors.hpp"

namespace gridpass {

Vector VoltagePhasorVector::stacked() const {
    Vector y(theta);
    y.insert(y.end(), V.begin(), V.end());
    return y;
}

VoltagePhasorVector VoltagePhasorVector::from_stacked(std::span<const double> y) {
    const std::size_t n = y.size() / 2;
    return {Vector(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n)),
            Vector(y.begin() + static_cast<std::ptrdiff_t>(n), y.end())};
}

Vector PowerInjectionVector::stacked() const {
    Vector u(P);
    u.insert(u.end(), Q.begin(), Q.end());
    return u;
}

namespace {

bool connected(std::size_t n, const std::vector<LineParams>& lines) {
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (const auto& l : lines) parent[find(static_cast<std::size_t>(l.from))] = find(static_cast<std::size_t>(l.to));
    const std::size_t root = find(0);
    for (std::size_t i = 1; i < n; ++i)
        if (find(i) != root) return false;
    return true;
}

void require_energy_mode(const NetworkModel& net, EnergyMode mode) {
    if (mode == EnergyMode::strict && !net.lossless())
        throw ConfigError("network energy is defined for lossless networks; pass EnergyMode::susceptance_only to use B alone");
}

}  // namespace

NetworkModel NetworkModel::build(std::vector<LineParams> lines, std::size_t n) {
    if (n < 2) throw ConfigError("network needs at least two buses");
    std::set<std::pair<int, int>> seen;
    for (const auto& l : lines) {
        if (l.from < 0 || l.to < 0 || static_cast<std::size_t>(l.from) >= n || static_cast<std::size_t>(l.to) >= n)
            throw ConfigError("line references bus outside 0.." + std::to_string(n - 1));
        if (l.from == l.to) throw ConfigError("line from bus " + std::to_string(l.from) + " to itself");
        if (!(l.x > 0.0) || !std::isfinite(l.x)) throw ConfigError("line reactance must be positive");
        if (!(l.r >= 0.0) || !std::isfinite(l.r)) throw ConfigError("line resistance must be non-negative");
        if (!seen.emplace(std::min(l.from, l.to), std::max(l.from, l.to)).second)
            throw ConfigError("duplicate line between buses " + std::to_string(l.from) + " and " + std::to_string(l.to));
    }
    if (!connected(n, lines)) throw ConfigError("network graph is disconnected");

    NetworkModel net;
    net.n_ = n;
    net.g_ = Matrix(n, n);
    net.b_ = Matrix(n, n);
    net.lossless_ = true;
    for (const auto& l : lines) {
        const std::complex<double> y = 1.0 / std::complex<double>(l.r, l.x);
        const auto i = static_cast<std::size_t>(l.from);
        const auto j = static_cast<std::size_t>(l.to);
        net.g_(i, j) -= y.real();
        net.g_(j, i) -= y.real();
        net.b_(i, j) -= y.imag();
        net.b_(j, i) -= y.imag();
        net.g_(i, i) += y.real();
        net.g_(j, j) += y.real();
        net.b_(i, i) += y.imag();
        net.b_(j, j) += y.imag();
        if (l.r != 0.0) net.lossless_ = false;
    }
    net.lines_ = std::move(lines);
    return net;
}

NetworkModel NetworkModel::with_shunt(std::size_t bus, double susceptance) const {
    if (bus >= n_) throw ConfigError("shunt at bus outside network");
    NetworkModel copy = *this;
    copy.b_(bus, bus) += susceptance;
    return copy;
}

NetworkModel NetworkModel::scaled_susceptance(double c) const {
    NetworkModel copy = *this;
    copy.b_ *= c;
    return copy;
}

void injections_into(const NetworkModel& net, std::span<const double> theta, std::span<const double> v,
                     std::span<double> p, std::span<double> q) {
    const std::size_t n = net.size();
    const Matrix& g = net.G();
    const Matrix& b = net.B();
    for (std::size_t i = 0; i < n; ++i) {
        double pi = g(i, i) * v[i] * v[i];
        double qi = -b(i, i) * v[i] * v[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double gij = g(i, j), bij = b(i, j);
            if (gij == 0.0 && bij == 0.0) continue;
            const double d = theta[i] - theta[j];
            const double s = std::sin(d), c = std::cos(d);
            const double vv = v[i] * v[j];
            pi += vv * (bij * s + gij * c);
            qi -= vv * (bij * c - gij * s);
        }
        p[i] = pi;
        q[i] = qi;
    }
}

PowerInjectionVector injections(const NetworkModel& net, const VoltagePhasorVector& y) {
    PowerInjectionVector u{Vector(net.size()), Vector(net.size())};
    injections_into(net, y.theta, y.V, u.P, u.Q);
    return u;
}

Matrix injection_jacobian(const NetworkModel& net, const VoltagePhasorVector& y) {
    const std::size_t n = net.size();
    const Matrix& g = net.G();
    const Matrix& b = net.B();
    Matrix jac(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double vi = y.V[i];
        jac(i, n + i) = 2.0 * g(i, i) * vi;        // dP_i/dV_i
        jac(n + i, n + i) = -2.0 * b(i, i) * vi;   // dQ_i/dV_i
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double gij = g(i, j), bij = b(i, j);
            if (gij == 0.0 && bij == 0.0) continue;
            const double d = y.theta[i] - y.theta[j];
            const double s = std::sin(d), c = std::cos(d);
            const double vj = y.V[j];
            const double vv = vi * vj;
            // P_i
            jac(i, i) += vv * (-gij * s + bij * c);
            jac(i, j) = vv * (gij * s - bij * c);
            jac(i, n + i) += vj * (gij * c + bij * s);
            jac(i, n + j) = vi * (gij * c + bij * s);
            // Q_i
            jac(n + i, i) += vv * (gij * c + bij * s);
            jac(n + i, j) = -vv * (gij * c + bij * s);
            jac(n + i, n + i) += vj * (gij * s - bij * c);
            jac(n + i, n + j) = vi * (gij * s - bij * c);
        }
    }
    return jac;
}

double energy_W(const NetworkModel& net, const VoltagePhasorVector& y, EnergyMode mode) {
    require_energy_mode(net, mode);
    const std::size_t n = net.size();
    const Matrix& b = net.B();
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w -= 0.5 * b(i, i) * y.V[i] * y.V[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (b(i, j) == 0.0) continue;
            w -= b(i, j) * y.V[i] * y.V[j] * std::cos(y.theta[i] - y.theta[j]);
        }
    }
    return w;
}

Vector gradient_W(const NetworkModel& net, const VoltagePhasorVector& y, EnergyMode mode) {
    require_energy_mode(net, mode);
    const std::size_t n = net.size();
    const Matrix& b = net.B();
    Vector grad(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        grad[n + i] = -b(i, i) * y.V[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || b(i, j) == 0.0) continue;
            const double d = y.theta[i] - y.theta[j];
            grad[i] += b(i, j) * y.V[i] * y.V[j] * std::sin(d);
            grad[n + i] -= b(i, j) * y.V[j] * std::cos(d);
        }
    }
    return grad;
}

Matrix hessian_W(const NetworkModel& net, const VoltagePhasorVector& y, EnergyMode mode) {
    require_energy_mode(net, mode);
    const std::size_t n = net.size();
    const Matrix& b = net.B();
    Matrix h(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        h(n + i, n + i) = -b(i, i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || b(i, j) == 0.0) continue;
            const double d = y.theta[i] - y.theta[j];
            const double s = std::sin(d), c = std::cos(d);
            const double bij = b(i, j);
            const double vi = y.V[i], vj = y.V[j];
            const double vv = vi * vj;  // commutes exactly, so h(i, j) == h(j, i) bitwise
            h(i, i) += bij * vv * c;
            h(i, j) = -bij * vv * c;
            h(i, n + i) += bij * vj * s;
            h(i, n + j) = bij * vi * s;
            h(n + i, i) += bij * vj * s;
            h(n + j, i) = bij * vi * s;
            h(n + i, n + j) = -bij * c;
        }
    }
    return h;
}

}  // namespace gridpass
