#pragma once

// Shared fixtures for the unit tests: random networks, finite differences
// and the bundled 3-bus case.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gridpass/harness.hpp"
#include "gridpass/netmodel.hpp"

namespace testsupport {

using gridpass::Matrix;
using gridpass::Vector;

inline std::string data_path(const std::string& name) { return std::string(GRIDPASS_DATA_DIR) + "/" + name; }

inline const gridpass::CaseFile& case3() {
    static const gridpass::CaseFile c = gridpass::load_case(data_path("case3.json"));
    return c;
}

/// Random connected network: a random spanning tree plus extra edges.
inline gridpass::NetworkModel random_network(std::mt19937_64& rng, std::size_t n, bool lossy) {
    std::uniform_real_distribution<double> x_dist(0.05, 0.5);
    std::uniform_real_distribution<double> r_dist(0.0, 0.05);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<gridpass::LineParams> lines;
    std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
    auto add = [&](std::size_t a, std::size_t b) {
        if (a == b || used[a][b]) return;
        used[a][b] = used[b][a] = true;
        lines.push_back({static_cast<int>(a), static_cast<int>(b), lossy ? r_dist(rng) : 0.0, x_dist(rng)});
    };
    for (std::size_t i = 1; i < n; ++i) add(i, std::uniform_int_distribution<std::size_t>(0, i - 1)(rng));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng) < 0.3) add(i, j);
    return gridpass::NetworkModel::build(lines, n);
}

inline gridpass::VoltagePhasorVector random_point(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> th(-M_PI / 2, M_PI / 2);
    std::uniform_real_distribution<double> v(0.8, 1.2);
    gridpass::VoltagePhasorVector y{Vector(n), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
        y.theta[i] = th(rng);
        y.V[i] = v(rng);
    }
    return y;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, Vector x, double h) {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

inline Matrix fd_hessian(const std::function<double(const Vector&)>& f, Vector x, double h) {
    const std::size_t m = x.size();
    Matrix H(m, m);
    const double f0 = f(x);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double v;
            if (i == j) {
                const double xi = x[i];
                x[i] = xi + h;
                const double fp = f(x);
                x[i] = xi - h;
                const double fm = f(x);
                x[i] = xi;
                v = (fp - 2 * f0 + fm) / (h * h);
            } else {
                auto at = [&](double si, double sj) {
                    const double xi = x[i], xj = x[j];
                    x[i] += si * h;
                    x[j] += sj * h;
                    const double r = f(x);
                    x[i] = xi;
                    x[j] = xj;
                    return r;
                };
                v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h * h);
            }
            H(i, j) = H(j, i) = v;
        }
    }
    return H;
}

/// Column-wise central differences of a vector field.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, Vector x, double h) {
    const Vector f0 = f(x);
    Matrix J(f0.size(), x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double xj = x[j];
        x[j] = xj + h;
        const Vector fp = f(x);
        x[j] = xj - h;
        const Vector fm = f(x);
        x[j] = xj;
        for (std::size_t i = 0; i < f0.size(); ++i) J(i, j) = (fp[i] - fm[i]) / (2 * h);
    }
    return J;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Uniform sigma = -lambda + rho on every bus.
inline Vector uniform_sigma(const gridpass::OperatingPoint& op, double rho) {
    return Vector(op.net.size(), -op.passivity.lambda + rho);
}

}  // namespace testsupport
