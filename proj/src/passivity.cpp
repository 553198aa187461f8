#include "gridpass/passivity.hpp"

#include <algorithm>
#include <cmath>

#include "gridpass/errors.hpp"
#include "gridpass/ode.hpp"

namespace gridpass {

PassivityReport lambda_from_hessian(const Matrix& hessian) {
    const std::size_t m = hessian.rows();
    const std::size_t n = m / 2;
    PassivityReport report;

    Vector shift(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) shift[i] = 1.0;
    report.structural_kernel_residual = norm_inf(hessian * shift);
    if (!(report.structural_kernel_residual < 1e-8))
        throw NumericalError("Hessian does not annihilate the uniform angle shift (residual " +
                             std::to_string(report.structural_kernel_residual) + ")");

    report.hessian_spectrum = eig_symmetric(hessian).values;

    // Reflector R = I - 2 w w^T / |w|^2 with R v = e_0 for v = col(1_n, 0_n)/sqrt(n).
    // Columns 1..m-1 of R span the complement of v.
    Vector w(m, 0.0);
    const double inv = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) w[i] = inv;
    w[0] -= 1.0;
    const double w2 = dot(w, w);
    Matrix reflector = Matrix::identity(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) reflector(i, j) -= 2.0 * w[i] * w[j] / w2;

    const Matrix rotated = reflector * hessian * reflector;
    Matrix projected(m - 1, m - 1);
    for (std::size_t i = 1; i < m; ++i)
        for (std::size_t j = 1; j < m; ++j) projected(i - 1, j - 1) = 0.5 * (rotated(i, j) + rotated(j, i));

    report.deflated_spectrum = eig_symmetric(projected).values;
    report.lambda = report.deflated_spectrum.front();
    report.deflated = true;
    return report;
}

PassivityReport network_lambda(const NetworkModel& net, const VoltagePhasorVector& y_star, EnergyMode mode) {
    return lambda_from_hessian(hessian_W(net, y_star, mode));
}

Vector supply_rate(const PowerInjectionVector& u, const PowerInjectionVector& u_star, const VoltagePhasorVector& y,
                   const VoltagePhasorVector& y_star, const VoltagePhasorVector& y_dot) {
    const std::size_t n = u.size();
    Vector w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = -(u.P[i] - u_star.P[i]) * y_dot.theta[i] -
               (u.Q[i] / y.V[i] - u_star.Q[i] / y_star.V[i]) * y_dot.V[i];
    }
    return w;
}

double storage_S_N(const NetworkModel& net, const VoltagePhasorVector& y, const VoltagePhasorVector& y_star,
                   double lambda, double epsilon, EnergyMode mode) {
    const Vector ys = y_star.stacked();
    const Vector yy = y.stacked();
    const Vector grad_star = gradient_W(net, y_star, mode);
    Vector dy(yy.size());
    for (std::size_t k = 0; k < yy.size(); ++k) dy[k] = yy[k] - ys[k];
    const double w_tilde = energy_W(net, y, mode) - dot(dy, grad_star) - energy_W(net, y_star, mode);
    return w_tilde - 0.5 * (lambda - epsilon) * dot(dy, dy);
}

double storage_S_N_rate(const NetworkModel& net, const VoltagePhasorVector& y, const VoltagePhasorVector& y_star,
                        const VoltagePhasorVector& y_dot, double lambda, double epsilon, EnergyMode mode) {
    const Vector grad = gradient_W(net, y, mode);
    const Vector grad_star = gradient_W(net, y_star, mode);
    const Vector yy = y.stacked();
    const Vector ys = y_star.stacked();
    const Vector yd = y_dot.stacked();
    double rate = 0.0;
    for (std::size_t k = 0; k < yy.size(); ++k)
        rate += (grad[k] - grad_star[k] - (lambda - epsilon) * (yy[k] - ys[k])) * yd[k];
    return rate;
}

double empirical_positivity_radius(const NetworkModel& net, const VoltagePhasorVector& y_star, double lambda,
                                   double epsilon, double max_radius, int steps, int samples_per_radius,
                                   std::mt19937_64& rng, EnergyMode mode) {
    const std::size_t n = y_star.size();
    const Vector ys = y_star.stacked();
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int s = steps; s >= 0; --s) {
        const double radius = max_radius / std::pow(2.0, s);
        for (int k = 0; k < samples_per_radius; ++k) {
            Vector d(2 * n);
            for (auto& v : d) v = unit(rng);
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += d[i];
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) d[i] -= mean;
            const double scale = norm_inf(d);
            if (scale == 0.0) continue;
            Vector y(2 * n);
            for (std::size_t i = 0; i < 2 * n; ++i) y[i] = ys[i] + radius * d[i] / scale;
            if (storage_S_N(net, VoltagePhasorVector::from_stacked(y), y_star, lambda, epsilon, mode) <= 0.0)
                return radius;
        }
    }
    return max_radius;
}

DeviceTrajectory record_device_trajectory(const DeviceModel& device, const Vector& x0, const InputSignal& input,
                                          double t_end, double step, int record_every) {
    if (!(step > 0.0) || record_every < 1) throw ConfigError("device trajectory needs step > 0 and record_every >= 1");
    Vector x = x0;
    Rk4Stepper rk(x.size());
    auto field = [&](double t, std::span<const double> xs, std::span<double> dx) {
        const auto [p, q] = input(t);
        rhs_into(device, xs, p, q, dx);
    };
    auto sample = [&](double t) {
        const auto [p, q] = input(t);
        return DeviceSample{t, x, p, q, rhs(device, x, p, q)};
    };
    DeviceTrajectory out;
    const auto steps = static_cast<long>(std::llround(t_end / step));
    out.push_back(sample(0.0));
    for (long k = 1; k <= steps; ++k) {
        rk.step(field, static_cast<double>(k - 1) * step, x, step);
        if (k % record_every == 0) out.push_back(sample(static_cast<double>(k) * step));
    }
    return out;
}

std::vector<DissipationResidual> dissipation_residuals(const DeviceModel& device, const DeviceTrajectory& trajectory,
                                                       double sigma) {
    const std::size_t ti = theta_index(device);
    const std::size_t vi = voltage_index(device);
    const BusOperatingPoint& eq = device.equilibrium;
    std::vector<DissipationResidual> out;
    out.reserve(trajectory.size());
    for (const auto& s : trajectory) {
        const double v = s.x[vi];
        if (!(v > 0.0)) throw DomainExit("trajectory left the device domain (V <= 0)", s.t);
        const double theta_dot = s.xdot[ti];
        const double v_dot = s.xdot[vi];
        const StorageSample st = storage_value_unchecked(device, s.x, s.xdot, sigma);
        const double supply = (s.P - eq.P) * theta_dot + (s.Q / v - eq.Q / eq.V) * v_dot;
        const double output_term = sigma * ((s.x[ti] - eq.theta) * theta_dot + (v - eq.V) * v_dot);
        out.push_back({st.rate + supply + output_term, -st.value});
    }
    return out;
}

DissipationResult check_dissipation(const DeviceModel& device, const DeviceTrajectory& trajectory, double sigma) {
    DissipationResult r{-HUGE_VAL, -HUGE_VAL, -HUGE_VAL};
    for (const auto& res : dissipation_residuals(device, trajectory, sigma)) {
        r.max_rate_violation = std::max(r.max_rate_violation, res.rate);
        r.max_storage_violation = std::max(r.max_storage_violation, res.storage);
    }
    if (trajectory.empty()) return {0.0, 0.0, 0.0};
    r.max_violation = std::max(r.max_rate_violation, r.max_storage_violation);
    return r;
}

}  // namespace gridpass
