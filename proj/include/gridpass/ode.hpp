#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gridpass {

/// Classical fixed-step fourth-order Runge-Kutta with reusable stage storage.
/// The vector field is called as f(t, x, dx).
class Rk4Stepper {
public:
    explicit Rk4Stepper(std::size_t n) : k1_(n), k2_(n), k3_(n), k4_(n), tmp_(n) {}

    template <class Field>
    void step(Field&& f, double t, std::span<double> x, double h) {
        const std::size_t n = x.size();
        f(t, std::span<const double>(x), std::span<double>(k1_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
        f(t + 0.5 * h, std::span<const double>(tmp_), std::span<double>(k2_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
        f(t + 0.5 * h, std::span<const double>(tmp_), std::span<double>(k3_));
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * k3_[i];
        f(t + h, std::span<const double>(tmp_), std::span<double>(k4_));
        for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

private:
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace gridpass
