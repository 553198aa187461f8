#include "gridpass/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gridpass/errors.hpp"

namespace gridpass {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double Matrix::norm_inf() const {
    double best = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) row += std::abs((*this)(i, j));
        best = std::max(best, row);
    }
    return best;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator*=(double c) {
    for (auto& v : data_) v *= c;
    return *this;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    Matrix r = a;
    for (std::size_t k = 0; k < r.data_.size(); ++k) r.data_[k] += b.data_[k];
    return r;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    Matrix r = a;
    for (std::size_t k = 0; k < r.data_.size(); ++k) r.data_[k] -= b.data_[k];
    return r;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix r(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
        }
    return r;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
    Vector r(a.rows_, 0.0);
    for (std::size_t i = 0; i < a.rows_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols_; ++j) acc += a(i, j) * x[j];
        r[i] = acc;
    }
    return r;
}

double norm_inf(std::span<const double> v) {
    double best = 0.0;
    for (double x : v) best = std::max(best, std::abs(x));
    return best;
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

namespace {

struct LuFactors {
    Matrix lu;
    std::vector<std::size_t> perm;
    int swaps = 0;
    bool singular = false;
};

LuFactors lu_factor(const Matrix& a) {
    const std::size_t n = a.rows();
    LuFactors f{a, std::vector<std::size_t>(n), 0, false};
    std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
    const double pivot_floor = 1e-12 * a.norm_inf();
    Matrix& m = f.lu;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(m(i, k)) > std::abs(m(p, k))) p = i;
        if (std::abs(m(p, k)) < pivot_floor || m(p, k) == 0.0) {
            f.singular = true;
            return f;
        }
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
            std::swap(f.perm[k], f.perm[p]);
            ++f.swaps;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double l = m(i, k) / m(k, k);
            m(i, k) = l;
            if (l == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) m(i, j) -= l * m(k, j);
        }
    }
    return f;
}

}  // namespace

Vector solve_linear(const Matrix& a, std::span<const double> b) {
    if (!a.square() || a.rows() != b.size())
        throw NumericalError("solve_linear: dimension mismatch");
    const std::size_t n = a.rows();
    const LuFactors f = lu_factor(a);
    if (f.singular) throw SingularMatrix("solve_linear: pivot below 1e-12 * ||A||_inf");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = b[f.perm[i]];
        for (std::size_t j = 0; j < i; ++j) acc -= f.lu(i, j) * x[j];
        x[i] = acc;
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = x[ii];
        for (std::size_t j = ii + 1; j < n; ++j) acc -= f.lu(ii, j) * x[j];
        x[ii] = acc / f.lu(ii, ii);
    }
    return x;
}

double determinant(const Matrix& a) {
    if (!a.square()) throw NumericalError("determinant: matrix not square");
    const LuFactors f = lu_factor(a);
    if (f.singular) return 0.0;
    double det = (f.swaps % 2 == 0) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < a.rows(); ++i) det *= f.lu(i, i);
    return det;
}

SymmetricEigen eig_symmetric(const Matrix& input) {
    if (!input.square()) throw NotSymmetric("eig_symmetric: matrix not square");
    const std::size_t n = input.rows();
    if ((input - input.transposed()).norm_inf() >= 1e-9)
        throw NotSymmetric("eig_symmetric: ||A - A^T||_inf >= 1e-9");

    // Work on the exactly symmetrized matrix so rotations stay consistent.
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
    Matrix v = Matrix::identity(n);

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };
    double fro = 0.0;
    for (double x : a.data()) fro += x * x;
    const double target = 1e-12 * std::max(1.0, std::sqrt(fro));

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    while (off_norm() >= target) {
        if (++sweep > kMaxSweeps) throw NoConvergence("eig_symmetric: Jacobi sweeps exhausted", sweep);
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

namespace {

// 1-based square work array; the QR kernel below is easier to keep correct
// with the classical index conventions.
class OneBased {
public:
    explicit OneBased(const Matrix& m) : n_(m.rows()), a_((n_ + 1) * (n_ + 1), 0.0) {
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) (*this)(i + 1, j + 1) = m(i, j);
    }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * (n_ + 1) + j]; }

private:
    std::size_t n_;
    std::vector<double> a_;
};

void balance(OneBased& a, std::size_t n) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 1; i <= n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 1; j <= n; ++j) a(i, j) *= g;
                for (std::size_t j = 1; j <= n; ++j) a(j, i) *= f;
            }
        }
    }
}

// Householder reduction to upper Hessenberg form (similarity transform).
void to_hessenberg(OneBased& a, std::size_t n) {
    std::vector<double> u(n + 1);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        double alpha = 0.0;
        for (std::size_t i = k + 1; i <= n; ++i) alpha += a(i, k) * a(i, k);
        alpha = std::sqrt(alpha);
        if (alpha == 0.0) continue;
        if (a(k + 1, k) > 0.0) alpha = -alpha;
        std::fill(u.begin(), u.end(), 0.0);
        for (std::size_t i = k + 1; i <= n; ++i) u[i] = a(i, k);
        u[k + 1] -= alpha;
        double unorm2 = 0.0;
        for (std::size_t i = k + 1; i <= n; ++i) unorm2 += u[i] * u[i];
        if (unorm2 == 0.0) continue;
        // A <- (I - 2uu^T/|u|^2) A (I - 2uu^T/|u|^2)
        for (std::size_t j = 1; j <= n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i <= n; ++i) s += u[i] * a(i, j);
            s = 2.0 * s / unorm2;
            for (std::size_t i = k + 1; i <= n; ++i) a(i, j) -= s * u[i];
        }
        for (std::size_t i = 1; i <= n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j <= n; ++j) s += a(i, j) * u[j];
            s = 2.0 * s / unorm2;
            for (std::size_t j = k + 1; j <= n; ++j) a(i, j) -= s * u[j];
        }
        for (std::size_t i = k + 2; i <= n; ++i) a(i, k) = 0.0;
    }
}

double sign_of(double magnitude, double sign) { return sign >= 0.0 ? std::abs(magnitude) : -std::abs(magnitude); }

}  // namespace

std::vector<std::complex<double>> eig_general(const Matrix& input) {
    if (!input.square()) throw NumericalError("eig_general: matrix not square");
    const std::size_t n = input.rows();
    if (n == 0) return {};
    if (!input.all_finite()) throw NumericalError("eig_general: non-finite entry");

    OneBased a(input);
    balance(a, n);
    to_hessenberg(a, n);

    std::vector<double> wr(n + 1, 0.0), wi(n + 1, 0.0);
    double anorm = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = std::max<std::size_t>(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

    const int budget = static_cast<int>(100 * n);
    int total_iterations = 0;
    long nn = static_cast<long>(n);
    double t = 0.0;
    double p = 0.0, q = 0.0, r = 0.0, s = 0.0, w = 0.0, x = 0.0, y = 0.0, z = 0.0;
    while (nn >= 1) {
        int its = 0;
        long l = 0;
        do {
            for (l = nn; l >= 2; --l) {
                s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) + s == s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            x = a(nn, nn);
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                --nn;
            } else {
                y = a(nn - 1, nn - 1);
                w = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign_of(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) wr[nn] = x - w / z;
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn - 1] = z;
                        wi[nn] = -z;
                    }
                    nn -= 2;
                } else {
                    if (++total_iterations > budget)
                        throw NoConvergence("eig_general: QR iteration budget exhausted", total_iterations);
                    if (its == 10 || its == 20) {
                        // exceptional shift
                        t += x;
                        for (long i = 1; i <= nn; ++i) a(i, i) -= x;
                        s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    long m = nn - 2;
                    for (; m >= l; --m) {
                        z = a(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - r - s;
                        r = a(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
                        if (u + v == v) break;
                    }
                    for (long i = m + 2; i <= nn; ++i) {
                        a(i, i - 2) = 0.0;
                        if (i != m + 2) a(i, i - 3) = 0.0;
                    }
                    for (long k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = 0.0;
                            if (k != nn - 1) r = a(k + 2, k - 1);
                            if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
                            if (k == m) {
                                if (l != m) a(k, k - 1) = -a(k, k - 1);
                            } else {
                                a(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (long j = k; j <= nn; ++j) {
                                p = a(k, j) + q * a(k + 1, j);
                                if (k != nn - 1) {
                                    p += r * a(k + 2, j);
                                    a(k + 2, j) -= p * z;
                                }
                                a(k + 1, j) -= p * y;
                                a(k, j) -= p * x;
                            }
                            const long mmin = nn < k + 3 ? nn : k + 3;
                            for (long i = l; i <= mmin; ++i) {
                                p = x * a(i, k) + y * a(i, k + 1);
                                if (k != nn - 1) {
                                    p += z * a(i, k + 2);
                                    a(i, k + 2) -= p * r;
                                }
                                a(i, k + 1) -= p * q;
                                a(i, k) -= p;
                            }
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }

    std::vector<std::complex<double>> out;
    out.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
    return out;
}

}  // namespace gridpass
