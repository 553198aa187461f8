#pragma once

// Dense linear algebra for the small matrices in this project (n <= ~40):
// LU solves for Newton steps, cyclic Jacobi for symmetric spectra and
// Hessenberg + Francis double-shift QR for general real spectra.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace gridpass {

using Vector = std::vector<double>;

/// Row-major dense real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    [[nodiscard]] Matrix transposed() const;
    [[nodiscard]] double norm_inf() const;  // max row sum
    [[nodiscard]] bool all_finite() const;

    Matrix& operator*=(double c);
    friend Matrix operator+(const Matrix& a, const Matrix& b);
    friend Matrix operator-(const Matrix& a, const Matrix& b);
    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend Matrix operator*(double c, Matrix a) { return a *= c; }
    friend Vector operator*(const Matrix& a, std::span<const double> x);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double norm_inf(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

/// Solves A x = b by LU with partial pivoting.
/// Throws SingularMatrix when a pivot falls below 1e-12 * ||A||_inf.
Vector solve_linear(const Matrix& a, std::span<const double> b);

/// Determinant through the same LU factorization (0 for singular input).
double determinant(const Matrix& a);

struct SymmetricEigen {
    Vector values;   // ascending
    Matrix vectors;  // column k pairs with values[k]
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below
/// 1e-12 (scaled by ||A|| when that exceeds one). Throws NotSymmetric when
/// ||A - A^T||_inf >= 1e-9.
SymmetricEigen eig_symmetric(const Matrix& a);

/// All eigenvalues of a real square matrix. Complex pairs come out
/// adjacent, positive imaginary part first. Throws NoConvergence after
/// 100 * n QR sweeps in total.
std::vector<std::complex<double>> eig_general(const Matrix& a);

}  // namespace gridpass
