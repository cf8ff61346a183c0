#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msde {

using Vector = std::vector<double>;

/// Dense row-major matrix. Dimensions in this toolkit are small (d1, d2 of a
/// few units), so storage is a flat vector without expression templates.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n, double scale = 1.0) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Error taxonomy. The CLI maps NumericError to exit code 1 and
// ConfigError / ContractViolation to exit code 2.

/// A caller broke an operation's precondition (dimension mismatch, bad range).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid or incomplete configuration: missing constants, schema errors,
/// unknown model ids.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure during an experiment (explosion, non-PSD covariance).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A trajectory produced a non-finite value.
class NumericOverflow : public NumericError {
public:
    NumericOverflow(const std::string& what, std::size_t step, Vector last_finite)
        : NumericError(what), step_(step), last_finite_(std::move(last_finite)) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }
    [[nodiscard]] const Vector& last_finite_state() const noexcept { return last_finite_; }

private:
    std::size_t step_;
    Vector last_finite_;
};

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw ContractViolation(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
    }
}

[[nodiscard]] inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

[[nodiscard]] inline double norm2(std::span<const double> a) { return dot(a, a); }

}  // namespace msde
