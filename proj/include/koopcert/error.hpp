#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace koopcert {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error record.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] virtual const char* kind() const noexcept { return "error"; }
};

class InputError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* kind() const noexcept override { return "input"; }
};

class TruncationRankError : public Error {
public:
    TruncationRankError(std::size_t rank, double ratio)
        : Error("eigenvalue " + std::to_string(rank) + " of the Gram matrix is below the tolerance (ratio "
                + std::to_string(ratio) + "); lower the truncation rank"),
          rank_(rank), ratio_(ratio) {}
    [[nodiscard]] const char* kind() const noexcept override { return "truncation-rank"; }
    [[nodiscard]] std::size_t rank() const noexcept { return rank_; }
    [[nodiscard]] double ratio() const noexcept { return ratio_; }

private:
    std::size_t rank_;
    double ratio_;
};

class GapError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* kind() const noexcept override { return "spectral-gap"; }
};

class CertificateError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* kind() const noexcept override { return "certificate-invalid"; }
};

class NumericError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* kind() const noexcept override { return "numeric"; }
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(std::size_t step)
        : Error("non-finite or unbounded state at step " + std::to_string(step)), step_(step) {}
    [[nodiscard]] const char* kind() const noexcept override { return "divergence"; }
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class QuadratureError : public Error {
public:
    QuadratureError(const std::string& what, double achieved)
        : Error(what + " (achieved error estimate " + std::to_string(achieved) + ")"), achieved_(achieved) {}
    [[nodiscard]] const char* kind() const noexcept override { return "quadrature"; }
    [[nodiscard]] double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

class IoError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* kind() const noexcept override { return "io"; }
};

}  // namespace koopcert
