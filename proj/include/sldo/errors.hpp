#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sldo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidStencilError : public Error { public: using Error::Error; };
class AssemblyError : public Error { public: using Error::Error; };
class DimensionError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class InsufficientDataError : public Error { public: using Error::Error; };
class ConstraintError : public Error { public: using Error::Error; };
class SpectralError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };

/// Invalid experiment configuration; carries the offending field and source line (0 if unknown).
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string field, int line)
        : Error(what), field_(std::move(field)), line_(line) {}
    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    std::string field_;
    int line_;
};

/// Raised when forward Euler data generation produces a non-finite state.
class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// A per-DOF solve failed. Carries the DOF so callers can report it.
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::size_t dof) : Error(what), dof_(dof) {}
    std::size_t dof() const noexcept { return dof_; }

private:
    std::size_t dof_;
};

/// Ridge system was singular (rank-deficient design with no regularization).
class SingularSystemError : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace sldo
