#pragma once

// Dense spectra, Gershgorin discs and stability classification of du/dt = -A u.

#include "sldo/gridops.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <vector>

namespace sldo {

inline constexpr std::size_t kDenseCap = 1024;
inline constexpr double kStabilityTol = 1e-8;

struct Disc {
    double center = 0.0;
    double radius = 0.0;
};

struct SpectralReport {
    std::vector<std::complex<double>> eigenvalues;  // of A, sorted by (re, im)
    double max_real_part_neg_op = 0.0;              // max Re(lambda(-A))
    std::vector<Disc> discs;
    bool stable = true;
    double tol = kStabilityTol;
};

/// Diagonal similarity scaling (powers of two) that equalizes row and column norms.
/// Returns the balanced matrix; the spectrum is unchanged.
Eigen::MatrixXd balance(const Eigen::MatrixXd& a);

/// Eigenvalues of a real square matrix, sorted by (re, im).
/// Throws SpectralError if n exceeds `cap` or the QR iteration does not converge.
std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& a, std::size_t cap = kDenseCap);

std::vector<Disc> gershgorin_discs(const AssembledOperator& a);
std::vector<Disc> gershgorin_discs(const Eigen::MatrixXd& a);

/// Dense spectrum plus discs of `a`. Stable iff max Re(lambda(-A)) <= tol.
SpectralReport stability_report(const AssembledOperator& a, double tol = kStabilityTol, std::size_t cap = kDenseCap);
SpectralReport stability_report(const Eigen::MatrixXd& a, double tol = kStabilityTol, std::size_t cap = kDenseCap);

/// Discs only (no dense spectrum): `stable` means every disc of A lies in Re >= -tol,
/// a sufficient condition. max_real_part_neg_op is the disc bound max(r_i - c_i).
SpectralReport disc_report(const AssembledOperator& a, double tol = kStabilityTol);

/// `re,im` rows in the given order.
void write_eigenvalues_csv(std::ostream& os, const std::vector<std::complex<double>>& ev);
std::vector<std::complex<double>> read_eigenvalues_csv(std::istream& is);

}  // namespace sldo
