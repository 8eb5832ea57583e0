#pragma once

// Reference discretizations, initial conditions and forward-Euler data generation.

#include "sldo/gridops.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace sldo {

enum class CaseKind { diffusion, advection, advection_diffusion, burgers, advection2d };
enum class RhsSource { exact, finite_difference };

std::string_view to_string(CaseKind k);
std::string_view to_string(RhsSource s);
CaseKind parse_case_kind(std::string_view s);
RhsSource parse_rhs_source(std::string_view s);

/// Known physical constants: 1-D velocity c, diffusivity nu, 2-D velocity (cx, cy).
struct PhysicalParams {
    double c = 0.0;
    double nu = 0.0;
    double cx = 0.0;
    double cy = 0.0;
};

/// Gaussian pulse used by the linear cases. 1-D: exp(-(x-x0)^2 / (2 sigma^2)).
/// 2-D: exp(-((x-x0)^2 + (y-y0)^2)), sigma unused.
struct PulseParams {
    double x0 = 2.5;
    double y0 = 5.0;
    double sigma = 0.5;
};

struct CaseParams {
    CaseKind kind = CaseKind::diffusion;
    PhysicalParams phys;
    std::variant<Grid1D, Grid2D> grid;
    double dt = 0.04;
    std::size_t n_snapshots = 500;
    std::uint64_t seed = 0;
    PulseParams pulse;
    double random_mean = 0.3;    // Burgers initial field
    double random_stddev = 0.2;
    RhsSource rhs_source = RhsSource::exact;

    /// Default setup for each case (grid sizes, dt, snapshot counts, constants).
    static CaseParams canonical(CaseKind kind);

    Lattice lattice() const;
    const Grid1D& grid1d() const;
    const Grid2D& grid2d() const;
    bool is_two_dimensional() const { return kind == CaseKind::advection2d; }
    /// Throws DimensionError on inconsistent parameters.
    void validate() const;
};

struct SnapshotMeta {
    std::string case_name;
    PhysicalParams phys;
    std::size_t nx = 0, ny = 1;
    double lx = 0.0, ly = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    RhsSource rhs_source = RhsSource::exact;
};

/// Time-stamped states u(t_j) and derivatives du/dt(t_j); both n x n_t.
struct SnapshotSet {
    std::vector<double> times;
    Eigen::MatrixXd states;
    Eigen::MatrixXd rhs;
    SnapshotMeta meta;

    std::size_t count() const { return times.size(); }
    std::size_t dofs() const { return static_cast<std::size_t>(states.rows()); }
    Lattice lattice() const { return {meta.nx, meta.ny}; }
    /// First `count` snapshots.
    SnapshotSet head(std::size_t count) const;
};

/// Linear-plus-quadratic semi-discrete form
///     du/dt = -sum_k weight_k (A_k u) - (N z(u)),  (N z(u))_i = u_i * sum_j N_ij u_j.
struct SemiDiscreteForm {
    struct Term {
        double weight = 1.0;
        AssembledOperator op;
    };
    std::vector<Term> linear;
    std::optional<AssembledOperator> quadratic;

    Eigen::VectorXd rhs(const Eigen::VectorXd& u) const;
};

/// N z(u) for a quadratic operator whose features are u_i * u_{i+k}.
Eigen::VectorXd apply_quadratic(const AssembledOperator& n_op, const Eigen::VectorXd& u);

/// (L1, L2): backward difference [-1, 1, 0]/dx and centered second difference [1, -2, 1]/dx^2.
std::pair<AssembledOperator, AssembledOperator> reference_operator_1d(const Grid1D& grid);
/// (Lx, Ly): backward differences along x and y.
std::pair<AssembledOperator, AssembledOperator> reference_operator_2d(const Grid2D& grid);
/// Centered convection operator [-1, 0, 1]/(2 dx) acting on quadratic features.
AssembledOperator reference_burgers_convection(const Grid1D& grid);

Eigen::VectorXd burgers_rhs(const Eigen::VectorXd& u, double nu, const Grid1D& grid);

SemiDiscreteForm reference_form(const CaseParams& params);

double gaussian_pulse_1d(double x, const PulseParams& p);
double gaussian_pulse_2d(double x, double y, const PulseParams& p);

/// Seeded normal draws: mt19937_64 words mapped to doubles in (0, 1] with 53-bit
/// resolution, then Box-Muller (cosine branch only, one word pair per sample).
std::vector<double> normal_samples(std::uint64_t seed, std::size_t count, double mean, double stddev);

Eigen::VectorXd initial_condition(const CaseParams& params);

using RhsFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// u^{k+1} = u^k + dt f(u^k); stores steps + 1 states and the exact f(u^k) at each.
/// Throws BlowUpError carrying the step index if a state becomes non-finite.
SnapshotSet forward_euler(const RhsFn& f, const Eigen::VectorXd& u0, double dt, std::size_t steps);

/// Second-order central differences in the interior, second-order one-sided at the ends.
Eigen::MatrixXd fd_time_derivative(const Eigen::MatrixXd& states, double dt);

/// Integrates the reference form from the case initial condition for `steps` steps.
/// With rhs_source = finite_difference the rhs field is replaced by time differences.
SnapshotSet generate_case(const CaseParams& params, std::size_t steps);
/// Training window: n_snapshots states.
SnapshotSet generate_training(const CaseParams& params);

/// Files <prefix>_states.csv, <prefix>_rhs.csv (wide: one row per DOF, one column per
/// timestamp) and <prefix>_meta.txt (key = value).
void write_snapshots(const std::filesystem::path& dir, const std::string& prefix, const SnapshotSet& s);
SnapshotSet read_snapshots(const std::filesystem::path& dir, const std::string& prefix);

}  // namespace sldo
