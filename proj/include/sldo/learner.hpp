#pragma once

// Per-DOF learning of local operators: ridge regression (LDO) and the
// Gershgorin-constrained least-squares path (S-LDO).

#include "sldo/features.hpp"
#include "sldo/gridops.hpp"
#include "sldo/qpcore.hpp"
#include "sldo/refsim.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sldo {

struct RidgeConfig {
    double beta1 = 1e-3;  // linear blocks
    double beta2 = 1e-3;  // quadratic blocks
    void validate() const;
};

enum class Method { ldo, sldo };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

enum class ConstraintMode { linear_combined, burgers_linearized, advect2d_combined };
std::string_view to_string(ConstraintMode m);

/// Which combination of learned blocks must be diagonally dominant, and by how much.
struct StabilityConstraintSpec {
    ConstraintMode mode = ConstraintMode::linear_combined;
    std::optional<double> equilibrium;  // u0, required for burgers
    double margin = 0.0;
    PhysicalParams phys;

    void validate() const;
    static StabilityConstraintSpec for_case(CaseKind kind, const PhysicalParams& phys,
                                            std::optional<double> equilibrium = std::nullopt);
};

inline constexpr double kBurgersMargin = 1e-8;

/// Matrix M (q x p) mapping the stacked block coefficients theta to the constrained
/// row a = M theta on the union stencil of `layout` (q = union size).
Eigen::MatrixXd constraint_combination(const StabilityConstraintSpec& spec, const FeatureLayout& layout);

/// Linearized Burgers row on the union of `s_n` and `s_l`:
///   u0 * N_k (k != 0),  u0 * (N_0 + sum_k N_k) at the center,  minus nu * L.
std::vector<double> linearize_burgers(std::span<const double> n_coeffs, std::span<const double> l_coeffs, double u0,
                                      const StencilSpec& s_n, const StencilSpec& s_l, double nu);

ConstraintBlock build_stability_constraints(const StabilityConstraintSpec& spec, const FeatureLayout& layout);

/// (X'X + B) theta = X'y with B = beta1 on linear blocks and beta2 on quadratic blocks.
/// Throws SingularSystemError naming the DOF when the system is not positive definite.
Eigen::VectorXd solve_ldo(const RegressionProblem& p, const RidgeConfig& cfg);

struct SldoOptions {
    QPOptions qp;
    /// Ridge weight for the warm start that is then lifted onto the feasible set.
    double warm_start_beta = 1e-8;
};

struct SldoResult {
    Eigen::VectorXd theta;
    QPSolution qp;
};

/// Unregularized least squares subject to dominance of the constrained combination.
/// Throws SolverError (with the DOF) unless the QP reports optimal.
SldoResult solve_sldo(const RegressionProblem& p, const StabilityConstraintSpec& spec, const SldoOptions& opts = {});

struct DofDiagnostics {
    std::size_t dof = 0;
    std::string status = "optimal";
    int iterations = 0;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
    double dominance_slack = 0.0;  // of the constrained combination row
    double norm = 1.0;             // normalization scalar
};

struct LearnOptions {
    Method method = Method::ldo;
    int s1 = 3;
    int s2 = 3;
    RidgeConfig ridge;
    SldoOptions sldo;
    std::optional<double> equilibrium;  // Burgers u0 override; default is the mean training state
    std::optional<double> margin;       // default 0 for linear cases, kBurgersMargin for Burgers
    unsigned threads = 1;
};

/// A learned (or reference) semi-discrete model: one assembled operator per feature block.
struct LearnedModel {
    CaseKind kind = CaseKind::diffusion;
    Method method = Method::ldo;
    PhysicalParams phys;
    Lattice lattice;
    FeatureLayout layout;
    std::vector<AssembledOperator> operators;
    int s1 = 3, s2 = 3;
    RidgeConfig ridge;
    double tol = 1e-6;
    double margin = 0.0;
    double equilibrium = 0.0;
    double warm_start_beta = 0.0;
    std::vector<DofDiagnostics> diagnostics;

    /// du/dt = -(sum_b scale_b A_b u) - N z(u), matching the training feature map.
    SemiDiscreteForm form() const;
    /// Constraint spec matching this model (equilibrium and margin filled in).
    StabilityConstraintSpec constraint_spec() const;
    /// Assembled constrained combination on the union stencil (Burgers: linearized at u0).
    AssembledOperator combination() const;
    /// Stacked block coefficients of one DOF, in feature-column order.
    Eigen::VectorXd theta(std::size_t dof) const;
};

/// Reference discretization of a case wrapped as a model (exact generator stencils).
LearnedModel reference_model(const CaseParams& params);

/// Mean over all states and times.
double mean_state(const SnapshotSet& snap);

/// Builds, normalizes and solves one problem per DOF and assembles the rows.
/// Any per-DOF failure is rethrown as SolverError for the lowest failing DOF.
LearnedModel learn_model(const SnapshotSet& snap, CaseKind kind, const PhysicalParams& phys, const LearnOptions& opts);

/// Directory with one `<block>.csv` operator per block, `model.txt` metadata and
/// `diagnostics.csv` (dof,status,iterations,kkt_residual,max_violation,dominance_slack,norm).
void save_model(const std::filesystem::path& dir, const LearnedModel& m);
LearnedModel load_model(const std::filesystem::path& dir);

}  // namespace sldo
