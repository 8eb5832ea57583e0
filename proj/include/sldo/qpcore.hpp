#pragma once

// Convex quadratic programs with linear inequality constraints:
//     minimize 0.5 x'Hx + g'x   subject to   Gx <= h.

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace sldo {

struct QuadraticProgram {
    Eigen::MatrixXd H;  // p x p, symmetric positive semidefinite
    Eigen::VectorXd g;  // p
    Eigen::MatrixXd G;  // m x p
    Eigen::VectorXd h;  // m

    std::size_t variables() const { return static_cast<std::size_t>(g.size()); }
    std::size_t constraints() const { return static_cast<std::size_t>(h.size()); }
    double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
    /// Throws DimensionError on inconsistent sizes or an asymmetric H (1e-10 relative).
    void validate() const;
};

enum class QPStatus { optimal, max_iter, numerical_failure };
std::string_view to_string(QPStatus s);

struct QPOptions {
    double tol = 1e-6;
    int max_iter = 500;
    /// Relative Tikhonov shift added to H inside the solver so that every
    /// equality-constrained subproblem is strictly convex (slack variables
    /// carry no curvature of their own).
    double regularization = 1e-12;
    bool record_trace = false;
};

struct QPTraceRow {
    int iter = 0;
    double objective = 0.0;
    double kkt_residual = 0.0;
};

struct QPSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd multipliers;            // one per constraint, zero when inactive
    double objective = 0.0;
    double kkt_residual = 0.0;              // max of stationarity, feasibility, dual sign, complementarity
    double max_violation = 0.0;             // max(Gx - h), signed
    std::vector<std::size_t> active_set;    // final working set
    int iterations = 0;
    QPStatus status = QPStatus::numerical_failure;
    std::vector<QPTraceRow> trace;
};

/// Primal active-set method started from a feasible point x0.
/// Throws ConstraintError if x0 violates Gx <= h by more than round-off.
QPSolution qp_solve(const QuadraticProgram& qp, const Eigen::VectorXd& x0, const QPOptions& opts = {});
/// Starts from the origin, which must be feasible.
QPSolution qp_solve(const QuadraticProgram& qp, const QPOptions& opts = {});

void write_trace_csv(std::ostream& os, const std::vector<QPTraceRow>& trace);

/// Linear encoding of the diagonal-dominance condition
///     a_c - sum_{j != c} |a_j| >= margin,   a = M theta,
/// over variables x = [theta; t] with one slack t per off-center entry of a:
///     rows 2r, 2r+1:  +a_j - t_r <= 0,  -a_j - t_r <= 0
///     last row:       sum_r t_r - a_c <= -margin
struct ConstraintBlock {
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    std::size_t decision_vars = 0;
    std::size_t slack_vars = 0;
    std::size_t center = 0;
    double margin = 0.0;

    std::size_t variables() const { return decision_vars + slack_vars; }
};

ConstraintBlock absval_reformulate(const Eigen::MatrixXd& combo, std::size_t center, double margin);
/// Identity combination: the decision vector itself is constrained.
ConstraintBlock absval_reformulate(std::size_t p_dim, std::size_t center, double margin);

/// Feasible point for a dominance block: a = combo * theta0 is made dominant by
/// moving one decision variable that only feeds the center entry (the one with the
/// largest coefficient there), then slacks are set to |a_j|.
/// Throws ConstraintError if no such variable exists.
Eigen::VectorXd dominance_start(const Eigen::MatrixXd& combo, std::size_t center, double margin,
                                const Eigen::VectorXd& theta0);

/// a_c - sum_{j != c} |a_j|; nonnegative when the row is dominant.
double dominance_slack(const Eigen::VectorXd& row, std::size_t center);

}  // namespace sldo
