#pragma once

// Forward integration of learned models and the error metrics e_u, eps_xt, e_train.

#include "sldo/learner.hpp"
#include "sldo/refsim.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sldo {

inline constexpr double kBlowUpGuard = 1e6;

struct Forecast {
    SnapshotSet trajectory;                 // partial when blown up (includes the offending state)
    std::optional<std::size_t> blowup_step; // first step with max|u| > guard or a non-finite entry
    bool flagged() const { return blowup_step.has_value(); }
};

/// Forward Euler on an arbitrary semi-discrete form with a max-norm guard.
Forecast integrate_form(const SemiDiscreteForm& form, const Eigen::VectorXd& u0, double dt, std::size_t steps,
                        double guard = kBlowUpGuard);
Forecast integrate_model(const LearnedModel& model, const Eigen::VectorXd& u0, double dt, std::size_t steps,
                         double guard = kBlowUpGuard);

struct ErrorSeries {
    std::vector<double> times;
    std::vector<double> e_u;     // NaN where the reference norm is zero
    std::vector<bool> defined;
};

/// e_u(t) = ||u(t) - u_m(t)||^2 / ||u(t)||^2 over the common prefix of both trajectories.
ErrorSeries relative_error_series(const SnapshotSet& ref, const SnapshotSet& model_traj);

/// ||U - U_m||_F / ||U||_F. Returns +inf when `flagged`; shapes must match otherwise.
double total_error(const SnapshotSet& ref, const SnapshotSet& model_traj, bool flagged = false);

/// Sum over snapshots and DOFs of (du/dt - model rhs(u))^2.
double training_error(const SnapshotSet& snap, const LearnedModel& model);

/// Mean over DOFs of each offset's coefficient, times dx. All rows must share one stencil.
std::vector<double> averaged_stencil(const AssembledOperator& op, double dx);
/// First block of a 1-D model.
std::vector<double> averaged_stencil(const LearnedModel& model, double dx);

struct ErrorReport {
    ErrorSeries series;
    double eps_xt = 0.0;
    double e_train = 0.0;
    double extrapolation_start = 0.0;  // last training time
    std::optional<std::size_t> blowup_step;
    double max_norm_ratio = 0.0;       // max_t ||u_m(t)|| / ||u(0)||
};

ErrorReport evaluate_forecast(const SnapshotSet& ref, const Forecast& fc, double training_end);

/// `t,e_u` rows.
void write_error_series_csv(std::ostream& os, const ErrorSeries& s);

}  // namespace sldo
