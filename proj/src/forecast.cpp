#include "sldo/forecast.hpp"

#include "sldo/csv.hpp"
#include "sldo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace sldo {

Forecast integrate_form(const SemiDiscreteForm& form, const Eigen::VectorXd& u0, double dt, std::size_t steps,
                        double guard) {
    if (!(dt > 0.0)) throw DimensionError("integrate: dt must be positive");
    const auto n = u0.size();
    Forecast fc;
    SnapshotSet& s = fc.trajectory;
    s.meta.nx = static_cast<std::size_t>(n);
    s.meta.dt = dt;
    s.states.resize(n, static_cast<Eigen::Index>(steps + 1));
    s.rhs.resize(n, static_cast<Eigen::Index>(steps + 1));
    s.times.reserve(steps + 1);

    Eigen::VectorXd u = u0;
    std::size_t k = 0;
    for (; k <= steps; ++k) {
        const Eigen::VectorXd du = form.rhs(u);
        s.times.push_back(static_cast<double>(k) * dt);
        s.states.col(static_cast<Eigen::Index>(k)) = u;
        s.rhs.col(static_cast<Eigen::Index>(k)) = du;
        const double mx = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
        if (!(mx <= guard)) {  // also catches NaN
            fc.blowup_step = k;
            ++k;
            break;
        }
        if (k < steps) u = u + dt * du;
    }
    const auto kept = static_cast<Eigen::Index>(std::min(k, steps + 1));
    s.states.conservativeResize(n, kept);
    s.rhs.conservativeResize(n, kept);
    return fc;
}

Forecast integrate_model(const LearnedModel& model, const Eigen::VectorXd& u0, double dt, std::size_t steps,
                         double guard) {
    if (static_cast<std::size_t>(u0.size()) != model.lattice.size())
        throw DimensionError("integrate_model: initial state does not match the model grid");
    Forecast fc = integrate_form(model.form(), u0, dt, steps, guard);
    fc.trajectory.meta.nx = model.lattice.nx();
    fc.trajectory.meta.ny = model.lattice.ny();
    fc.trajectory.meta.case_name = std::string(to_string(model.kind));
    fc.trajectory.meta.phys = model.phys;
    return fc;
}

ErrorSeries relative_error_series(const SnapshotSet& ref, const SnapshotSet& model_traj) {
    if (ref.states.rows() != model_traj.states.rows())
        throw DimensionError("relative_error_series: trajectories have different DOF counts");
    const std::size_t nt = std::min(ref.count(), model_traj.count());
    ErrorSeries es;
    es.times.assign(ref.times.begin(), ref.times.begin() + static_cast<std::ptrdiff_t>(nt));
    es.e_u.resize(nt);
    es.defined.resize(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        const double den = ref.states.col(c).squaredNorm();
        const double num = (ref.states.col(c) - model_traj.states.col(c)).squaredNorm();
        es.defined[k] = den > 0.0;
        es.e_u[k] = den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
    }
    return es;
}

double total_error(const SnapshotSet& ref, const SnapshotSet& model_traj, bool flagged) {
    if (flagged) return std::numeric_limits<double>::infinity();
    if (ref.states.rows() != model_traj.states.rows() || ref.states.cols() != model_traj.states.cols())
        throw DimensionError("total_error: trajectory shapes differ");
    const double den = ref.states.norm();
    if (den == 0.0) throw DimensionError("total_error: reference trajectory is identically zero");
    return (ref.states - model_traj.states).norm() / den;
}

double training_error(const SnapshotSet& snap, const LearnedModel& model) {
    if (snap.dofs() != model.lattice.size()) throw DimensionError("training_error: grid mismatch");
    const SemiDiscreteForm f = model.form();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < snap.states.cols(); ++k)
        acc += (snap.rhs.col(k) - f.rhs(snap.states.col(k))).squaredNorm();
    return acc;
}

std::vector<double> averaged_stencil(const AssembledOperator& op, double dx) {
    if (op.n() == 0) return {};
    const StencilSpec& s = op.row(0).stencil;
    std::vector<double> avg(s.size(), 0.0);
    for (const auto& r : op.rows()) {
        if (!(r.stencil == s)) throw DimensionError("averaged_stencil: rows use different stencils");
        for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += r.coeffs[k];
    }
    for (double& v : avg) v = v / static_cast<double>(op.n()) * dx;
    return avg;
}

std::vector<double> averaged_stencil(const LearnedModel& model, double dx) {
    if (!model.lattice.is_line()) throw DimensionError("averaged_stencil: 1-D models only");
    return averaged_stencil(model.operators.at(0), dx);
}

ErrorReport evaluate_forecast(const SnapshotSet& ref, const Forecast& fc, double training_end) {
    ErrorReport r;
    r.series = relative_error_series(ref, fc.trajectory);
    r.blowup_step = fc.blowup_step;
    r.extrapolation_start = training_end;
    if (fc.flagged()) {
        r.eps_xt = std::numeric_limits<double>::infinity();
    } else {
        r.eps_xt = total_error(ref, fc.trajectory);
    }
    const double n0 = fc.trajectory.states.col(0).norm();
    double mx = 0.0;
    for (Eigen::Index k = 0; k < fc.trajectory.states.cols(); ++k) mx = std::max(mx, fc.trajectory.states.col(k).norm());
    r.max_norm_ratio = n0 > 0.0 ? mx / n0 : (mx > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return r;
}

void write_error_series_csv(std::ostream& os, const ErrorSeries& s) {
    os << "t,e_u\n";
    for (std::size_t k = 0; k < s.e_u.size(); ++k) os << format_double(s.times[k]) << ',' << format_double(s.e_u[k]) << '\n';
}

}  // namespace sldo
