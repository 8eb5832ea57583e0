#include "sldo/qpcore.hpp"

#include "sldo/csv.hpp"
#include "sldo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace sldo {

std::string_view to_string(QPStatus s) {
    switch (s) {
        case QPStatus::optimal: return "optimal";
        case QPStatus::max_iter: return "max-iter";
        case QPStatus::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

void QuadraticProgram::validate() const {
    const auto p = g.size();
    if (H.rows() != p || H.cols() != p) throw DimensionError("QP: H must be p x p");
    if (G.cols() != p && G.rows() > 0) throw DimensionError("QP: G must have p columns");
    if (G.rows() != h.size()) throw DimensionError("QP: G and h row counts differ");
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if (p > 0 && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw DimensionError("QP: H is not symmetric");
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Kkt {
    VectorXd lambda;
    double residual = 0.0;
    double violation = 0.0;
};

// Multipliers for the working set from A_W' lambda = -(Hx + g), least squares.
VectorXd working_multipliers(const MatrixXd& aw, const VectorXd& grad) {
    if (aw.rows() == 0) return {};
    return aw.transpose().colPivHouseholderQr().solve(-grad);
}

Kkt evaluate_kkt(const QuadraticProgram& qp, const VectorXd& x, const std::vector<std::size_t>& work) {
    Kkt k;
    const auto m = static_cast<Index>(qp.constraints());
    k.lambda = VectorXd::Zero(m);
    const VectorXd grad = qp.H * x + qp.g;

    MatrixXd aw(static_cast<Index>(work.size()), x.size());
    for (std::size_t r = 0; r < work.size(); ++r) aw.row(static_cast<Index>(r)) = qp.G.row(static_cast<Index>(work[r]));
    const VectorXd lw = working_multipliers(aw, grad);
    for (std::size_t r = 0; r < work.size(); ++r) k.lambda[static_cast<Index>(work[r])] = lw[static_cast<Index>(r)];

    const double scale = std::max({1.0, qp.g.size() ? qp.g.cwiseAbs().maxCoeff() : 0.0,
                                   grad.size() ? (qp.H * x).cwiseAbs().maxCoeff() : 0.0});
    VectorXd stat = grad;
    if (m > 0) stat += qp.G.transpose() * k.lambda;
    double res = stat.size() ? stat.cwiseAbs().maxCoeff() / scale : 0.0;

    k.violation = -std::numeric_limits<double>::infinity();
    if (m > 0) {
        const VectorXd slack = qp.G * x - qp.h;
        k.violation = slack.maxCoeff();
        res = std::max(res, std::max(0.0, k.violation));
        res = std::max(res, std::max(0.0, -k.lambda.minCoeff()));
        res = std::max(res, (k.lambda.cwiseProduct(slack)).cwiseAbs().maxCoeff());
    }
    k.residual = res;
    return k;
}

}  // namespace

QPSolution qp_solve(const QuadraticProgram& qp, const VectorXd& x0, const QPOptions& opts) {
    qp.validate();
    const auto n = static_cast<Index>(qp.variables());
    const auto m = static_cast<Index>(qp.constraints());
    if (x0.size() != n) throw DimensionError("qp_solve: starting point has the wrong size");

    const double hscale = n > 0 ? std::max(qp.H.diagonal().cwiseAbs().maxCoeff(), 1e-300) : 1.0;
    const double mu = opts.regularization * (hscale > 1e-300 ? hscale : 1.0);
    MatrixXd hr = qp.H;
    hr.diagonal().array() += mu;

    VectorXd x = x0;
    const double feas_tol = 1e-9 * std::max(1.0, m > 0 ? qp.h.cwiseAbs().maxCoeff() : 0.0);
    if (m > 0) {
        const double viol = (qp.G * x - qp.h).maxCoeff();
        if (viol > feas_tol)
            throw ConstraintError("qp_solve: starting point violates constraints by " + format_double(viol));
    }

    // Initial working set: active constraints at x0 that keep the rows independent.
    std::vector<std::size_t> work;
    std::vector<char> in_work(static_cast<std::size_t>(m), 0);
    auto working_matrix = [&]() {
        MatrixXd aw(static_cast<Index>(work.size()), n);
        for (std::size_t r = 0; r < work.size(); ++r) aw.row(static_cast<Index>(r)) = qp.G.row(static_cast<Index>(work[r]));
        return aw;
    };
    for (Index i = 0; i < m; ++i) {
        const double s = qp.G.row(i).dot(x) - qp.h[i];
        if (s < -1e-12 * std::max(1.0, std::abs(qp.h[i]))) continue;
        if (static_cast<Index>(work.size()) >= n) break;
        work.push_back(static_cast<std::size_t>(i));
        Eigen::ColPivHouseholderQR<MatrixXd> qr(working_matrix().transpose());
        if (qr.rank() < static_cast<Index>(work.size())) {
            work.pop_back();
        } else {
            in_work[static_cast<std::size_t>(i)] = 1;
        }
    }

    QPSolution sol;
    sol.status = QPStatus::max_iter;
    int iter = 0;
    bool stalled = false;  // previous step was blocked at zero length
    for (; iter < opts.max_iter; ++iter) {
        const VectorXd c = hr * x + qp.g;
        const auto k = static_cast<Index>(work.size());
        const MatrixXd aw = working_matrix();

        VectorXd p = VectorXd::Zero(n);
        double reduced_grad = 0.0;
        MatrixXd y_basis, r_tri;
        if (k == 0) {
            Eigen::LLT<MatrixXd> llt(hr);
            if (llt.info() != Eigen::Success) {
                sol.status = QPStatus::numerical_failure;
                break;
            }
            p = -llt.solve(c);
            reduced_grad = c.cwiseAbs().maxCoeff();
        } else if (k < n) {
            Eigen::HouseholderQR<MatrixXd> qr(aw.transpose());
            const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
            const MatrixXd z = q.rightCols(n - k);
            const VectorXd zc = z.transpose() * c;
            const MatrixXd hz = z.transpose() * hr * z;
            Eigen::LLT<MatrixXd> llt(hz);
            if (llt.info() != Eigen::Success) {
                sol.status = QPStatus::numerical_failure;
                break;
            }
            p = -z * llt.solve(zc);
            reduced_grad = zc.cwiseAbs().maxCoeff();
        }

        const double fx = 0.5 * x.dot(hr * x) + qp.g.dot(x);
        const double gscale = std::max({1.0, qp.g.size() ? qp.g.cwiseAbs().maxCoeff() : 0.0,
                                        (hr * x).cwiseAbs().maxCoeff()});
        const double xscale = std::max(1.0, x.cwiseAbs().maxCoeff());
        const bool zero_step = p.cwiseAbs().maxCoeff() <= 1e-13 * xscale || reduced_grad <= 1e-3 * opts.tol * gscale;

        if (opts.record_trace) {
            const Kkt kk = evaluate_kkt(qp, x, work);
            sol.trace.push_back({iter, qp.objective(x), kk.residual});
        }

        if (zero_step) {
            const VectorXd lw = working_multipliers(aw, c);
            Index drop = -1;
            double most_negative = -opts.tol * 1e-3;
            for (Index r = 0; r < k; ++r) {
                if (lw[r] < most_negative) {
                    most_negative = lw[r];
                    drop = r;
                }
            }
            // Near-degenerate vertices produce tiny negative multipliers whose drops only
            // wander along flat directions; accept once the KKT residual is well inside tol.
            const double kres = evaluate_kkt(qp, x, work).residual;
            if (drop < 0 || kres <= 1e-2 * opts.tol || (stalled && kres <= opts.tol)) {
                sol.status = QPStatus::optimal;
                break;
            }
            in_work[work[static_cast<std::size_t>(drop)]] = 0;
            work.erase(work.begin() + drop);
            continue;
        }
        (void)fx;

        double alpha = 1.0;
        Index blocking = -1;
        const double pnorm = p.norm();
        for (Index i = 0; i < m; ++i) {
            if (in_work[static_cast<std::size_t>(i)]) continue;
            const double gp = qp.G.row(i).dot(p);
            if (gp <= 1e-14 * qp.G.row(i).norm() * pnorm) continue;
            const double room = std::max(0.0, qp.h[i] - qp.G.row(i).dot(x));
            const double a = room / gp;
            if (a < alpha) {
                alpha = a;
                blocking = i;
            }
        }
        x += alpha * p;
        stalled = blocking >= 0 && alpha * p.cwiseAbs().maxCoeff() <= 1e-12 * xscale;
        if (blocking >= 0) {
            work.push_back(static_cast<std::size_t>(blocking));
            in_work[static_cast<std::size_t>(blocking)] = 1;
        }
    }

    const Kkt kk = evaluate_kkt(qp, x, work);
    sol.x = x;
    sol.multipliers = kk.lambda;
    sol.objective = qp.objective(x);
    sol.kkt_residual = kk.residual;
    sol.max_violation = m > 0 ? kk.violation : 0.0;
    sol.active_set = work;
    std::sort(sol.active_set.begin(), sol.active_set.end());
    sol.iterations = iter;
    if (sol.status == QPStatus::optimal && kk.residual > opts.tol) sol.status = QPStatus::numerical_failure;
    return sol;
}

QPSolution qp_solve(const QuadraticProgram& qp, const QPOptions& opts) {
    return qp_solve(qp, VectorXd::Zero(static_cast<Index>(qp.variables())), opts);
}

void write_trace_csv(std::ostream& os, const std::vector<QPTraceRow>& trace) {
    os << "iter,objective,kkt_residual\n";
    for (const auto& r : trace) os << r.iter << ',' << format_double(r.objective) << ',' << format_double(r.kkt_residual) << '\n';
}

ConstraintBlock absval_reformulate(const MatrixXd& combo, std::size_t center, double margin) {
    const auto q = static_cast<std::size_t>(combo.rows());
    const auto p = static_cast<std::size_t>(combo.cols());
    if (q == 0 || p == 0) throw ConstraintError("dominance constraint over an empty stencil");
    if (center >= q) throw ConstraintError("dominance center out of range");
    if (margin < 0.0) throw ConstraintError("dominance margin must be >= 0");

    ConstraintBlock b;
    b.decision_vars = p;
    b.slack_vars = q - 1;
    b.center = center;
    b.margin = margin;
    const auto nv = static_cast<Index>(b.variables());
    const auto rows = static_cast<Index>(2 * (q - 1) + 1);
    b.G = MatrixXd::Zero(rows, nv);
    b.h = VectorXd::Zero(rows);

    Index r = 0;
    Index slack = static_cast<Index>(p);
    for (std::size_t j = 0; j < q; ++j) {
        if (j == center) continue;
        const auto jj = static_cast<Index>(j);
        b.G.block(2 * r, 0, 1, static_cast<Index>(p)) = combo.row(jj);
        b.G(2 * r, slack) = -1.0;
        b.G.block(2 * r + 1, 0, 1, static_cast<Index>(p)) = -combo.row(jj);
        b.G(2 * r + 1, slack) = -1.0;
        b.G(rows - 1, slack) = 1.0;
        ++r;
        ++slack;
    }
    b.G.block(rows - 1, 0, 1, static_cast<Index>(p)) = -combo.row(static_cast<Index>(center));
    b.h[rows - 1] = -margin;
    return b;
}

ConstraintBlock absval_reformulate(std::size_t p_dim, std::size_t center, double margin) {
    return absval_reformulate(MatrixXd::Identity(static_cast<Index>(p_dim), static_cast<Index>(p_dim)), center, margin);
}

double dominance_slack(const VectorXd& row, std::size_t center) {
    double off = 0.0;
    for (Index j = 0; j < row.size(); ++j)
        if (static_cast<std::size_t>(j) != center) off += std::abs(row[j]);
    return row[static_cast<Index>(center)] - off;
}

VectorXd dominance_start(const MatrixXd& combo, std::size_t center, double margin, const VectorXd& theta0) {
    const auto q = combo.rows();
    const auto p = combo.cols();
    const auto c = static_cast<Index>(center);
    Index lever = -1;
    double best = 0.0;
    for (Index k = 0; k < p; ++k) {
        bool only_center = true;
        for (Index j = 0; j < q && only_center; ++j)
            if (j != c && combo(j, k) != 0.0) only_center = false;
        if (only_center && std::abs(combo(c, k)) > best) {
            best = std::abs(combo(c, k));
            lever = k;
        }
    }
    if (lever < 0) throw ConstraintError("no decision variable controls the dominance center alone");

    VectorXd theta = theta0;
    VectorXd a = combo * theta;
    const double deficit = -dominance_slack(a, center) + margin;
    if (deficit > 0.0) {
        const double shift = deficit + 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
        theta[lever] += shift / combo(c, lever);
        a = combo * theta;
    }
    VectorXd x(p + q - 1);
    x.head(p) = theta;
    Index s = p;
    for (Index j = 0; j < q; ++j)
        if (j != c) x[s++] = std::abs(a[j]);
    return x;
}

}  // namespace sldo
