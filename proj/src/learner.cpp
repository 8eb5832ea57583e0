#include "sldo/learner.hpp"

#include "sldo/csv.hpp"
#include "sldo/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace sldo {

void RidgeConfig::validate() const {
    if (!(beta1 >= 0.0) || !(beta2 >= 0.0)) throw ConstraintError("ridge weights must be >= 0");
}

std::string_view to_string(Method m) { return m == Method::ldo ? "ldo" : "sldo"; }

Method parse_method(std::string_view s) {
    if (s == "ldo" || s == "LDO") return Method::ldo;
    if (s == "sldo" || s == "SLDO" || s == "S-LDO" || s == "s-ldo") return Method::sldo;
    throw FormatError("unknown method '" + std::string(s) + "'");
}

std::string_view to_string(ConstraintMode m) {
    switch (m) {
        case ConstraintMode::linear_combined: return "linear-combined";
        case ConstraintMode::burgers_linearized: return "burgers-linearized";
        case ConstraintMode::advect2d_combined: return "advect2d-combined";
    }
    return "unknown";
}

void StabilityConstraintSpec::validate() const {
    if (!(margin >= 0.0)) throw ConstraintError("dominance margin must be >= 0");
    if (mode == ConstraintMode::burgers_linearized && (!equilibrium || !std::isfinite(*equilibrium)))
        throw ConstraintError("burgers constraints need a finite equilibrium value");
}

StabilityConstraintSpec StabilityConstraintSpec::for_case(CaseKind kind, const PhysicalParams& phys,
                                                          std::optional<double> equilibrium) {
    StabilityConstraintSpec s;
    s.phys = phys;
    s.equilibrium = equilibrium;
    switch (kind) {
        case CaseKind::diffusion:
        case CaseKind::advection:
        case CaseKind::advection_diffusion: s.mode = ConstraintMode::linear_combined; break;
        case CaseKind::burgers:
            s.mode = ConstraintMode::burgers_linearized;
            s.margin = kBurgersMargin;
            break;
        case CaseKind::advection2d: s.mode = ConstraintMode::advect2d_combined; break;
    }
    return s;
}

Eigen::MatrixXd constraint_combination(const StabilityConstraintSpec& spec, const FeatureLayout& layout) {
    spec.validate();
    const StencilSpec u = layout.union_stencil();
    const auto q = static_cast<Eigen::Index>(u.size());
    const auto c = static_cast<Eigen::Index>(u.center_pos());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(layout.columns()));

    Eigen::Index col = 0;
    for (const auto& block : layout.blocks) {
        if (block.quadratic && spec.mode != ConstraintMode::burgers_linearized)
            throw ConstraintError("quadratic block '" + block.name + "' needs the burgers constraint mode");
        const double u0 = spec.equilibrium.value_or(0.0);
        for (const Offset& off : block.stencil.offsets()) {
            const auto pos = static_cast<Eigen::Index>(u.find(off));
            if (block.quadratic) {
                // d/du of u_i * sum_k N_k u_{i+k} at u = u0
                m(c, col) += u0 * block.scale;
                m(pos, col) += u0 * block.scale;
            } else {
                m(pos, col) += block.scale;
            }
            ++col;
        }
    }
    return m;
}

std::vector<double> linearize_burgers(std::span<const double> n_coeffs, std::span<const double> l_coeffs, double u0,
                                      const StencilSpec& s_n, const StencilSpec& s_l, double nu) {
    if (n_coeffs.size() != s_n.size() || l_coeffs.size() != s_l.size())
        throw DimensionError("linearize_burgers: coefficient counts do not match the stencils");
    FeatureLayout l;
    l.blocks.push_back({"N", s_n, 1.0, true});
    l.blocks.push_back({"L", s_l, -nu, false});
    StabilityConstraintSpec spec;
    spec.mode = ConstraintMode::burgers_linearized;
    spec.equilibrium = u0;
    const Eigen::MatrixXd m = constraint_combination(spec, l);
    Eigen::VectorXd theta(static_cast<Eigen::Index>(n_coeffs.size() + l_coeffs.size()));
    for (std::size_t k = 0; k < n_coeffs.size(); ++k) theta[static_cast<Eigen::Index>(k)] = n_coeffs[k];
    for (std::size_t k = 0; k < l_coeffs.size(); ++k)
        theta[static_cast<Eigen::Index>(n_coeffs.size() + k)] = l_coeffs[k];
    const Eigen::VectorXd a = m * theta;
    return {a.data(), a.data() + a.size()};
}

ConstraintBlock build_stability_constraints(const StabilityConstraintSpec& spec, const FeatureLayout& layout) {
    const StencilSpec u = layout.union_stencil();
    return absval_reformulate(constraint_combination(spec, layout), u.center_pos(), spec.margin);
}

namespace {

Eigen::VectorXd ridge_solve(const RegressionProblem& p, double b1, double b2) {
    // Least squares on [X; sqrt(B)] rather than the normal equations: same minimizer,
    // without squaring the condition number of the smooth-data windows.
    const auto np = p.X.cols();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p.X.rows() + np, np);
    a.topRows(p.X.rows()) = p.X;
    Eigen::Index col = 0;
    for (const auto& block : p.layout.blocks) {
        // Penalize the physical contribution scale * theta, i.e. the combined stencil.
        const double b = (block.quadratic ? b2 : b1) * block.scale * block.scale;
        for (std::size_t k = 0; k < block.stencil.size(); ++k, ++col) a(p.X.rows() + col, col) = std::sqrt(b);
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a.rows());
    rhs.head(p.y.size()) = p.y;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    const double scale = std::max(1e-300, a.colwise().squaredNorm().maxCoeff());
    const double rmin = np ? qr.matrixR().diagonal().cwiseAbs().minCoeff() : 1.0;
    if (!(rmin * rmin > 1e-15 * scale))
        throw SingularSystemError("ridge system singular at DOF " + std::to_string(p.dof), p.dof);
    return qr.solve(rhs);
}

}  // namespace

Eigen::VectorXd solve_ldo(const RegressionProblem& p, const RidgeConfig& cfg) {
    cfg.validate();
    if (p.X.rows() != p.y.size()) throw DimensionError("regression problem X and y row counts differ");
    return ridge_solve(p, cfg.beta1, cfg.beta2);
}

SldoResult solve_sldo(const RegressionProblem& p, const StabilityConstraintSpec& spec, const SldoOptions& opts) {
    const StencilSpec u = p.layout.union_stencil();
    const Eigen::MatrixXd combo = constraint_combination(spec, p.layout);
    const ConstraintBlock cb = absval_reformulate(combo, u.center_pos(), spec.margin);
    const auto np = static_cast<Eigen::Index>(p.layout.columns());
    const auto nv = static_cast<Eigen::Index>(cb.variables());

    QuadraticProgram qp;
    qp.H = Eigen::MatrixXd::Zero(nv, nv);
    qp.H.topLeftCorner(np, np) = p.X.transpose() * p.X;
    qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();
    qp.g = Eigen::VectorXd::Zero(nv);
    qp.g.head(np) = -(p.X.transpose() * p.y);
    qp.G = cb.G;
    qp.h = cb.h;

    Eigen::VectorXd theta0;
    try {
        theta0 = ridge_solve(p, opts.warm_start_beta, opts.warm_start_beta);
    } catch (const SingularSystemError&) {
        theta0 = Eigen::VectorXd::Zero(np);
    }
    const Eigen::VectorXd x0 = dominance_start(combo, u.center_pos(), spec.margin, theta0);

    SldoResult r;
    r.qp = qp_solve(qp, x0, opts.qp);
    if (r.qp.status != QPStatus::optimal)
        throw SolverError("S-LDO solve at DOF " + std::to_string(p.dof) + " ended with status " +
                              std::string(to_string(r.qp.status)) + " (kkt " + format_double(r.qp.kkt_residual) + ")",
                          p.dof);
    r.theta = r.qp.x.head(np);
    return r;
}

double mean_state(const SnapshotSet& snap) {
    if (snap.states.size() == 0) throw InsufficientDataError("no snapshot states");
    return snap.states.mean();
}

namespace {

std::vector<AssembledOperator> assemble_blocks(const FeatureLayout& layout, const std::vector<Eigen::VectorXd>& thetas,
                                               const Lattice& lat) {
    std::vector<AssembledOperator> ops;
    std::size_t start = 0;
    for (const auto& block : layout.blocks) {
        std::vector<LocalOperator> rows(thetas.size());
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            rows[i].dof = i;
            rows[i].stencil = block.stencil;
            rows[i].coeffs.assign(thetas[i].data() + start, thetas[i].data() + start + block.stencil.size());
        }
        ops.push_back(assemble(std::move(rows), lat));
        start += block.stencil.size();
    }
    return ops;
}

}  // namespace

LearnedModel learn_model(const SnapshotSet& snap, CaseKind kind, const PhysicalParams& phys, const LearnOptions& opts) {
    opts.ridge.validate();
    if (snap.count() == 0) throw InsufficientDataError("no snapshots to learn from");

    LearnedModel m;
    m.kind = kind;
    m.method = opts.method;
    m.phys = phys;
    m.lattice = snap.lattice();
    m.layout = FeatureLayout::for_case(kind, phys, opts.s1, opts.s2);
    m.s1 = opts.s1;
    m.s2 = opts.s2;
    m.ridge = opts.ridge;
    m.tol = opts.sldo.qp.tol;
    m.warm_start_beta = opts.sldo.warm_start_beta;

    StabilityConstraintSpec spec = StabilityConstraintSpec::for_case(kind, phys);
    if (kind == CaseKind::burgers) spec.equilibrium = opts.equilibrium.value_or(mean_state(snap));
    if (opts.margin) spec.margin = *opts.margin;
    spec.validate();
    m.margin = spec.margin;
    m.equilibrium = spec.equilibrium.value_or(0.0);

    const std::size_t n = snap.dofs();
    if (n != m.lattice.size()) throw DimensionError("snapshot rows do not match the lattice size");
    const Eigen::MatrixXd combo = constraint_combination(spec, m.layout);
    const std::size_t center = m.layout.union_stencil().center_pos();

    std::vector<Eigen::VectorXd> thetas(n);
    std::vector<DofDiagnostics> diag(n);
    std::vector<std::exception_ptr> errors(n);

    auto work = [&](std::size_t dof) {
        try {
            const RegressionProblem p = normalize_problem(build_problem(snap, dof, m.layout));
            DofDiagnostics& d = diag[dof];
            d.dof = dof;
            d.norm = p.norm;
            if (opts.method == Method::ldo) {
                thetas[dof] = solve_ldo(p, opts.ridge);
            } else {
                SldoResult r = solve_sldo(p, spec, opts.sldo);
                thetas[dof] = std::move(r.theta);
                d.status = std::string(to_string(r.qp.status));
                d.iterations = r.qp.iterations;
                d.kkt_residual = r.qp.kkt_residual;
                d.max_violation = r.qp.max_violation;
            }
            const Eigen::VectorXd a = combo * thetas[dof];
            d.dominance_slack = dominance_slack(a, center) - spec.margin;
        } catch (...) {
            errors[dof] = std::current_exception();
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) work(i);
            });
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    m.operators = assemble_blocks(m.layout, thetas, m.lattice);
    m.diagnostics = std::move(diag);
    return m;
}

SemiDiscreteForm LearnedModel::form() const {
    SemiDiscreteForm f;
    for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
        const auto& block = layout.blocks[b];
        if (block.quadratic) {
            if (block.scale == 1.0) {
                f.quadratic = operators.at(b);
            } else {
                std::vector<LocalOperator> rows(operators[b].rows().begin(), operators[b].rows().end());
                for (auto& r : rows)
                    for (double& v : r.coeffs) v *= block.scale;
                f.quadratic = assemble(std::move(rows), lattice);
            }
        } else {
            f.linear.push_back({block.scale, operators.at(b)});
        }
    }
    return f;
}

StabilityConstraintSpec LearnedModel::constraint_spec() const {
    StabilityConstraintSpec s = StabilityConstraintSpec::for_case(kind, phys);
    if (kind == CaseKind::burgers) s.equilibrium = equilibrium;
    s.margin = margin;
    return s;
}

Eigen::VectorXd LearnedModel::theta(std::size_t dof) const {
    Eigen::VectorXd t(static_cast<Eigen::Index>(layout.columns()));
    Eigen::Index col = 0;
    for (const auto& op : operators)
        for (double v : op.row(dof).coeffs) t[col++] = v;
    return t;
}

AssembledOperator LearnedModel::combination() const {
    const Eigen::MatrixXd combo = constraint_combination(constraint_spec(), layout);
    const StencilSpec u = layout.union_stencil();
    std::vector<LocalOperator> rows(lattice.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Eigen::VectorXd a = combo * theta(i);
        rows[i] = {i, u, std::vector<double>(a.data(), a.data() + a.size())};
    }
    return assemble(std::move(rows), lattice);
}

LearnedModel reference_model(const CaseParams& params) {
    params.validate();
    LearnedModel m;
    m.kind = params.kind;
    m.phys = params.phys;
    m.lattice = params.lattice();
    m.s1 = m.s2 = 3;
    m.layout = FeatureLayout::for_case(params.kind, params.phys, 3, 3);
    m.ridge = {0.0, 0.0};
    switch (params.kind) {
        case CaseKind::diffusion: m.operators.push_back(reference_operator_1d(params.grid1d()).second); break;
        case CaseKind::advection: m.operators.push_back(reference_operator_1d(params.grid1d()).first); break;
        case CaseKind::advection_diffusion: {
            auto [l1, l2] = reference_operator_1d(params.grid1d());
            m.operators = {std::move(l1), std::move(l2)};
            break;
        }
        case CaseKind::burgers:
            m.operators = {reference_burgers_convection(params.grid1d()), reference_operator_1d(params.grid1d()).second};
            break;
        case CaseKind::advection2d: {
            auto [lx, ly] = reference_operator_2d(params.grid2d());
            m.operators = {std::move(lx), std::move(ly)};
            break;
        }
    }
    // Layout stencils must match the operators (2-D reference operators are 3-wide per axis).
    for (std::size_t b = 0; b < m.layout.blocks.size(); ++b) m.layout.blocks[b].stencil = m.operators[b].row(0).stencil;
    if (params.kind == CaseKind::burgers) m.margin = kBurgersMargin;
    return m;
}

void save_model(const std::filesystem::path& dir, const LearnedModel& m) {
    std::filesystem::create_directories(dir);
    for (std::size_t b = 0; b < m.layout.blocks.size(); ++b) {
        std::ofstream os(dir / (m.layout.blocks[b].name + ".csv"));
        if (!os) throw FormatError("cannot write operator in " + dir.string());
        write_operator_csv(os, m.operators.at(b));
    }
    KeyValues kv;
    kv["case"] = std::string(to_string(m.kind));
    kv["method"] = std::string(to_string(m.method));
    kv["c"] = format_double(m.phys.c);
    kv["nu"] = format_double(m.phys.nu);
    kv["cx"] = format_double(m.phys.cx);
    kv["cy"] = format_double(m.phys.cy);
    kv["nx"] = std::to_string(m.lattice.nx());
    kv["ny"] = std::to_string(m.lattice.ny());
    kv["s1"] = std::to_string(m.s1);
    kv["s2"] = std::to_string(m.s2);
    kv["beta1"] = format_double(m.ridge.beta1);
    kv["beta2"] = format_double(m.ridge.beta2);
    kv["tol"] = format_double(m.tol);
    kv["margin"] = format_double(m.margin);
    kv["equilibrium"] = format_double(m.equilibrium);
    kv["warm_start"] = "ridge(beta=" + format_double(m.warm_start_beta) + ") lifted at center";
    kv["warm_start_beta"] = format_double(m.warm_start_beta);
    std::string blocks;
    for (const auto& b : m.layout.blocks) blocks += (blocks.empty() ? "" : " ") + b.name;
    kv["blocks"] = blocks;
    {
        std::ofstream os(dir / "model.txt");
        if (!os) throw FormatError("cannot write model metadata in " + dir.string());
        write_key_values(os, kv);
    }
    std::ofstream os(dir / "diagnostics.csv");
    os << "dof,status,iterations,kkt_residual,max_violation,dominance_slack,norm\n";
    for (const auto& d : m.diagnostics)
        os << d.dof << ',' << d.status << ',' << d.iterations << ',' << format_double(d.kkt_residual) << ','
           << format_double(d.max_violation) << ',' << format_double(d.dominance_slack) << ',' << format_double(d.norm)
           << '\n';
}

LearnedModel load_model(const std::filesystem::path& dir) {
    const KeyValues kv = read_key_values(dir / "model.txt");
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("model metadata lacks '" + k + "'");
        return it->second;
    };
    LearnedModel m;
    m.kind = parse_case_kind(get("case"));
    m.method = parse_method(get("method"));
    m.phys = {parse_double(get("c")), parse_double(get("nu")), parse_double(get("cx")), parse_double(get("cy"))};
    m.lattice = Lattice(static_cast<std::size_t>(parse_long(get("nx"))), static_cast<std::size_t>(parse_long(get("ny"))));
    m.s1 = static_cast<int>(parse_long(get("s1")));
    m.s2 = static_cast<int>(parse_long(get("s2")));
    m.ridge = {parse_double(get("beta1")), parse_double(get("beta2"))};
    m.tol = parse_double(get("tol"));
    m.margin = parse_double(get("margin"));
    m.equilibrium = parse_double(get("equilibrium"));
    m.warm_start_beta = parse_double(get("warm_start_beta"));
    m.layout = FeatureLayout::for_case(m.kind, m.phys, m.s1, m.s2);
    for (auto& block : m.layout.blocks) {
        std::ifstream is(dir / (block.name + ".csv"));
        if (!is) throw FormatError("missing operator file " + (dir / (block.name + ".csv")).string());
        m.operators.push_back(read_operator_csv(is, m.lattice));
        block.stencil = m.operators.back().row(0).stencil;
    }
    if (std::filesystem::exists(dir / "diagnostics.csv")) {
        const CsvTable t = read_csv(dir / "diagnostics.csv");
        for (const auto& r : t.rows) {
            DofDiagnostics d;
            d.dof = static_cast<std::size_t>(parse_long(r.at(t.column("dof"))));
            d.status = r.at(t.column("status"));
            d.iterations = static_cast<int>(parse_long(r.at(t.column("iterations"))));
            d.kkt_residual = parse_double(r.at(t.column("kkt_residual")));
            d.max_violation = parse_double(r.at(t.column("max_violation")));
            d.dominance_slack = parse_double(r.at(t.column("dominance_slack")));
            d.norm = parse_double(r.at(t.column("norm")));
            m.diagnostics.push_back(d);
        }
    }
    return m;
}

}  // namespace sldo
