#include "sldo/refsim.hpp"

#include "sldo/csv.hpp"
#include "sldo/errors.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

namespace sldo {

std::string_view to_string(CaseKind k) {
    switch (k) {
        case CaseKind::diffusion: return "diffusion";
        case CaseKind::advection: return "advection";
        case CaseKind::advection_diffusion: return "advection-diffusion";
        case CaseKind::burgers: return "burgers";
        case CaseKind::advection2d: return "advection2d";
    }
    return "unknown";
}

std::string_view to_string(RhsSource s) {
    return s == RhsSource::exact ? "exact" : "finite-difference";
}

CaseKind parse_case_kind(std::string_view s) {
    for (CaseKind k : {CaseKind::diffusion, CaseKind::advection, CaseKind::advection_diffusion, CaseKind::burgers,
                       CaseKind::advection2d})
        if (to_string(k) == s) return k;
    throw FormatError("unknown case '" + std::string(s) + "'");
}

RhsSource parse_rhs_source(std::string_view s) {
    if (s == "exact") return RhsSource::exact;
    if (s == "finite-difference") return RhsSource::finite_difference;
    throw FormatError("unknown rhs source '" + std::string(s) + "'");
}

CaseParams CaseParams::canonical(CaseKind kind) {
    CaseParams p;
    p.kind = kind;
    p.grid = Grid1D::make(201, 10.0);
    p.dt = 0.04;
    p.n_snapshots = 500;
    switch (kind) {
        case CaseKind::diffusion:
            p.phys.nu = 0.02;
            break;
        case CaseKind::advection:
            p.phys.c = 1.25;
            break;
        case CaseKind::advection_diffusion:
            p.phys.c = 0.2;
            p.phys.nu = 0.02;
            p.n_snapshots = 1000;
            break;
        case CaseKind::burgers:
            p.phys.nu = 0.01;
            p.grid = Grid1D::make(129, 1.0);
            p.dt = 0.002;
            p.n_snapshots = 1000;
            p.seed = 20240901;
            break;
        case CaseKind::advection2d:
            p.phys.cx = 0.5;
            p.phys.cy = 0.5;
            p.grid = Grid2D::make(101, 101, 10.0, 10.0);
            p.dt = 0.05;
            p.n_snapshots = 250;
            p.pulse = PulseParams{2.0, 5.0, 1.0};
            break;
    }
    return p;
}

Lattice CaseParams::lattice() const {
    return std::visit([](const auto& g) { return Lattice::of(g); }, grid);
}

const Grid1D& CaseParams::grid1d() const {
    if (const auto* g = std::get_if<Grid1D>(&grid)) return *g;
    throw DimensionError("case " + std::string(to_string(kind)) + " has a 2-D grid");
}

const Grid2D& CaseParams::grid2d() const {
    if (const auto* g = std::get_if<Grid2D>(&grid)) return *g;
    throw DimensionError("case " + std::string(to_string(kind)) + " has a 1-D grid");
}

void CaseParams::validate() const {
    if (!(phys.nu >= 0.0)) throw DimensionError("diffusivity must be >= 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DimensionError("dt must be positive");
    if (n_snapshots < 2) throw DimensionError("need at least 2 snapshots");
    if (is_two_dimensional() != std::holds_alternative<Grid2D>(grid))
        throw DimensionError("grid dimensionality does not match case " + std::string(to_string(kind)));
    if (kind == CaseKind::burgers && !(random_stddev >= 0.0)) throw DimensionError("stddev must be >= 0");
}

SnapshotSet SnapshotSet::head(std::size_t n) const {
    if (n > count()) throw IndexError("head: requested more snapshots than available");
    SnapshotSet out;
    out.times.assign(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(n));
    out.states = states.leftCols(static_cast<Eigen::Index>(n));
    out.rhs = rhs.leftCols(static_cast<Eigen::Index>(n));
    out.meta = meta;
    return out;
}

Eigen::VectorXd apply_quadratic(const AssembledOperator& n_op, const Eigen::VectorXd& u) {
    return u.cwiseProduct(n_op.apply(u));
}

Eigen::VectorXd SemiDiscreteForm::rhs(const Eigen::VectorXd& u) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(u.size());
    for (const auto& t : linear) acc += t.weight * t.op.apply(u);
    if (quadratic) acc += apply_quadratic(*quadratic, u);
    return -acc;
}

std::pair<AssembledOperator, AssembledOperator> reference_operator_1d(const Grid1D& grid) {
    const auto lat = Lattice::of(grid);
    const auto s = StencilSpec::centered(3);
    const double h = grid.dx;
    const std::array<double, 3> l1{-1.0 / h, 1.0 / h, 0.0};
    const std::array<double, 3> l2{1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)};
    return {assemble_uniform(s, l1, lat), assemble_uniform(s, l2, lat)};
}

std::pair<AssembledOperator, AssembledOperator> reference_operator_2d(const Grid2D& grid) {
    const auto lat = Lattice::of(grid);
    const std::array<double, 3> lx{-1.0 / grid.dx, 1.0 / grid.dx, 0.0};
    const std::array<double, 3> ly{-1.0 / grid.dy, 1.0 / grid.dy, 0.0};
    return {assemble_uniform(StencilSpec::along_x(3), lx, lat), assemble_uniform(StencilSpec::along_y(3), ly, lat)};
}

AssembledOperator reference_burgers_convection(const Grid1D& grid) {
    const double h = grid.dx;
    const std::array<double, 3> n{-0.5 / h, 0.0, 0.5 / h};
    return assemble_uniform(StencilSpec::centered(3), n, Lattice::of(grid));
}

namespace {

SemiDiscreteForm burgers_form(const Grid1D& grid, double nu) {
    SemiDiscreteForm f;
    f.quadratic = reference_burgers_convection(grid);
    f.linear.push_back({-nu, reference_operator_1d(grid).second});
    return f;
}

}  // namespace

Eigen::VectorXd burgers_rhs(const Eigen::VectorXd& u, double nu, const Grid1D& grid) {
    return burgers_form(grid, nu).rhs(u);
}

SemiDiscreteForm reference_form(const CaseParams& p) {
    SemiDiscreteForm f;
    switch (p.kind) {
        case CaseKind::diffusion:
        case CaseKind::advection:
        case CaseKind::advection_diffusion: {
            auto [l1, l2] = reference_operator_1d(p.grid1d());
            if (p.phys.c != 0.0) f.linear.push_back({p.phys.c, std::move(l1)});
            if (p.phys.nu != 0.0) f.linear.push_back({-p.phys.nu, std::move(l2)});
            break;
        }
        case CaseKind::burgers:
            f = burgers_form(p.grid1d(), p.phys.nu);
            break;
        case CaseKind::advection2d: {
            auto [lx, ly] = reference_operator_2d(p.grid2d());
            f.linear.push_back({p.phys.cx, std::move(lx)});
            f.linear.push_back({p.phys.cy, std::move(ly)});
            break;
        }
    }
    return f;
}

double gaussian_pulse_1d(double x, const PulseParams& p) {
    const double d = x - p.x0;
    return std::exp(-d * d / (2.0 * p.sigma * p.sigma));
}

double gaussian_pulse_2d(double x, double y, const PulseParams& p) {
    const double ddx = x - p.x0;
    const double ddy = y - p.y0;
    return std::exp(-(ddx * ddx + ddy * ddy));
}

std::vector<double> normal_samples(std::uint64_t seed, std::size_t count, double mean, double stddev) {
    std::mt19937_64 gen(seed);
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    std::vector<double> out(count);
    for (auto& v : out) {
        const double u1 = (static_cast<double>(gen() >> 11) + 1.0) * scale;  // (0, 1]
        const double u2 = static_cast<double>(gen() >> 11) * scale;          // [0, 1)
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        v = mean + stddev * z;
    }
    return out;
}

Eigen::VectorXd initial_condition(const CaseParams& p) {
    switch (p.kind) {
        case CaseKind::burgers: {
            const auto s = normal_samples(p.seed, p.grid1d().n, p.random_mean, p.random_stddev);
            return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
        }
        case CaseKind::advection2d: {
            const auto& g = p.grid2d();
            Eigen::VectorXd u(static_cast<Eigen::Index>(g.nx * g.ny));
            for (std::size_t iy = 0; iy < g.ny; ++iy)
                for (std::size_t ix = 0; ix < g.nx; ++ix)
                    u[static_cast<Eigen::Index>(g.index(ix, iy))] = gaussian_pulse_2d(g.x(ix), g.y(iy), p.pulse);
            return u;
        }
        default: {
            const auto& g = p.grid1d();
            Eigen::VectorXd u(static_cast<Eigen::Index>(g.n));
            for (std::size_t i = 0; i < g.n; ++i) u[static_cast<Eigen::Index>(i)] = gaussian_pulse_1d(g.x(i), p.pulse);
            return u;
        }
    }
}

SnapshotSet forward_euler(const RhsFn& f, const Eigen::VectorXd& u0, double dt, std::size_t steps) {
    if (!(dt > 0.0)) throw DimensionError("forward_euler: dt must be positive");
    const auto n = u0.size();
    const auto cols = static_cast<Eigen::Index>(steps + 1);
    SnapshotSet s;
    s.times.resize(steps + 1);
    s.states.resize(n, cols);
    s.rhs.resize(n, cols);
    s.meta.nx = static_cast<std::size_t>(n);
    s.meta.dt = dt;

    Eigen::VectorXd u = u0;
    for (std::size_t k = 0; k <= steps; ++k) {
        if (!u.allFinite())
            throw BlowUpError("forward Euler produced a non-finite state at step " + std::to_string(k), k);
        const Eigen::VectorXd du = f(u);
        s.times[k] = static_cast<double>(k) * dt;
        s.states.col(static_cast<Eigen::Index>(k)) = u;
        s.rhs.col(static_cast<Eigen::Index>(k)) = du;
        if (k < steps) u = u + dt * du;
    }
    return s;
}

Eigen::MatrixXd fd_time_derivative(const Eigen::MatrixXd& states, double dt) {
    const auto nt = states.cols();
    if (nt < 3) throw InsufficientDataError("finite-difference derivative needs at least 3 snapshots");
    Eigen::MatrixXd d(states.rows(), nt);
    const double inv = 1.0 / (2.0 * dt);
    d.col(0) = (-3.0 * states.col(0) + 4.0 * states.col(1) - states.col(2)) * inv;
    for (Eigen::Index j = 1; j + 1 < nt; ++j) d.col(j) = (states.col(j + 1) - states.col(j - 1)) * inv;
    d.col(nt - 1) = (3.0 * states.col(nt - 1) - 4.0 * states.col(nt - 2) + states.col(nt - 3)) * inv;
    return d;
}

namespace {

SnapshotMeta meta_for(const CaseParams& p) {
    SnapshotMeta m;
    m.case_name = std::string(to_string(p.kind));
    m.phys = p.phys;
    m.dt = p.dt;
    m.seed = p.seed;
    m.rhs_source = p.rhs_source;
    if (const auto* g = std::get_if<Grid1D>(&p.grid)) {
        m.nx = g->n;
        m.ny = 1;
        m.lx = g->length;
    } else {
        const auto& g2 = std::get<Grid2D>(p.grid);
        m.nx = g2.nx;
        m.ny = g2.ny;
        m.lx = g2.lx;
        m.ly = g2.ly;
    }
    return m;
}

}  // namespace

SnapshotSet generate_case(const CaseParams& p, std::size_t steps) {
    p.validate();
    const SemiDiscreteForm form = reference_form(p);
    SnapshotSet s = forward_euler([&form](const Eigen::VectorXd& u) { return form.rhs(u); }, initial_condition(p),
                                  p.dt, steps);
    s.meta = meta_for(p);
    if (p.rhs_source == RhsSource::finite_difference) s.rhs = fd_time_derivative(s.states, p.dt);
    return s;
}

SnapshotSet generate_training(const CaseParams& p) { return generate_case(p, p.n_snapshots - 1); }

namespace {

void write_wide(const std::filesystem::path& path, const std::vector<double>& times, const Eigen::MatrixXd& m) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path.string());
    os << "dof";
    for (double t : times) os << ',' << format_double(t);
    os << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << i;
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << format_double(m(i, j));
        os << '\n';
    }
}

Eigen::MatrixXd read_wide(const std::filesystem::path& path, std::vector<double>& times) {
    const CsvTable t = read_csv(path);
    if (t.header.empty() || t.header[0] != "dof") throw FormatError(path.string() + ": expected 'dof' column");
    times.clear();
    for (std::size_t k = 1; k < t.header.size(); ++k) times.push_back(parse_double(t.header[k]));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(times.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (parse_long(t.rows[i][0]) != static_cast<long long>(i)) throw FormatError(path.string() + ": DOFs out of order");
        for (std::size_t k = 0; k < times.size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = parse_double(t.rows[i][k + 1]);
    }
    return m;
}

}  // namespace

void write_snapshots(const std::filesystem::path& dir, const std::string& prefix, const SnapshotSet& s) {
    std::filesystem::create_directories(dir);
    write_wide(dir / (prefix + "_states.csv"), s.times, s.states);
    write_wide(dir / (prefix + "_rhs.csv"), s.times, s.rhs);
    KeyValues kv{
        {"case", s.meta.case_name},
        {"c", format_double(s.meta.phys.c)},
        {"nu", format_double(s.meta.phys.nu)},
        {"cx", format_double(s.meta.phys.cx)},
        {"cy", format_double(s.meta.phys.cy)},
        {"dt", format_double(s.meta.dt)},
        {"n", std::to_string(s.meta.nx * s.meta.ny)},
        {"nx", std::to_string(s.meta.nx)},
        {"ny", std::to_string(s.meta.ny)},
        {"lx", format_double(s.meta.lx)},
        {"ly", format_double(s.meta.ly)},
        {"seed", std::to_string(s.meta.seed)},
        {"rhs_source", std::string(to_string(s.meta.rhs_source))},
    };
    std::ofstream os(dir / (prefix + "_meta.txt"));
    write_key_values(os, kv);
}

SnapshotSet read_snapshots(const std::filesystem::path& dir, const std::string& prefix) {
    SnapshotSet s;
    const KeyValues kv = read_key_values(dir / (prefix + "_meta.txt"));
    auto get = [&](const std::string& k) -> const std::string& {
        const auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("snapshot metadata is missing '" + k + "'");
        return it->second;
    };
    s.meta.case_name = get("case");
    s.meta.phys = {parse_double(get("c")), parse_double(get("nu")), parse_double(get("cx")), parse_double(get("cy"))};
    s.meta.dt = parse_double(get("dt"));
    s.meta.nx = static_cast<std::size_t>(parse_long(get("nx")));
    s.meta.ny = static_cast<std::size_t>(parse_long(get("ny")));
    s.meta.lx = parse_double(get("lx"));
    s.meta.ly = parse_double(get("ly"));
    s.meta.seed = static_cast<std::uint64_t>(std::stoull(get("seed")));
    s.meta.rhs_source = parse_rhs_source(get("rhs_source"));
    s.states = read_wide(dir / (prefix + "_states.csv"), s.times);
    std::vector<double> t2;
    s.rhs = read_wide(dir / (prefix + "_rhs.csv"), t2);
    if (t2 != s.times || s.rhs.rows() != s.states.rows()) throw FormatError("states and rhs files disagree");
    return s;
}

}  // namespace sldo
