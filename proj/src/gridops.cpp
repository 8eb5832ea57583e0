#include "sldo/gridops.hpp"

#include "sldo/csv.hpp"
#include "sldo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

namespace sldo {

Grid1D Grid1D::make(std::size_t n, double length) {
    if (n < 3) throw DimensionError("Grid1D needs at least 3 nodes, got " + std::to_string(n));
    if (!(length > 0.0) || !std::isfinite(length)) throw DimensionError("Grid1D length must be positive");
    return Grid1D{n, length, length / static_cast<double>(n)};
}

Grid2D Grid2D::make(std::size_t nx, std::size_t ny, double lx, double ly) {
    if (nx < 3 || ny < 3) throw DimensionError("Grid2D needs at least 3 nodes per direction");
    if (!(lx > 0.0) || !(ly > 0.0)) throw DimensionError("Grid2D extents must be positive");
    return Grid2D{nx, ny, lx, ly, lx / static_cast<double>(nx), ly / static_cast<double>(ny)};
}

std::size_t wrap_index(long long i, std::size_t n) {
    const auto m = static_cast<long long>(n);
    long long r = i % m;
    if (r < 0) r += m;
    return static_cast<std::size_t>(r);
}

Lattice::Lattice(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny) {
    if (nx == 0 || ny == 0) throw DimensionError("lattice extents must be positive");
}

std::size_t Lattice::wrap(std::size_t dof, Offset off) const {
    const auto ix = static_cast<long long>(dof % nx_);
    const auto iy = static_cast<long long>(dof / nx_);
    const std::size_t wx = wrap_index(ix + off.x, nx_);
    const std::size_t wy = wrap_index(iy + off.y, ny_);
    return wy * nx_ + wx;
}

StencilSpec::StencilSpec(std::vector<Offset> offsets) : offsets_(std::move(offsets)) {
    if (offsets_.empty()) throw InvalidStencilError("stencil has no offsets");
    for (std::size_t k = 1; k < offsets_.size(); ++k) {
        if (!(offsets_[k - 1] < offsets_[k]))
            throw InvalidStencilError("stencil offsets must be strictly increasing");
    }
    const auto it = std::find(offsets_.begin(), offsets_.end(), Offset{0, 0});
    if (it == offsets_.end()) throw InvalidStencilError("stencil must contain the zero offset");
    center_ = static_cast<std::size_t>(it - offsets_.begin());
}

namespace {

void check_window_size(int size) {
    if (size < 3 || size % 2 == 0)
        throw InvalidStencilError("stencil size must be odd and >= 3, got " + std::to_string(size));
}

}  // namespace

StencilSpec StencilSpec::centered(int size) {
    check_window_size(size);
    const int half = (size - 1) / 2;
    std::vector<Offset> offs;
    offs.reserve(static_cast<std::size_t>(size));
    for (int k = -half; k <= half; ++k) offs.push_back({k, 0});
    return StencilSpec(std::move(offs));
}

StencilSpec StencilSpec::along_x(int size) { return centered(size); }

StencilSpec StencilSpec::along_y(int size) {
    check_window_size(size);
    const int half = (size - 1) / 2;
    std::vector<Offset> offs;
    for (int k = -half; k <= half; ++k) offs.push_back({0, k});
    return StencilSpec(std::move(offs));
}

StencilSpec StencilSpec::merge(const StencilSpec& a, const StencilSpec& b) {
    std::vector<Offset> out;
    std::set_union(a.offsets_.begin(), a.offsets_.end(), b.offsets_.begin(), b.offsets_.end(),
                   std::back_inserter(out));
    return StencilSpec(std::move(out));
}

std::size_t StencilSpec::find(Offset off) const {
    const auto it = std::lower_bound(offsets_.begin(), offsets_.end(), off);
    if (it == offsets_.end() || *it != off) return offsets_.size();
    return static_cast<std::size_t>(it - offsets_.begin());
}

bool StencilSpec::is_two_dimensional() const {
    return std::any_of(offsets_.begin(), offsets_.end(), [](const Offset& o) { return o.y != 0; });
}

StencilSpec make_centered_stencil(int size) { return StencilSpec::centered(size); }

AssembledOperator assemble(std::vector<LocalOperator> rows, const Lattice& lattice) {
    const std::size_t n = lattice.size();
    if (rows.size() != n)
        throw AssemblyError("expected " + std::to_string(n) + " rows, got " + std::to_string(rows.size()));
    std::sort(rows.begin(), rows.end(),
              [](const LocalOperator& a, const LocalOperator& b) { return a.dof < b.dof; });
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].dof != i)
            throw AssemblyError("missing or duplicate row for DOF " + std::to_string(i));
        if (rows[i].coeffs.size() != rows[i].stencil.size())
            throw AssemblyError("row " + std::to_string(i) + ": coefficient count does not match stencil");
        for (double c : rows[i].coeffs)
            if (!std::isfinite(c)) throw AssemblyError("row " + std::to_string(i) + " has a non-finite coefficient");
        if (lattice.is_line() && rows[i].stencil.is_two_dimensional())
            throw AssemblyError("2-D stencil on a 1-D lattice");
    }

    AssembledOperator op;
    op.lattice_ = lattice;
    op.row_start_.reserve(n + 1);
    op.row_start_.push_back(0);
    for (const auto& r : rows) {
        for (const Offset& off : r.stencil.offsets()) op.cols_.push_back(lattice.wrap(r.dof, off));
        op.row_start_.push_back(op.cols_.size());
    }
    op.rows_ = std::move(rows);
    return op;
}

AssembledOperator assemble(std::vector<LocalOperator> rows, std::size_t n) {
    return assemble(std::move(rows), Lattice::line(n));
}

AssembledOperator assemble_uniform(const StencilSpec& stencil, std::span<const double> coeffs,
                                   const Lattice& lattice) {
    std::vector<LocalOperator> rows;
    rows.reserve(lattice.size());
    for (std::size_t i = 0; i < lattice.size(); ++i)
        rows.push_back({i, stencil, std::vector<double>(coeffs.begin(), coeffs.end())});
    return assemble(std::move(rows), lattice);
}

Eigen::VectorXd AssembledOperator::apply(const Eigen::VectorXd& u) const {
    const std::size_t n = rows_.size();
    if (static_cast<std::size_t>(u.size()) != n)
        throw DimensionError("apply: state has length " + std::to_string(u.size()) + ", operator has " +
                             std::to_string(n) + " rows");
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = rows_[i].coeffs;
        const std::size_t base = row_start_[i];
        double acc = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) acc += c[k] * u[static_cast<Eigen::Index>(cols_[base + k])];
        out[static_cast<Eigen::Index>(i)] = acc;
    }
    return out;
}

Eigen::MatrixXd AssembledOperator::dense() const {
    const auto n = static_cast<Eigen::Index>(rows_.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& c = rows_[i].coeffs;
        for (std::size_t k = 0; k < c.size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols_[row_start_[i] + k])) += c[k];
    }
    return m;
}

Eigen::VectorXd apply(const AssembledOperator& a, const Eigen::VectorXd& u) { return a.apply(u); }

void write_operator_csv(std::ostream& os, const AssembledOperator& a) {
    const bool line = a.lattice().is_line();
    os << (line ? "dof,offset,coeff\n" : "dof,offset_x,offset_y,coeff\n");
    for (const auto& r : a.rows()) {
        const auto offs = r.stencil.offsets();
        for (std::size_t k = 0; k < offs.size(); ++k) {
            os << r.dof << ',' << offs[k].x << ',';
            if (!line) os << offs[k].y << ',';
            os << format_double(r.coeffs[k]) << '\n';
        }
    }
}

AssembledOperator read_operator_csv(std::istream& is, const Lattice& lattice) {
    const CsvTable table = read_csv(is);
    const bool line = table.header.size() == 3;
    if (line && table.header != std::vector<std::string>{"dof", "offset", "coeff"})
        throw FormatError("operator CSV: unexpected header");
    if (!line && table.header != std::vector<std::string>{"dof", "offset_x", "offset_y", "coeff"})
        throw FormatError("operator CSV: unexpected header");

    std::map<std::size_t, std::vector<std::pair<Offset, double>>> by_dof;
    for (const auto& row : table.rows) {
        const auto dof = static_cast<std::size_t>(parse_long(row[0]));
        Offset off{static_cast<int>(parse_long(row[1])), line ? 0 : static_cast<int>(parse_long(row[2]))};
        by_dof[dof].push_back({off, parse_double(row.back())});
    }
    std::vector<LocalOperator> rows;
    rows.reserve(by_dof.size());
    for (auto& [dof, entries] : by_dof) {
        std::vector<Offset> offs;
        std::vector<double> coeffs;
        for (const auto& [o, c] : entries) {
            offs.push_back(o);
            coeffs.push_back(c);
        }
        rows.push_back({dof, StencilSpec(std::move(offs)), std::move(coeffs)});
    }
    return assemble(std::move(rows), lattice);
}

}  // namespace sldo
