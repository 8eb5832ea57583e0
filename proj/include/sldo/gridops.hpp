#pragma once

// Periodic grids, stencil patterns and row-local sparse operators.

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace sldo {

/// Periodic 1-D grid with n nodes and no duplicated endpoint (dx = length / n).
struct Grid1D {
    std::size_t n = 0;
    double length = 0.0;
    double dx = 0.0;

    static Grid1D make(std::size_t n, double length);
    double x(std::size_t i) const { return static_cast<double>(i) * dx; }
};

/// Periodic 2-D grid; DOFs are flattened row-major, i = iy * nx + ix.
struct Grid2D {
    std::size_t nx = 0, ny = 0;
    double lx = 0.0, ly = 0.0;
    double dx = 0.0, dy = 0.0;

    static Grid2D make(std::size_t nx, std::size_t ny, double lx, double ly);
    std::size_t index(std::size_t ix, std::size_t iy) const { return iy * nx + ix; }
    double x(std::size_t ix) const { return static_cast<double>(ix) * dx; }
    double y(std::size_t iy) const { return static_cast<double>(iy) * dy; }
};

/// Stencil offset. 1-D stencils keep y = 0. Ordered by (y, x) so that the
/// ordering agrees with the flattened row-major DOF numbering.
struct Offset {
    int x = 0;
    int y = 0;

    friend bool operator==(const Offset&, const Offset&) = default;
    friend std::strong_ordering operator<=>(const Offset& a, const Offset& b) {
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }
};

/// Index topology of a periodic lattice: wraps (dof, offset) pairs per axis.
class Lattice {
public:
    Lattice() = default;
    Lattice(std::size_t nx, std::size_t ny);

    static Lattice line(std::size_t n) { return {n, 1}; }
    static Lattice of(const Grid1D& g) { return line(g.n); }
    static Lattice of(const Grid2D& g) { return {g.nx, g.ny}; }

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t size() const { return nx_ * ny_; }
    bool is_line() const { return ny_ == 1; }

    std::size_t wrap(std::size_t dof, Offset off) const;

    friend bool operator==(const Lattice&, const Lattice&) = default;

private:
    std::size_t nx_ = 0;
    std::size_t ny_ = 0;
};

/// Periodic index wrap: returns (i mod n) in [0, n).
std::size_t wrap_index(long long i, std::size_t n);

/// Ordered offset pattern of a local operator.
class StencilSpec {
public:
    StencilSpec() = default;
    /// Offsets must be strictly increasing and contain {0,0} exactly once.
    explicit StencilSpec(std::vector<Offset> offsets);

    /// 1-D centered window {-(size-1)/2, ..., (size-1)/2}; size odd and >= 3.
    static StencilSpec centered(int size);
    /// 2-D directional windows along x or y.
    static StencilSpec along_x(int size);
    static StencilSpec along_y(int size);
    /// Sorted union of two patterns.
    static StencilSpec merge(const StencilSpec& a, const StencilSpec& b);

    std::span<const Offset> offsets() const { return offsets_; }
    std::size_t size() const { return offsets_.size(); }
    std::size_t center_pos() const { return center_; }
    /// Position of `off` in the pattern, or size() if absent.
    std::size_t find(Offset off) const;
    bool is_two_dimensional() const;

    friend bool operator==(const StencilSpec& a, const StencilSpec& b) {
        return a.offsets_ == b.offsets_;
    }

private:
    std::vector<Offset> offsets_;
    std::size_t center_ = 0;
};

StencilSpec make_centered_stencil(int size);

struct LocalOperator {
    std::size_t dof = 0;
    StencilSpec stencil;
    std::vector<double> coeffs;
};

/// Row-local sparse operator over all DOFs of a periodic lattice.
class AssembledOperator {
public:
    AssembledOperator() = default;

    const Lattice& lattice() const { return lattice_; }
    std::size_t n() const { return rows_.size(); }
    const LocalOperator& row(std::size_t i) const { return rows_.at(i); }
    std::span<const LocalOperator> rows() const { return rows_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
    /// Dense n x n view; entries from aliased offsets (stencil wider than the grid) are summed.
    Eigen::MatrixXd dense() const;

private:
    friend AssembledOperator assemble(std::vector<LocalOperator> rows, const Lattice& lattice);

    Lattice lattice_;
    std::vector<LocalOperator> rows_;
    std::vector<std::size_t> row_start_;   // CSR-style offsets into cols_
    std::vector<std::size_t> cols_;        // wrapped column per (row, offset)
};

/// Sort rows by DOF and validate that each DOF 0..n-1 appears exactly once.
AssembledOperator assemble(std::vector<LocalOperator> rows, const Lattice& lattice);
AssembledOperator assemble(std::vector<LocalOperator> rows, std::size_t n);
/// Every row uses the same stencil and coefficients.
AssembledOperator assemble_uniform(const StencilSpec& stencil, std::span<const double> coeffs,
                                   const Lattice& lattice);

Eigen::VectorXd apply(const AssembledOperator& a, const Eigen::VectorXd& u);

/// CSV with header `dof,offset,coeff` (line lattices) or `dof,offset_x,offset_y,coeff`;
/// rows ordered by dof then offset.
void write_operator_csv(std::ostream& os, const AssembledOperator& a);
AssembledOperator read_operator_csv(std::istream& is, const Lattice& lattice);

}  // namespace sldo
