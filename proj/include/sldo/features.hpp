#pragma once

// Per-DOF regression problems built from snapshot data.

#include "sldo/gridops.hpp"
#include "sldo/refsim.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace sldo {

/// One group of design-matrix columns. A linear block gathers
/// scale * u_{dof+k}; a quadratic block gathers scale * u_dof * u_{dof+k}.
/// The learned coefficients of a block form one local operator row.
struct FeatureBlock {
    std::string name;
    StencilSpec stencil;
    double scale = 1.0;
    bool quadratic = false;
};

struct FeatureLayout {
    std::vector<FeatureBlock> blocks;

    std::size_t columns() const;
    std::size_t block_start(std::size_t b) const;
    /// Union of all block stencils (the gathered local solution window).
    StencilSpec union_stencil() const;

    /// Blocks for each case in its modeled form:
    ///   diffusion            {L2: -nu}
    ///   advection            {L1: c}
    ///   advection-diffusion  {L1: c, L2: -nu}
    ///   burgers              {N: 1 (quadratic), L: -nu}
    ///   advection2d          {Lx: cx, Ly: cy}
    /// `s1` sizes the first block, `s2` the second (ignored for single-block cases).
    static FeatureLayout for_case(CaseKind kind, const PhysicalParams& phys, int s1, int s2);
};

struct RegressionProblem {
    std::size_t dof = 0;
    Eigen::MatrixXd X;       // n_t x p
    Eigen::VectorXd y;       // n_t, equals -du_dof/dt
    double window_norm = 0;  // Frobenius norm of the raw gathered window over all times
    double norm = 1.0;       // scale applied to X and y (1 until normalized)
    FeatureLayout layout;
};

inline constexpr double kNormalizationFloor = 1e-12;

RegressionProblem build_problem(const SnapshotSet& snap, std::size_t dof, const FeatureLayout& layout);

/// Single linear block with coefficient `scale` (c for advection, -nu for diffusion).
RegressionProblem build_linear_problem(const SnapshotSet& snap, std::size_t dof, const StencilSpec& stencil,
                                       double scale);
/// Two linear blocks, e.g. c * L1 and -nu * L2.
RegressionProblem build_linear_problem(const SnapshotSet& snap, std::size_t dof, const StencilSpec& s1,
                                       double scale1, const StencilSpec& s2, double scale2);
/// Quadratic block z_k = u_dof * u_{dof+k} over `s_n`, then linear block -nu * u over `s_l`.
RegressionProblem build_burgers_problem(const SnapshotSet& snap, std::size_t dof, const StencilSpec& s_n,
                                        const StencilSpec& s_l, double nu);

/// Divides X and y by max(floor, window_norm).
RegressionProblem normalize_problem(RegressionProblem p);

}  // namespace sldo
