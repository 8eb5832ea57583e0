#include "sldo/features.hpp"

#include "sldo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sldo {

std::size_t FeatureLayout::columns() const {
    std::size_t p = 0;
    for (const auto& b : blocks) p += b.stencil.size();
    return p;
}

std::size_t FeatureLayout::block_start(std::size_t b) const {
    std::size_t p = 0;
    for (std::size_t k = 0; k < b; ++k) p += blocks.at(k).stencil.size();
    return p;
}

StencilSpec FeatureLayout::union_stencil() const {
    if (blocks.empty()) throw ConstraintError("feature layout has no blocks");
    StencilSpec u = blocks.front().stencil;
    for (std::size_t b = 1; b < blocks.size(); ++b) u = StencilSpec::merge(u, blocks[b].stencil);
    return u;
}

FeatureLayout FeatureLayout::for_case(CaseKind kind, const PhysicalParams& phys, int s1, int s2) {
    FeatureLayout l;
    switch (kind) {
        case CaseKind::diffusion:
            l.blocks.push_back({"L2", StencilSpec::centered(s1), -phys.nu, false});
            break;
        case CaseKind::advection:
            l.blocks.push_back({"L1", StencilSpec::centered(s1), phys.c, false});
            break;
        case CaseKind::advection_diffusion:
            l.blocks.push_back({"L1", StencilSpec::centered(s1), phys.c, false});
            l.blocks.push_back({"L2", StencilSpec::centered(s2), -phys.nu, false});
            break;
        case CaseKind::burgers:
            l.blocks.push_back({"N", StencilSpec::centered(s1), 1.0, true});
            l.blocks.push_back({"L", StencilSpec::centered(s2), -phys.nu, false});
            break;
        case CaseKind::advection2d:
            l.blocks.push_back({"Lx", StencilSpec::along_x(s1), phys.cx, false});
            l.blocks.push_back({"Ly", StencilSpec::along_y(s2), phys.cy, false});
            break;
    }
    return l;
}

RegressionProblem build_problem(const SnapshotSet& snap, std::size_t dof, const FeatureLayout& layout) {
    const Lattice lat = snap.lattice();
    if (dof >= lat.size())
        throw IndexError("DOF " + std::to_string(dof) + " out of range [0, " + std::to_string(lat.size()) + ")");
    if (layout.blocks.empty()) throw DimensionError("feature layout has no blocks");
    const auto nt = static_cast<Eigen::Index>(snap.count());

    RegressionProblem p;
    p.dof = dof;
    p.layout = layout;
    p.X.resize(nt, static_cast<Eigen::Index>(layout.columns()));
    p.y = -snap.rhs.row(static_cast<Eigen::Index>(dof)).transpose();

    const Eigen::VectorXd u_self = snap.states.row(static_cast<Eigen::Index>(dof)).transpose();
    Eigen::Index col = 0;
    for (const auto& block : layout.blocks) {
        for (const Offset& off : block.stencil.offsets()) {
            const auto src = static_cast<Eigen::Index>(lat.wrap(dof, off));
            if (block.quadratic)
                p.X.col(col) = block.scale * u_self.cwiseProduct(snap.states.row(src).transpose());
            else
                p.X.col(col) = block.scale * snap.states.row(src).transpose();
            ++col;
        }
    }

    double sq = 0.0;
    const StencilSpec window = layout.union_stencil();
    for (const Offset& off : window.offsets())
        sq += snap.states.row(static_cast<Eigen::Index>(lat.wrap(dof, off))).squaredNorm();
    p.window_norm = std::sqrt(sq);
    return p;
}

RegressionProblem build_linear_problem(const SnapshotSet& snap, std::size_t dof, const StencilSpec& stencil,
                                       double scale) {
    FeatureLayout l;
    l.blocks.push_back({"L", stencil, scale, false});
    return build_problem(snap, dof, l);
}

RegressionProblem build_linear_problem(const SnapshotSet& snap, std::size_t dof, const StencilSpec& s1,
                                       double scale1, const StencilSpec& s2, double scale2) {
    FeatureLayout l;
    l.blocks.push_back({"L1", s1, scale1, false});
    l.blocks.push_back({"L2", s2, scale2, false});
    return build_problem(snap, dof, l);
}

RegressionProblem build_burgers_problem(const SnapshotSet& snap, std::size_t dof, const StencilSpec& s_n,
                                        const StencilSpec& s_l, double nu) {
    FeatureLayout l;
    l.blocks.push_back({"N", s_n, 1.0, true});
    l.blocks.push_back({"L", s_l, -nu, false});
    return build_problem(snap, dof, l);
}

RegressionProblem normalize_problem(RegressionProblem p) {
    const double s = std::max(kNormalizationFloor, p.window_norm);
    p.X /= s;
    p.y /= s;
    p.norm *= s;
    return p;
}

}  // namespace sldo
