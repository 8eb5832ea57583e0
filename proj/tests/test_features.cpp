#include "sldo/errors.hpp"
#include "sldo/features.hpp"

#include <doctest.h>

#include <random>

using namespace sldo;

namespace {

SnapshotSet make_set(const Eigen::MatrixXd& states, const Eigen::MatrixXd& rhs) {
    SnapshotSet s;
    s.states = states;
    s.rhs = rhs;
    for (Eigen::Index k = 0; k < states.cols(); ++k) s.times.push_back(0.1 * static_cast<double>(k));
    s.meta.nx = static_cast<std::size_t>(states.rows());
    s.meta.ny = 1;
    s.meta.dt = 0.1;
    return s;
}

SnapshotSet random_set(std::size_t n, std::size_t nt, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::MatrixXd u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nt)), r(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        u.data()[i] = N(rng);
        r.data()[i] = N(rng);
    }
    return make_set(u, r);
}

}  // namespace

TEST_CASE("constant states give equal columns and zero target") {
    const SnapshotSet s = make_set(Eigen::MatrixXd::Constant(7, 4, 1.5), Eigen::MatrixXd::Zero(7, 4));
    const RegressionProblem p = build_linear_problem(s, 3, make_centered_stencil(5), 1.0);
    for (Eigen::Index t = 0; t < p.X.rows(); ++t)
        for (Eigen::Index c = 0; c < p.X.cols(); ++c) CHECK(p.X(t, c) == 1.5);
    CHECK(p.y.isZero());
}

TEST_CASE("linear gather follows the periodic wrap") {
    const CaseParams cp = CaseParams::canonical(CaseKind::diffusion);
    const SnapshotSet s = generate_case(cp, 10);
    const std::size_t n = s.dofs();
    for (std::size_t dof : {std::size_t{0}, std::size_t{57}, n - 1}) {
        const RegressionProblem p = build_linear_problem(s, dof, make_centered_stencil(3), 1.0);
        const auto i = static_cast<Eigen::Index>(dof);
        const auto l = static_cast<Eigen::Index>((dof + n - 1) % n), r = static_cast<Eigen::Index>((dof + 1) % n);
        CHECK(p.X.col(0) == s.states.row(l).transpose());
        CHECK(p.X.col(1) == s.states.row(i).transpose());
        CHECK(p.X.col(2) == s.states.row(r).transpose());
        CHECK(p.y == -s.rhs.row(i).transpose());
    }
    CHECK_THROWS_AS(build_linear_problem(s, n, make_centered_stencil(3), 1.0), IndexError);
}

TEST_CASE("hand-built three-DOF gather") {
    Eigen::MatrixXd u(3, 2), r(3, 2);
    u << 1, 4,
         2, 5,
         3, 6;
    r << 10, 40,
         20, 50,
         30, 60;
    const SnapshotSet s = make_set(u, r);
    const RegressionProblem p = build_linear_problem(s, 0, make_centered_stencil(3), 2.0);
    Eigen::MatrixXd expect(2, 3);
    expect << 6, 2, 4,
              12, 8, 10;
    CHECK(p.X == expect);
    CHECK(p.y == Eigen::Vector2d(-10, -40));

    // Two blocks: columns concatenate, each scaled by its own constant.
    const RegressionProblem q =
        build_linear_problem(s, 2, StencilSpec({{-1, 0}, {0, 0}}), 1.0, make_centered_stencil(3), -0.5);
    REQUIRE(q.X.cols() == 5);
    CHECK(q.X(0, 0) == 2.0);
    CHECK(q.X(0, 1) == 3.0);
    CHECK(q.X(0, 2) == -1.0);
    CHECK(q.X(0, 3) == -1.5);
    CHECK(q.X(0, 4) == -0.5);
}

TEST_CASE("quadratic gather") {
    const SnapshotSet ones = make_set(Eigen::MatrixXd::Ones(5, 3), Eigen::MatrixXd::Zero(5, 3));
    const RegressionProblem p = build_burgers_problem(ones, 2, make_centered_stencil(3), make_centered_stencil(3), 0.1);
    CHECK(p.X.leftCols(3) == Eigen::MatrixXd::Ones(3, 3));
    CHECK(p.X.rightCols(3) == Eigen::MatrixXd::Constant(3, 3, -0.1));

    SnapshotSet z = random_set(6, 4, 5);
    z.states(1, 2) = 0.0;
    const RegressionProblem q = build_burgers_problem(z, 1, make_centered_stencil(5), make_centered_stencil(3), 0.1);
    CHECK(q.X.row(2).head(5).isZero());

    const SnapshotSet w = random_set(8, 6, 9);
    const RegressionProblem b = build_burgers_problem(w, 0, make_centered_stencil(3), make_centered_stencil(3), 0.2);
    for (Eigen::Index t = 0; t < 6; ++t) {
        CHECK(b.X(t, 0) == w.states(0, t) * w.states(7, t));
        CHECK(b.X(t, 1) == w.states(0, t) * w.states(0, t));
        CHECK(b.X(t, 2) == w.states(0, t) * w.states(1, t));
        CHECK(b.X(t, 3) == -0.2 * w.states(7, t));
    }
}

TEST_CASE("normalization") {
    const SnapshotSet zero = make_set(Eigen::MatrixXd::Zero(5, 3), Eigen::MatrixXd::Zero(5, 3));
    const RegressionProblem z = normalize_problem(build_linear_problem(zero, 2, make_centered_stencil(3), 1.0));
    CHECK(z.norm == kNormalizationFloor);
    CHECK(z.X.isZero());
    CHECK(z.y.isZero());

    const SnapshotSet s = random_set(9, 7, 1);
    SnapshotSet s10 = s;
    s10.states *= 10.0;
    s10.rhs *= 10.0;
    const RegressionProblem raw = build_linear_problem(s, 4, make_centered_stencil(5), -0.3);
    const RegressionProblem a = normalize_problem(raw);
    const RegressionProblem b = normalize_problem(build_linear_problem(s10, 4, make_centered_stencil(5), -0.3));
    CHECK((a.X - b.X).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.norm * a.X - raw.X).cwiseAbs().maxCoeff() <= 1e-12 * raw.X.cwiseAbs().maxCoeff());

    // Window norm: Frobenius norm of the gathered (unscaled) window over all times.
    double sq = 0;
    for (int k : {2, 3, 4, 5, 6})
        for (Eigen::Index t = 0; t < 7; ++t) sq += s.states(k, t) * s.states(k, t);
    CHECK(raw.window_norm == doctest::Approx(std::sqrt(sq)).epsilon(1e-14));

    // Least-squares argmin unchanged.
    const Eigen::VectorXd t1 = raw.X.colPivHouseholderQr().solve(raw.y);
    const Eigen::VectorXd t2 = a.X.colPivHouseholderQr().solve(a.y);
    CHECK((t1 - t2).norm() <= 1e-10 * t1.norm());
}

TEST_CASE("exact generator data have zero residual") {
    const CaseParams cp = CaseParams::canonical(CaseKind::advection_diffusion);
    const SnapshotSet s = generate_case(cp, 40);
    const double dx = cp.grid1d().dx;
    const FeatureLayout layout = FeatureLayout::for_case(cp.kind, cp.phys, 5, 3);
    for (std::size_t dof : {std::size_t{0}, std::size_t{100}, std::size_t{200}}) {
        const RegressionProblem p = build_problem(s, dof, layout);
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(8);
        theta.segment(1, 3) << -1 / dx, 1 / dx, 0.0;      // backward difference on the 5-wide block
        theta.tail(3) << 1 / (dx * dx), -2 / (dx * dx), 1 / (dx * dx);
        const double scale = p.y.cwiseAbs().maxCoeff() + 1.0;
        CHECK((p.y - p.X * theta).cwiseAbs().maxCoeff() <= 1e-11 * scale);
    }
}

TEST_CASE("layouts per case") {
    const PhysicalParams ph{1.25, 0.02, 1.0, 0.5};
    CHECK(FeatureLayout::for_case(CaseKind::advection, ph, 5, 9).columns() == 5);
    const FeatureLayout ad = FeatureLayout::for_case(CaseKind::advection_diffusion, ph, 3, 7);
    CHECK(ad.columns() == 10);
    CHECK(ad.block_start(1) == 3);
    CHECK(ad.union_stencil().size() == 7);
    CHECK(ad.blocks[1].scale == -0.02);
    const FeatureLayout b = FeatureLayout::for_case(CaseKind::burgers, ph, 5, 3);
    CHECK(b.blocks[0].quadratic);
    CHECK_FALSE(b.blocks[1].quadratic);
    const FeatureLayout two = FeatureLayout::for_case(CaseKind::advection2d, ph, 3, 5);
    CHECK(two.union_stencil().size() == 7);
    CHECK(two.blocks[1].stencil.is_two_dimensional());
}
