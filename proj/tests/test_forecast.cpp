#include "oracles.hpp"

#include "sldo/errors.hpp"
#include "sldo/forecast.hpp"
#include "sldo/spectra.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace sldo;

namespace {

SnapshotSet from_states(const Eigen::MatrixXd& u, double dt = 0.1) {
    SnapshotSet s;
    s.states = u;
    s.rhs = Eigen::MatrixXd::Zero(u.rows(), u.cols());
    for (Eigen::Index k = 0; k < u.cols(); ++k) s.times.push_back(dt * static_cast<double>(k));
    s.meta.nx = static_cast<std::size_t>(u.rows());
    s.meta.dt = dt;
    return s;
}

std::vector<std::pair<double, const AssembledOperator*>> linear_terms(const LearnedModel& m) {
    std::vector<std::pair<double, const AssembledOperator*>> out;
    for (std::size_t b = 0; b < m.layout.blocks.size(); ++b)
        if (!m.layout.blocks[b].quadratic) out.emplace_back(m.layout.blocks[b].scale, &m.operators[b]);
    return out;
}

const AssembledOperator* quadratic_term(const LearnedModel& m) {
    for (std::size_t b = 0; b < m.layout.blocks.size(); ++b)
        if (m.layout.blocks[b].quadratic) return &m.operators[b];
    return nullptr;
}

}  // namespace

TEST_CASE("the reference model reproduces its own trajectory") {
    for (CaseKind k : {CaseKind::diffusion, CaseKind::burgers}) {
        CaseParams cp = CaseParams::canonical(k);
        cp.n_snapshots = 80;
        const SnapshotSet ref = generate_training(cp);
        const Forecast fc = integrate_model(reference_model(cp), ref.states.col(0), cp.dt, ref.count() - 1);
        REQUIRE_FALSE(fc.flagged());
        CHECK(fc.trajectory.states == ref.states);
        const ErrorReport r = evaluate_forecast(ref, fc, ref.times.back());
        CHECK(r.eps_xt == 0.0);
        for (double e : r.series.e_u) CHECK(e == 0.0);
    }
}

TEST_CASE("zero operator keeps the state") {
    CaseParams cp = CaseParams::canonical(CaseKind::diffusion);
    LearnedModel m = reference_model(cp);
    const std::array<double, 3> z{0.0, 0.0, 0.0};
    m.operators[0] = assemble_uniform(make_centered_stencil(3), z, m.lattice);
    const Eigen::VectorXd u0 = initial_condition(cp);
    const Forecast fc = integrate_model(m, u0, cp.dt, 30);
    REQUIRE(fc.trajectory.count() == 31);
    for (Eigen::Index k = 0; k < 31; ++k) CHECK(fc.trajectory.states.col(k) == u0);
    CHECK_THROWS_AS(integrate_model(m, Eigen::VectorXd::Zero(3), cp.dt, 3), DimensionError);
}

TEST_CASE("blow-up detection") {
    SemiDiscreteForm f;
    const std::array<double, 3> grow{0.0, -1.0, 0.0};  // du/dt = u
    f.linear.push_back({1.0, assemble_uniform(make_centered_stencil(3), grow, Lattice::line(4))});
    const Forecast fc = integrate_form(f, Eigen::VectorXd::Ones(4), 1.0, 100, 1e3);
    REQUIRE(fc.flagged());
    CHECK(*fc.blowup_step == 10);  // 2^10 > 1e3
    CHECK(fc.trajectory.count() == 11);
    const SnapshotSet ref = from_states(Eigen::MatrixXd::Ones(4, 101), 1.0);
    CHECK(std::isinf(evaluate_forecast(ref, fc, 50.0).eps_xt));
}

TEST_CASE("advection LDO blows up inside the forecast horizon") {
    CaseParams cp = CaseParams::canonical(CaseKind::advection);
    cp.rhs_source = RhsSource::finite_difference;
    const SnapshotSet train = generate_training(cp);
    LearnOptions o;
    o.ridge = {1e-3, 0.0};
    const LearnedModel m = learn_model(train, cp.kind, cp.phys, o);
    const std::size_t steps = 2 * (cp.n_snapshots - 1);
    const Forecast fc = integrate_model(m, train.states.col(0), cp.dt, steps);
    REQUIRE(fc.flagged());
    CHECK(static_cast<double>(*fc.blowup_step) * cp.dt < 20.0);
}

TEST_CASE("relative error series") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd u(6, 9), um(6, 9);
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index t = 0; t < 9; ++t) {
            u(i, t) = nd(rng);
            um(i, t) = nd(rng);
        }
    const SnapshotSet a = from_states(u), b = from_states(um);
    CHECK(relative_error_series(a, a).e_u == std::vector<double>(9, 0.0));
    for (double e : relative_error_series(a, from_states(2.0 * u)).e_u) CHECK(e == doctest::Approx(1.0));
    const auto got = relative_error_series(a, b).e_u;
    const auto want = oracle::e_u(u, um);
    for (std::size_t k = 0; k < 9; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-13));

    Eigen::MatrixXd z = u;
    z.col(4).setZero();
    const ErrorSeries s = relative_error_series(from_states(z), b);
    CHECK_FALSE(s.defined[4]);
    CHECK(std::isnan(s.e_u[4]));
    CHECK(s.defined[3]);
}

TEST_CASE("total error") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    Eigen::MatrixXd u(7, 12), um(7, 12);
    for (Eigen::Index i = 0; i < 7; ++i)
        for (Eigen::Index t = 0; t < 12; ++t) {
            u(i, t) = ud(rng);
            um(i, t) = ud(rng);
        }
    CHECK(total_error(from_states(u), from_states(u)) == 0.0);
    CHECK(total_error(from_states(u), from_states(Eigen::MatrixXd::Zero(7, 12))) == doctest::Approx(1.0));
    CHECK(total_error(from_states(u), from_states(um)) == doctest::Approx(oracle::eps_xt(u, um)).epsilon(1e-13));
    CHECK(std::isinf(total_error(from_states(u), from_states(um), true)));
    CHECK_THROWS_AS(total_error(from_states(Eigen::MatrixXd::Zero(7, 12)), from_states(um)), DimensionError);
    CHECK_THROWS_AS(total_error(from_states(u), from_states(um.leftCols(5))), DimensionError);
}

TEST_CASE("training error") {
    CaseParams cp = CaseParams::canonical(CaseKind::burgers);
    cp.n_snapshots = 60;
    const SnapshotSet s = generate_training(cp);
    const LearnedModel ref = reference_model(cp);
    CHECK(training_error(s, ref) == 0.0);

    LearnOptions o;
    o.s1 = 5;
    o.ridge = {0.1, 0.01};
    const LearnedModel m = learn_model(s, cp.kind, cp.phys, o);
    const double want = oracle::e_train(s, linear_terms(m), quadratic_term(m));
    CHECK(training_error(s, m) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("training error grows with the ridge weight") {
    CaseParams cp = CaseParams::canonical(CaseKind::diffusion);
    cp.rhs_source = RhsSource::finite_difference;
    const SnapshotSet s = generate_training(cp);
    double prev = -1.0;
    for (double beta : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2}) {
        LearnOptions o;
        o.s1 = 5;
        o.ridge = {beta, 0.0};
        const double e = training_error(s, learn_model(s, cp.kind, cp.phys, o));
        CHECK(e >= prev * (1.0 - 1e-9));
        prev = e;
    }
}

TEST_CASE("averaged stencils") {
    const double dx = 0.25;
    const std::array<double, 3> bd{-1.0 / dx, 1.0 / dx, 0.0};
    const auto avg = averaged_stencil(assemble_uniform(make_centered_stencil(3), bd, Lattice::line(12)), dx);
    REQUIRE(avg.size() == 3);
    CHECK(avg[0] == doctest::Approx(-1.0));
    CHECK(avg[1] == doctest::Approx(1.0));
    CHECK(avg[2] == 0.0);

    std::vector<LocalOperator> rows;
    for (std::size_t i = 0; i < 4; ++i) rows.push_back({i, make_centered_stencil(3), {double(i), 2.0, -double(i)}});
    const auto mean = averaged_stencil(assemble(rows, 4), 1.0);
    CHECK(mean[0] == doctest::Approx(1.5));
    CHECK(mean[1] == doctest::Approx(2.0));
    CHECK(mean[2] == doctest::Approx(-1.5));

    rows[2].stencil = make_centered_stencil(5);
    rows[2].coeffs = {0, 0, 1, 0, 0};
    CHECK_THROWS_AS(averaged_stencil(assemble(rows, 4), 1.0), DimensionError);
}

TEST_CASE("error series CSV") {
    ErrorSeries s;
    s.times = {0.0, 0.5};
    s.e_u = {0.0, 0.125};
    s.defined = {true, true};
    std::ostringstream os;
    write_error_series_csv(os, s);
    CHECK(os.str() == "t,e_u\n0,0\n0.5,0.125\n");
}
