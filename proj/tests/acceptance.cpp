// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
// Usage: acceptance [work_dir]

#include "oracles.hpp"

#include "sldo/experiment.hpp"
#include "sldo/forecast.hpp"
#include "sldo/learner.hpp"
#include "sldo/qpcore.hpp"
#include "sldo/spectra.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace sldo;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kRecoveryTol = 1e-6;
constexpr double kAveragedEntryTol = 0.02;
constexpr double kAveragedCenter = 0.993;
constexpr double kBdRowTol = 0.05;
constexpr double kDominanceTol = 1e-6;
constexpr double kSpectrumTol = 1e-6;
constexpr double kNormGrowth = 2.0;
constexpr double kBurgersCheckTime = 2.0;
constexpr double kQpSolutionTol = 1e-4;
constexpr double kQpObjectiveTol = 1e-6;
constexpr double kProjectionTol = 1e-6;
constexpr double kCirculantTol = 1e-8;
constexpr double kMetricTol = 1e-12;
constexpr int kRandomQps = 200;
constexpr int kRandomMatrices = 200;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void fail(const std::string& why) {
        if (pass) detail.str("");
        else detail << "; ";
        pass = false;
        detail << why;
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

class Runs {
public:
    explicit Runs(fs::path root) : root_(std::move(root)) {}

    const ExperimentResult& get(CaseKind k) {
        auto it = done_.find(k);
        if (it != done_.end()) return it->second;
        const auto t0 = std::chrono::steady_clock::now();
        const ExperimentConfig cfg = canonical_config(k);
        ExperimentResult r = run_experiment(cfg, root_ / std::string(to_string(k)));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "  ran " << to_string(k) << " (" << r.runs.size() << " runs, " << fmt(secs) << " s)\n";
        return done_.emplace(k, std::move(r)).first->second;
    }

private:
    fs::path root_;
    std::map<CaseKind, ExperimentResult> done_;
};

const RunRecord* find(const ExperimentResult& r, Method m, int s1, int s2, double b1, double b2) {
    for (const auto& run : r.runs)
        if (run.key.method == m && run.key.s1 == s1 && run.key.s2 == s2 && run.key.beta1 == b1 && run.key.beta2 == b2)
            return &run;
    return nullptr;
}

double training_end(CaseKind k) {
    const CaseParams p = canonical_config(k).params;
    return p.dt * static_cast<double>(p.n_snapshots - 1);
}

Outcome exact_recovery() {
    Outcome o;
    CaseParams cp = CaseParams::canonical(CaseKind::diffusion);
    cp.rhs_source = RhsSource::exact;
    const SnapshotSet s = generate_training(cp);
    LearnOptions opt;
    opt.ridge = {0.0, 0.0};
    opt.s1 = 3;
    const LearnedModel m = learn_model(s, cp.kind, cp.phys, opt);
    const LearnedModel ref = reference_model(cp);
    double worst = 0.0;
    for (std::size_t i = 0; i < m.lattice.size(); ++i)
        worst = std::max(worst, (m.theta(i) - ref.theta(i)).norm() / ref.theta(i).norm());
    if (worst > kRecoveryTol) o.fail("worst row error " + fmt(worst));
    else o.detail << "worst per-row relative error " << fmt(worst);
    return o;
}

Outcome averaged_stencils(Runs& runs) {
    Outcome o;
    const ExperimentResult& adv = runs.get(CaseKind::advection);
    for (int s : {3, 5, 7}) {
        const RunRecord* r = find(adv, Method::sldo, s, 0, 0.0, 0.0);
        if (!r) {
            o.fail("missing S-LDO s=" + std::to_string(s));
            continue;
        }
        const auto& a = r->averaged;
        const std::size_t c = static_cast<std::size_t>((s - 1) / 2);
        std::ostringstream row;
        for (double v : a) row << fmt(v) << ' ';
        if (s == 3) {
            if (std::abs(a[0] + kAveragedCenter) > kAveragedEntryTol || std::abs(a[1] - kAveragedCenter) > kAveragedEntryTol ||
                std::abs(a[2]) > kAveragedEntryTol)
                o.fail("s=3 row " + row.str());
        }
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double bd = k + 1 == c ? -1.0 : (k == c ? 1.0 : 0.0);
            if (std::abs(a[k] - bd) > kBdRowTol) o.fail("s=" + std::to_string(s) + " row " + row.str());
        }
        if (o.pass) o.detail << "s=" << s << ": " << row.str() << ' ';
    }
    return o;
}

Outcome stability_guarantee(Runs& runs) {
    Outcome o;
    std::size_t checked = 0;
    for (CaseKind k : {CaseKind::diffusion, CaseKind::advection, CaseKind::advection_diffusion, CaseKind::burgers,
                       CaseKind::advection2d}) {
        for (const auto& r : runs.get(k).runs) {
            if (r.key.method != Method::sldo) continue;
            ++checked;
            if (r.min_dominance_slack < -kDominanceTol)
                o.fail(std::string(to_string(k)) + " " + r.tag + " dominance slack " + fmt(r.min_dominance_slack));
            if (!r.spectrum_dense) o.fail(std::string(to_string(k)) + " " + r.tag + " has no dense spectrum");
            if (r.max_real_part > kSpectrumTol)
                o.fail(std::string(to_string(k)) + " " + r.tag + " max Re " + fmt(r.max_real_part));
        }
    }
    if (o.pass) o.detail << checked << " S-LDO models, all dominant and stable";
    return o;
}

Outcome instability(Runs& runs) {
    Outcome o;
    const ExperimentResult& adv = runs.get(CaseKind::advection);
    const ExperimentResult& dif = runs.get(CaseKind::diffusion);
    std::ostringstream seen;
    for (int s : {3, 5, 7, 11, 21, 41}) {
        const RunRecord* a = find(adv, Method::ldo, s, 0, 1e-3, 0.0);
        const RunRecord* d = find(dif, Method::ldo, s, 0, 1e-3, 0.0);
        if (!a || !d) {
            o.fail("missing LDO s=" + std::to_string(s));
            continue;
        }
        if (a->stable) o.fail("advection LDO s=" + std::to_string(s) + " stable (max Re " + fmt(a->max_real_part) + ")");
        const bool want_stable = s == 3;
        if (d->stable != want_stable)
            o.fail("diffusion LDO s=" + std::to_string(s) + (d->stable ? " stable" : " unstable") + " (max Re " +
                   fmt(d->max_real_part) + ")");
        seen << " s" << s << ":" << fmt(d->max_real_part);
    }
    if (o.pass) o.detail << "diffusion max Re" << seen.str();
    return o;
}

Outcome forecast_robustness(Runs& runs) {
    Outcome o;
    std::size_t sldo_checked = 0, ldo_checked = 0;
    for (CaseKind k : {CaseKind::diffusion, CaseKind::advection, CaseKind::advection_diffusion, CaseKind::advection2d}) {
        for (const auto& r : runs.get(k).runs) {
            if (r.key.method != Method::sldo) continue;
            if (k == CaseKind::advection_diffusion && r.key.s1 == 3 && r.key.s2 <= 7) continue;
            ++sldo_checked;
            if (r.blowup_step) o.fail(std::string(to_string(k)) + " " + r.tag + " blew up");
            else if (r.max_norm_ratio > kNormGrowth)
                o.fail(std::string(to_string(k)) + " " + r.tag + " norm ratio " + fmt(r.max_norm_ratio));
        }
    }
    const double end = training_end(CaseKind::advection);
    const double dt = canonical_config(CaseKind::advection).params.dt;
    for (const auto& r : runs.get(CaseKind::advection).runs) {
        if (r.key.method != Method::ldo || r.key.beta1 != 1e-3) continue;
        ++ldo_checked;
        const bool blew = r.blowup_step && static_cast<double>(*r.blowup_step) * dt <= end;
        const bool diverged = r.first_eu_above_one >= 0.0 && r.first_eu_above_one <= end;
        if (!blew && !diverged) o.fail("advection " + r.tag + " stays bounded in the training window");
    }
    if (o.pass) o.detail << sldo_checked << " S-LDO forecasts bounded, " << ldo_checked << " LDO advection forecasts fail";
    return o;
}

Outcome burgers(Runs& runs) {
    Outcome o;
    const ExperimentResult& b = runs.get(CaseKind::burgers);
    const RunRecord* s = find(b, Method::sldo, 5, 5, 0.0, 0.0);
    const RunRecord* l = find(b, Method::ldo, 5, 5, 0.1, 0.01);
    if (!s || !l) {
        o.fail("missing (5,5) runs");
        return o;
    }
    if (!(s->eps_xt < l->eps_xt)) o.fail("eps S-LDO " + fmt(s->eps_xt) + " vs LDO " + fmt(l->eps_xt));
    const double dt = canonical_config(CaseKind::burgers).params.dt;
    if (s->blowup_step && static_cast<double>(*s->blowup_step) * dt <= kBurgersCheckTime) o.fail("S-LDO flagged");
    int cells = 0, bad = 0;
    for (const auto& r : b.runs) {
        if (r.key.method != Method::ldo || r.key.s1 != 5 || r.key.s2 != 5) continue;
        ++cells;
        if (r.blowup_step || !(r.eps_xt <= 1.0)) ++bad;
    }
    if (cells == 0 || 2 * bad < cells) o.fail(std::to_string(bad) + "/" + std::to_string(cells) + " LDO cells flagged");
    if (o.pass)
        o.detail << "eps S-LDO " << fmt(s->eps_xt) << " < LDO " << fmt(l->eps_xt) << ", " << bad << "/" << cells
                 << " LDO cells flagged or eps > 1";
    return o;
}

QuadraticProgram projection_qp(const Eigen::VectorXd& target, std::size_t center) {
    const auto p = target.size();
    const ConstraintBlock cb = absval_reformulate(static_cast<std::size_t>(p), center, 0.0);
    const auto nv = static_cast<Eigen::Index>(cb.variables());
    QuadraticProgram qp;
    qp.H = Eigen::MatrixXd::Zero(nv, nv);
    qp.H.topLeftCorner(p, p) = 2.0 * Eigen::MatrixXd::Identity(p, p);
    qp.g = Eigen::VectorXd::Zero(nv);
    qp.g.head(p) = -2.0 * target;
    qp.G = cb.G;
    qp.h = cb.h;
    return qp;
}

Outcome qp_oracle() {
    Outcome o;
    std::mt19937_64 rng(77);
    double worst_x = 0.0, worst_f = 0.0;
    for (int t = 0; t < kRandomQps; ++t) {
        const oracle::RandomDominanceQP r = oracle::random_dominance_qp(rng, t % 2 == 0);
        Eigen::VectorXd x0;
        const QuadraticProgram qp = oracle::slack_qp(r, x0);
        const QPSolution s = qp_solve(qp, x0);
        if (s.status != QPStatus::optimal) {
            o.fail("QP " + std::to_string(t) + " not optimal");
            continue;
        }
        const auto p = r.M.cols();
        const oracle::Halfspaces hs = oracle::dominance_halfspaces(r.M, r.center, r.margin);
        const oracle::Result face = oracle::min_over_faces(r.H, r.g, hs);
        double grid = 0.0;
        const double box = 1.5 * std::max(1.0, face.x.cwiseAbs().maxCoeff());
        const oracle::Result bf = oracle::brute_force(r.H, r.g, hs, box, p <= 3 ? 41 : 17, &grid);
        const double f = qp.objective(s.x);
        worst_x = std::max(worst_x, (s.x.head(p) - bf.x).cwiseAbs().maxCoeff());
        worst_f = std::max(worst_f, std::abs(f - bf.objective));
        if (grid < f - kQpObjectiveTol) o.fail("QP " + std::to_string(t) + " beaten by a grid point");
    }
    if (worst_x > kQpSolutionTol) o.fail("worst solution gap " + fmt(worst_x));
    if (worst_f > kQpObjectiveTol) o.fail("worst objective gap " + fmt(worst_f));

    const QPSolution proj = qp_solve(projection_qp(Eigen::Vector3d(-1.0, 0.5, 0.0), 1));
    const double pe = (proj.x.head(3) - Eigen::Vector3d(-0.75, 0.75, 0.0)).cwiseAbs().maxCoeff();
    if (pe > kProjectionTol) o.fail("projection error " + fmt(pe));
    if (o.pass)
        o.detail << kRandomQps << " QPs, worst gaps x " << fmt(worst_x) << " f " << fmt(worst_f) << ", projection "
                 << fmt(pe);
    return o;
}

Outcome spectral_oracle() {
    Outcome o;
    const double c = 1.25, length = 10.0;
    double worst = 0.0;
    for (std::size_t n : {8u, 64u, 201u}) {
        const double dx = length / static_cast<double>(n);
        const std::array<double, 3> bd{-c / dx, c / dx, 0.0};
        auto got = eigenvalues(assemble_uniform(make_centered_stencil(3), bd, Lattice::line(n)).dense());
        for (const auto& w : oracle::backward_difference_spectrum(n, c, dx)) {
            auto best = got.begin();
            for (auto it = got.begin(); it != got.end(); ++it)
                if (std::abs(*it - w) < std::abs(*best - w)) best = it;
            worst = std::max(worst, std::abs(*best - w));
            got.erase(best);
        }
    }
    if (worst > kCirculantTol) o.fail("circulant mismatch " + fmt(worst));

    std::mt19937_64 rng(91);
    std::normal_distribution<double> nd;
    int outside = 0;
    for (int t = 0; t < kRandomMatrices; ++t) {
        const int n = 2 + t % 30;
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
        const auto discs = gershgorin_discs(a);
        for (const auto& l : eigenvalues(a)) {
            bool in = false;
            for (const auto& d : discs) in = in || std::abs(l - d.center) <= d.radius + 1e-10 * (1.0 + d.radius);
            outside += in ? 0 : 1;
        }
    }
    if (outside) o.fail(std::to_string(outside) + " eigenvalues outside every disc");
    if (o.pass) o.detail << "circulant max error " << fmt(worst) << ", " << kRandomMatrices << " matrices contained";
    return o;
}

Outcome metric_oracles() {
    Outcome o;
    std::mt19937_64 rng(123);
    std::normal_distribution<double> nd;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    double worst = 0.0;

    CaseParams cp = CaseParams::canonical(CaseKind::burgers);
    cp.grid = Grid1D::make(41, 10.0);
    cp.n_snapshots = 30;
    const SnapshotSet base = generate_training(cp);
    LearnOptions lo;
    lo.s1 = 5;
    lo.s2 = 3;
    lo.ridge = {0.1, 0.01};
    const LearnedModel m = learn_model(base, cp.kind, cp.phys, lo);
    std::vector<std::pair<double, const AssembledOperator*>> lin;
    const AssembledOperator* quad = nullptr;
    for (std::size_t b = 0; b < m.layout.blocks.size(); ++b) {
        if (m.layout.blocks[b].quadratic) quad = &m.operators[b];
        else lin.emplace_back(m.layout.blocks[b].scale, &m.operators[b]);
    }

    for (int t = 0; t < 20; ++t) {
        SnapshotSet a = base, b = base;
        for (Eigen::Index i = 0; i < a.states.size(); ++i) {
            a.states.data()[i] = nd(rng);
            a.rhs.data()[i] = nd(rng);
            b.states.data()[i] = nd(rng);
        }
        const auto got = relative_error_series(a, b).e_u;
        const auto want = oracle::e_u(a.states, b.states);
        for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, rel(got[k], want[k]));
        worst = std::max(worst, rel(total_error(a, b), oracle::eps_xt(a.states, b.states)));
        worst = std::max(worst, rel(training_error(a, m), oracle::e_train(a, lin, quad)));
    }
    if (worst > kMetricTol) o.fail("worst relative gap " + fmt(worst));
    else o.detail << "worst relative gap " << fmt(worst);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sldo_acceptance";
    fs::remove_all(work);
    Runs runs(work);

    struct Item {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Item> items{
        {1, "exact recovery", [] { return exact_recovery(); }},
        {2, "averaged advection stencils", [&] { return averaged_stencils(runs); }},
        {3, "S-LDO dominance and spectra", [&] { return stability_guarantee(runs); }},
        {4, "LDO instability", [&] { return instability(runs); }},
        {5, "forecast robustness", [&] { return forecast_robustness(runs); }},
        {6, "Burgers comparison", [&] { return burgers(runs); }},
        {7, "QP oracle", [] { return qp_oracle(); }},
        {8, "spectral oracle", [] { return spectral_oracle(); }},
        {9, "metric oracles", [] { return metric_oracles(); }},
    };
    int failed = 0;
    for (const auto& it : items) {
        Outcome o;
        try {
            o = it.run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        failed += o.pass ? 0 : 1;
        std::cout << "criterion " << it.id << " " << (o.pass ? "PASS" : "FAIL") << "  " << it.name << ": "
                  << o.detail.str() << std::endl;
    }
    std::cout << (9 - failed) << "/9 criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
