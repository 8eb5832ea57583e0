// Command-line front end for the experiment pipeline.

#include "sldo/errors.hpp"
#include "sldo/experiment.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Common {
    std::string config;
    std::string case_name;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* sub, Common& c, bool case_option = true) {
    sub->add_option("--config", c.config, "YAML experiment config");
    if (case_option) sub->add_option("--case", c.case_name, "canonical case instead of a config file");
    sub->add_option("--out", c.out, "artifact directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "override the data seed");
    sub->add_option("--threads", c.threads, "worker threads for the per-DOF solves")->check(CLI::PositiveNumber);
}

sldo::ExperimentConfig resolve(const Common& c) {
    sldo::ExperimentConfig cfg;
    if (!c.config.empty() && !c.case_name.empty())
        throw sldo::ConfigError("give either --config or --case, not both", "", 0);
    if (!c.config.empty())
        cfg = sldo::load_config(c.config);
    else if (!c.case_name.empty())
        cfg = sldo::canonical_config(c.case_name);
    else
        throw sldo::ConfigError("no configuration: pass --config <file> or --case <name>", "", 0);
    if (c.seed) cfg.params.seed = *c.seed;
    if (c.threads) cfg.threads = *c.threads;
    cfg.validate();
    return cfg;
}

void print_summary(const sldo::ExperimentResult& r) {
    std::cout << "wrote " << r.out.string() << " (" << r.runs.size() << " runs)\n";
    for (const auto& run : r.runs) {
        std::cout << "  " << run.tag << "  stable=" << (run.stable ? "yes" : "no") << "  eps_xt=" << run.eps_xt;
        if (run.blowup_step) std::cout << "  blow-up@" << *run.blowup_step;
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn stable sparse differential operators from snapshot data"};
    app.require_subcommand(1);

    Common opts;
    std::string repro_name;

    auto* gen = app.add_subcommand("generate", "integrate the reference model and write snapshots");
    auto* learn = app.add_subcommand("learn", "fit every configured LDO/S-LDO model");
    auto* analyze = app.add_subcommand("analyze", "eigenvalues and Gershgorin discs of the learned operators");
    auto* fc = app.add_subcommand("forecast", "integrate learned models and score them");
    auto* report = app.add_subcommand("report", "summary tables and manifest");
    auto* run = app.add_subcommand("run", "all stages in order");
    auto* repro = app.add_subcommand("repro", "all stages for a canonical case");
    std::string show_name;
    auto* show = app.add_subcommand("config", "print the canonical YAML config of a case");
    show->add_option("name", show_name, "case name")->required();
    for (auto* s : {gen, learn, analyze, fc, report, run}) add_common(s, opts);
    repro->add_option("name", repro_name, "diffusion | advection | advection-diffusion | burgers | advection2d")
        ->required();
    add_common(repro, opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (show->parsed()) {
            std::cout << sldo::emit_config(sldo::canonical_config(show_name));
            return 0;
        }
        if (repro->parsed()) opts.case_name = repro_name;
        sldo::Pipeline p(resolve(opts), opts.out);
        if (gen->parsed()) {
            p.generate();
        } else if (learn->parsed()) {
            p.learn();
        } else if (analyze->parsed()) {
            p.analyze();
        } else if (fc->parsed()) {
            p.forecast();
        } else if (report->parsed()) {
            print_summary(p.report());
        } else {
            print_summary(p.run_all());
        }
        return 0;
    } catch (const sldo::ConfigError& e) {
        std::cerr << "config error";
        if (e.line() > 0) std::cerr << " at line " << e.line();
        if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
        std::cerr << ": " << e.what() << '\n';
        return 2;
    } catch (const sldo::BlowUpError& e) {
        std::cerr << "data generation blew up: " << e.what() << '\n';
        return 4;
    } catch (const sldo::SolverError& e) {
        std::cerr << "solver failure at dof " << e.dof() << ": " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
