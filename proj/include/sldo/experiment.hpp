#pragma once

// Config-driven experiment pipeline: data generation, learning sweeps, spectra,
// forecasts and the CSV reports.

#include "sldo/forecast.hpp"
#include "sldo/learner.hpp"
#include "sldo/refsim.hpp"
#include "sldo/spectra.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sldo {

/// One learning sweep: every combination of the listed stencil sizes and ridge weights.
/// S-LDO ignores the ridge weights (the constrained problem is unregularized).
struct Sweep {
    Method method = Method::ldo;
    std::vector<int> s1{3};
    std::vector<int> s2{3};
    std::vector<double> beta1{1e-3};
    std::vector<double> beta2{1e-3};
};

struct ExperimentConfig {
    std::string name;
    CaseParams params;
    std::vector<Sweep> sweeps;
    double tol = 1e-6;
    int max_iter = 500;
    std::optional<double> margin;
    std::optional<double> equilibrium;
    double warm_start_beta = 1e-8;
    double stability_tol = kStabilityTol;
    std::size_t dense_cap = kDenseCap;
    std::size_t reduced_grid = 31;  // 2-D spectra are taken on this grid
    double horizon_multiplier = 2.0;
    double blowup_guard = kBlowUpGuard;
    bool write_snapshots = true;
    unsigned threads = 1;

    void validate() const;  // throws ConfigError
    std::size_t forecast_steps() const;
    bool two_blocks() const;
};

/// Parses YAML text. `source` names the file in diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
/// YAML text that parses back to the same configuration.
std::string emit_config(const ExperimentConfig& cfg);

/// Canonical setups for the five cases.
ExperimentConfig canonical_config(CaseKind kind);
ExperimentConfig canonical_config(const std::string& name);  // throws ConfigError for unknown names

/// One (method, stencil, ridge) point of the sweep matrix.
struct RunKey {
    Method method = Method::ldo;
    int s1 = 3, s2 = 3;
    double beta1 = 0.0, beta2 = 0.0;

    std::string tag(bool two_blocks, bool quadratic) const;
    friend auto operator<=>(const RunKey&, const RunKey&) = default;
};

/// Deduplicated runs in sweep order.
std::vector<RunKey> enumerate_runs(const ExperimentConfig& cfg);

struct RunRecord {
    RunKey key;
    std::string tag;
    bool stable = false;
    double max_real_part = 0.0;     // max Re(lambda(-A)) of the constrained combination
    bool spectrum_dense = true;     // false when only Gershgorin bounds were available
    double min_dominance_slack = 0.0;
    int qp_max_iterations = 0;
    double eps_xt = 0.0;
    double eps_train_window = 0.0;  // eps_xt restricted to the training window
    double e_train = 0.0;
    std::optional<std::size_t> blowup_step;
    double max_norm_ratio = 0.0;
    double first_eu_above_one = -1.0;  // time at which e_u first exceeds 1, -1 if never
    std::vector<double> averaged;      // dx-scaled averaged first-block stencil (1-D only)
};

struct ExperimentResult {
    std::filesystem::path out;
    std::vector<RunRecord> runs;
};

/// Staged pipeline over one output directory. Each stage reuses artifacts from the
/// previous stages when they are on disk and recomputes them otherwise.
class Pipeline {
public:
    Pipeline(ExperimentConfig cfg, std::filesystem::path out);

    void generate();
    void learn();
    void analyze();
    void forecast();
    ExperimentResult report();
    ExperimentResult run_all();

    const ExperimentConfig& config() const { return cfg_; }

private:
    const SnapshotSet& training();
    const SnapshotSet& reference();
    const SnapshotSet& reduced_training();
    const LearnedModel& model(const RunKey& key);
    LearnedModel learn_one(const SnapshotSet& snap, const RunKey& key) const;

    ExperimentConfig cfg_;
    std::filesystem::path out_;
    std::optional<SnapshotSet> train_, ref_, reduced_;
    std::map<RunKey, LearnedModel> models_;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& p);

}  // namespace sldo
