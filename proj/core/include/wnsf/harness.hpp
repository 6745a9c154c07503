#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wnsf/analysis.hpp"
#include "wnsf/estimator.hpp"
#include "wnsf/lti.hpp"

namespace wnsf {

enum class Scenario { fig1_openloop, fig1_closedloop, random_noise, custom };

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& name);

/// Estimator variant run on every dataset. noise_order = 0 is semi-parametric
/// WNSF; noise_order = m selects the fully parametric variant with m_c = m_d = m.
struct MethodSpec {
    std::string label = "sp";
    int noise_order = 0;

    friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

/// "sp" or "full<m>" (e.g. "full30").
MethodSpec parse_method(const std::string& label);

struct ExperimentConfig {
    Scenario scenario = Scenario::fig1_closedloop;
    TransferFunction G;
    NoiseModelSpec H;  // ignored by random_noise, which draws one per run
    TransferFunction K = TransferFunction::gain(0.0);
    double lambda_r = 1.0;
    double sigma2 = 1.0;
    std::vector<std::size_t> sample_sizes;
    std::optional<std::size_t> arx_order;  // nullopt: default_arx_order(N)
    ModelStructure structure{2, 2, 0, 0};
    std::vector<MethodSpec> methods{MethodSpec{}};
    std::size_t runs = 1;
    std::uint64_t seed = 1;
    bool iterate = false;
    bool known_initial = false;
    IterationOptions iteration;
    std::size_t parallel = 1;
    /// FIT values below this count as below-axis outliers in summaries.
    double fit_floor = 0.0;

    /// Throws ConfigError when the configuration cannot be run.
    void validate() const;
    std::size_t order_for(std::size_t N) const;
};

/// Defaults for the named scenario (systems, orders, sample sizes, runs).
ExperimentConfig scenario_defaults(Scenario s);

/// Flat `key = value` lines; '#' starts a comment. Later keys override earlier.
std::map<std::string, std::string> parse_key_values(std::istream& is);

/// Build a configuration from key/value pairs on top of the scenario defaults
/// (`scenario` key, else fig1_closedloop). Unknown keys are rejected.
ExperimentConfig build_config(const std::map<std::string, std::string>& kv);

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::map<std::string, std::string>& overrides = {});

/// Documented configuration keys, one per line (for --help output).
std::string config_key_reference();

struct RunRecord {
    std::string scenario;
    std::string method;
    std::size_t run = 0;
    std::uint64_t seed = 0;
    std::size_t N = 0;
    std::size_t n = 0;
    double mse = 0.0;
    double fit = 0.0;
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string message;
    double wall_time_ms = 0.0;  // not persisted in runs.csv

    bool same_persisted_fields(const RunRecord& other) const;
};

/// Simulated dataset for (run, N); deterministic in (cfg.seed, run).
struct RunData {
    TimeSeriesDataset data;
    TransferFunction G;
};
RunData generate_run_data(const ExperimentConfig& cfg, std::size_t run, std::size_t N);

/// Estimate every configured method on one dataset. Estimator failures become
/// failed records.
std::vector<RunRecord> evaluate_run(const ExperimentConfig& cfg, const TimeSeriesDataset& data,
                                    const TransferFunction& G_true, std::size_t run);

/// All runs x sample sizes x methods, ordered by (run, N index, method index).
/// Uses up to `cfg.parallel` worker threads; the result does not depend on it.
std::vector<RunRecord> run_monte_carlo(const ExperimentConfig& cfg);

struct SummaryRow {
    std::string scenario;
    std::string method;
    std::size_t N = 0;
    std::size_t runs = 0;
    std::size_t failures = 0;
    double mean_mse = 0.0;
    double median_mse = 0.0;
    double fit_min = 0.0;
    double fit_q1 = 0.0;
    double fit_median = 0.0;
    double fit_q3 = 0.0;
    double fit_max = 0.0;
    std::size_t below_axis = 0;
    std::optional<double> theoretical_mse;
};

/// Linear-interpolation quantile of an ascending sample (q in [0,1]).
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Group by (scenario, method, N); statistics over successful runs.
std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records, double fit_floor = 0.0);

/// Fill theoretical_mse = sigma2 trace(M^-1)/N where the scenario has a fixed
/// rational system.
void attach_theory(std::vector<SummaryRow>& summary, const ExperimentConfig& cfg, std::size_t grid_size = 1u << 14);

/// Writes runs.csv, timings.csv, summary.csv, plotdata_mse_vs_N.csv and
/// plotdata_fit_box.csv into out_dir (created if missing).
void emit_outputs(const std::vector<SummaryRow>& summary, const std::vector<RunRecord>& records,
                  const std::filesystem::path& out_dir);

void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_runs_csv(std::istream& is);

}  // namespace wnsf
