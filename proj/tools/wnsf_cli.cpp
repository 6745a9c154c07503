// Command-line front end: simulate, arx, wnsf, asymptotic, montecarlo.

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wnsf/analysis.hpp"
#include "wnsf/arx.hpp"
#include "wnsf/error.hpp"
#include "wnsf/estimator.hpp"
#include "wnsf/harness.hpp"
#include "wnsf/io.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitEstimator = 2;

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& items) {
    std::map<std::string, std::string> kv;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw wnsf::ConfigError("--set expects key=value, got '" + item + "'");
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return kv;
}

// "2^14" or a plain integer.
std::size_t parse_grid(const std::string& text) {
    if (const auto caret = text.find('^'); caret != std::string::npos) {
        const auto base = wnsf::io::parse_int(std::string_view(text).substr(0, caret));
        const auto exp = wnsf::io::parse_int(std::string_view(text).substr(caret + 1));
        if (base != 2 || exp < 0 || exp > 40) throw wnsf::ConfigError("grid must be 2^k, got '" + text + "'");
        return std::size_t{1} << exp;
    }
    const auto v = wnsf::io::parse_int(text);
    if (v <= 0) throw wnsf::ConfigError("grid must be positive");
    return static_cast<std::size_t>(v);
}

wnsf::ExperimentConfig config_from(const std::string& path, const std::string& scenario,
                                   std::map<std::string, std::string> kv) {
    if (!scenario.empty()) kv["scenario"] = scenario;
    if (!path.empty()) return wnsf::load_config(path, kv);
    return wnsf::build_config(kv);
}

template <class F>
void with_output(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw wnsf::Error("cannot open '" + path + "' for writing");
    write(os);
    if (!os) throw wnsf::Error("write to '" + path + "' failed");
}

struct ModelFlags {
    int mf = 2;
    int ml = 2;
    int mc = 0;
    int md = 0;
    bool full = false;

    void add(CLI::App* cmd) {
        cmd->add_option("--mf", mf, "Plant denominator order")->capture_default_str();
        cmd->add_option("--ml", ml, "Plant numerator order")->capture_default_str();
        cmd->add_option("--mc", mc, "Noise numerator order (fully parametric)")->capture_default_str();
        cmd->add_option("--md", md, "Noise denominator order (fully parametric)")->capture_default_str();
        cmd->add_flag("--full", full, "Fully parametric estimate (m_c = m_d = 1 unless given)");
    }

    wnsf::ModelStructure structure() const {
        wnsf::ModelStructure ms{mf, ml, mc, md};
        if (full && ms.semi_parametric()) ms.mc = ms.md = 1;
        ms.validate();
        return ms;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted null-space fitting for closed-loop system identification"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate one dataset from a scenario");
    std::string sim_config, sim_scenario, sim_out;
    std::vector<std::string> sim_set;
    std::size_t sim_N = 1000, sim_run = 0;
    sim->add_option("--config", sim_config, "Config file");
    sim->add_option("--scenario", sim_scenario, "Scenario name");
    sim->add_option("--set", sim_set, "Config override key=value");
    sim->add_option("-N,--samples", sim_N, "Sample count")->capture_default_str();
    sim->add_option("--run", sim_run, "Run index used for stream derivation")->capture_default_str();
    sim->add_option("-o,--out", sim_out, "Dataset CSV (stdout if omitted)");

    // arx
    auto* arx = app.add_subcommand("arx", "Step 1: high-order ARX estimate");
    std::string arx_data, arx_out, arx_R_out;
    std::optional<std::size_t> arx_order;
    bool arx_known = false;
    arx->add_option("data", arx_data, "Dataset CSV")->required();
    arx->add_option("--order", arx_order, "ARX order n (default: automatic rule)");
    arx->add_flag("--known-initial", arx_known, "Start regressions at t = 1 with zero pre-sample values");
    arx->add_option("-o,--out", arx_out, "ARX CSV (stdout if omitted)");
    arx->add_option("--R-out", arx_R_out, "Dense CSV of the normal-equation matrix");

    // wnsf
    auto* est = app.add_subcommand("wnsf", "Steps 2-3 on a dataset");
    std::string est_data, est_out;
    std::optional<std::size_t> est_order;
    bool est_known = false, est_iterate = false;
    ModelFlags est_model;
    wnsf::IterationOptions est_iter;
    est->add_option("data", est_data, "Dataset CSV")->required();
    est->add_option("--order", est_order, "ARX order n (default: automatic rule)");
    est->add_flag("--known-initial", est_known, "Start regressions at t = 1");
    est->add_flag("--iterate", est_iterate, "Iterate Step 3 to convergence");
    est->add_option("--max-iter", est_iter.max_iter, "Iteration limit")->capture_default_str();
    est->add_option("--tol", est_iter.tol, "Relative change tolerance")->capture_default_str();
    est_model.add(est);
    est->add_option("-o,--out", est_out, "Result CSV (stdout if omitted)");

    // asymptotic
    auto* asym = app.add_subcommand("asymptotic", "Asymptotic covariance sigma2 trace(M^-1)");
    std::string asym_config, asym_scenario, asym_grid = "2^14", asym_csv;
    std::vector<std::string> asym_set;
    std::vector<std::size_t> asym_N;
    asym->add_option("--config", asym_config, "Config file");
    asym->add_option("--scenario", asym_scenario, "Scenario name (default fig1_closedloop)");
    asym->add_option("--set", asym_set, "Config override key=value");
    asym->add_option("--grid", asym_grid, "Frequency grid size, e.g. 2^14")->capture_default_str();
    asym->add_option("--N", asym_N, "Sample sizes to report (default: scenario sizes)");
    asym->add_option("--csv", asym_csv, "Write the covariance report CSV here");

    // montecarlo
    auto* mc = app.add_subcommand("montecarlo", "Seeded Monte Carlo experiment");
    std::string mc_config, mc_scenario, mc_out = "out";
    std::vector<std::string> mc_set;
    std::optional<std::size_t> mc_runs, mc_parallel;
    std::optional<std::uint64_t> mc_seed;
    mc->add_option("--config", mc_config, "Config file (key = value lines)");
    mc->add_option("--scenario", mc_scenario, "fig1_openloop | fig1_closedloop | random_noise | custom");
    mc->add_option("--runs", mc_runs, "Monte Carlo runs");
    mc->add_option("--seed", mc_seed, "Base seed");
    mc->add_option("--parallel", mc_parallel, "Worker threads");
    mc->add_option("--set", mc_set, "Config override key=value");
    mc->add_option("--out", mc_out, "Output directory")->capture_default_str();
    mc->footer("Config keys:\n" + wnsf::config_key_reference());

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (sim->parsed()) {
            auto cfg = config_from(sim_config, sim_scenario, parse_overrides(sim_set));
            const auto rd = wnsf::generate_run_data(cfg, sim_run, sim_N);
            with_output(sim_out, [&](std::ostream& os) { wnsf::io::write_dataset_csv(os, rd.data); });
        } else if (arx->parsed()) {
            auto data = wnsf::io::read_dataset_csv(arx_data);
            const std::size_t n = arx_order.value_or(wnsf::default_arx_order(data.size()));
            const auto eta = wnsf::estimate_arx(data, n, wnsf::ArxOptions{arx_known, 0.0});
            with_output(arx_out, [&](std::ostream& os) { wnsf::write_arx_csv(os, eta); });
            if (!arx_R_out.empty()) {
                with_output(arx_R_out, [&](std::ostream& os) { wnsf::write_matrix_csv(os, eta.R); });
            }
            std::cerr << "condition estimate " << wnsf::format_number(eta.condition_estimate) << '\n';
        } else if (est->parsed()) {
            auto data = wnsf::io::read_dataset_csv(est_data);
            const auto ms = est_model.structure();
            const std::size_t n = est_order.value_or(wnsf::default_arx_order(data.size()));
            const auto eta = wnsf::estimate_arx(data, n, wnsf::ArxOptions{est_known, 0.0});
            const auto res = wnsf::estimate_wnsf(eta, ms, est_iterate, est_iter);
            with_output(est_out, [&](std::ostream& os) { wnsf::write_wnsf_csv(os, res); });
            if (!res.diagnostic.empty()) std::cerr << res.diagnostic << '\n';
        } else if (asym->parsed()) {
            auto cfg = config_from(asym_config, asym_scenario, parse_overrides(asym_set));
            if (!cfg.H.is_rational()) throw wnsf::ConfigError("asymptotic needs a rational noise model");
            const wnsf::LoopSystem sys{cfg.G, cfg.H.rational(), cfg.K, cfg.lambda_r, cfg.sigma2};
            const auto report =
                wnsf::compute_M(sys, wnsf::ModelStructure{cfg.structure.mf, cfg.structure.ml, 0, 0},
                                parse_grid(asym_grid));
            std::cout << "grid_size," << report.grid_size << '\n'
                      << "sigma2_trace_Minv," << wnsf::format_number(report.noise_variance * report.M_inv_trace)
                      << '\n';
            const auto& sizes = asym_N.empty() ? cfg.sample_sizes : asym_N;
            std::cout << "N,asymptotic_mse\n";
            for (std::size_t N : sizes) {
                std::cout << N << ',' << wnsf::format_number(report.asymptotic_mse(static_cast<double>(N))) << '\n';
            }
            if (!asym_csv.empty()) {
                with_output(asym_csv, [&](std::ostream& os) { wnsf::write_covariance_csv(os, report); });
            }
        } else if (mc->parsed()) {
            auto kv = parse_overrides(mc_set);
            if (mc_runs) kv["runs"] = std::to_string(*mc_runs);
            if (mc_seed) kv["seed"] = std::to_string(*mc_seed);
            if (mc_parallel) kv["parallel"] = std::to_string(*mc_parallel);
            auto cfg = config_from(mc_config, mc_scenario, kv);
            const auto records = wnsf::run_monte_carlo(cfg);
            auto summary = wnsf::aggregate(records, cfg.fit_floor);
            wnsf::attach_theory(summary, cfg);
            wnsf::emit_outputs(summary, records, mc_out);
            std::cout << "scenario,method,N,runs,failures,mean_mse,median_fit,theoretical_mse\n";
            for (const auto& s : summary) {
                std::cout << s.scenario << ',' << s.method << ',' << s.N << ',' << s.runs << ',' << s.failures << ','
                          << wnsf::format_number(s.mean_mse) << ',' << wnsf::format_number(s.fit_median) << ','
                          << (s.theoretical_mse ? wnsf::format_number(*s.theoretical_mse) : "") << '\n';
            }
        }
    } catch (const wnsf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const wnsf::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitEstimator;
    }
    return 0;
}
