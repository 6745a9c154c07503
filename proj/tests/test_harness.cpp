#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "wnsf/error.hpp"
#include "wnsf/harness.hpp"
#include "wnsf/io.hpp"

using namespace wnsf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("wnsf_test_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig small_config() {
    auto cfg = build_config({{"scenario", "fig1_closedloop"}, {"runs", "3"}, {"sample_sizes", "300,600"}});
    return cfg;
}

RunRecord record(const std::string& method, std::size_t N, double mse, double fit, bool failed = false) {
    RunRecord r;
    r.scenario = "custom";
    r.method = method;
    r.N = N;
    r.mse = mse;
    r.fit = fit;
    r.failed = failed;
    return r;
}

}  // namespace

TEST_CASE("configuration parsing") {
    std::istringstream text(
        "# comment\n"
        "scenario = random_noise\n"
        "runs = 4   # trailing comment\n"
        "sample_sizes = 1000, 5000\n"
        "methods = sp,full1,full30\n"
        "tol = 1e-6\n");
    const auto kv = parse_key_values(text);
    CHECK(kv.at("runs") == "4");
    const auto cfg = build_config(kv);
    CHECK(cfg.scenario == Scenario::random_noise);
    CHECK(cfg.runs == 4);
    CHECK(cfg.sample_sizes == std::vector<std::size_t>{1000, 5000});
    REQUIRE(cfg.methods.size() == 3);
    CHECK(cfg.methods[2].noise_order == 30);
    CHECK(cfg.iteration.tol == 1e-6);
    CHECK(cfg.iterate);
    CHECK(cfg.arx_order == 200u);
    CHECK(cfg.K == TransferFunction::gain(0.2));
    CHECK(cfg.sigma2 == 4.0);

    std::istringstream bad_line("runs 4\n");
    CHECK_THROWS_AS(parse_key_values(bad_line), ConfigError);
    CHECK_THROWS_AS(build_config({{"bogus", "1"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"runs", "0"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"sample_sizes", "100"}}), ConfigError);  // N <= 2n with n = 50
    CHECK_THROWS_AS(build_config({{"scenario", "nope"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"methods", "pem"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"iterate", "maybe"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"H_num", "2,1"}}), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/wnsf.cfg"), ConfigError);

    const auto fig = scenario_defaults(Scenario::fig1_openloop);
    CHECK(fig.known_initial);
    CHECK(fig.arx_order == 50u);
    CHECK(fig.runs == 1000);
    CHECK(parse_method("full7").noise_order == 7);
    CHECK(parse_scenario(to_string(Scenario::custom)) == Scenario::custom);
    CHECK_FALSE(config_key_reference().empty());

    const auto custom = build_config({{"scenario", "custom"},
                                      {"G_num", "0,0.5"},
                                      {"G_den", "1,-0.3"},
                                      {"mf", "1"},
                                      {"ml", "1"},
                                      {"arx_order", "auto"},
                                      {"sample_sizes", "500"}});
    CHECK(custom.order_for(500) == default_arx_order(500));
}

TEST_CASE("run data and evaluation") {
    const auto cfg = small_config();
    SUBCASE("deterministic in (seed, run)") {
        const auto a = generate_run_data(cfg, 2, 300), b = generate_run_data(cfg, 2, 300);
        CHECK(a.data.u == b.data.u);
        CHECK(a.data.y == b.data.y);
        CHECK(a.data.known_initial);
        CHECK(generate_run_data(cfg, 3, 300).data.u != a.data.u);
    }
    SUBCASE("open loop uses u = S r") {
        auto open = cfg;
        open.scenario = Scenario::fig1_openloop;
        const auto closed_data = generate_run_data(cfg, 0, 300).data;
        const auto open_data = generate_run_data(open, 0, 300).data;
        const auto u = filter_apply(sensitivity(cfg.G, cfg.K), *closed_data.r);
        CHECK(open_data.u == u);
    }
    SUBCASE("random noise model per run") {
        auto rn = build_config({{"scenario", "random_noise"}, {"runs", "2"}, {"sample_sizes", "1000"}});
        const auto a = generate_run_data(rn, 0, 1000), b = generate_run_data(rn, 1, 1000);
        CHECK(a.data.y != b.data.y);
    }
    SUBCASE("rerunning the estimator on a persisted dataset") {
        const auto rd = generate_run_data(cfg, 1, 600);
        const auto first = evaluate_run(cfg, rd.data, rd.G, 1);
        std::stringstream ss;
        io::write_dataset_csv(ss, rd.data);
        auto back = io::read_dataset_csv(ss);
        back.known_initial = cfg.known_initial;
        const auto second = evaluate_run(cfg, back, rd.G, 1);
        REQUIRE(first.size() == 1);
        CHECK(first[0].mse == second[0].mse);
        CHECK(first[0].same_persisted_fields(second[0]));
        CHECK(first[0].mse >= 0.0);
        CHECK(first[0].fit <= 100.0);
    }
    SUBCASE("estimator failures become records") {
        auto rd = generate_run_data(cfg, 0, 300);
        std::fill(rd.data.u.begin(), rd.data.u.end(), 0.0);
        const auto recs = evaluate_run(cfg, rd.data, rd.G, 0);
        REQUIRE(recs.size() == 1);
        CHECK(recs[0].failed);
        CHECK(recs[0].message.find(',') == std::string::npos);
    }
}

TEST_CASE("run_monte_carlo") {
    auto cfg = small_config();
    const auto a = run_monte_carlo(cfg);
    const auto b = run_monte_carlo(cfg);
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].same_persisted_fields(b[i]));
    CHECK(a[0].run == 0);
    CHECK(a[1].N == 600);
    CHECK(a[5].run == 2);

    cfg.parallel = 3;
    const auto c = run_monte_carlo(cfg);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].same_persisted_fields(c[i]));
}

TEST_CASE("aggregate") {
    SUBCASE("singleton") {
        const auto s = aggregate({record("sp", 100, 0.25, 80.0)});
        REQUIRE(s.size() == 1);
        CHECK(s[0].mean_mse == 0.25);
        CHECK(s[0].median_mse == 0.25);
        CHECK(s[0].fit_q1 == 80.0);
        CHECK(s[0].fit_max == 80.0);
        CHECK(s[0].runs == 1);
    }
    SUBCASE("failures are counted, not averaged") {
        const auto s = aggregate({record("sp", 100, 1.0, 50.0), record("sp", 100, 0.0, 0.0, true)});
        REQUIRE(s.size() == 1);
        CHECK(s[0].failures == 1);
        CHECK(s[0].mean_mse == 1.0);
        CHECK(s[0].below_axis == 1);
    }
    SUBCASE("quartiles against a sorting oracle") {
        std::vector<RunRecord> recs;
        std::vector<double> fits{91.0, 12.5, 77.0, 64.0, -30.0, 88.0, 99.5, 45.0, 70.0, 83.0, 58.0};
        for (double f : fits) recs.push_back(record("sp", 500, 0.1, f));
        const auto s = aggregate(recs, 0.0);
        REQUIRE(s.size() == 1);
        CHECK(s[0].fit_q1 == doctest::Approx(oracle::quantile(fits, 0.25)));
        CHECK(s[0].fit_median == doctest::Approx(oracle::quantile(fits, 0.5)));
        CHECK(s[0].fit_q3 == doctest::Approx(oracle::quantile(fits, 0.75)));
        CHECK(s[0].fit_median == 70.0);
        CHECK(s[0].fit_min == -30.0);
        CHECK(s[0].below_axis == 1);
    }
    SUBCASE("grouped by method and N") {
        const auto s = aggregate({record("sp", 100, 1, 1), record("full1", 100, 1, 1), record("sp", 200, 1, 1)});
        CHECK(s.size() == 3);
    }
    CHECK(quantile_sorted({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
}

TEST_CASE("outputs") {
    SUBCASE("empty batch writes headers only") {
        const auto dir = scratch("empty");
        emit_outputs({}, {}, dir);
        for (const char* f : {"runs.csv", "summary.csv", "plotdata_mse_vs_N.csv", "plotdata_fit_box.csv", "timings.csv"}) {
            const auto text = slurp(dir / f);
            CHECK(std::count(text.begin(), text.end(), '\n') == 1);
        }
        fs::remove_all(dir);
    }
    SUBCASE("runs.csv round trip and theory column") {
        auto cfg = small_config();
        cfg.sample_sizes = {10000};
        cfg.runs = 1;
        auto recs = run_monte_carlo(cfg);
        recs.push_back(record("sp", 77, std::numeric_limits<double>::quiet_NaN(), 1.0, true));
        recs.back().message = "arx: singular; see log";
        auto summary = aggregate(recs);
        attach_theory(summary, cfg);
        const auto dir = scratch("roundtrip");
        emit_outputs(summary, recs, dir);
        std::ifstream is(dir / "runs.csv");
        const auto back = read_runs_csv(is);
        REQUIRE(back.size() == recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) CHECK(back[i].same_persisted_fields(recs[i]));

        bool found = false;
        for (const auto& s : summary) {
            if (s.N == 10000 && s.scenario == "fig1_closedloop") {
                REQUIRE(s.theoretical_mse.has_value());
                CHECK(*s.theoretical_mse == doctest::Approx(1.9572e-4).epsilon(0.01));
                found = true;
            }
        }
        CHECK(found);
        CHECK(slurp(dir / "plotdata_mse_vs_N.csv").find("fig1_closedloop,sp,10000,") != std::string::npos);

        const auto again = scratch("roundtrip2");
        emit_outputs(summary, recs, again);
        CHECK(slurp(dir / "runs.csv") == slurp(again / "runs.csv"));
        CHECK(slurp(dir / "summary.csv") == slurp(again / "summary.csv"));
        fs::remove_all(dir);
        fs::remove_all(again);
    }
    SUBCASE("unwritable directory") {
        CHECK_THROWS_AS(emit_outputs({}, {}, "/proc/wnsf_not_here"), Error);
    }
}
