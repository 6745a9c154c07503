#include "wnsf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include "wnsf/arx.hpp"
#include "wnsf/error.hpp"
#include "wnsf/io.hpp"
#include "wnsf/rng.hpp"

namespace wnsf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// runs.csv has no quoting, so messages are flattened before they are stored.
std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == ',') c = ';';
        else if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

bool same_double(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

ModelStructure dynamic_only(const ModelStructure& ms) { return ModelStructure{ms.mf, ms.ml, 0, 0}; }

}  // namespace

bool RunRecord::same_persisted_fields(const RunRecord& o) const {
    return scenario == o.scenario && method == o.method && run == o.run && seed == o.seed && N == o.N &&
           n == o.n && same_double(mse, o.mse) && same_double(fit, o.fit) && iterations == o.iterations &&
           converged == o.converged && failed == o.failed && message == o.message;
}

RunData generate_run_data(const ExperimentConfig& cfg, std::size_t run, std::size_t N) {
    const auto r_seed = derive_seed(cfg.seed, run, StreamPurpose::reference);
    const auto e_seed = derive_seed(cfg.seed, run, StreamPurpose::noise);
    std::vector<double> r = gaussian_white(r_seed, N, cfg.lambda_r);
    const std::vector<double> e = gaussian_white(e_seed, N, cfg.sigma2);

    NoiseModelSpec H = cfg.H;
    if (cfg.scenario == Scenario::random_noise) {
        H = random_fir_noise_model(derive_seed(cfg.seed, run, StreamPurpose::noise_model), std::max<std::size_t>(N, 2));
    }

    RunData out;
    out.G = cfg.G;
    if (cfg.scenario == Scenario::fig1_openloop) {
        // Open loop with the same input spectrum as the closed loop: u = S r.
        const std::vector<double> u = filter_apply(sensitivity(cfg.G, cfg.K), r);
        out.data = simulate_closed_loop(cfg.G, H, TransferFunction::gain(0.0), u, e);
    } else {
        out.data = simulate_closed_loop(cfg.G, H, cfg.K, r, e);
    }
    out.data.known_initial = cfg.known_initial;
    return out;
}

std::vector<RunRecord> evaluate_run(const ExperimentConfig& cfg, const TimeSeriesDataset& data,
                                    const TransferFunction& G_true, std::size_t run) {
    const std::size_t N = data.size();
    const std::size_t n = cfg.order_for(N);
    const ModelStructure dyn = dynamic_only(cfg.structure);

    std::vector<RunRecord> out;
    out.reserve(cfg.methods.size());
    for (const auto& m : cfg.methods) {
        RunRecord rec;
        rec.scenario = to_string(cfg.scenario);
        rec.method = m.label;
        rec.run = run;
        rec.seed = cfg.seed;
        rec.N = N;
        rec.n = n;
        rec.mse = kNaN;
        rec.fit = kNaN;
        out.push_back(std::move(rec));
    }

    const auto t_arx = std::chrono::steady_clock::now();
    ArxEstimate eta;
    try {
        eta = estimate_arx(data, n, ArxOptions{data.known_initial, 0.0});
    } catch (const Error& e) {
        for (auto& rec : out) {
            rec.failed = true;
            rec.message = sanitize(std::string("arx: ") + e.what());
        }
        return out;
    }
    const double arx_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_arx).count();

    const ThetaParams truth = true_theta(G_true, dyn);
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
        RunRecord& rec = out[i];
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ModelStructure ms = cfg.structure;
            ms.mc = ms.md = cfg.methods[i].noise_order;
            const WnsfResult res = estimate_wnsf(eta, ms, cfg.iterate, cfg.iteration);
            ThetaParams dyn_hat;
            dyn_hat.f = res.theta.f;
            dyn_hat.l = res.theta.l;
            rec.mse = mse_metric(dyn_hat, truth);
            rec.iterations = res.iterations;
            rec.converged = res.converged;
            rec.message = sanitize(res.diagnostic);
            rec.fit = fit_between(dyn_hat.dynamic_model(), G_true);
        } catch (const Error& e) {
            rec.failed = true;
            rec.message = sanitize(e.what());
        }
        rec.wall_time_ms =
            arx_ms + std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    return out;
}

std::vector<RunRecord> run_monte_carlo(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t tasks = cfg.runs * cfg.sample_sizes.size();
    std::vector<std::vector<RunRecord>> results(tasks);

    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= tasks) return;
            const std::size_t run = k / cfg.sample_sizes.size();
            const std::size_t N = cfg.sample_sizes[k % cfg.sample_sizes.size()];
            try {
                const RunData rd = generate_run_data(cfg, run, N);
                results[k] = evaluate_run(cfg, rd.data, rd.G, run);
            } catch (const Error& e) {
                std::vector<RunRecord> failed;
                for (const auto& m : cfg.methods) {
                    RunRecord rec;
                    rec.scenario = to_string(cfg.scenario);
                    rec.method = m.label;
                    rec.run = run;
                    rec.seed = cfg.seed;
                    rec.N = N;
                    rec.n = cfg.order_for(N);
                    rec.mse = kNaN;
                    rec.fit = kNaN;
                    rec.failed = true;
                    rec.message = sanitize(std::string("simulation: ") + e.what());
                    failed.push_back(std::move(rec));
                }
                results[k] = std::move(failed);
            } catch (...) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
                next.store(tasks);
                return;
            }
        }
    };

    const std::size_t threads = std::min(cfg.parallel, std::max<std::size_t>(tasks, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);

    std::vector<RunRecord> out;
    out.reserve(tasks * cfg.methods.size());
    for (auto& chunk : results) {
        for (auto& rec : chunk) out.push_back(std::move(rec));
    }
    return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return kNaN;
    q = std::clamp(q, 0.0, 1.0);
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records, double fit_floor) {
    using Key = std::tuple<std::string, std::string, std::size_t>;
    std::map<Key, std::vector<const RunRecord*>> groups;
    for (const auto& r : records) groups[{r.scenario, r.method, r.N}].push_back(&r);

    std::vector<SummaryRow> out;
    out.reserve(groups.size());
    for (const auto& [key, group] : groups) {
        SummaryRow row;
        std::tie(row.scenario, row.method, row.N) = key;
        row.runs = group.size();
        std::vector<double> mse;
        std::vector<double> fit;
        for (const RunRecord* r : group) {
            if (r->failed) {
                ++row.failures;
                continue;
            }
            mse.push_back(r->mse);
            if (std::isfinite(r->fit)) fit.push_back(r->fit);
        }
        row.below_axis = row.failures;
        if (mse.empty()) {
            row.mean_mse = row.median_mse = kNaN;
        } else {
            double sum = 0.0;
            for (double v : mse) sum += v;
            row.mean_mse = sum / static_cast<double>(mse.size());
            std::sort(mse.begin(), mse.end());
            row.median_mse = quantile_sorted(mse, 0.5);
        }
        std::sort(fit.begin(), fit.end());
        row.fit_min = fit.empty() ? kNaN : fit.front();
        row.fit_q1 = quantile_sorted(fit, 0.25);
        row.fit_median = quantile_sorted(fit, 0.5);
        row.fit_q3 = quantile_sorted(fit, 0.75);
        row.fit_max = fit.empty() ? kNaN : fit.back();
        row.below_axis += static_cast<std::size_t>(
            std::count_if(fit.begin(), fit.end(), [fit_floor](double v) { return v < fit_floor; }));
        out.push_back(std::move(row));
    }
    return out;
}

void attach_theory(std::vector<SummaryRow>& summary, const ExperimentConfig& cfg, std::size_t grid_size) {
    if (cfg.scenario == Scenario::random_noise || !cfg.H.is_rational()) return;
    const LoopSystem sys{cfg.G, cfg.H.rational(), cfg.K, cfg.lambda_r, cfg.sigma2};
    CovarianceReport report;
    try {
        report = compute_M(sys, dynamic_only(cfg.structure), grid_size);
    } catch (const Error&) {
        return;
    }
    for (auto& row : summary) {
        if (row.scenario == to_string(cfg.scenario)) {
            row.theoretical_mse = report.asymptotic_mse(static_cast<double>(row.N));
        }
    }
}

void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& records) {
    os << "scenario,method,run,seed,N,n,mse,fit,iterations,converged,status,message\n";
    for (const auto& r : records) {
        os << r.scenario << ',' << r.method << ',' << r.run << ',' << r.seed << ',' << r.N << ',' << r.n << ','
           << format_number(r.mse) << ',' << format_number(r.fit) << ',' << r.iterations << ','
           << (r.converged ? "true" : "false") << ',' << (r.failed ? "failed" : "ok") << ',' << sanitize(r.message)
           << '\n';
    }
}

std::vector<RunRecord> read_runs_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("runs.csv: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "scenario,method,run,seed,N,n,mse,fit,iterations,converged,status,message") {
        throw ConfigError("runs.csv: unexpected header '" + line + "'");
    }
    auto parse_u64 = [](const std::string& s) {
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigError("runs.csv: bad integer '" + s + "'");
        return v;
    };
    std::vector<RunRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = io::split_csv_line(line);
        if (f.size() != 12) throw ConfigError("runs.csv: expected 12 fields in '" + line + "'");
        RunRecord r;
        r.scenario = f[0];
        r.method = f[1];
        r.run = parse_u64(f[2]);
        r.seed = parse_u64(f[3]);
        r.N = parse_u64(f[4]);
        r.n = parse_u64(f[5]);
        r.mse = io::parse_double(f[6]);
        r.fit = io::parse_double(f[7]);
        r.iterations = static_cast<int>(io::parse_int(f[8]));
        r.converged = f[9] == "true";
        r.failed = f[10] == "failed";
        r.message = f[11];
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path.string() + "' for writing");
    return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) throw Error("write to '" + path.string() + "' failed");
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; }

}  // namespace

void emit_outputs(const std::vector<SummaryRow>& summary, const std::vector<RunRecord>& records,
                  const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create '" + out_dir.string() + "': " + ec.message());

    {
        const auto path = out_dir / "runs.csv";
        auto os = open_output(path);
        write_runs_csv(os, records);
        finish(os, path);
    }
    {
        const auto path = out_dir / "timings.csv";
        auto os = open_output(path);
        os << "scenario,method,run,N,wall_time_ms\n";
        for (const auto& r : records) {
            os << r.scenario << ',' << r.method << ',' << r.run << ',' << r.N << ',' << format_number(r.wall_time_ms)
               << '\n';
        }
        finish(os, path);
    }
    {
        const auto path = out_dir / "summary.csv";
        auto os = open_output(path);
        os << "scenario,method,N,runs,failures,mean_mse,median_mse,fit_min,fit_q1,fit_median,fit_q3,fit_max,"
              "below_axis,theoretical_mse\n";
        for (const auto& s : summary) {
            os << s.scenario << ',' << s.method << ',' << s.N << ',' << s.runs << ',' << s.failures << ','
               << format_number(s.mean_mse) << ',' << format_number(s.median_mse) << ',' << format_number(s.fit_min)
               << ',' << format_number(s.fit_q1) << ',' << format_number(s.fit_median) << ','
               << format_number(s.fit_q3) << ',' << format_number(s.fit_max) << ',' << s.below_axis << ','
               << optional_number(s.theoretical_mse) << '\n';
        }
        finish(os, path);
    }
    {
        const auto path = out_dir / "plotdata_mse_vs_N.csv";
        auto os = open_output(path);
        os << "scenario,method,N,mean_mse,theoretical_mse\n";
        for (const auto& s : summary) {
            os << s.scenario << ',' << s.method << ',' << s.N << ',' << format_number(s.mean_mse) << ','
               << optional_number(s.theoretical_mse) << '\n';
        }
        finish(os, path);
    }
    {
        const auto path = out_dir / "plotdata_fit_box.csv";
        auto os = open_output(path);
        os << "scenario,method,N,fit_min,fit_q1,fit_median,fit_q3,fit_max,below_axis\n";
        for (const auto& s : summary) {
            os << s.scenario << ',' << s.method << ',' << s.N << ',' << format_number(s.fit_min) << ','
               << format_number(s.fit_q1) << ',' << format_number(s.fit_median) << ',' << format_number(s.fit_q3)
               << ',' << format_number(s.fit_max) << ',' << s.below_axis << '\n';
        }
        finish(os, path);
    }
}

}  // namespace wnsf
