#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include "wnsf/error.hpp"
#include "wnsf/harness.hpp"
#include "wnsf/io.hpp"

namespace wnsf {

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::fig1_openloop: return "fig1_openloop";
        case Scenario::fig1_closedloop: return "fig1_closedloop";
        case Scenario::random_noise: return "random_noise";
        case Scenario::custom: return "custom";
    }
    return "custom";
}

Scenario parse_scenario(const std::string& name) {
    if (name == "fig1_openloop") return Scenario::fig1_openloop;
    if (name == "fig1_closedloop") return Scenario::fig1_closedloop;
    if (name == "random_noise") return Scenario::random_noise;
    if (name == "custom") return Scenario::custom;
    throw ConfigError("unknown scenario '" + name +
                      "' (expected fig1_openloop, fig1_closedloop, random_noise or custom)");
}

MethodSpec parse_method(const std::string& label) {
    if (label == "sp") return MethodSpec{"sp", 0};
    if (label.rfind("full", 0) == 0 && label.size() > 4) {
        const auto order = io::parse_int(std::string_view(label).substr(4));
        if (order < 1) throw ConfigError("fully parametric noise order must be positive in '" + label + "'");
        return MethodSpec{label, static_cast<int>(order)};
    }
    throw ConfigError("unknown method '" + label + "' (expected sp or full<m>)");
}

std::size_t ExperimentConfig::order_for(std::size_t N) const {
    return arx_order ? *arx_order : default_arx_order(N);
}

void ExperimentConfig::validate() const {
    if (runs < 1) throw ConfigError("runs must be at least 1");
    if (sample_sizes.empty()) throw ConfigError("sample_sizes must not be empty");
    if (methods.empty()) throw ConfigError("methods must not be empty");
    if (parallel < 1) throw ConfigError("parallel must be at least 1");
    if (!(lambda_r > 0.0) || !(sigma2 > 0.0)) throw ConfigError("lambda_r and sigma2 must be positive");
    if (iteration.max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (!(iteration.tol > 0.0)) throw ConfigError("tol must be positive");
    try {
        structure.validate();
        (void)true_theta(G, ModelStructure{structure.mf, structure.ml, 0, 0});
    } catch (const Error& e) {
        throw ConfigError(std::string("plant does not fit the model structure: ") + e.what());
    }
    for (std::size_t N : sample_sizes) {
        const std::size_t n = order_for(N);
        if (N <= 2 * n) {
            throw ConfigError("sample size " + std::to_string(N) + " must exceed twice the ARX order " +
                              std::to_string(n));
        }
        for (const auto& m : methods) {
            if (static_cast<int>(n) < std::max({structure.mf, structure.ml, m.noise_order})) {
                throw ConfigError("ARX order " + std::to_string(n) + " is below the model orders of method " + m.label);
            }
        }
    }
}

ExperimentConfig scenario_defaults(Scenario s) {
    ExperimentConfig cfg;
    cfg.scenario = s;
    switch (s) {
        case Scenario::fig1_openloop:
        case Scenario::fig1_closedloop:
            cfg.G = TransferFunction(Polynomial{0.0, 1.0, 0.1}, Polynomial{1.0, -0.5, 0.75});
            cfg.H = NoiseModelSpec(TransferFunction(Polynomial{1.0, 0.7}, Polynomial{1.0, -0.9}));
            cfg.K = TransferFunction::gain(1.0);
            cfg.lambda_r = 1.0;
            cfg.sigma2 = 1.0;
            cfg.sample_sizes = {300, 600, 1000, 3000, 6000, 10000};
            cfg.arx_order = 50;
            cfg.structure = ModelStructure{2, 2, 0, 0};
            cfg.runs = 1000;
            cfg.known_initial = true;
            cfg.iterate = false;
            break;
        case Scenario::random_noise:
            cfg.G = TransferFunction(Polynomial{0.0, 1.0, -0.8}, Polynomial{1.0, -0.95, 0.9});
            cfg.K = TransferFunction::gain(0.2);
            cfg.lambda_r = 1.0;
            cfg.sigma2 = 4.0;
            cfg.sample_sizes = {1000, 5000, 10000};
            cfg.arx_order = 200;
            cfg.structure = ModelStructure{2, 2, 0, 0};
            cfg.runs = 100;
            cfg.iterate = true;
            cfg.iteration = IterationOptions{100, 1e-4};
            break;
        case Scenario::custom:
            cfg.G = TransferFunction(Polynomial{0.0, 1.0}, Polynomial{1.0, -0.5});
            cfg.structure = ModelStructure{1, 1, 0, 0};
            cfg.sample_sizes = {1000};
            cfg.arx_order.reset();
            break;
    }
    return cfg;
}

std::map<std::string, std::string> parse_key_values(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

namespace {

std::vector<double> parse_list(const std::string& value) {
    std::vector<double> out;
    for (const auto& f : io::split_csv_line(value)) out.push_back(io::parse_double(f));
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("key '" + key + "' expects a boolean, got '" + value + "'");
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    const auto v = io::parse_int(value);
    if (v < 0) throw ConfigError("key '" + key + "' must be nonnegative");
    return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig build_config(const std::map<std::string, std::string>& kv) {
    Scenario scenario = Scenario::fig1_closedloop;
    if (auto it = kv.find("scenario"); it != kv.end()) scenario = parse_scenario(it->second);
    ExperimentConfig cfg = scenario_defaults(scenario);

    std::optional<std::vector<double>> g_num, g_den, h_num, h_den, k_num, k_den;
    try {
        for (const auto& [key, value] : kv) {
            if (key == "scenario") continue;
            else if (key == "runs") cfg.runs = parse_count(key, value);
            else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(io::parse_int(value));
            else if (key == "sample_sizes") {
                cfg.sample_sizes.clear();
                for (const auto& f : io::split_csv_line(value)) cfg.sample_sizes.push_back(parse_count(key, f));
            } else if (key == "arx_order") {
                if (value == "auto") cfg.arx_order.reset();
                else cfg.arx_order = parse_count(key, value);
            } else if (key == "mf") cfg.structure.mf = static_cast<int>(io::parse_int(value));
            else if (key == "ml") cfg.structure.ml = static_cast<int>(io::parse_int(value));
            else if (key == "methods") {
                cfg.methods.clear();
                for (const auto& f : io::split_csv_line(value)) cfg.methods.push_back(parse_method(f));
            } else if (key == "iterate") cfg.iterate = parse_bool(key, value);
            else if (key == "known_initial") cfg.known_initial = parse_bool(key, value);
            else if (key == "max_iter") cfg.iteration.max_iter = static_cast<int>(io::parse_int(value));
            else if (key == "tol") cfg.iteration.tol = io::parse_double(value);
            else if (key == "lambda_r") cfg.lambda_r = io::parse_double(value);
            else if (key == "sigma2") cfg.sigma2 = io::parse_double(value);
            else if (key == "parallel") cfg.parallel = parse_count(key, value);
            else if (key == "fit_floor") cfg.fit_floor = io::parse_double(value);
            else if (key == "G_num") g_num = parse_list(value);
            else if (key == "G_den") g_den = parse_list(value);
            else if (key == "H_num") h_num = parse_list(value);
            else if (key == "H_den") h_den = parse_list(value);
            else if (key == "K_num") k_num = parse_list(value);
            else if (key == "K_den") k_den = parse_list(value);
            else throw ConfigError("unknown config key '" + key + "'");
        }
        if (g_num || g_den) {
            cfg.G = TransferFunction(Polynomial(g_num.value_or(cfg.G.num().vec())),
                                     Polynomial(g_den.value_or(cfg.G.den().vec())));
        }
        if (h_num || h_den) {
            const TransferFunction base = cfg.H.is_rational() ? cfg.H.rational() : TransferFunction{};
            cfg.H = NoiseModelSpec(TransferFunction(Polynomial(h_num.value_or(base.num().vec())),
                                                    Polynomial(h_den.value_or(base.den().vec()))));
        }
        if (k_num || k_den) {
            cfg.K = TransferFunction(Polynomial(k_num.value_or(cfg.K.num().vec())),
                                     Polynomial(k_den.value_or(cfg.K.den().vec())));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
    auto kv = parse_key_values(is);
    for (const auto& [k, v] : overrides) kv[k] = v;
    return build_config(kv);
}

std::string config_key_reference() {
    return "scenario      fig1_openloop | fig1_closedloop | random_noise | custom\n"
           "runs          Monte Carlo runs per sample size\n"
           "seed          base seed; run i uses streams derived from (seed, i)\n"
           "sample_sizes  comma list of N\n"
           "arx_order     ARX order n, or 'auto' (2 floor(N^(1/3)), at most 200)\n"
           "mf, ml        plant denominator / numerator orders\n"
           "methods       comma list of sp, full<m> (fully parametric, m_c = m_d = m)\n"
           "iterate       iterate Step 3 until the relative change is below tol\n"
           "max_iter, tol iteration limits (defaults 100, 1e-4)\n"
           "known_initial regressions start at t = 1 with zero pre-sample values\n"
           "lambda_r      reference variance\n"
           "sigma2        noise variance\n"
           "G_num, G_den  plant polynomials in q^-1 (comma lists)\n"
           "H_num, H_den  noise filter polynomials (monic)\n"
           "K_num, K_den  controller polynomials\n"
           "parallel      worker threads\n"
           "fit_floor     FIT below this is counted as a below-axis outlier\n";
}

}  // namespace wnsf
