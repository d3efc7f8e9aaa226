#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rmtcluster/clt.hpp"
#include "rmtcluster/clustering.hpp"
#include "rmtcluster/distance.hpp"
#include "rmtcluster/error.hpp"
#include "rmtcluster/io.hpp"
#include "rmtcluster/random.hpp"
#include "rmtcluster/sampling.hpp"
#include "rmtcluster/scenario.hpp"

using namespace rmtcluster;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4, kOther = 5 };

struct RunSettings {
    long long trials = 1000;
    long long mc_samples = 100000;
    int contour_nodes = 24;
    unsigned workers = 1;
    std::vector<std::string> estimators{"true", "plugin", "consistent"};
    std::string axis = "tau";
    std::vector<double> grid{1.0, 2.0, 3.0, 4.0, 5.0};
    std::pair<int, int> pair{0, 1};
    std::string trace_pairing = "own_variable";
    bool verify_doubling = false;
};

struct Flags {
    std::string config;
    std::string scenario;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<long long> trials;
    std::optional<long long> mc_samples;
    std::optional<int> contour_nodes;
    std::optional<unsigned> workers;
    std::optional<std::string> estimators;
    std::optional<std::string> pair;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

RunSettings parse_run(const json& j) {
    RunSettings r;
    if (j.is_null()) return r;
    static const std::set<std::string> allowed{"trials", "mc_samples", "contour_nodes", "workers",
                                               "estimators", "axis", "grid", "pair", "trace_pairing",
                                               "verify_doubling"};
    if (!j.is_object()) throw ConfigError("run must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in run");
    }
    try {
        if (j.contains("trials")) r.trials = j["trials"].get<long long>();
        if (j.contains("mc_samples")) r.mc_samples = j["mc_samples"].get<long long>();
        if (j.contains("contour_nodes")) r.contour_nodes = j["contour_nodes"].get<int>();
        if (j.contains("workers")) r.workers = j["workers"].get<unsigned>();
        if (j.contains("estimators")) r.estimators = j["estimators"].get<std::vector<std::string>>();
        if (j.contains("axis")) r.axis = j["axis"].get<std::string>();
        if (j.contains("grid")) r.grid = j["grid"].get<std::vector<double>>();
        if (j.contains("pair")) {
            const auto p = j["pair"].get<std::vector<int>>();
            if (p.size() != 2) throw ConfigError("run.pair must have two entries");
            r.pair = {p[0], p[1]};
        }
        if (j.contains("trace_pairing")) r.trace_pairing = j["trace_pairing"].get<std::string>();
        if (j.contains("verify_doubling")) r.verify_doubling = j["verify_doubling"].get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid value in run: ") + e.what());
    }
    return r;
}

struct Context {
    ScenarioConfig scenario_config;
    RunSettings run;
    std::optional<ClusteringScenario> loaded;
    std::filesystem::path out;

    ClusteringScenario scenario() const {
        if (loaded) return *loaded;
        return build_scenario(scenario_config, run.workers);
    }

    CltOptions clt() const {
        CltOptions o;
        o.contour_nodes = run.contour_nodes;
        o.workers = run.workers;
        o.verify_doubling = run.verify_doubling;
        if (run.trace_pairing == "own_variable") {
            o.pairing = TracePairing::own_variable;
        } else if (run.trace_pairing == "as_printed") {
            o.pairing = TracePairing::as_printed;
        } else {
            throw ConfigError("run.trace_pairing must be own_variable or as_printed");
        }
        return o;
    }

    std::uint64_t seed() const { return scenario_config.seed; }
};

Context load_context(const Flags& f) {
    if (f.config.empty()) throw ConfigError("--config is required");
    const json doc = read_json_file(f.config);
    if (!doc.is_object()) throw ConfigError("config root must be an object");
    for (const auto& [k, v] : doc.items()) {
        if (k != "scenario" && k != "run") throw ConfigError("unknown top-level key '" + k + "'");
    }
    if (!doc.contains("scenario")) throw ConfigError("missing required key 'scenario'");
    json sc = doc.at("scenario");
    if (f.seed) sc["seed"] = *f.seed;
    Context ctx;
    ctx.scenario_config = scenario_config_from_json(sc);
    ctx.run = parse_run(doc.contains("run") ? doc.at("run") : json());
    if (f.trials) ctx.run.trials = *f.trials;
    if (f.mc_samples) ctx.run.mc_samples = *f.mc_samples;
    if (f.contour_nodes) ctx.run.contour_nodes = *f.contour_nodes;
    if (f.workers) ctx.run.workers = *f.workers;
    if (f.estimators) ctx.run.estimators = split(*f.estimators, ',');
    if (f.pair) {
        const auto p = split(*f.pair, ',');
        if (p.size() != 2) throw ConfigError("--pair expects i,j");
        try {
            ctx.run.pair = {std::stoi(p[0]), std::stoi(p[1])};
        } catch (const std::exception&) {
            throw ConfigError("--pair expects two integers");
        }
    }
    for (const auto& e : ctx.run.estimators) estimator_from_string(e);
    if (ctx.run.trials < 0) throw ConfigError("trials must be non-negative");
    if (!f.scenario.empty()) {
        ctx.loaded = scenario_from_json(read_json_file(f.scenario));
        ctx.scenario_config.M = ctx.loaded->config.M;
    }
    ctx.out = f.out;
    std::error_code ec;
    std::filesystem::create_directories(ctx.out, ec);
    if (ec) throw IoError("cannot create output directory '" + f.out + "': " + ec.message());
    return ctx;
}

std::string path_of(const Context& ctx, const std::string& name) { return (ctx.out / name).string(); }

int cmd_gen_scenario(const Context& ctx) {
    const auto sc = ctx.scenario();
    const auto path = path_of(ctx, "scenario.json");
    write_text_file(path, dump_json(scenario_to_json(sc)));
    std::cout << "wrote " << path << " (" << sc.K() << " users)\n";
    return kOk;
}

// One channel realization for every user, from the trial-0 substreams.
std::vector<SpectralDecomposition> draw_specs(const ClusteringScenario& sc, std::uint64_t seed,
                                              std::uint64_t trial) {
    std::vector<SpectralDecomposition> specs;
    for (int k = 0; k < sc.K(); ++k) {
        Rng rng = Rng::substream(seed, StreamTag::channels, trial, static_cast<std::uint64_t>(k));
        const auto Y = draw_channels(matrix_sqrt_hermitian(sc.covariances[k].matrix),
                                     sc.users[k].N_samples, rng, k);
        specs.push_back(spectral_decomposition(scm(Y), Y.N));
    }
    return specs;
}

int cmd_distances(const Context& ctx) {
    const auto sc = ctx.scenario();
    const auto pairs = all_pairs(sc.K());
    const auto specs = draw_specs(sc, ctx.seed(), 0);
    std::vector<CMat> mats;
    for (const auto& c : sc.covariances) mats.push_back(c.matrix);
    std::ostringstream os;
    bool header = true;
    for (const auto& name : ctx.run.estimators) {
        const auto kind = estimator_from_string(name);
        const auto dv = kind == EstimatorKind::true_value ? true_distance_vector(mats, pairs)
                                                          : distance_vector(specs, pairs, kind);
        std::ostringstream part;
        write_distance_csv(part, dv);
        std::string text = part.str();
        if (!header) text = text.substr(text.find('\n') + 1);
        header = false;
        os << text;
    }
    if (header) os << "i,j,estimator_kind,value\n";
    const auto path = path_of(ctx, "distances.csv");
    write_text_file(path, os.str());
    std::cout << "wrote " << path << " (" << pairs.size() << " pairs)\n";
    return kOk;
}

int cmd_clt_law(const Context& ctx) {
    const auto sc = ctx.scenario();
    const auto law = asymptotic_law(sc.covariances, sc.sample_counts(), all_pairs(sc.K()), ctx.clt());
    const auto path = path_of(ctx, "law.json");
    write_text_file(path, dump_json(law_to_json(law)));
    std::cout << "wrote " << path << " (max imaginary residue "
              << format_double(law.diagnostics.max_imag_residue) << ")\n";
    return kOk;
}

SweepOptions sweep_options(const Context& ctx) {
    SweepOptions o;
    o.trials = ctx.run.trials;
    o.mc_samples = ctx.run.mc_samples;
    o.clt = ctx.clt();
    o.empirical = ctx.run.trials > 0;
    o.workers = ctx.run.workers;
    return o;
}

int cmd_cluster_prob(const Context& ctx) {
    if (ctx.loaded) throw ConfigError("cluster-prob builds its scenario from --config; drop --scenario");
    const auto rows = sweep(ctx.scenario_config, SweepAxis::tau, {ctx.scenario_config.tau},
                            sweep_options(ctx));
    std::ostringstream os;
    write_sweep_csv(os, rows);
    const auto path = path_of(ctx, "cluster_prob.csv");
    write_text_file(path, os.str());
    std::cout << os.str();
    return kOk;
}

int cmd_sweep(const Context& ctx) {
    if (ctx.loaded) throw ConfigError("sweep builds its scenario from --config; drop --scenario");
    SweepAxis axis;
    if (ctx.run.axis == "tau") {
        axis = SweepAxis::tau;
    } else if (ctx.run.axis == "N") {
        axis = SweepAxis::samples;
    } else {
        throw ConfigError("run.axis must be 'tau' or 'N'");
    }
    const auto rows = sweep(ctx.scenario_config, axis, ctx.run.grid, sweep_options(ctx));
    std::ostringstream os;
    write_sweep_csv(os, rows);
    const auto path = path_of(ctx, "sweep.csv");
    write_text_file(path, os.str());
    std::cout << os.str();
    return kOk;
}

int cmd_histogram(const Context& ctx) {
    const auto sc = ctx.scenario();
    const auto [i, j] = ctx.run.pair;
    if (i < 0 || j < 0 || i >= sc.K() || j >= sc.K() || i == j) {
        throw ConfigError("pair (" + std::to_string(i) + "," + std::to_string(j) + ") does not exist");
    }
    const PairList pairs{{i, j}};
    const auto law = asymptotic_law(sc.covariances, sc.sample_counts(), pairs, ctx.clt());
    const double d = law.mean[0];
    const double M = sc.config.M;
    const double sigma2 = law.covariance(0, 0) * M * M;
    const CMat Si = matrix_sqrt_hermitian(sc.covariances[i].matrix);
    const CMat Sj = matrix_sqrt_hermitian(sc.covariances[j].matrix);
    std::ostringstream os;
    os << "trial,zeta\n";
    for (long long t = 0; t < ctx.run.trials; ++t) {
        Rng ri = Rng::substream(ctx.seed(), StreamTag::channels, t, static_cast<std::uint64_t>(i));
        Rng rj = Rng::substream(ctx.seed(), StreamTag::channels, t, static_cast<std::uint64_t>(j));
        const auto Yi = draw_channels(Si, sc.users[i].N_samples, ri, i);
        const auto Yj = draw_channels(Sj, sc.users[j].N_samples, rj, j);
        const double dh = consistent_distance(spectral_decomposition(scm(Yi), Yi.N),
                                              spectral_decomposition(scm(Yj), Yj.N));
        os << t << ',' << format_double(M * (dh - d)) << '\n';
    }
    const auto path = path_of(ctx, "histogram.csv");
    write_text_file(path, os.str());
    const json params = {{"pair", {i, j}}, {"true_distance", d}, {"mean", 0.0}, {"variance", sigma2}};
    write_text_file(path_of(ctx, "histogram_law.json"), dump_json(params));
    std::cout << "wrote " << path << " (sigma_bar^2 = " << format_double(sigma2) << ")\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consistent log-Euclidean distances, their CLT law and clustering success"};
    app.require_subcommand(1);
    Flags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON configuration file")->required();
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--seed", flags.seed, "Master seed (overrides scenario.seed)");
        sub->add_option("--trials", flags.trials, "Monte Carlo channel trials");
        sub->add_option("--mc-samples", flags.mc_samples, "Gaussian samples for the theory");
        sub->add_option("--contour-nodes", flags.contour_nodes, "Quadrature nodes per contour");
        sub->add_option("--workers", flags.workers, "Worker threads (0 = hardware)");
        sub->add_option("--estimators", flags.estimators, "Comma list of true,plugin,consistent");
        sub->add_option("--scenario", flags.scenario, "Load a saved scenario document");
        sub->add_option("--pair", flags.pair, "User pair i,j (zero-based) for histogram");
    };
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const Context&);
    };
    const Sub subs[] = {
        {"gen-scenario", "Place users and write the scenario document", cmd_gen_scenario},
        {"distances", "True, plug-in and consistent distances for one realization", cmd_distances},
        {"clt-law", "Asymptotic Gaussian law of all pairwise distances", cmd_clt_law},
        {"cluster-prob", "Theoretical and empirical clustering success at the configured tau",
         cmd_cluster_prob},
        {"sweep", "Clustering success over a tau or N grid", cmd_sweep},
        {"histogram", "Samples of M (d_hat - d) for one pair and the predicted variance", cmd_histogram},
    };
    std::vector<std::pair<CLI::App*, int (*)(const Context&)>> handlers;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        add_common(sub);
        handlers.emplace_back(sub, s.fn);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    try {
        const Context ctx = load_context(flags);
        for (const auto& [sub, fn] : handlers) {
            if (sub->parsed()) return fn(ctx);
        }
        return kOther;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const DomainError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
}
