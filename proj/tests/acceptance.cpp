// Acceptance run: one PASS/FAIL line per criterion A1-A6.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "rmtcluster/clt.hpp"
#include "rmtcluster/clustering.hpp"
#include "rmtcluster/io.hpp"
#include "rmtcluster/parallel.hpp"
#include "support.hpp"

using namespace rmtcluster;
using namespace testsupport;

namespace {

int failures = 0;
const unsigned kWorkers = std::max(1u, std::thread::hardware_concurrency());

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(const char* id, bool pass, const std::string& detail, double seconds) {
    std::printf("%s %s  %s  [%.1fs]\n", id, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

void info(const std::string& text) {
    std::printf("   info: %s\n", text.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

ScenarioConfig config_from(const std::string& name) {
    const auto doc = read_json_file(std::string(RMTCLUSTER_CONFIG_DIR) + "/" + name);
    return scenario_config_from_json(doc.at("scenario"));
}

ScenarioConfig fixed_pair(double theta_deg, int N) {
    ScenarioConfig c;
    c.M = 8;
    c.samples_per_group = {N};
    c.users_per_group = {2};
    c.fixed_users = {{0.0, c.noise_power_dbm, 0}, {theta_deg * M_PI / 180.0, c.noise_power_dbm, 0}};
    c.seed = 1;
    return c;
}

SpectralDecomposition draw_spec(const CMat& root, int N, Rng& rng) {
    return spectral_decomposition(scm(draw_channels(root, N, rng)), N);
}

// A1: consistency at large N and plug-in dominance at N = 24.
void a1() {
    Timer t;
    const auto sc = build_scenario(fixed_pair(30.0, 24));
    const CMat& R1 = sc.covariances[0].matrix;
    const CMat& R2 = sc.covariances[1].matrix;
    const CMat S1 = matrix_sqrt_hermitian(R1);
    const CMat S2 = matrix_sqrt_hermitian(R2);
    const double d = true_distance(R1, R2);

    double rel = 0.0;
    for (int s = 0; s < 20; ++s) {
        Rng r1 = Rng::substream(s, StreamTag::channels, 16384, 0);
        Rng r2 = Rng::substream(s, StreamTag::channels, 16384, 1);
        const double dh = consistent_distance(draw_spec(S1, 16384, r1), draw_spec(S2, 16384, r2));
        rel += std::abs(dh - d) / std::max(d, 0.1);
    }
    rel /= 20.0;

    const int trials = 2000;
    double ep = 0.0, ec = 0.0, zs = 0.0, zs2 = 0.0;
    for (int k = 0; k < trials; ++k) {
        Rng r1 = Rng::substream(1, StreamTag::channels, k, 0);
        Rng r2 = Rng::substream(1, StreamTag::channels, k, 1);
        const auto Y1 = draw_channels(S1, 24, r1);
        const auto Y2 = draw_channels(S2, 24, r2);
        const CMat A = scm(Y1), B = scm(Y2);
        const double dc = consistent_distance(spectral_decomposition(A, 24), spectral_decomposition(B, 24));
        ep += std::abs(plugin_distance(A, B) - d);
        ec += std::abs(dc - d);
        const double z = 8.0 * (dc - d);
        zs += z;
        zs2 += z * z;
    }
    const double ratio = ep / ec;
    const double zm = zs / trials;
    const double zse = std::sqrt((zs2 / trials - zm * zm) / trials);
    const bool pass = rel <= 0.02 && ratio >= 1.5;
    report("A1", pass,
           "consistency: mean rel err at N=16384 " + fmt("%.4f", rel) + " (<= 0.02), plug-in/consistent abs err ratio at N=24 " +
               fmt("%.3f", ratio) + " (>= 1.5)",
           t.seconds());
    info("d = " + fmt("%.6f", d) + ", mean M(d_hat - d) at N=24 = " + fmt("%.4f", zm) + " (SE " + fmt("%.4f", zse) + ")");
}

struct CltCheck {
    double mean = 0.0;
    double var = 0.0;
    double ks = 0.0;
    double p = 0.0;
    double skew = 0.0;
    double sigma2 = 0.0;
};

CltCheck clt_check(double theta_deg, int trials, int N = 24) {
    const auto sc = build_scenario(fixed_pair(theta_deg, N));
    const auto law = asymptotic_law(sc.covariances, sc.sample_counts(), {{0, 1}});
    const double M = 8.0;
    CltCheck out;
    out.sigma2 = law.covariance(0, 0) * M * M;
    const double sd = std::sqrt(out.sigma2);
    const CMat S1 = matrix_sqrt_hermitian(sc.covariances[0].matrix);
    const CMat S2 = matrix_sqrt_hermitian(sc.covariances[1].matrix);
    std::vector<double> z(trials);
    parallel_for(static_cast<std::size_t>(trials), kWorkers, [&](std::size_t k) {
        Rng r1 = Rng::substream(2, StreamTag::channels, k, 0);
        Rng r2 = Rng::substream(2, StreamTag::channels, k, 1);
        const double dh = consistent_distance(draw_spec(S1, N, r1), draw_spec(S2, N, r2));
        z[k] = M * (dh - law.mean[0]) / sd;
    });
    double s = 0.0;
    for (double v : z) s += v;
    out.mean = s / trials;
    double s2 = 0.0, s3 = 0.0;
    for (double v : z) {
        s2 += (v - out.mean) * (v - out.mean);
        s3 += std::pow(v - out.mean, 3);
    }
    out.var = s2 / trials;
    out.skew = (s3 / trials) / std::pow(out.var, 1.5);
    out.ks = ks_statistic(z);
    out.p = ks_pvalue(out.ks, z.size());
    return out;
}

// A2: standardized fluctuations of one pair against N(0, 1).
void a2() {
    Timer t;
    const auto c = clt_check(60.0, 10000);
    const bool pass = std::abs(c.mean) <= 0.05 && c.var >= 0.85 && c.var <= 1.15 && c.p >= 0.01;
    report("A2", pass,
           "CLT at 0/60 deg, N=24, 1e4 trials: mean " + fmt("%.4f", c.mean) + " (|.| <= 0.05), variance " +
               fmt("%.4f", c.var) + " (in [0.85, 1.15]), KS D " + fmt("%.4f", c.ks) + " p " + fmt("%.3f", c.p) +
               " (>= 0.01)",
           t.seconds());
    info("sigma_bar^2 = " + fmt("%.6f", c.sigma2) + ", sample skewness " + fmt("%.3f", c.skew));
    for (double th : {30.0, 0.0}) {
        const auto o = clt_check(th, 10000);
        info("0/" + fmt("%.0f", th) + " deg: mean " + fmt("%.4f", o.mean) + ", variance " + fmt("%.4f", o.var) +
             ", skewness " + fmt("%.3f", o.skew) + ", KS p " + fmt("%.4f", o.p) + ", sigma_bar^2 " +
             fmt("%.6f", o.sigma2));
    }
    for (int n : {48, 96}) {
        const auto o = clt_check(60.0, 10000, n);
        info("0/60 deg at N=" + std::to_string(n) + ": mean " + fmt("%.4f", o.mean) + ", variance " +
             fmt("%.4f", o.var) + ", skewness " + fmt("%.3f", o.skew) + ", KS p " + fmt("%.4f", o.p));
    }
}

double worst_change(const RMat& a, const RMat& b) {
    double w = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index s = 0; s < a.cols(); ++s) {
            if (b(r, s) != 0.0) w = std::max(w, std::abs(a(r, s) - b(r, s)) / std::abs(b(r, s)));
        }
    }
    return w;
}

// A3: node doubling on a three-user pair set.
void a3() {
    Timer t;
    ScenarioConfig c;
    c.M = 8;
    c.samples_per_group = {24};
    c.users_per_group = {3};
    c.fixed_users = {{0.0, c.noise_power_dbm, 0},
                     {M_PI / 6.0, c.noise_power_dbm, 0},
                     {M_PI / 3.0, c.noise_power_dbm, 0}};
    c.seed = 1;
    const auto sc = build_scenario(c);
    const PairList pairs{{0, 1}, {0, 2}, {1, 2}};
    CltOptions o24, o48;
    o24.contour_nodes = 24;
    o48.contour_nodes = 48;
    const auto a = asymptotic_covariance(sc.covariances, sc.sample_counts(), pairs, o24);
    const auto b = asymptotic_covariance(sc.covariances, sc.sample_counts(), pairs, o48);
    const double w = worst_change(a.sigma_bar, b.sigma_bar);
    const double im = std::max(a.diagnostics.max_imag_residue, b.diagnostics.max_imag_residue);
    report("A3", w <= 1e-6 && im <= 1e-8,
           "node doubling 24 -> 48 on users at 0/30/60 deg, N=24: max rel change " + fmt("%.2e", w) +
               " (<= 1e-6), max imaginary residue " + fmt("%.2e", im) + " (<= 1e-8)",
           t.seconds());

    // Wide-spectrum users from the clustering scenario, for the record.
    auto wide = config_from("n_sweep.json");
    const auto ws = build_scenario(wide);
    std::vector<CovarianceModel> models{ws.covariances[0], ws.covariances[3], ws.covariances[6]};
    std::vector<int> N{ws.users[0].N_samples, ws.users[3].N_samples, ws.users[6].N_samples};
    const auto wa = asymptotic_covariance(models, N, pairs, o24);
    const auto wb = asymptotic_covariance(models, N, pairs, o48);
    CltOptions o96;
    o96.contour_nodes = 96;
    const auto wc = asymptotic_covariance(models, N, pairs, o96);
    double span = 0.0;
    for (const auto& m : models) span = std::max(span, m.eigenvalues.maxCoeff() / m.eigenvalues.minCoeff());
    info("clustering-scenario users 0/3/6 (N=16, eigenvalue ratio up to " + fmt("%.0f", span) +
         "): 24 -> 48 change " + fmt("%.2e", worst_change(wa.sigma_bar, wb.sigma_bar)) + ", 48 -> 96 change " +
         fmt("%.2e", worst_change(wb.sigma_bar, wc.sigma_bar)));
}

struct GridPoint {
    double axis;
    Probability theory;
    Probability emp;
    Probability plugin;
};

std::vector<GridPoint> run_grid(const ScenarioConfig& cfg, SweepAxis axis, const std::vector<double>& grid) {
    SweepOptions opt;
    opt.trials = 1000;
    opt.mc_samples = 100000;
    opt.workers = kWorkers;
    std::vector<GridPoint> out;
    for (const auto& row : sweep(cfg, axis, grid, opt)) {
        out.push_back({row.axis_value, row.theory, row.consistent, row.plugin});
    }
    return out;
}

// Same placement without shadowing, for comparison with the reference curves.
void shadow_free_info(ScenarioConfig cfg, SweepAxis axis, const std::vector<double>& grid) {
    cfg.shadow_std_db = 0.0;
    std::string curve;
    for (const auto& g : run_grid(cfg, axis, grid)) {
        curve += fmt("%g", g.axis) + ":" + fmt("%.3f", g.theory.p) + "/" + fmt("%.3f", g.emp.p) + " ";
    }
    info("without shadowing, theory/empirical " + curve);
}

double allowed_gap(const GridPoint& g, double base) {
    return base + 2.0 * std::sqrt(g.theory.se * g.theory.se + g.emp.se * g.emp.se);
}

// A4: theory against Monte Carlo over tau.
void a4() {
    Timer t;
    const auto cfg = config_from("tau_sweep.json");
    const auto pts = run_grid(cfg, SweepAxis::tau, {1.5, 2.0, 3.0});
    bool pass = true;
    std::string detail;
    for (const auto& g : pts) {
        const double gap = std::abs(g.theory.p - g.emp.p);
        const double lim = allowed_gap(g, 0.05);
        pass = pass && gap <= lim;
        detail += "tau " + fmt("%.1f", g.axis) + ": theory " + fmt("%.3f", g.theory.p) + " emp " + fmt("%.3f", g.emp.p) +
                  " gap " + fmt("%.3f", gap) + " (<= " + fmt("%.3f", lim) + "); ";
    }
    const double anchor = pts[1].theory.p;
    const bool anchored = std::abs(anchor - 0.6819) <= 0.15;
    detail += "anchor tau=2 theory " + fmt("%.3f", anchor) + " (0.6819 +- 0.15)";
    report("A4", pass && anchored, detail, t.seconds());
    shadow_free_info(cfg, SweepAxis::tau, {1.5, 2.0, 3.0});
}

// A5: growing N at fixed M.
void a5() {
    Timer t;
    const auto cfg = config_from("n_sweep.json");
    const std::vector<double> grid{9, 11, 13, 15, 16, 24, 32, 40};
    const auto pts = run_grid(cfg, SweepAxis::samples, grid);
    bool monotone = true;
    double run_max = -1.0;
    bool gaps = true;
    std::string curve;
    double p16 = 0.0, p24 = 0.0, worst_gap = 0.0;
    for (const auto& g : pts) {
        if (g.theory.p < run_max - 0.02) monotone = false;
        run_max = std::max(run_max, g.theory.p);
        const double gap = std::abs(g.theory.p - g.emp.p);
        worst_gap = std::max(worst_gap, gap);
        gaps = gaps && gap <= 0.07;
        if (g.axis == 16) p16 = g.theory.p;
        if (g.axis == 24) p24 = g.theory.p;
        curve += fmt("%.0f", g.axis) + ":" + fmt("%.3f", g.theory.p) + "/" + fmt("%.3f", g.emp.p) + " ";
    }
    const bool anchors = std::abs(p16 - 0.695) <= 0.15 && std::abs(p24 - 0.850) <= 0.15;
    report("A5", monotone && anchors && gaps,
           std::string("N sweep at tau=1.5: monotone ") + (monotone ? "yes" : "no") + ", N=16 theory " + fmt("%.3f", p16) +
               " (0.695 +- 0.15), N=24 theory " + fmt("%.3f", p24) + " (0.850 +- 0.15), max theory/emp gap " +
               fmt("%.3f", worst_gap) + " (<= 0.07)",
           t.seconds());
    info("N:theory/empirical " + curve);
    shadow_free_info(cfg, SweepAxis::samples, grid);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A6: deterministic property suite and CLI reproducibility.
void a6() {
    Timer t;
    std::vector<std::string> failed;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failed.push_back(what);
    };
    Rng rng(2024);

    for (int k = 0; k < 200; ++k) {
        const int M = 2 + k % 9;
        const int N = M + 1 + k % 30;
        const auto spec = draw_spec(matrix_sqrt_hermitian(random_pd(M, rng)), N, rng);
        double prev = 0.0;
        bool inter = true;
        for (int m = 0; m < M; ++m) {
            inter = inter && prev < spec.mu_roots[m] && spec.mu_roots[m] < spec.eigenvalues[m];
            prev = spec.eigenvalues[m];
        }
        expect(inter, "interlacing");
        const double rhs = (1.0 - 1.0 / N) * spec.eigenvalues.sum();
        expect(std::abs(spec.mu_roots.sum() - rhs) <= 1e-9 * rhs, "trace identity");
    }

    expect(std::abs(phi2(1.0 - 1e-8) - phi2(1.0 + 1e-8)) <= 1e-6, "phi2 continuity");
    expect(std::abs(dilog(1.0) - M_PI * M_PI / 6.0) <= 1e-15, "Li2(1)");

    for (int k = 0; k < 50; ++k) {
        const CMat A = random_pd(6, rng), B = random_pd(6, rng);
        const double d = true_distance(A, B);
        expect(true_distance(B, A) == d || std::abs(true_distance(B, A) - d) <= 1e-12 * d, "true symmetry");
        expect(true_distance(A, A) <= 1e-20, "true zero on equal");
        expect(d > 0.0, "true positivity");
        const CMat U = random_unitary(6, rng);
        expect(std::abs(true_distance(hermitian_part(U * A * U.adjoint()), hermitian_part(U * B * U.adjoint())) - d) <=
                   1e-10 * std::max(1.0, d),
               "true unitary invariance");
        expect(std::abs(true_distance(2.5 * A, 2.5 * B) - d) <= 1e-10 * std::max(1.0, d), "true scaling");

        const auto Y1 = draw_channels(matrix_sqrt_hermitian(A), 14, rng);
        const auto Y2 = draw_channels(matrix_sqrt_hermitian(B), 14, rng);
        const auto s1 = spectral_decomposition(scm(Y1), 14);
        const auto s2 = spectral_decomposition(scm(Y2), 14);
        const double dh = consistent_distance(s1, s2);
        expect(consistent_distance(s2, s1) == dh, "consistent symmetry");
        SampleBlock Z1 = Y1, Z2 = Y2;
        Z1.samples = U * Y1.samples;
        Z2.samples = U * Y2.samples;
        const double dz = consistent_distance(spectral_decomposition(scm(Z1), 14), spectral_decomposition(scm(Z2), 14));
        expect(std::abs(dz - dh) <= 1e-8 * std::max(1.0, std::abs(dh)), "consistent joint unitary invariance");
    }

    {
        std::vector<CovarianceModel> models;
        for (int k = 0; k < 4; ++k) models.push_back(model_of(random_pd(4, rng)));
        const auto res = asymptotic_covariance(models, {12, 12, 12, 12}, {{0, 1}, {2, 3}, {0, 2}});
        expect(res.sigma_bar(0, 1) == 0.0 && res.sigma_bar(1, 0) == 0.0, "sigma sparsity");
    }

    const std::filesystem::path base = std::filesystem::temp_directory_path() / "rmtcluster_acceptance";
    std::filesystem::remove_all(base);
    const std::string config = std::string(RMTCLUSTER_CONFIG_DIR) + "/smoke.json";
    const std::vector<std::pair<std::string, std::vector<std::string>>> subs{
        {"gen-scenario", {"scenario.json"}},
        {"distances", {"distances.csv"}},
        {"clt-law", {"law.json"}},
        {"cluster-prob", {"cluster_prob.csv"}},
        {"sweep", {"sweep.csv"}},
        {"histogram", {"histogram.csv", "histogram_law.json"}},
    };
    for (const auto& [sub, files] : subs) {
        for (int run = 0; run < 2; ++run) {
            const auto out = base / (sub + std::to_string(run));
            const std::string cmd = std::string("\"") + RMTCLUSTER_CLI + "\" " + sub + " --config \"" + config +
                                    "\" --out \"" + out.string() + "\" > \"" + (base / (sub + ".log")).string() +
                                    "\" 2>&1";
            std::filesystem::create_directories(base);
            expect(std::system(cmd.c_str()) == 0, sub + " exit status");
        }
        for (const auto& f : files) {
            const std::string a = slurp(base / (sub + "0") / f);
            const std::string b = slurp(base / (sub + "1") / f);
            expect(!a.empty() && a == b, sub + " reproducible " + f);
        }
    }
    std::filesystem::remove_all(base);

    std::string detail = "property suite and CLI reproducibility";
    if (!failed.empty()) {
        detail += ": failed";
        for (const auto& f : failed) detail += " [" + f + "]";
    }
    report("A6", failed.empty(), detail, t.seconds());
}

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> only;
    for (int k = 1; k < argc; ++k) only.insert(argv[k]);
    auto want = [&](const char* id) { return only.empty() || only.count(id) > 0; };
    if (want("A1")) a1();
    if (want("A2")) a2();
    if (want("A3")) a3();
    if (want("A4")) a4();
    if (want("A5")) a5();
    if (want("A6")) a6();
    return failures == 0 ? 0 : 1;
}
