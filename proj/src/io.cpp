#include "rmtcluster/io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "rmtcluster/error.hpp"
#include "rmtcluster/sampling.hpp"

namespace rmtcluster {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_required(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError("missing required key '" + key + "' in " + where);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("invalid value for '" + key + "' in " + where + ": " + e.what());
    }
}

template <typename T>
void get_optional(const json& j, const std::string& key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("invalid value for '" + key + "' in " + where + ": " + e.what());
    }
}

json matrix_to_json(const CMat& A) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < A.cols(); ++c) row.push_back({A(r, c).real(), A(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

CMat matrix_from_json(const json& j, int M) {
    if (!j.is_array() || static_cast<int>(j.size()) != M) throw IoError("covariance must be an M x M array");
    CMat A(M, M);
    for (int r = 0; r < M; ++r) {
        if (!j[r].is_array() || static_cast<int>(j[r].size()) != M) {
            throw IoError("covariance must be an M x M array");
        }
        for (int c = 0; c < M; ++c) {
            A(r, c) = cplx(j[r][c].at(0).get<double>(), j[r][c].at(1).get<double>());
        }
    }
    return A;
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

ScenarioConfig scenario_config_from_json(const json& j) {
    const std::string where = "scenario";
    reject_unknown(j,
                   {"M", "group_centroids", "tau", "placement_radius_m", "users_per_group",
                    "samples_per_group", "bs_height_m", "ue_height_m", "pathloss_offset_db",
                    "pathloss_slope", "shadow_std_db", "shadow_decorr_m", "angular_std_rad",
                    "noise_power_dbm", "quadrature_order", "seed", "fixed_users"},
                   where);
    ScenarioConfig c;
    c.M = get_required<int>(j, "M", where);
    c.samples_per_group = get_required<std::vector<int>>(j, "samples_per_group", where);
    c.seed = get_required<std::uint64_t>(j, "seed", where);
    if (j.contains("fixed_users")) {
        for (const auto& fu : j.at("fixed_users")) {
            reject_unknown(fu, {"theta_bar_rad", "beta_db", "group"}, "fixed_users entry");
            FixedUser u;
            u.theta_bar_rad = get_required<double>(fu, "theta_bar_rad", "fixed_users entry");
            u.beta_db = get_required<double>(fu, "beta_db", "fixed_users entry");
            u.group = get_required<int>(fu, "group", "fixed_users entry");
            c.fixed_users.push_back(u);
        }
        get_optional(j, "group_centroids", c.group_centroids, where);
        get_optional(j, "users_per_group", c.users_per_group, where);
    } else {
        c.group_centroids = get_required<std::vector<std::array<double, 2>>>(j, "group_centroids", where);
        c.users_per_group = get_required<std::vector<int>>(j, "users_per_group", where);
    }
    get_optional(j, "tau", c.tau, where);
    get_optional(j, "placement_radius_m", c.placement_radius_m, where);
    get_optional(j, "bs_height_m", c.bs_height_m, where);
    get_optional(j, "ue_height_m", c.ue_height_m, where);
    get_optional(j, "pathloss_offset_db", c.pathloss_offset_db, where);
    get_optional(j, "pathloss_slope", c.pathloss_slope, where);
    get_optional(j, "shadow_std_db", c.shadow_std_db, where);
    get_optional(j, "shadow_decorr_m", c.shadow_decorr_m, where);
    get_optional(j, "angular_std_rad", c.angular_std_rad, where);
    get_optional(j, "noise_power_dbm", c.noise_power_dbm, where);
    get_optional(j, "quadrature_order", c.quadrature_order, where);
    c.validate();
    return c;
}

json scenario_config_to_json(const ScenarioConfig& c) {
    json j;
    j["M"] = c.M;
    j["group_centroids"] = c.group_centroids;
    j["tau"] = c.tau;
    j["placement_radius_m"] = c.placement_radius_m;
    j["users_per_group"] = c.users_per_group;
    j["samples_per_group"] = c.samples_per_group;
    j["bs_height_m"] = c.bs_height_m;
    j["ue_height_m"] = c.ue_height_m;
    j["pathloss_offset_db"] = c.pathloss_offset_db;
    j["pathloss_slope"] = c.pathloss_slope;
    j["shadow_std_db"] = c.shadow_std_db;
    j["shadow_decorr_m"] = c.shadow_decorr_m;
    j["angular_std_rad"] = c.angular_std_rad;
    j["noise_power_dbm"] = c.noise_power_dbm;
    j["quadrature_order"] = c.quadrature_order;
    j["seed"] = c.seed;
    if (!c.fixed_users.empty()) {
        json fus = json::array();
        for (const auto& u : c.fixed_users) {
            fus.push_back({{"theta_bar_rad", u.theta_bar_rad}, {"beta_db", u.beta_db}, {"group", u.group}});
        }
        j["fixed_users"] = fus;
    }
    return j;
}

json scenario_to_json(const ClusteringScenario& s) {
    json users = json::array();
    for (std::size_t k = 0; k < s.users.size(); ++k) {
        const auto& u = s.users[k];
        json ju;
        ju["position"] = u.position;
        ju["group_id"] = u.group_id;
        ju["theta_bar"] = u.theta_bar;
        ju["beta_db"] = u.beta_db;
        ju["N_samples"] = u.N_samples;
        if (k < s.covariances.size()) ju["covariance"] = matrix_to_json(s.covariances[k].matrix);
        users.push_back(ju);
    }
    return {{"config", scenario_config_to_json(s.config)}, {"users", users}};
}

ClusteringScenario scenario_from_json(const json& j) {
    try {
        ClusteringScenario s;
        s.config = scenario_config_from_json(j.at("config"));
        for (const auto& ju : j.at("users")) {
            UserModel u;
            u.position = ju.at("position").get<std::array<double, 3>>();
            u.group_id = ju.at("group_id").get<int>();
            u.theta_bar = ju.at("theta_bar").get<double>();
            u.beta_db = ju.at("beta_db").get<double>();
            u.N_samples = ju.at("N_samples").get<int>();
            s.users.push_back(u);
            if (ju.contains("covariance")) {
                CovarianceModel cm;
                cm.matrix = matrix_from_json(ju.at("covariance"), s.config.M);
                cm.user = u;
                auto [lam, E] = eig_hermitian(cm.matrix);
                cm.eigenvalues = std::move(lam);
                cm.eigenvectors = std::move(E);
                s.covariances.push_back(std::move(cm));
            }
        }
        return s;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed scenario document: ") + e.what());
    }
}

json law_to_json(const AsymptoticLaw& law) {
    json pairs = json::array();
    for (const auto& [i, j] : law.pairs) pairs.push_back({i, j});
    json cov = json::array();
    for (Eigen::Index r = 0; r < law.covariance.rows(); ++r) {
        std::vector<double> row;
        for (Eigen::Index c = 0; c < law.covariance.cols(); ++c) row.push_back(law.covariance(r, c));
        cov.push_back(row);
    }
    json contours = json::array();
    for (std::size_t u = 0; u < law.diagnostics.contours.size(); ++u) {
        const auto& C = law.diagnostics.contours[u];
        if (C.nodes.empty()) continue;
        contours.push_back({{"user", u},
                            {"x_left", C.x_left},
                            {"x_right", C.x_right},
                            {"center_log", C.center_log},
                            {"focus", C.focus},
                            {"inner_level", C.inner_level},
                            {"outer_level", C.outer_level},
                            {"semi_real", C.semi_real},
                            {"semi_imag", C.semi_imag},
                            {"max_spread", C.max_spread}});
    }
    json diag = {{"nodes", law.diagnostics.nodes},
                 {"max_imag_residue", law.diagnostics.max_imag_residue},
                 {"max_doubling_change", law.diagnostics.max_doubling_change},
                 {"contours", contours}};
    return {{"M", law.M},
            {"pairs", pairs},
            {"mean", std::vector<double>(law.mean.data(), law.mean.data() + law.mean.size())},
            {"covariance", cov},
            {"diagnostics", diag}};
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "axis_value,p_theory,se_theory,p_emp_consistent,se_emp_consistent,p_emp_plugin,se_emp_plugin\n";
    for (const auto& r : rows) {
        out << format_double(r.axis_value) << ',' << format_double(r.theory.p) << ','
            << format_double(r.theory.se) << ',' << format_double(r.consistent.p) << ','
            << format_double(r.consistent.se) << ',' << format_double(r.plugin.p) << ','
            << format_double(r.plugin.se) << '\n';
    }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse '" + path + "': " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace rmtcluster
