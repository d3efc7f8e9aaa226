#include "rmtcluster/scenario.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <Eigen/Eigenvalues>

#include "rmtcluster/error.hpp"
#include "rmtcluster/parallel.hpp"
#include "rmtcluster/quadrature.hpp"
#include "rmtcluster/sampling.hpp"

namespace rmtcluster {

namespace {

constexpr long kMaxPlacementRetries = 1000000;
constexpr double kCoincidentM = 1e-9;

std::shared_ptr<const GaussLegendreRule> cached_rule(int order) {
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const GaussLegendreRule>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;
    auto rule = std::make_shared<const GaussLegendreRule>(gauss_legendre(order));
    cache.emplace(order, rule);
    return rule;
}

double planar_distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

std::array<double, 2> scaled_position(const ScenarioConfig& c, int group,
                                      const std::array<double, 2>& offset) {
    const auto& ctr = c.group_centroids[group];
    return {c.tau * ctr[0] + offset[0], c.tau * ctr[1] + offset[1]};
}

}  // namespace

void ScenarioConfig::validate() const {
    if (M < 2) throw ConfigError("M must be at least 2");
    if (samples_per_group.empty()) throw ConfigError("samples_per_group must not be empty");
    for (int n : samples_per_group) {
        if (n <= M) {
            throw ConfigError("every samples_per_group entry must exceed M (got " +
                              std::to_string(n) + " with M=" + std::to_string(M) + ")");
        }
    }
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(placement_radius_m > 0.0)) throw ConfigError("placement_radius_m must be positive");
    if (!(shadow_std_db >= 0.0)) throw ConfigError("shadow_std_db must be non-negative");
    if (!(shadow_decorr_m > 0.0)) throw ConfigError("shadow_decorr_m must be positive");
    if (!(angular_std_rad > 0.0)) throw ConfigError("angular_std_rad must be positive");
    if (quadrature_order < 1) throw ConfigError("quadrature_order must be positive");
    if (fixed_users.empty()) {
        if (group_centroids.size() != samples_per_group.size() ||
            users_per_group.size() != samples_per_group.size()) {
            throw ConfigError(
                "group_centroids, users_per_group and samples_per_group must have equal length");
        }
        for (int u : users_per_group) {
            if (u < 0) throw ConfigError("users_per_group entries must be non-negative");
        }
    } else {
        for (const auto& fu : fixed_users) {
            if (fu.group < 0 || fu.group >= group_count()) {
                throw ConfigError("fixed user group index out of range");
            }
        }
    }
}

std::vector<int> ClusteringScenario::assignment() const {
    std::vector<int> out;
    out.reserve(users.size());
    for (const auto& u : users) out.push_back(u.group_id);
    return out;
}

std::vector<int> ClusteringScenario::sample_counts() const {
    std::vector<int> out;
    out.reserve(users.size());
    for (const auto& u : users) out.push_back(u.N_samples);
    return out;
}

PlacementDraw draw_placement(const ScenarioConfig& config, Rng& rng) {
    config.validate();
    PlacementDraw draw;
    if (!config.fixed_users.empty()) return draw;
    std::vector<std::array<double, 2>> placed;
    for (int g = 0; g < config.group_count(); ++g) {
        for (int u = 0; u < config.users_per_group[g]; ++u) {
            bool ok = false;
            for (long attempt = 0; attempt < kMaxPlacementRetries && !ok; ++attempt) {
                const double r = config.placement_radius_m * std::sqrt(rng.uniform());
                const double phi = 2.0 * M_PI * rng.uniform();
                const std::array<double, 2> off{r * std::cos(phi), r * std::sin(phi)};
                const auto pos = scaled_position(config, g, off);
                ok = true;
                for (const auto& q : placed) {
                    if (planar_distance(pos, q) <= kCoincidentM) {
                        ok = false;
                        break;
                    }
                }
                if (ok) {
                    draw.offsets.push_back(off);
                    draw.groups.push_back(g);
                    placed.push_back(pos);
                }
            }
            if (!ok) {
                throw ConfigError("user placement failed after " +
                                  std::to_string(kMaxPlacementRetries) +
                                  " attempts; placement radius is degenerate");
            }
        }
    }
    draw.shadow_normals.resize(static_cast<Eigen::Index>(placed.size()));
    for (Eigen::Index k = 0; k < draw.shadow_normals.size(); ++k) {
        draw.shadow_normals[k] = rng.normal();
    }
    return draw;
}

std::vector<UserModel> realize_users(const ScenarioConfig& config, const PlacementDraw& draw) {
    config.validate();
    std::vector<UserModel> users;
    if (!config.fixed_users.empty()) {
        for (std::size_t k = 0; k < config.fixed_users.size(); ++k) {
            const auto& fu = config.fixed_users[k];
            UserModel u;
            const double rad = 1.0 + static_cast<double>(k);
            u.position = {rad * std::cos(fu.theta_bar_rad), rad * std::sin(fu.theta_bar_rad),
                          config.ue_height_m};
            u.group_id = fu.group;
            u.theta_bar = fu.theta_bar_rad;
            u.beta_db = fu.beta_db;
            u.N_samples = config.samples_per_group[fu.group];
            users.push_back(u);
        }
        return users;
    }
    std::vector<std::array<double, 3>> positions;
    for (std::size_t k = 0; k < draw.offsets.size(); ++k) {
        const int g = draw.groups[k];
        const auto p = scaled_position(config, g, draw.offsets[k]);
        UserModel u;
        u.position = {p[0], p[1], config.ue_height_m};
        u.group_id = g;
        double th = std::atan2(p[1], p[0]);
        if (th <= -M_PI) th += 2.0 * M_PI;
        u.theta_bar = th;
        u.N_samples = config.samples_per_group[g];
        users.push_back(u);
        positions.push_back(u.position);
    }
    const auto shadow = shadowing_from_normals(positions, config.shadow_std_db,
                                               config.shadow_decorr_m, draw.shadow_normals);
    const double dh = config.bs_height_m - config.ue_height_m;
    for (std::size_t k = 0; k < users.size(); ++k) {
        const auto& p = users[k].position;
        const double d3 = std::sqrt(p[0] * p[0] + p[1] * p[1] + dh * dh);
        users[k].beta_db =
            pathloss_db(d3, config.pathloss_offset_db, config.pathloss_slope) + shadow[k];
    }
    return users;
}

ClusteringScenario place_users(const ScenarioConfig& config, Rng& rng) {
    ClusteringScenario s;
    s.config = config;
    s.users = realize_users(config, draw_placement(config, rng));
    return s;
}

double pathloss_db(double distance_3d_m, double offset_db, double slope) {
    if (!(distance_3d_m > 0.0)) throw DomainError("pathloss_db: distance must be positive");
    return offset_db - slope * std::log10(distance_3d_m);
}

std::vector<double> shadowing_from_normals(const std::vector<std::array<double, 3>>& positions,
                                           double std_db, double decorr_m, const RVec& normals) {
    const auto K = static_cast<Eigen::Index>(positions.size());
    if (K == 0) throw DomainError("shadowing_draw: at least one user required");
    if (normals.size() != K) throw ContractError("shadowing_draw: normals size mismatch");
    RMat C(K, K);
    for (Eigen::Index j = 0; j < K; ++j) {
        for (Eigen::Index k = 0; k < K; ++k) {
            const auto& a = positions[j];
            const auto& b = positions[k];
            const double d = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                       (a[2] - b[2]) * (a[2] - b[2]));
            C(j, k) = std_db * std_db * std::exp2(-d / decorr_m);
        }
    }
    const double trace = C.trace();
    Eigen::SelfAdjointEigenSolver<RMat> es(C);
    RVec lam = es.eigenvalues();
    if (es.info() != Eigen::Success) throw NumericalError("shadowing_draw: eigensolver failed");
    if (lam.minCoeff() < -1e-10 * trace) {
        // Indefinite beyond rounding: shift and retry once.
        const double jitter = -lam.minCoeff() + 1e-10 * trace;
        es.compute(C + jitter * RMat::Identity(K, K));
        if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < 0.0) {
            throw NumericalError("shadowing_draw: covariance not PSD after jitter");
        }
        lam = es.eigenvalues();
    }
    const RVec root = lam.cwiseMax(0.0).cwiseSqrt();
    const RMat S = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    const RVec x = S * normals;
    return {x.data(), x.data() + K};
}

std::vector<double> shadowing_draw(const std::vector<std::array<double, 3>>& positions,
                                   double std_db, double decorr_m, Rng& rng) {
    RVec z(static_cast<Eigen::Index>(positions.size()));
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
    return shadowing_from_normals(positions, std_db, decorr_m, z);
}

CVec steering_vector(double theta, int M) {
    CVec a(M);
    const double s = std::sin(theta);
    for (int m = 0; m < M; ++m) a[m] = std::polar(1.0, -M_PI * m * s);
    return a;
}

double normalized_beta(double beta_db, double noise_power_dbm) {
    return std::pow(10.0, (beta_db - noise_power_dbm) / 10.0);
}

CovarianceModel user_covariance(const UserModel& user, const ScenarioConfig& config) {
    const int M = config.M;
    const auto rule = cached_rule(config.quadrature_order);
    const double sd = config.angular_std_rad;
    const double norm = 1.0 / (std::sqrt(2.0 * M_PI) * sd);
    CVec r = CVec::Zero(M);
    for (std::size_t q = 0; q < rule->nodes.size(); ++q) {
        const double th = M_PI * rule->nodes[q];
        double g = 0.0;
        for (int k = -1; k <= 1; ++k) {
            const double z = (th - user.theta_bar + 2.0 * M_PI * k) / sd;
            g += norm * std::exp(-0.5 * z * z);
        }
        const double w = M_PI * rule->weights[q] * g;
        const double s = std::sin(th);
        for (int k = 0; k < M; ++k) r[k] += w * std::polar(1.0, -M_PI * k * s);
    }
    const double scale = normalized_beta(user.beta_db, config.noise_power_dbm) / r[0].real();
    CMat R(M, M);
    for (int m = 0; m < M; ++m) {
        for (int n = 0; n < M; ++n) {
            R(m, n) = m >= n ? r[m - n] : std::conj(r[n - m]);
        }
    }
    R = hermitian_part(R * scale);
    for (int m = 0; m < M; ++m) R(m, m) = cplx(R(m, m).real(), 0.0);
    CovarianceModel out;
    auto [lam, E] = eig_hermitian(R);
    const double mean = lam.mean();
    if (!(lam.minCoeff() > 1e-12 * mean)) {
        throw NumericalError("user_covariance: matrix not positive definite (min eigenvalue " +
                             std::to_string(lam.minCoeff()) + ", mean " + std::to_string(mean) +
                             ")");
    }
    out.matrix = std::move(R);
    out.user = user;
    out.eigenvalues = std::move(lam);
    out.eigenvectors = std::move(E);
    return out;
}

ClusteringScenario build_scenario(const ScenarioConfig& config, const PlacementDraw& draw,
                                  unsigned workers) {
    ClusteringScenario s;
    s.config = config;
    s.users = realize_users(config, draw);
    s.covariances.resize(s.users.size());
    parallel_for(s.users.size(), workers,
                 [&](std::size_t k) { s.covariances[k] = user_covariance(s.users[k], config); });
    return s;
}

ClusteringScenario build_scenario(const ScenarioConfig& config, unsigned workers) {
    Rng rng = Rng::substream(config.seed, StreamTag::placement);
    return build_scenario(config, draw_placement(config, rng), workers);
}

}  // namespace rmtcluster
