#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rmtcluster/linalg.hpp"
#include "rmtcluster/random.hpp"

namespace rmtcluster {

// User with a prescribed mean angle and fading, bypassing placement.
struct FixedUser {
    double theta_bar_rad = 0.0;
    double beta_db = 0.0;
    int group = 0;
};

struct ScenarioConfig {
    int M = 8;
    std::vector<std::array<double, 2>> group_centroids;
    double tau = 1.0;
    double placement_radius_m = 15.0;
    std::vector<int> users_per_group;
    std::vector<int> samples_per_group;
    double bs_height_m = 12.0;
    double ue_height_m = 2.0;
    double pathloss_offset_db = -30.5;
    double pathloss_slope = 36.7;
    double shadow_std_db = 4.0;
    double shadow_decorr_m = 1.0;
    double angular_std_rad = 30.0 * M_PI / 180.0;
    double noise_power_dbm = -94.0;
    int quadrature_order = 2048;
    std::uint64_t seed = 0;
    // When non-empty, replaces placement: one user per entry, N taken from
    // samples_per_group of the entry's group.
    std::vector<FixedUser> fixed_users;

    int group_count() const { return static_cast<int>(samples_per_group.size()); }
    // Throws ConfigError on violated invariants.
    void validate() const;
};

struct UserModel {
    std::array<double, 3> position{0.0, 0.0, 0.0};
    int group_id = 0;
    double theta_bar = 0.0;
    double beta_db = 0.0;
    int N_samples = 0;
};

struct CovarianceModel {
    CMat matrix;
    UserModel user;
    // Ascending eigenvalues and eigenvectors of `matrix`, cached.
    RVec eigenvalues;
    CMat eigenvectors;
};

// Random quantities of a placement, independent of tau: disc offsets and
// the standard normals that drive correlated shadowing.
struct PlacementDraw {
    std::vector<std::array<double, 2>> offsets;
    std::vector<int> groups;
    RVec shadow_normals;
};

struct ClusteringScenario {
    ScenarioConfig config;
    std::vector<UserModel> users;
    std::vector<CovarianceModel> covariances;

    int K() const { return static_cast<int>(users.size()); }
    std::vector<int> assignment() const;
    std::vector<int> sample_counts() const;
};

// Draws disc offsets (uniform in area, rejection against coincident users)
// and shadowing normals.
PlacementDraw draw_placement(const ScenarioConfig& config, Rng& rng);

// Positions, angles and fading for a placement at the configured tau.
std::vector<UserModel> realize_users(const ScenarioConfig& config, const PlacementDraw& draw);

// draw_placement + realize_users; users only, without covariances.
ClusteringScenario place_users(const ScenarioConfig& config, Rng& rng);

double pathloss_db(double distance_3d_m, double offset_db = -30.5, double slope = 36.7);

// Correlated log-normal shadowing in dB; cov_jk = std^2 2^(-dist_jk/decorr).
std::vector<double> shadowing_draw(const std::vector<std::array<double, 3>>& positions,
                                   double std_db, double decorr_m, Rng& rng);

// Same law, driven by caller-supplied standard normals.
std::vector<double> shadowing_from_normals(const std::vector<std::array<double, 3>>& positions,
                                           double std_db, double decorr_m, const RVec& normals);

// Half-wavelength ULA response: exp(-i pi m sin theta).
CVec steering_vector(double theta, int M);

// Linear fading normalized by the noise power.
double normalized_beta(double beta_db, double noise_power_dbm);

CovarianceModel user_covariance(const UserModel& user, const ScenarioConfig& config);

// Full scenario: placement (or fixed users) plus per-user covariances.
ClusteringScenario build_scenario(const ScenarioConfig& config, const PlacementDraw& draw,
                                  unsigned workers = 1);
ClusteringScenario build_scenario(const ScenarioConfig& config, unsigned workers = 1);

}  // namespace rmtcluster
