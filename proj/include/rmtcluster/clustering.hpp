#pragma once

#include <cstdint>
#include <vector>

#include "rmtcluster/clt.hpp"
#include "rmtcluster/distance.hpp"
#include "rmtcluster/scenario.hpp"

namespace rmtcluster {

// Indices refer to positions in the full pair list returned by all_pairs.
struct PairPartition {
    std::vector<std::vector<int>> intra;  // per group
    std::vector<int> inter;
    PairList pairs;
};

struct SelectionMatrix {
    struct Row {
        int intra;
        int inter;
    };
    std::vector<Row> rows;
    int columns = 0;

    RMat dense() const;
};

// All unordered pairs (i, j), i < j, in lexicographic order.
PairList all_pairs(int K);

PairPartition pair_partition(const std::vector<int>& assignment);

// One row per (intra, inter) combination: +1 on intra, -1 on inter.
SelectionMatrix selection_matrix(const PairPartition& partition);

// Every intra distance strictly below the smallest inter distance.
bool success_event(const std::vector<double>& distances, const PairPartition& partition);
bool success_event(const RVec& distances, const PairPartition& partition);

struct Probability {
    double p = 0.0;
    double se = 0.0;
    long long count = 0;
    long long samples = 0;
};

struct TheoryOptions {
    long long samples = 100000;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct FactorResult {
    RMat L;               // covariance ~= L L^T
    double ridge = 0.0;   // diagonal ridge added, 0 if none
    bool clamped = false; // eigenvalue clamping was needed
};

// Cholesky with ridge fallback (1e-10 trace / R), then clamped eigen root.
FactorResult factor_covariance(const RMat& covariance);

Probability success_prob_theoretical(const AsymptoticLaw& law, const PairPartition& partition,
                                     const TheoryOptions& opt);

// Sum over groups of P[success | group g holds the max intra] P[group g holds
// the max intra], each factor from its own substream.
Probability success_prob_conditional(const AsymptoticLaw& law, const PairPartition& partition,
                                     const TheoryOptions& opt);

struct EmpiricalOptions {
    long long trials = 1000;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct EmpiricalResult {
    Probability consistent;
    Probability plugin;
};

// Both estimators from the same channel draws.
EmpiricalResult success_empirical(const ClusteringScenario& scenario, const EmpiricalOptions& opt);

enum class SweepAxis { tau, samples };

struct SweepRow {
    double axis_value = 0.0;
    Probability theory;
    Probability consistent;
    Probability plugin;
};

struct SweepOptions {
    long long trials = 1000;
    long long mc_samples = 100000;
    CltOptions clt;
    bool empirical = true;
    unsigned workers = 1;
};

// Placement drawn once from config.seed; the axis value replaces tau or every
// group's sample count.
std::vector<SweepRow> sweep(const ScenarioConfig& config, SweepAxis axis,
                            const std::vector<double>& grid, const SweepOptions& opt);

}  // namespace rmtcluster
