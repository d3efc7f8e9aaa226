#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rmtcluster/linalg.hpp"
#include "rmtcluster/sampling.hpp"

namespace rmtcluster {

enum class EstimatorKind { true_value, plugin, consistent };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_from_string(const std::string& name);

// Ordered pairs of zero-based user indices.
using PairList = std::vector<std::pair<int, int>>;

// Throws ContractError for equal indices or repeated unordered pairs.
void validate_pairs(const PairList& pairs);

struct DistanceVector {
    std::vector<double> values;
    EstimatorKind kind = EstimatorKind::consistent;
    PairList pairs;
};

CMat log_hermitian(const CMat& R);

double true_distance(const CMat& R1, const CMat& R2);
double plugin_distance(const CMat& scm1, const CMat& scm2);

double dilog(double x);
double phi2(double x);

RVec beta_coeffs(const SpectralDecomposition& spec);
double alpha_term(const SpectralDecomposition& spec);

double consistent_distance(const SpectralDecomposition& s1, const SpectralDecomposition& s2);

// Per-user quantities reused across every pair the user appears in.
struct UserEstimate {
    CMat eigenvectors;
    RVec log_eigenvalues;  // log of SCM (or true) eigenvalues
    RVec beta;
    double alpha = 0.0;
};

UserEstimate make_user_estimate(const SpectralDecomposition& spec);

// Log-spectrum only; enough for the true and plug-in distances.
UserEstimate make_log_estimate(const RVec& eigenvalues, const CMat& eigenvectors);

double pair_distance(const UserEstimate& a, const UserEstimate& b, EstimatorKind kind);

// kind = consistent or plugin uses the SpectralDecomposition list.
DistanceVector distance_vector(const std::vector<SpectralDecomposition>& specs,
                               const PairList& pairs, EstimatorKind kind);

// Distances between ground-truth covariances.
DistanceVector true_distance_vector(const std::vector<CMat>& covariances, const PairList& pairs);

void write_distance_csv(std::ostream& out, const DistanceVector& dv);

}  // namespace rmtcluster
