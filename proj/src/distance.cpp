#include "rmtcluster/distance.hpp"

#include <cmath>
#include <ostream>
#include <set>

#include "rmtcluster/error.hpp"
#include "rmtcluster/io.hpp"

namespace rmtcluster {

std::string to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::true_value: return "true";
        case EstimatorKind::plugin: return "plugin";
        case EstimatorKind::consistent: return "consistent";
    }
    return "unknown";
}

EstimatorKind estimator_from_string(const std::string& name) {
    if (name == "true") return EstimatorKind::true_value;
    if (name == "plugin") return EstimatorKind::plugin;
    if (name == "consistent") return EstimatorKind::consistent;
    throw ConfigError("unknown estimator kind '" + name + "' (expected true, plugin or consistent)");
}

void validate_pairs(const PairList& pairs) {
    std::set<std::pair<int, int>> seen;
    for (const auto& [i, j] : pairs) {
        if (i == j) throw ContractError("pair with equal indices");
        if (!seen.insert({std::min(i, j), std::max(i, j)}).second) {
            throw ContractError("duplicate unordered pair");
        }
    }
}

CMat log_hermitian(const CMat& R) {
    auto [lam, E] = eig_hermitian(R);
    if (!(lam.minCoeff() > 0.0)) throw DomainError("log_hermitian: matrix not positive definite");
    return hermitian_part(spectral_compose(E, lam.array().log().matrix()));
}

double true_distance(const CMat& R1, const CMat& R2) {
    if (R1.rows() != R2.rows() || R1.cols() != R2.cols()) {
        throw DomainError("true_distance: dimension mismatch");
    }
    const CMat D = log_hermitian(R1) - log_hermitian(R2);
    return D.squaredNorm() / static_cast<double>(R1.rows());
}

double plugin_distance(const CMat& scm1, const CMat& scm2) {
    try {
        return true_distance(scm1, scm2);
    } catch (const DomainError& e) {
        throw DomainError(std::string("plugin_distance: singular SCM (need N > M): ") + e.what());
    }
}

double dilog(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("dilog: argument must lie in [0, 1]");
    if (x == 1.0) return M_PI * M_PI / 6.0;
    if (x > 0.5) {
        return M_PI * M_PI / 6.0 - std::log(x) * std::log1p(-x) - dilog(1.0 - x);
    }
    double sum = 0.0;
    double p = x;
    for (int k = 1; k < 200; ++k) {
        const double term = p / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-18 * sum) break;
        p *= x;
    }
    return sum;
}

double phi2(double x) {
    if (!(x > 0.0)) throw DomainError("phi2: argument must be positive");
    if (x < 1.0) return dilog(x);
    const double l = std::log(x);
    return M_PI * M_PI / 3.0 - 0.5 * l * l - dilog(1.0 / x);
}

RVec beta_coeffs(const SpectralDecomposition& spec) {
    const RVec& lam = spec.eigenvalues;
    const RVec& mu = spec.mu_roots;
    const auto M = lam.size();
    RVec beta(M);
    for (Eigen::Index k = 0; k < M; ++k) {
        const double lk = lam[k];
        double s1 = 0.0;
        double s2 = 0.0;
        double t_lam = 0.0;
        double t_mu = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
            if (m != k) {
                const double diff = lam[m] - lk;
                if (diff == 0.0) throw NumericalError("beta_coeffs: degenerate eigenvalues");
                s1 += lk / diff;
                t_lam += lam[m] / diff * std::log(lam[m]);
            }
            s2 += mu[k] / (lam[m] - mu[k]);
            t_mu += mu[m] / (mu[m] - lk) * std::log(mu[m]);
        }
        beta[k] = (1.0 + s1 - s2) * std::log(lk) + t_lam - t_mu + 1.0;
    }
    return beta;
}

double alpha_term(const SpectralDecomposition& spec) {
    const RVec& lam = spec.eigenvalues;
    const RVec& mu = spec.mu_roots;
    const auto M = lam.size();
    const double Md = static_cast<double>(M);
    const double ratio = static_cast<double>(spec.N) / Md - 1.0;

    double sq_mu = 0.0;
    double sq_lam = 0.0;
    for (Eigen::Index r = 0; r < M; ++r) {
        const double a = 1.0 + std::log(mu[r]);
        const double b = 1.0 + std::log(lam[r]);
        sq_mu += a * a;
        sq_lam += b * b;
    }
    const double lc = std::log1p(-Md / spec.N);

    double phi_sum = 0.0;
    double cross = 0.0;
    for (Eigen::Index k = 0; k < M; ++k) {
        const double lk = lam[k];
        for (Eigen::Index r = 0; r < M; ++r) {
            phi_sum += phi2(mu[r] / lk) - phi2(lam[r] / lk);
            if (r != k) {
                cross += std::log(lam[r] / lk) * std::log(lk / std::abs(lk - lam[r]));
            }
            cross -= std::log(mu[r] / lk) * std::log(lk / std::abs(lk - mu[r]));
        }
    }
    return ratio * (sq_mu - sq_lam) + sq_lam / Md - ratio * lc * lc + 1.0 +
           2.0 / Md * phi_sum + 2.0 / Md * cross;
}

double consistent_distance(const SpectralDecomposition& s1, const SpectralDecomposition& s2) {
    if (s1.M() != s2.M()) throw DomainError("consistent_distance: dimension mismatch");
    return pair_distance(make_user_estimate(s1), make_user_estimate(s2), EstimatorKind::consistent);
}

UserEstimate make_log_estimate(const RVec& eigenvalues, const CMat& eigenvectors) {
    if (!(eigenvalues.minCoeff() > 0.0)) throw DomainError("log spectrum of a singular matrix");
    UserEstimate u;
    u.eigenvectors = eigenvectors;
    u.log_eigenvalues = eigenvalues.array().log().matrix();
    return u;
}

UserEstimate make_user_estimate(const SpectralDecomposition& spec) {
    UserEstimate u = make_log_estimate(spec.eigenvalues, spec.eigenvectors);
    u.beta = beta_coeffs(spec);
    u.alpha = alpha_term(spec);
    return u;
}

double pair_distance(const UserEstimate& a, const UserEstimate& b, EstimatorKind kind) {
    if (a.eigenvectors.rows() != b.eigenvectors.rows()) {
        throw DomainError("pair_distance: dimension mismatch");
    }
    const double M = static_cast<double>(a.eigenvectors.rows());
    const RMat W = overlap_weights(a.eigenvectors, b.eigenvectors);
    const RMat Wt = overlap_weights(b.eigenvectors, a.eigenvectors);
    // Both orientations summed so that swapping a and b is bit-exact.
    auto bilinear = [&](const RVec& x, const RVec& y) {
        return 0.5 * (x.dot(W * y) + y.dot(Wt * x));
    };
    if (kind == EstimatorKind::consistent) {
        if (a.beta.size() == 0 || b.beta.size() == 0) {
            throw ContractError("pair_distance: consistent estimator needs beta coefficients");
        }
        return a.alpha + b.alpha - 2.0 / M * bilinear(a.beta, b.beta);
    }
    const double v = a.log_eigenvalues.squaredNorm() + b.log_eigenvalues.squaredNorm() -
                     2.0 * bilinear(a.log_eigenvalues, b.log_eigenvalues);
    return std::max(0.0, v / M);
}

DistanceVector distance_vector(const std::vector<SpectralDecomposition>& specs,
                               const PairList& pairs, EstimatorKind kind) {
    if (kind == EstimatorKind::true_value) {
        throw ContractError("distance_vector: use true_distance_vector for ground truth");
    }
    const int K = static_cast<int>(specs.size());
    std::vector<UserEstimate> cache(specs.size());
    std::vector<bool> ready(specs.size(), false);
    DistanceVector dv;
    dv.kind = kind;
    dv.pairs = pairs;
    dv.values.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        if (i < 0 || j < 0 || i >= K || j >= K) {
            throw ContractError("distance_vector: pair index out of range");
        }
        for (int u : {i, j}) {
            if (!ready[u]) {
                cache[u] = kind == EstimatorKind::consistent
                               ? make_user_estimate(specs[u])
                               : make_log_estimate(specs[u].eigenvalues, specs[u].eigenvectors);
                ready[u] = true;
            }
        }
        dv.values.push_back(pair_distance(cache[i], cache[j], kind));
    }
    return dv;
}

DistanceVector true_distance_vector(const std::vector<CMat>& covariances, const PairList& pairs) {
    const int K = static_cast<int>(covariances.size());
    std::vector<CMat> logs(covariances.size());
    std::vector<bool> ready(covariances.size(), false);
    DistanceVector dv;
    dv.kind = EstimatorKind::true_value;
    dv.pairs = pairs;
    for (const auto& [i, j] : pairs) {
        if (i < 0 || j < 0 || i >= K || j >= K) {
            throw ContractError("true_distance_vector: pair index out of range");
        }
        for (int u : {i, j}) {
            if (!ready[u]) {
                logs[u] = log_hermitian(covariances[u]);
                ready[u] = true;
            }
        }
        dv.values.push_back((logs[i] - logs[j]).squaredNorm() /
                            static_cast<double>(covariances[i].rows()));
    }
    return dv;
}

void write_distance_csv(std::ostream& out, const DistanceVector& dv) {
    out << "i,j,estimator_kind,value\n";
    for (std::size_t r = 0; r < dv.values.size(); ++r) {
        out << dv.pairs[r].first << ',' << dv.pairs[r].second << ',' << to_string(dv.kind) << ','
            << format_double(dv.values[r]) << '\n';
    }
}

}  // namespace rmtcluster
