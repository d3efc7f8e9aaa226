#include "rmtcluster/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rmtcluster/error.hpp"
#include "rmtcluster/parallel.hpp"
#include "rmtcluster/random.hpp"
#include "rmtcluster/sampling.hpp"

namespace rmtcluster {

namespace {

constexpr long long kChunk = 4096;

Probability make_probability(long long count, long long samples) {
    Probability p;
    p.count = count;
    p.samples = samples;
    if (samples > 0) {
        p.p = static_cast<double>(count) / static_cast<double>(samples);
        p.se = std::sqrt(p.p * (1.0 - p.p) / static_cast<double>(samples));
    }
    return p;
}

void draw_gaussian(const RVec& mean, const RMat& L, Rng& rng, RVec& z, RVec& x) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
    x.noalias() = mean + L * z;
}

// Group holding the largest intra distance, or -1 without intra pairs.
int argmax_group(const RVec& x, const PairPartition& part) {
    int best = -1;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < part.intra.size(); ++g) {
        for (int idx : part.intra[g]) {
            if (x[idx] > top) {
                top = x[idx];
                best = static_cast<int>(g);
            }
        }
    }
    return best;
}

void check_law(const AsymptoticLaw& law, const PairPartition& partition, long long samples) {
    if (samples < 10000) throw ContractError("theoretical probability needs at least 1e4 samples");
    if (law.mean.size() != static_cast<Eigen::Index>(partition.pairs.size())) {
        throw ContractError("law does not cover the partition's pairs");
    }
    for (std::size_t r = 0; r < partition.pairs.size(); ++r) {
        if (law.pairs[r] != partition.pairs[r]) {
            throw ContractError("law pair order differs from the partition's pair list");
        }
    }
}

}  // namespace

RMat SelectionMatrix::dense() const {
    RMat A = RMat::Zero(static_cast<Eigen::Index>(rows.size()), columns);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        A(static_cast<Eigen::Index>(r), rows[r].intra) = 1.0;
        A(static_cast<Eigen::Index>(r), rows[r].inter) = -1.0;
    }
    return A;
}

PairList all_pairs(int K) {
    PairList out;
    for (int i = 0; i < K; ++i) {
        for (int j = i + 1; j < K; ++j) out.emplace_back(i, j);
    }
    return out;
}

PairPartition pair_partition(const std::vector<int>& assignment) {
    PairPartition part;
    const int K = static_cast<int>(assignment.size());
    int G = 0;
    for (int g : assignment) {
        if (g < 0) throw ContractError("pair_partition: negative group id");
        G = std::max(G, g + 1);
    }
    part.intra.assign(G, {});
    part.pairs = all_pairs(K);
    for (std::size_t r = 0; r < part.pairs.size(); ++r) {
        const auto [i, j] = part.pairs[r];
        if (assignment[i] == assignment[j]) {
            part.intra[assignment[i]].push_back(static_cast<int>(r));
        } else {
            part.inter.push_back(static_cast<int>(r));
        }
    }
    return part;
}

SelectionMatrix selection_matrix(const PairPartition& partition) {
    SelectionMatrix S;
    S.columns = static_cast<int>(partition.pairs.size());
    for (const auto& group : partition.intra) {
        for (int a : group) {
            for (int b : partition.inter) S.rows.push_back({a, b});
        }
    }
    return S;
}

bool success_event(const RVec& distances, const PairPartition& partition) {
    if (distances.size() < static_cast<Eigen::Index>(partition.pairs.size())) {
        throw ContractError("success_event: distances do not cover every pair");
    }
    double max_intra = -std::numeric_limits<double>::infinity();
    for (const auto& group : partition.intra) {
        for (int idx : group) max_intra = std::max(max_intra, distances[idx]);
    }
    for (int idx : partition.inter) {
        if (!(distances[idx] > max_intra)) return false;
    }
    return true;
}

bool success_event(const std::vector<double>& distances, const PairPartition& partition) {
    return success_event(
        Eigen::Map<const RVec>(distances.data(), static_cast<Eigen::Index>(distances.size())),
        partition);
}

FactorResult factor_covariance(const RMat& covariance) {
    FactorResult out;
    const auto R = covariance.rows();
    if (R == 0) return out;
    Eigen::LLT<RMat> llt(covariance);
    if (llt.info() == Eigen::Success) {
        out.L = llt.matrixL();
        return out;
    }
    const double trace = covariance.trace();
    out.ridge = 1e-10 * trace / static_cast<double>(R);
    if (out.ridge > 0.0) {
        llt.compute(covariance + out.ridge * RMat::Identity(R, R));
        if (llt.info() == Eigen::Success) {
            out.L = llt.matrixL();
            return out;
        }
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(covariance);
    if (es.info() != Eigen::Success) throw NumericalError("factor_covariance: eigensolver failed");
    const double scale = std::max(std::abs(trace), es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-8 * scale) {
        throw NumericalError("factor_covariance: covariance is indefinite beyond jitter");
    }
    out.clamped = true;
    out.L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return out;
}

Probability success_prob_theoretical(const AsymptoticLaw& law, const PairPartition& partition,
                                     const TheoryOptions& opt) {
    check_law(law, partition, opt.samples);
    const FactorResult F = factor_covariance(law.covariance);
    const long long chunks = (opt.samples + kChunk - 1) / kChunk;
    std::vector<long long> counts(static_cast<std::size_t>(chunks), 0);
    parallel_for(counts.size(), opt.workers, [&](std::size_t c) {
        Rng rng = Rng::substream(opt.seed, StreamTag::gaussian, c);
        const long long begin = static_cast<long long>(c) * kChunk;
        const long long end = std::min(opt.samples, begin + kChunk);
        RVec z(law.mean.size());
        RVec x(law.mean.size());
        long long hits = 0;
        for (long long s = begin; s < end; ++s) {
            draw_gaussian(law.mean, F.L, rng, z, x);
            if (success_event(x, partition)) ++hits;
        }
        counts[c] = hits;
    });
    long long total = 0;
    for (long long c : counts) total += c;
    return make_probability(total, opt.samples);
}

Probability success_prob_conditional(const AsymptoticLaw& law, const PairPartition& partition,
                                     const TheoryOptions& opt) {
    check_law(law, partition, opt.samples);
    const FactorResult F = factor_covariance(law.covariance);
    const auto G = partition.intra.size();
    bool any_intra = false;
    for (const auto& g : partition.intra) any_intra = any_intra || !g.empty();
    if (!any_intra) return make_probability(opt.samples, opt.samples);

    double p = 0.0;
    double var = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
        if (partition.intra[g].empty()) continue;
        RVec z(law.mean.size());
        RVec x(law.mean.size());
        Rng marginal = Rng::substream(opt.seed, StreamTag::conditional, g, 0);
        long long holds = 0;
        for (long long s = 0; s < opt.samples; ++s) {
            draw_gaussian(law.mean, F.L, marginal, z, x);
            if (argmax_group(x, partition) == static_cast<int>(g)) ++holds;
        }
        const double pa = static_cast<double>(holds) / static_cast<double>(opt.samples);
        if (holds == 0) continue;
        Rng cond = Rng::substream(opt.seed, StreamTag::conditional, g, 1);
        long long given = 0;
        long long success = 0;
        for (long long s = 0; s < opt.samples; ++s) {
            draw_gaussian(law.mean, F.L, cond, z, x);
            if (argmax_group(x, partition) != static_cast<int>(g)) continue;
            ++given;
            if (success_event(x, partition)) ++success;
        }
        if (given == 0) continue;
        const double pc = static_cast<double>(success) / static_cast<double>(given);
        p += pc * pa;
        var += pa * pa * pc * (1.0 - pc) / static_cast<double>(given) +
               pc * pc * pa * (1.0 - pa) / static_cast<double>(opt.samples);
    }
    Probability out;
    out.p = p;
    out.se = std::sqrt(var);
    out.samples = opt.samples;
    out.count = std::llround(p * static_cast<double>(opt.samples));
    return out;
}

EmpiricalResult success_empirical(const ClusteringScenario& scenario, const EmpiricalOptions& opt) {
    if (opt.trials < 1) throw ContractError("success_empirical: trials must be positive");
    const int K = scenario.K();
    if (static_cast<int>(scenario.covariances.size()) != K) {
        throw ContractError("success_empirical: scenario has no covariances");
    }
    const PairPartition part = pair_partition(scenario.assignment());
    std::vector<CMat> roots(K);
    for (int k = 0; k < K; ++k) roots[k] = matrix_sqrt_hermitian(scenario.covariances[k].matrix);

    std::vector<unsigned char> ok_consistent(static_cast<std::size_t>(opt.trials), 0);
    std::vector<unsigned char> ok_plugin(static_cast<std::size_t>(opt.trials), 0);
    parallel_for(ok_consistent.size(), opt.workers, [&](std::size_t t) {
        try {
            std::vector<UserEstimate> est(K);
            for (int k = 0; k < K; ++k) {
                Rng rng = Rng::substream(opt.seed, StreamTag::channels, t, static_cast<std::uint64_t>(k));
                const SampleBlock Y = draw_channels(roots[k], scenario.users[k].N_samples, rng, k);
                est[k] = make_user_estimate(spectral_decomposition(scm(Y), Y.N));
            }
            RVec dc(static_cast<Eigen::Index>(part.pairs.size()));
            RVec dp(dc.size());
            for (std::size_t r = 0; r < part.pairs.size(); ++r) {
                const auto [i, j] = part.pairs[r];
                dc[static_cast<Eigen::Index>(r)] = pair_distance(est[i], est[j], EstimatorKind::consistent);
                dp[static_cast<Eigen::Index>(r)] = pair_distance(est[i], est[j], EstimatorKind::plugin);
            }
            ok_consistent[t] = success_event(dc, part) ? 1 : 0;
            ok_plugin[t] = success_event(dp, part) ? 1 : 0;
        } catch (const Error& e) {
            throw NumericalError("success_empirical: trial " + std::to_string(t) + " failed: " + e.what());
        }
    });
    long long nc = 0;
    long long np = 0;
    for (std::size_t t = 0; t < ok_consistent.size(); ++t) {
        nc += ok_consistent[t];
        np += ok_plugin[t];
    }
    return {make_probability(nc, opt.trials), make_probability(np, opt.trials)};
}

std::vector<SweepRow> sweep(const ScenarioConfig& config, SweepAxis axis,
                            const std::vector<double>& grid, const SweepOptions& opt) {
    Rng placement_rng = Rng::substream(config.seed, StreamTag::placement);
    const PlacementDraw draw = draw_placement(config, placement_rng);
    std::vector<SweepRow> rows;
    for (double v : grid) {
        ScenarioConfig cfg = config;
        if (axis == SweepAxis::tau) {
            cfg.tau = v;
        } else {
            const int n = static_cast<int>(std::lround(v));
            if (std::abs(v - n) > 1e-9) throw ConfigError("sample-count grid values must be integers");
            for (auto& s : cfg.samples_per_group) s = n;
        }
        cfg.validate();
        const ClusteringScenario sc = build_scenario(cfg, draw, opt.workers);
        const PairPartition part = pair_partition(sc.assignment());
        CltOptions clt = opt.clt;
        clt.workers = opt.workers;
        const AsymptoticLaw law = asymptotic_law(sc.covariances, sc.sample_counts(), part.pairs, clt);
        SweepRow row;
        row.axis_value = v;
        row.theory = success_prob_theoretical(law, part, {opt.mc_samples, config.seed, opt.workers});
        if (opt.empirical) {
            const auto emp = success_empirical(sc, {opt.trials, config.seed, opt.workers});
            row.consistent = emp.consistent;
            row.plugin = emp.plugin;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace rmtcluster
