#include "rmtcluster/clt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>

#include "rmtcluster/error.hpp"
#include "rmtcluster/parallel.hpp"

namespace rmtcluster {

namespace {

const cplx kTwoPiI(0.0, 2.0 * M_PI);

double spread(const RVec& gamma, int N, cplx omega) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < gamma.size(); ++k) s += gamma[k] * gamma[k] / std::norm(gamma[k] - omega);
    return s / N;
}

void check_off_spectrum(const RVec& gamma, cplx omega) {
    const double tol = 1e-12 * gamma.maxCoeff();
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
        if (std::abs(gamma[k] - omega) <= tol) {
            throw DomainError("resolvent: omega lies on the spectrum");
        }
    }
}

CVec inv_shift(const RVec& gamma, cplx omega) {
    CVec q(gamma.size());
    for (Eigen::Index k = 0; k < gamma.size(); ++k) q[k] = 1.0 / (gamma[k] - omega);
    return q;
}

cplx one_minus_gamma_checked(cplx gam) {
    const cplx v = 1.0 - gam;
    if (std::abs(v) <= 1e-10) {
        throw NumericalError("1 - Gamma vanishes: contour too close to the sample spectrum support");
    }
    return v;
}

// sigma2_bar in the eigenbasis of the user, with A and B already rotated.
cplx sigma2_eigenbasis(const RVec& gamma, int N, const CVec& q, const CVec& qt, const CMat& A,
                       const CMat& B, TracePairing pairing) {
    const auto M = gamma.size();
    CVec d(M);
    cplx gam = 0.0;
    for (Eigen::Index k = 0; k < M; ++k) {
        d[k] = gamma[k] * q[k] * qt[k];
        gam += gamma[k] * d[k];
    }
    gam /= static_cast<double>(N);
    const cplx omg = one_minus_gamma_checked(gam);
    cplx t1 = 0.0;
    for (Eigen::Index k = 0; k < M; ++k) {
        cplx row = 0.0;
        for (Eigen::Index l = 0; l < M; ++l) row += A(k, l) * d[l] * B(l, k);
        t1 += d[k] * row;
    }
    const CVec& qb = pairing == TracePairing::own_variable ? qt : q;
    cplx ta = 0.0;
    cplx tb = 0.0;
    for (Eigen::Index k = 0; k < M; ++k) {
        ta += gamma[k] * q[k] * d[k] * A(k, k);
        tb += gamma[k] * qb[k] * d[k] * B(k, k);
    }
    const double Nd = static_cast<double>(N);
    return t1 / (Nd * omg) + ta * tb / (Nd * Nd * omg * omg);
}

// Per-user quadrature tables on that user's contour.
struct UserTable {
    const CovarianceModel* model = nullptr;
    int N = 0;
    Contour contour;
    std::vector<CVec> q;   // q[t][k] = 1 / (gamma_k - omega_t)
    RVec g[3];             // quadrature images of log^p on the spectrum
    CMat X[3][3];          // weighted outer products for the rho term
};

UserTable build_table(const CovarianceModel& model, int N, int nodes, const ContourOptions& copt) {
    UserTable T;
    T.model = &model;
    T.N = N;
    const RVec& gamma = model.eigenvalues;
    const auto M = gamma.size();
    T.contour = make_contour(gamma, N, nodes, copt);
    const int n = T.contour.size();
    T.q.resize(n);
    for (int t = 0; t < n; ++t) T.q[t] = inv_shift(gamma, T.contour.nodes[t]);

    for (int p = 0; p < 3; ++p) {
        CVec acc = CVec::Zero(M);
        for (int t = 0; t < n; ++t) {
            acc += T.contour.weights[t] * std::pow(T.contour.log_nodes[t], p) * T.q[t];
        }
        acc *= -1.0 / kTwoPiI;
        T.g[p] = acc.real();
    }

    for (auto& row : T.X) {
        for (auto& x : row) x = CMat::Zero(M, M);
    }
    const double Nd = static_cast<double>(N);
    CVec d(M);
    for (int s = 0; s < n; ++s) {
        const cplx Ls = T.contour.log_nodes[s];
        for (int t = 0; t < n; ++t) {
            const cplx Lt = T.contour.log_nodes[t];
            cplx gam = 0.0;
            for (Eigen::Index k = 0; k < M; ++k) {
                d[k] = gamma[k] * T.q[s][k] * T.q[t][k];
                gam += gamma[k] * d[k];
            }
            gam /= Nd;
            const cplx base =
                T.contour.weights[s] * T.contour.weights[t] / (Nd * one_minus_gamma_checked(gam));
            const CMat dd = d * d.transpose();
            const cplx ls[3] = {1.0, Ls, Ls * Ls};
            const cplx lt[3] = {1.0, Lt, Lt * Lt};
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) T.X[a][b] += (base * ls[a] * lt[b]) * dd;
            }
        }
    }
    return T;
}

// Partner b's log^p images rotated into user u's eigenbasis.
struct PartnerImage {
    CMat P[3];
};

PartnerImage partner_image(const UserTable& u, const UserTable& partner) {
    const CMat V = u.model->eigenvectors.adjoint() * partner.model->eigenvectors;
    PartnerImage img;
    for (int p = 0; p < 3; ++p) img.P[p] = V * partner.g[p].asDiagonal() * V.adjoint();
    return img;
}

// Double contour sum over u's nodes of sigma2_bar_u with partner matrices
// already integrated against their own contours.
cplx shared_user_term(const UserTable& u, const PartnerImage& a, const PartnerImage& b,
                      TracePairing pairing) {
    const int n = u.contour.size();
    std::vector<CMat> As(n);
    std::vector<CMat> Bs(n);
    for (int t = 0; t < n; ++t) {
        const cplx L = u.contour.log_nodes[t];
        As[t] = (L * L) * a.P[0] - (2.0 * L) * a.P[1] + a.P[2];
        Bs[t] = (L * L) * b.P[0] - (2.0 * L) * b.P[1] + b.P[2];
    }
    cplx total = 0.0;
    for (int s = 0; s < n; ++s) {
        cplx row = 0.0;
        for (int t = 0; t < n; ++t) {
            row += u.contour.weights[t] * sigma2_eigenbasis(u.model->eigenvalues, u.N, u.q[s],
                                                            u.q[t], As[s], Bs[t], pairing);
        }
        total += u.contour.weights[s] * row;
    }
    return total / (kTwoPiI * kTwoPiI);
}

cplx rho_term(const UserTable& ui, const UserTable& uj) {
    const RMat W = overlap_weights(ui.model->eigenvectors, uj.model->eigenvectors);
    static const double binom[3] = {1.0, 2.0, 1.0};
    cplx total = 0.0;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            const CMat Y = W * uj.X[2 - a][2 - b] * W.transpose();
            const double sign = (a + b) % 2 == 0 ? 1.0 : -1.0;
            total += binom[a] * binom[b] * sign * ui.X[a][b].cwiseProduct(Y).sum();
        }
    }
    const cplx p2 = kTwoPiI * kTwoPiI;
    return total / (p2 * p2);
}

RMat covariance_with_nodes(const std::vector<CovarianceModel>& models, const std::vector<int>& N,
                           const PairList& pairs, const CltOptions& opt, int nodes,
                           CltDiagnostics& diag) {
    const int K = static_cast<int>(models.size());
    std::set<int> used;
    for (const auto& [i, j] : pairs) {
        used.insert(i);
        used.insert(j);
    }
    std::vector<int> users(used.begin(), used.end());
    std::vector<UserTable> tables(K);
    parallel_for(users.size(), opt.workers, [&](std::size_t k) {
        const int u = users[k];
        tables[u] = build_table(models[u], N[u], nodes, opt.contour);
    });
    diag.nodes = nodes;
    diag.contours.assign(K, Contour{});
    for (int u : users) diag.contours[u] = tables[u].contour;

    // Shared-user terms keyed by (user, partner in r, partner in s).
    using Key = std::tuple<int, int, int>;
    std::map<Key, cplx> shared;
    std::map<std::pair<int, int>, cplx> rhos;
    const auto R = static_cast<int>(pairs.size());
    for (int r = 0; r < R; ++r) {
        for (int s = 0; s < R; ++s) {
            const auto [i, j] = pairs[r];
            const auto [m, n] = pairs[s];
            if (i == m) shared[{i, j, n}] = 0.0;
            if (j == n) shared[{j, i, m}] = 0.0;
            if (i == n) shared[{i, j, m}] = 0.0;
            if (j == m) shared[{j, i, n}] = 0.0;
            if ((i == m && j == n) || (i == n && j == m)) rhos[{std::min(i, j), std::max(i, j)}] = 0.0;
        }
    }
    std::map<std::pair<int, int>, PartnerImage> images;
    for (const auto& [key, v] : shared) {
        const auto [u, a, b] = key;
        for (int p : {a, b}) {
            if (!images.count({u, p})) images[{u, p}] = partner_image(tables[u], tables[p]);
        }
    }
    std::vector<Key> keys;
    for (const auto& kv : shared) keys.push_back(kv.first);
    std::vector<cplx> values(keys.size());
    parallel_for(keys.size(), opt.workers, [&](std::size_t k) {
        const auto [u, a, b] = keys[k];
        values[k] = shared_user_term(tables[u], images.at({u, a}), images.at({u, b}), opt.pairing);
    });
    for (std::size_t k = 0; k < keys.size(); ++k) shared[keys[k]] = values[k];
    for (auto& [key, v] : rhos) v = rho_term(tables[key.first], tables[key.second]);

    RMat out = RMat::Zero(R, R);
    double max_residue = 0.0;
    for (int r = 0; r < R; ++r) {
        for (int s = 0; s < R; ++s) {
            const auto [i, j] = pairs[r];
            const auto [m, n] = pairs[s];
            cplx v = 0.0;
            bool any = false;
            if ((i == m && j == n) || (i == n && j == m)) {
                v += rhos.at({std::min(i, j), std::max(i, j)});
                any = true;
            }
            if (i == m) { v += shared.at({i, j, n}); any = true; }
            if (j == n) { v += shared.at({j, i, m}); any = true; }
            if (i == n) { v += shared.at({i, j, m}); any = true; }
            if (j == m) { v += shared.at({j, i, n}); any = true; }
            if (!any) continue;
            if (v.real() != 0.0) max_residue = std::max(max_residue, std::abs(v.imag() / v.real()));
            out(r, s) = v.real();
        }
    }
    diag.max_imag_residue = max_residue;
    return 0.5 * (out + out.transpose());
}

}  // namespace

namespace {

// Largest spread on the confocal ellipse of level eta (foci c +- f in the
// log domain), sampled at `probes` points.
double ellipse_max_spread(const RVec& gamma, int N, double c, double f, double eta, int probes) {
    const double a = f * std::cosh(eta);
    const double b = f * std::sinh(eta);
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        const double th = 2.0 * M_PI * (p + 0.5) / probes;
        worst = std::max(worst, spread(gamma, N, std::exp(cplx(c + a * std::cos(th), b * std::sin(th)))));
    }
    return worst;
}

struct LevelGap {
    double inner = 0.0;  // smallest level whose ellipse clears the spread-1 set
    double outer = 0.0;  // first level reaching its periodic image
};

// Scans levels outward from the one whose real semi-axis reaches `half`, so
// every candidate encloses the spectrum even when the spread-1 set is split.
// Returns false if no clear level exists.
bool level_gap(const RVec& gamma, int N, double c, double f, double half, double level, int probes,
               LevelGap& gap) {
    const double cap = std::asinh(2.0 * M_PI / f) + 0.5;
    const double step = std::min(0.02, cap / 200.0);
    double eta = std::max(step, std::acosh(std::max(1.0, half / f)));
    while (eta < cap && ellipse_max_spread(gamma, N, c, f, eta, probes) >= level) eta += step;
    if (eta >= cap) return false;
    gap.inner = eta;
    while (eta < cap && ellipse_max_spread(gamma, N, c, f, eta, probes) < level) eta += step;
    gap.outer = eta;
    return gap.outer > gap.inner;
}

// Real point where the spread crosses `level`, below (left) or above the spectrum.
double real_crossing(const RVec& gamma, int N, double level, bool left) {
    const double gmin = gamma.minCoeff();
    const double gmax = gamma.maxCoeff();
    double lo = left ? 0.0 : gmax;
    double hi = left ? gmin : 2.0 * gmax;
    if (!left) {
        while (spread(gamma, N, hi) > level) hi *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const bool inside = spread(gamma, N, mid) > level;
        if (left == inside) hi = mid; else lo = mid;
    }
    return left ? lo : hi;
}

}  // namespace

Contour make_contour(const RVec& gamma, int N, int nodes, const ContourOptions& opt) {
    const auto M = gamma.size();
    if (M == 0) throw DomainError("make_contour: empty spectrum");
    if (N <= M) throw DomainError("make_contour: N must exceed M");
    if (nodes < 4) throw DomainError("make_contour: at least 4 nodes required");
    const double gmin = gamma.minCoeff();
    const double gmax = gamma.maxCoeff();
    if (!(gmin > 0.0)) throw DomainError("make_contour: spectrum must be positive");

    if (!(opt.singular_level >= 1.0)) throw DomainError("make_contour: singular_level must be >= 1");
    const double x_left = real_crossing(gamma, N, opt.singular_level, true);
    const double x_right = real_crossing(gamma, N, opt.singular_level, false);
    if (!(x_left > 0.0)) throw NumericalError("make_contour: left crossing not found");
    const double l1 = std::log(x_left);
    const double l2 = std::log(x_right);
    const double c = 0.5 * (l1 + l2);
    const double half = 0.5 * (l2 - l1);

    double best_f = 0.0;
    LevelGap best{};
    for (int k = 0; k < opt.focus_candidates; ++k) {
        const double f = half * (opt.focus_min + (1.0 - opt.focus_min) * k /
                                                     std::max(1, opt.focus_candidates - 1));
        LevelGap g;
        if (!level_gap(gamma, N, c, f, half, opt.singular_level, opt.probes, g)) continue;
        if (best_f == 0.0 || g.outer - g.inner > best.outer - best.inner) {
            best = g;
            best_f = f;
        }
    }
    if (best_f == 0.0) throw NumericalError("make_contour: no admissible contour level");

    Contour C;
    C.x_left = x_left;
    C.x_right = x_right;
    C.center_log = c;
    C.focus = best_f;
    C.inner_level = best.inner;
    C.outer_level = best.outer;
    const double eta = best.inner + opt.gap_fraction * (best.outer - best.inner);
    C.semi_real = best_f * std::cosh(eta);
    C.semi_imag = best_f * std::sinh(eta);
    C.nodes.resize(nodes);
    C.weights.resize(nodes);
    C.log_nodes.resize(nodes);
    const double h = 2.0 * M_PI / nodes;
    for (int t = 0; t < nodes; ++t) {
        const double th = h * t;
        const cplx s(c + C.semi_real * std::cos(th), C.semi_imag * std::sin(th));
        const cplx ds(-C.semi_real * std::sin(th), C.semi_imag * std::cos(th));
        const cplx w = std::exp(s);
        C.log_nodes[t] = s;
        C.nodes[t] = w;
        C.weights[t] = w * ds * h;
        C.max_spread = std::max(C.max_spread, spread(gamma, N, w));
    }
    if (!(std::exp(c - C.semi_real) < gmin && std::exp(c + C.semi_real) > gmax)) {
        throw NumericalError("make_contour: contour does not enclose the spectrum");
    }
    if (!(C.max_spread < 1.0)) {
        throw NumericalError("make_contour: spread reaches 1 on the contour (max " +
                             std::to_string(C.max_spread) + ")");
    }
    return C;
}

CMat resolvent(const RVec& gamma, const CMat& E, cplx omega) {
    check_off_spectrum(gamma, omega);
    return E * inv_shift(gamma, omega).asDiagonal() * E.adjoint();
}

cplx gamma_scalar(const RVec& gamma, int N, cplx omega, cplx omega_t) {
    check_off_spectrum(gamma, omega);
    check_off_spectrum(gamma, omega_t);
    cplx s = 0.0;
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
        s += gamma[k] * gamma[k] / ((gamma[k] - omega) * (gamma[k] - omega_t));
    }
    return s / static_cast<double>(N);
}

CMat gamma_matrix(const RVec& gamma, const CMat& E, cplx omega, cplx omega_t) {
    check_off_spectrum(gamma, omega);
    check_off_spectrum(gamma, omega_t);
    CVec d(gamma.size());
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
        d[k] = gamma[k] / ((gamma[k] - omega) * (gamma[k] - omega_t));
    }
    return E * d.asDiagonal() * E.adjoint();
}

cplx sigma2_bar(const RVec& gamma, const CMat& E, int N, cplx omega, cplx omega_t, const CMat& A,
                const CMat& B, TracePairing pairing) {
    check_off_spectrum(gamma, omega);
    check_off_spectrum(gamma, omega_t);
    const CMat Ae = E.adjoint() * A * E;
    const CMat Be = E.adjoint() * B * E;
    return sigma2_eigenbasis(gamma, N, inv_shift(gamma, omega), inv_shift(gamma, omega_t), Ae, Be,
                             pairing);
}

cplx rho(const CovarianceModel& Ri, int Ni, cplx omega_i, cplx omega_ti, const CovarianceModel& Rj,
         int Nj, cplx omega_j, cplx omega_tj) {
    const CVec di = inv_shift(Ri.eigenvalues, omega_i).cwiseProduct(inv_shift(Ri.eigenvalues, omega_ti))
                        .cwiseProduct(Ri.eigenvalues.cast<cplx>());
    const CVec dj = inv_shift(Rj.eigenvalues, omega_j).cwiseProduct(inv_shift(Rj.eigenvalues, omega_tj))
                        .cwiseProduct(Rj.eigenvalues.cast<cplx>());
    const RMat W = overlap_weights(Ri.eigenvectors, Rj.eigenvectors);
    const cplx tr = di.transpose() * W.cast<cplx>() * dj;
    const cplx gi = gamma_scalar(Ri.eigenvalues, Ni, omega_i, omega_ti);
    const cplx gj = gamma_scalar(Rj.eigenvalues, Nj, omega_j, omega_tj);
    return tr * tr / (static_cast<double>(Ni) * Nj * one_minus_gamma_checked(gi) *
                      one_minus_gamma_checked(gj));
}

cplx sigma2_combined(const std::vector<CovarianceModel>& models, const std::vector<int>& N,
                     std::pair<int, int> pair_r, std::pair<int, int> pair_s, cplx w_ir, cplx w_jr,
                     cplx wt_is, cplx wt_js, TracePairing pairing) {
    const auto [i, j] = pair_r;
    const auto [m, n] = pair_s;
    auto Q = [&](int u, cplx w) {
        return resolvent(models[u].eigenvalues, models[u].eigenvectors, w);
    };
    auto sig = [&](int u, cplx w, cplx wt, const CMat& A, const CMat& B) {
        return sigma2_bar(models[u].eigenvalues, models[u].eigenvectors, N[u], w, wt, A, B, pairing);
    };
    cplx v = 0.0;
    if (i == m && j == n) v += rho(models[i], N[i], w_ir, wt_is, models[j], N[j], w_jr, wt_js);
    if (i == n && j == m) v += rho(models[i], N[i], w_ir, wt_js, models[j], N[j], w_jr, wt_is);
    if (i == m) v += sig(i, w_ir, wt_is, Q(j, w_jr), Q(n, wt_js));
    if (j == n) v += sig(j, w_jr, wt_js, Q(i, w_ir), Q(m, wt_is));
    if (i == n) v += sig(i, w_ir, wt_js, Q(j, w_jr), Q(m, wt_is));
    if (j == m) v += sig(j, w_jr, wt_is, Q(i, w_ir), Q(n, wt_js));
    return v;
}

CovarianceResult asymptotic_covariance(const std::vector<CovarianceModel>& models,
                                       const std::vector<int>& N, const PairList& pairs,
                                       const CltOptions& opt) {
    validate_pairs(pairs);
    if (N.size() != models.size()) throw ContractError("asymptotic_covariance: N list size mismatch");
    for (const auto& [i, j] : pairs) {
        if (i < 0 || j < 0 || i >= static_cast<int>(models.size()) ||
            j >= static_cast<int>(models.size())) {
            throw ContractError("asymptotic_covariance: pair index out of range");
        }
    }
    CovarianceResult res;
    res.sigma_bar = covariance_with_nodes(models, N, pairs, opt, opt.contour_nodes, res.diagnostics);
    if (opt.verify_doubling) {
        CltDiagnostics d2;
        const RMat fine = covariance_with_nodes(models, N, pairs, opt, 2 * opt.contour_nodes, d2);
        double worst = 0.0;
        for (Eigen::Index r = 0; r < fine.rows(); ++r) {
            for (Eigen::Index s = 0; s < fine.cols(); ++s) {
                if (fine(r, s) == 0.0 && res.sigma_bar(r, s) == 0.0) continue;
                worst = std::max(worst, std::abs(fine(r, s) - res.sigma_bar(r, s)) / std::abs(fine(r, s)));
            }
        }
        res.diagnostics.max_doubling_change = worst;
        if (worst > opt.doubling_tolerance) {
            throw NumericalError("asymptotic_covariance: node doubling changed an entry by " +
                                 std::to_string(worst) + " (relative)");
        }
    }
    return res;
}

AsymptoticLaw asymptotic_law(const std::vector<CovarianceModel>& models, const std::vector<int>& N,
                             const PairList& pairs, const CltOptions& opt) {
    AsymptoticLaw law;
    auto cov = asymptotic_covariance(models, N, pairs, opt);
    std::vector<CMat> mats;
    mats.reserve(models.size());
    for (const auto& m : models) mats.push_back(m.matrix);
    const auto dv = true_distance_vector(mats, pairs);
    law.M = models.empty() ? 0 : static_cast<int>(models.front().matrix.rows());
    law.mean = Eigen::Map<const RVec>(dv.values.data(), static_cast<Eigen::Index>(dv.values.size()));
    law.covariance = cov.sigma_bar / (static_cast<double>(law.M) * law.M);
    law.pairs = pairs;
    law.diagnostics = std::move(cov.diagnostics);
    return law;
}

}  // namespace rmtcluster
