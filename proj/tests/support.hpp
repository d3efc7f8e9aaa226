#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "rmtcluster/clt.hpp"
#include "rmtcluster/linalg.hpp"
#include "rmtcluster/random.hpp"
#include "rmtcluster/sampling.hpp"
#include "rmtcluster/scenario.hpp"

namespace testsupport {

using namespace rmtcluster;

inline CMat random_complex(int M, Rng& rng) {
    CMat A(M, M);
    for (int r = 0; r < M; ++r) {
        for (int c = 0; c < M; ++c) A(r, c) = rng.complex_normal();
    }
    return A;
}

inline CMat random_pd(int M, Rng& rng, double floor = 0.3) {
    const CMat A = random_complex(M, rng);
    return hermitian_part(A * A.adjoint() / static_cast<double>(M) + floor * CMat::Identity(M, M));
}

inline CMat random_hermitian(int M, Rng& rng) { return hermitian_part(random_complex(M, rng)); }

inline CMat random_unitary(int M, Rng& rng) {
    Eigen::HouseholderQR<CMat> qr(random_complex(M, rng));
    return qr.householderQ() * CMat::Identity(M, M);
}

inline CovarianceModel model_of(const CMat& R) {
    CovarianceModel m;
    m.matrix = hermitian_part(R);
    auto [lam, E] = eig_hermitian(m.matrix);
    m.eigenvalues = lam;
    m.eigenvectors = E;
    return m;
}

// Adaptive Simpson on [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 50) {
    std::function<double(double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid);
            const double rm = 0.5 * (mid + hi);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
            const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
            if (d <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
                return left + right + (left + right - whole) / 15.0;
            }
            return rec(lo, mid, flo, flm, fmid, left, d - 1) + rec(mid, hi, fmid, frm, fhi, right, d - 1);
        };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), depth);
}

// Contour-integral representation of beta_k and alpha, evaluated with a
// dense trapezoid rule on a log-domain ellipse around [mu_1, lam_M].
struct ContourEstimate {
    std::vector<double> beta;
    double alpha = 0.0;
    double max_imag = 0.0;
};

inline ContourEstimate contour_oracle(const RVec& lam, const RVec& mu, int N, int nodes = 20000) {
    using cd = std::complex<double>;
    const int M = static_cast<int>(lam.size());
    const double lo = std::log(mu[0]) - 0.3;
    const double hi = std::log(lam[M - 1]) + 0.3;
    const double c = 0.5 * (lo + hi);
    const double r = 0.5 * (hi - lo);
    const double ri = std::min(r, 2.5);
    std::vector<cd> beta(M, 0.0);
    cd alpha = 0.0;
    for (int t = 0; t < nodes; ++t) {
        const double th = 2.0 * M_PI * t / nodes;
        const cd s(c + r * std::cos(th), ri * std::sin(th));
        const cd ds = cd(-r * std::sin(th), ri * std::cos(th)) * (2.0 * M_PI / nodes);
        const cd z = std::exp(s);
        const cd dz = z * ds;
        cd logw = s;
        cd fpf = 0.0;
        cd inv_sum = 0.0;
        for (int k = 0; k < M; ++k) {
            logw += std::log((z - lam[k]) / (z - mu[k]));
            fpf += 1.0 / (z - mu[k]) - 1.0 / (z - lam[k]);
            inv_sum += 1.0 / (z - lam[k]);
        }
        const cd h = 1.0 - z * fpf;
        for (int k = 0; k < M; ++k) beta[k] += logw * h / (z - lam[k]) * dz;
        alpha += logw * logw * h * inv_sum / static_cast<double>(M) * dz;
    }
    (void)N;
    const cd norm(0.0, 2.0 * M_PI);
    ContourEstimate out;
    for (int k = 0; k < M; ++k) {
        const cd b = beta[k] / norm;
        out.beta.push_back(b.real());
        out.max_imag = std::max(out.max_imag, std::abs(b.imag()));
    }
    const cd a = alpha / norm;
    out.alpha = a.real();
    out.max_imag = std::max(out.max_imag, std::abs(a.imag()));
    return out;
}

// Literal dense evaluation of sigma2_bar_j from its defining traces.
inline std::complex<double> sigma2_bar_direct(const CMat& R, int N, std::complex<double> w,
                                              std::complex<double> wt, const CMat& A, const CMat& B,
                                              bool own_variable) {
    const int M = static_cast<int>(R.rows());
    const CMat I = CMat::Identity(M, M);
    const CMat Q1 = (R - w * I).inverse();
    const CMat Q2 = (R - wt * I).inverse();
    const CMat Gt = R * Q1 * Q2;
    const std::complex<double> G = (R * R * Q1 * Q2).trace() / static_cast<double>(N);
    const CMat& QB = own_variable ? Q2 : Q1;
    const double Nd = N;
    return (Gt * A * Gt * B).trace() / (Nd * (1.0 - G)) +
           (R * QB * Gt * B).trace() * (R * Q1 * Gt * A).trace() / (Nd * Nd * (1.0 - G) * (1.0 - G));
}

inline std::complex<double> rho_direct(const CMat& Ri, int Ni, std::complex<double> wi,
                                       std::complex<double> wti, const CMat& Rj, int Nj,
                                       std::complex<double> wj, std::complex<double> wtj) {
    const int M = static_cast<int>(Ri.rows());
    const CMat I = CMat::Identity(M, M);
    const CMat Qi1 = (Ri - wi * I).inverse();
    const CMat Qi2 = (Ri - wti * I).inverse();
    const CMat Qj1 = (Rj - wj * I).inverse();
    const CMat Qj2 = (Rj - wtj * I).inverse();
    const std::complex<double> tr = (Ri * Qi1 * Qi2 * Rj * Qj1 * Qj2).trace();
    const std::complex<double> Gi = (Ri * Ri * Qi1 * Qi2).trace() / static_cast<double>(Ni);
    const std::complex<double> Gj = (Rj * Rj * Qj1 * Qj2).trace() / static_cast<double>(Nj);
    return tr * tr / (static_cast<double>(Ni) * Nj * (1.0 - Gi) * (1.0 - Gj));
}

// Brute-force four-fold trapezoid sum for one covariance entry, using dense
// inverses and the literal gated integrand.
inline double sigma_entry_bruteforce(const std::vector<CMat>& R, const std::vector<int>& N,
                                     std::pair<int, int> pr, std::pair<int, int> ps,
                                     const std::vector<Contour>& C) {
    using cd = std::complex<double>;
    const auto [i, j] = pr;
    const auto [m, n] = ps;
    const int M = static_cast<int>(R[0].rows());
    const CMat I = CMat::Identity(M, M);
    auto Q = [&](int u, cd w) { return CMat((R[u] - w * I).inverse()); };
    cd total = 0.0;
    for (int a = 0; a < C[i].size(); ++a) {
        for (int b = 0; b < C[j].size(); ++b) {
            for (int c = 0; c < C[m].size(); ++c) {
                for (int d = 0; d < C[n].size(); ++d) {
                    const cd wi = C[i].nodes[a], wj = C[j].nodes[b];
                    const cd wm = C[m].nodes[c], wn = C[n].nodes[d];
                    const cd l1 = C[i].log_nodes[a] - C[j].log_nodes[b];
                    const cd l2 = C[m].log_nodes[c] - C[n].log_nodes[d];
                    cd v = 0.0;
                    if (i == m && j == n) v += rho_direct(R[i], N[i], wi, wm, R[j], N[j], wj, wn);
                    if (i == n && j == m) v += rho_direct(R[i], N[i], wi, wn, R[j], N[j], wj, wm);
                    if (i == m) v += sigma2_bar_direct(R[i], N[i], wi, wm, Q(j, wj), Q(n, wn), true);
                    if (j == n) v += sigma2_bar_direct(R[j], N[j], wj, wn, Q(i, wi), Q(m, wm), true);
                    if (i == n) v += sigma2_bar_direct(R[i], N[i], wi, wn, Q(j, wj), Q(m, wm), true);
                    if (j == m) v += sigma2_bar_direct(R[j], N[j], wj, wm, Q(i, wi), Q(n, wn), true);
                    total += l1 * l1 * l2 * l2 * v * C[i].weights[a] * C[j].weights[b] *
                             C[m].weights[c] * C[n].weights[d];
                }
            }
        }
    }
    const cd p = cd(0.0, 2.0 * M_PI);
    return (total / (p * p * p * p)).real();
}

// Kolmogorov-Smirnov statistic of a sample against the standard normal.
inline double ks_statistic(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double D = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double F = 0.5 * std::erfc(-x[k] / std::sqrt(2.0));
        D = std::max({D, F - k / n, (k + 1) / n - F});
    }
    return D;
}

// Asymptotic Kolmogorov tail probability P(K > sqrt(n) D) with the standard
// small-sample correction.
inline double ks_pvalue(double D, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lam = (sn + 0.12 + 0.11 / sn) * D;
    double p = 0.0;
    for (int k = 1; k < 200; ++k) {
        const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
        p += term;
        if (std::abs(term) < 1e-16) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace testsupport
