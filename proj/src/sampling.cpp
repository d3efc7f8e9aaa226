#include "rmtcluster/sampling.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "rmtcluster/error.hpp"

namespace rmtcluster {

std::pair<RVec, CMat> eig_hermitian(const CMat& A) {
    if (A.rows() != A.cols()) throw DomainError("eig_hermitian: matrix must be square");
    Eigen::SelfAdjointEigenSolver<CMat> es(A);
    if (es.info() != Eigen::Success) throw NumericalError("eig_hermitian: no convergence");
    return {es.eigenvalues(), es.eigenvectors()};
}

CMat matrix_sqrt_hermitian(const CMat& R) {
    auto [lam, E] = eig_hermitian(R);
    if (!(lam.minCoeff() > 0.0)) throw DomainError("matrix_sqrt_hermitian: matrix not PD");
    return hermitian_part(spectral_compose(E, lam.cwiseSqrt()));
}

SampleBlock draw_channels(const CMat& R_sqrt, int N, Rng& rng, int user_id) {
    if (N < 1) throw DomainError("draw_channels: N must be positive");
    const auto M = R_sqrt.rows();
    CMat X(M, N);
    for (int n = 0; n < N; ++n) {
        for (Eigen::Index m = 0; m < M; ++m) X(m, n) = rng.complex_normal();
    }
    SampleBlock out;
    out.samples = R_sqrt * X;
    out.user_id = user_id;
    out.N = N;
    return out;
}

CMat scm(const SampleBlock& Y) {
    CMat S = Y.samples * Y.samples.adjoint() / static_cast<double>(Y.N);
    return hermitian_part(S);
}

RVec mu_roots(const RVec& lam, int N) {
    const auto M = lam.size();
    if (N <= M) throw DomainError("mu_roots: N must exceed M");
    for (Eigen::Index k = 0; k < M; ++k) {
        if (!(lam[k] > 0.0) || (k > 0 && !(lam[k] > lam[k - 1]))) {
            throw DomainError("mu_roots: eigenvalues must be positive and strictly ascending");
        }
    }
    const double invN = 1.0 / N;
    auto f = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) s += lam[m] / (lam[m] - mu);
        return s * invN - 1.0;
    };
    RVec mu(M);
    for (Eigen::Index k = 0; k < M; ++k) {
        double lo = k == 0 ? 0.0 : lam[k - 1];
        double hi = lam[k];
        int iter = 0;
        for (; iter < 200; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (f(mid) < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if (hi - lo > 1e-12 * hi) {
            throw NumericalError("mu_roots: bisection did not converge for root " +
                                 std::to_string(k));
        }
        mu[k] = 0.5 * (lo + hi);
    }
    return mu;
}

RVec separate_degenerate(const RVec& lam) {
    RVec out = lam;
    const double gap = 1e-12 * lam.mean();
    for (Eigen::Index k = 1; k < out.size(); ++k) {
        if (out[k] - out[k - 1] < gap) out[k] = out[k - 1] + gap;
    }
    return out;
}

SpectralDecomposition spectral_decomposition(const CMat& scm_matrix, int N) {
    auto [lam, E] = eig_hermitian(scm_matrix);
    if (!(lam.minCoeff() > 0.0)) {
        throw DomainError("spectral_decomposition: SCM is singular (need N > M)");
    }
    SpectralDecomposition s;
    s.eigenvalues = separate_degenerate(lam);
    s.eigenvectors = std::move(E);
    s.mu_roots = mu_roots(s.eigenvalues, N);
    s.N = N;
    return s;
}

}  // namespace rmtcluster
