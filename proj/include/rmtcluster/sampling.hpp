#pragma once

#include <utility>

#include "rmtcluster/linalg.hpp"
#include "rmtcluster/random.hpp"

namespace rmtcluster {

struct SampleBlock {
    CMat samples;  // M x N
    int user_id = 0;
    int N = 0;
};

struct SpectralDecomposition {
    RVec eigenvalues;   // ascending, strictly after jitter
    CMat eigenvectors;  // columns match eigenvalues
    RVec mu_roots;      // ascending, interlacing with eigenvalues
    int N = 0;

    int M() const { return static_cast<int>(eigenvalues.size()); }
};

// Ascending eigenvalues and unitary eigenvectors of a Hermitian matrix.
std::pair<RVec, CMat> eig_hermitian(const CMat& A);

CMat matrix_sqrt_hermitian(const CMat& R);

// Y = R^{1/2} X with X circular complex Gaussian, E|x|^2 = 1.
SampleBlock draw_channels(const CMat& R_sqrt, int N, Rng& rng, int user_id = 0);

CMat scm(const SampleBlock& Y);

// Roots of (1/N) sum_m lam_m / (lam_m - mu) = 1, one per interval
// (lam_{k-1}, lam_k) with lam_0 = 0.
RVec mu_roots(const RVec& lam, int N);

// Spreads near-equal neighbours apart by 1e-12 * mean(lam).
RVec separate_degenerate(const RVec& lam);

// Eigendecomposition of an SCM, degeneracy jitter and secular roots.
SpectralDecomposition spectral_decomposition(const CMat& scm_matrix, int N);

}  // namespace rmtcluster
