#pragma once

#include <vector>

#include "rmtcluster/distance.hpp"
#include "rmtcluster/linalg.hpp"
#include "rmtcluster/scenario.hpp"

namespace rmtcluster {

// Closed contour around the spectrum of one covariance. Nodes follow an
// ellipse in the log domain: omega = exp(s), s = c + a cos t + i b sin t.
// `log_nodes` holds s, the continuous logarithm along the contour.
//
// The spread S(omega) = (1/N) sum g^2 / |g - omega|^2 bounds |Gamma|, so the
// integrand is analytic wherever S < 1. In the log domain the set S >= 1 is
// a neighbourhood of the spectrum repeated every 2 pi i. The contour is the
// confocal ellipse lying between the smallest level that clears that set and
// the first level touching its image; the foci are chosen to widen that gap.
struct Contour {
    std::vector<cplx> nodes;
    std::vector<cplx> weights;  // d omega including the 2 pi / n factor
    std::vector<cplx> log_nodes;
    double x_left = 0.0;   // real point with S = 1 below the spectrum
    double x_right = 0.0;  // real point with S = 1 above the spectrum
    double center_log = 0.0;
    double focus = 0.0;  // half distance between the foci
    double inner_level = 0.0;
    double outer_level = 0.0;
    double semi_real = 0.0;
    double semi_imag = 0.0;
    double max_spread = 0.0;  // max of S over the nodes

    int size() const { return static_cast<int>(nodes.size()); }
};

struct ContourOptions {
    // Spread level treated as the edge of the singular set when placing the
    // contour. Since |Gamma(a, b)|^2 <= S(a) S(b), values above 1 are safe
    // while max S on the contour stays below 1 / singular_level.
    double singular_level = 1.0;
    // Position of the contour between the inner and outer levels.
    double gap_fraction = 0.5;
    // Foci scanned over [focus_min, 1] times the half width of S >= 1.
    double focus_min = 0.3;
    int focus_candidates = 15;
    // Points per ellipse when probing S.
    int probes = 512;
};

// Builds and validates the contour for eigenvalues `gamma` (ascending) and
// sample count N. Throws NumericalError if the spread reaches 1 on a node.
Contour make_contour(const RVec& gamma, int N, int nodes, const ContourOptions& opt = {});

CMat resolvent(const RVec& gamma, const CMat& E, cplx omega);
cplx gamma_scalar(const RVec& gamma, int N, cplx omega, cplx omega_t);
CMat gamma_matrix(const RVec& gamma, const CMat& E, cplx omega, cplx omega_t);

// Pairing of resolvent arguments in the product of traces of sigma2_bar.
enum class TracePairing {
    own_variable,  // B with Q(omega_t), A with Q(omega)
    as_printed,    // both with Q(omega)
};

// sigma2_bar_j(omega, omega_t; A, B) for a user with eigen-data (gamma, E).
cplx sigma2_bar(const RVec& gamma, const CMat& E, int N, cplx omega, cplx omega_t,
                const CMat& A, const CMat& B, TracePairing pairing = TracePairing::own_variable);

cplx rho(const CovarianceModel& Ri, int Ni, cplx omega_i, cplx omega_ti, const CovarianceModel& Rj,
         int Nj, cplx omega_j, cplx omega_tj);

// Integrand of one covariance entry at a single node tuple
// (omega_{i_r}, omega_{j_r}, omega_t_{i_s}, omega_t_{j_s}).
cplx sigma2_combined(const std::vector<CovarianceModel>& models, const std::vector<int>& N,
                     std::pair<int, int> pair_r, std::pair<int, int> pair_s, cplx w_ir, cplx w_jr,
                     cplx wt_is, cplx wt_js, TracePairing pairing = TracePairing::own_variable);

struct CltOptions {
    int contour_nodes = 24;
    ContourOptions contour;
    TracePairing pairing = TracePairing::own_variable;
    // Recompute with doubled nodes and fail above `doubling_tolerance`.
    bool verify_doubling = false;
    double doubling_tolerance = 1e-5;
    unsigned workers = 1;
};

struct CltDiagnostics {
    int nodes = 0;
    double max_imag_residue = 0.0;  // max |Im| / |Re| over nonzero entries
    double max_doubling_change = 0.0;
    std::vector<Contour> contours;  // per user
};

struct CovarianceResult {
    RMat sigma_bar;  // R x R
    CltDiagnostics diagnostics;
};

CovarianceResult asymptotic_covariance(const std::vector<CovarianceModel>& models,
                                       const std::vector<int>& N, const PairList& pairs,
                                       const CltOptions& opt = {});

struct AsymptoticLaw {
    RVec mean;        // true distances
    RMat covariance;  // sigma_bar / M^2
    int M = 0;
    PairList pairs;
    CltDiagnostics diagnostics;
};

AsymptoticLaw asymptotic_law(const std::vector<CovarianceModel>& models, const std::vector<int>& N,
                             const PairList& pairs, const CltOptions& opt = {});

}  // namespace rmtcluster
