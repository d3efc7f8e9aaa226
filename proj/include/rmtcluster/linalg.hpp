#pragma once

#include <complex>

#include <Eigen/Dense>

namespace rmtcluster {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// (A + A^H) / 2.
inline CMat hermitian_part(const CMat& A) { return (A + A.adjoint()) * 0.5; }

// E diag(f) E^H for a unitary E.
inline CMat spectral_compose(const CMat& E, const RVec& f) {
    return E * f.asDiagonal() * E.adjoint();
}

// |E1^H E2|^2 entrywise: overlap weights between two eigenbases.
inline RMat overlap_weights(const CMat& E1, const CMat& E2) {
    return (E1.adjoint() * E2).cwiseAbs2();
}

}  // namespace rmtcluster
