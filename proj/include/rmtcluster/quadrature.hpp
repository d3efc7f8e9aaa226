#pragma once

#include <vector>

namespace rmtcluster {

struct GaussLegendreRule {
    std::vector<double> nodes;    // ascending, in (-1, 1)
    std::vector<double> weights;  // sum to 2
};

// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
GaussLegendreRule gauss_legendre(int n);

}  // namespace rmtcluster
