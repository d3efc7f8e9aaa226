#include "rmtcluster/quadrature.hpp"

#include <cmath>
#include <utility>

#include "rmtcluster/error.hpp"

namespace rmtcluster {

namespace {

// (P_n(x), P_n'(x)) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

}  // namespace

GaussLegendreRule gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: order must be positive");
    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            const auto [p, dp] = legendre(n, x);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double dp = legendre(n, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

}  // namespace rmtcluster
