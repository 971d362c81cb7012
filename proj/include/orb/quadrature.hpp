#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

namespace orb {

/// Gauss–Legendre rule on [-1, 1] with N nodes.
template <std::size_t N>
struct GaussLegendreRule {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    GaussLegendreRule() {
        // Newton iteration on P_N from the Chebyshev-like initial guess; roots are
        // symmetric so only the upper half is solved.
        constexpr std::size_t half = (N + 1) / 2;
        for (std::size_t i = 0; i < half; ++i) {
            double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                                (static_cast<double>(N) + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0;
                double p1 = x;
                for (std::size_t k = 2; k <= N; ++k) {
                    const double kk = static_cast<double>(k);
                    const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
                    p0 = p1;
                    p1 = p2;
                }
                dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[N - 1 - i] = x;
            weights[i] = w;
            weights[N - 1 - i] = w;
        }
    }
};

template <std::size_t N>
const GaussLegendreRule<N>& gauss_legendre() {
    static const GaussLegendreRule<N> rule;
    return rule;
}

/// Integrate f over [a, b] with the N-point rule.
template <std::size_t N, class F>
double integrate_panel(F&& f, double a, double b) {
    const auto& rule = gauss_legendre<N>();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t k = 0; k < N; ++k) sum += rule.weights[k] * f(mid + half * rule.nodes[k]);
    return sum * half;
}

/// Integrate f over [a, b] split at every breakpoint strictly inside the interval.
/// Breakpoints must be sorted ascending.
template <std::size_t N, class F>
double integrate_piecewise(F&& f, double a, double b, std::span<const double> breakpoints) {
    double total = 0.0;
    double left = a;
    for (double bp : breakpoints) {
        if (bp <= left || bp >= b) continue;
        total += integrate_panel<N>(f, left, bp);
        left = bp;
    }
    total += integrate_panel<N>(f, left, b);
    return total;
}

} // namespace orb
