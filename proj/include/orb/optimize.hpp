#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/math/tools/minima.hpp>

namespace orb {

/// Stand-in objective value for points where the log-likelihood is -inf or NaN.
inline constexpr double kInfeasibleObjective = 1e300;

struct NelderMeadOptions {
    double ftol = 1e-8;   // absolute spread of simplex values
    double xtol = 1e-10;  // max vertex distance from the best vertex
    int max_evals = 20000;
};

struct NelderMeadResult {
    std::array<double, 2> x{};
    double fx = 0.0;
    bool converged = false;
    int evals = 0;
};

/// Two-dimensional Nelder–Mead minimization with standard coefficients.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::array<double, 2> x0, std::array<double, 2> step,
                             const NelderMeadOptions& opts = {}) {
    using Point = std::array<double, 2>;
    int evals = 0;
    auto eval = [&](const Point& p) {
        ++evals;
        const double v = f(p);
        return std::isfinite(v) ? v : kInfeasibleObjective;
    };

    std::array<Point, 3> pts{x0, Point{x0[0] + step[0], x0[1]}, Point{x0[0], x0[1] + step[1]}};
    std::array<double, 3> val{};
    for (int i = 0; i < 3; ++i) val[i] = eval(pts[i]);

    auto order = [&] {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
        std::array<Point, 3> p2{pts[idx[0]], pts[idx[1]], pts[idx[2]]};
        std::array<double, 3> v2{val[idx[0]], val[idx[1]], val[idx[2]]};
        pts = p2;
        val = v2;
    };

    bool converged = false;
    while (evals < opts.max_evals) {
        order();
        const double spread = val[2] - val[0];
        double size = 0.0;
        for (int i = 1; i < 3; ++i)
            size = std::max(size, std::max(std::abs(pts[i][0] - pts[0][0]),
                                           std::abs(pts[i][1] - pts[0][1])));
        if (spread <= opts.ftol && size <= opts.xtol) {
            converged = true;
            break;
        }

        const Point c{0.5 * (pts[0][0] + pts[1][0]), 0.5 * (pts[0][1] + pts[1][1])};
        auto along = [&](double t) {
            return Point{c[0] + t * (pts[2][0] - c[0]), c[1] + t * (pts[2][1] - c[1])};
        };

        const Point xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < val[0]) {
            const Point xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[2] = xe;
                val[2] = fe;
            } else {
                pts[2] = xr;
                val[2] = fr;
            }
            continue;
        }
        if (fr < val[1]) {
            pts[2] = xr;
            val[2] = fr;
            continue;
        }
        const bool outside = fr < val[2];
        const Point xc = outside ? along(-0.5) : along(0.5);
        const double fc = eval(xc);
        if (fc < (outside ? fr : val[2])) {
            pts[2] = xc;
            val[2] = fc;
            continue;
        }
        for (int i = 1; i < 3; ++i) {
            pts[i] = Point{pts[0][0] + 0.5 * (pts[i][0] - pts[0][0]),
                           pts[0][1] + 0.5 * (pts[i][1] - pts[0][1])};
            val[i] = eval(pts[i]);
        }
    }
    order();
    return {pts[0], val[0], converged, evals};
}

struct Maximum {
    double x = 0.0;
    double value = -std::numeric_limits<double>::infinity();
};

/// Maximize a univariate function on [lo, hi]: coarse scan, then Brent on the best cell.
/// The scan guards against settling on a local maximum away from the global one.
template <class F>
Maximum maximize_on_interval(F&& f, double lo, double hi, int scan_points = 8) {
    auto g = [&](double x) {
        const double v = f(x);
        return std::isfinite(v) ? v : -kInfeasibleObjective;
    };
    Maximum best;
    int best_i = 0;
    const double h = (hi - lo) / scan_points;
    for (int i = 0; i <= scan_points; ++i) {
        const double x = lo + h * i;
        const double v = g(x);
        if (v > best.value) {
            best = {x, v};
            best_i = i;
        }
    }
    const double a = lo + h * std::max(0, best_i - 1);
    const double b = lo + h * std::min(scan_points, best_i + 1);
    std::uintmax_t iters = 200;
    const auto [xm, fm] = boost::math::tools::brent_find_minima(
        [&](double x) { return -g(x); }, a, b, 40, iters);
    if (-fm > best.value) best = {xm, -fm};
    return best;
}

} // namespace orb
