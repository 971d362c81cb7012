#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include "orb/detail/normal.hpp"
#include "orb/error.hpp"
#include "orb/optimize.hpp"
#include "orb/params.hpp"

namespace orb {

enum class ProfileTarget { mu, tau2 };

struct ProfileOptions {
    double scale = 1.0;     // spread of the data on the effect scale; sizes search boxes
    double tol = 1e-6;      // bisection tolerance on the target scale
    double horizon = 1e4;   // furthest distance from the estimate searched for a bound
};

/// Profile log-likelihood at a fixed value of the target, maximizing over the other
/// parameter. For target mu the nuisance is searched as tau >= 0.
template <class LogLik>
double profile_loglik(LogLik&& ll, ProfileTarget target, double value, const Params& fit,
                      double scale) {
    if (target == ProfileTarget::mu) {
        double hi = 2.0 * (std::sqrt(fit.tau2) + scale + std::abs(value - fit.mu));
        Maximum m;
        for (int expand = 0; expand < 12; ++expand) {
            m = maximize_on_interval([&](double tau) { return ll(Params{value, tau * tau}); },
                                     0.0, hi);
            if (m.x < 0.9 * hi) break;
            hi *= 4.0;
        }
        return m.value;
    }
    double half = 2.0 * (scale + std::sqrt(value) + std::sqrt(fit.tau2));
    Maximum m;
    for (int expand = 0; expand < 12; ++expand) {
        const double lo = fit.mu - half;
        const double hi = fit.mu + half;
        m = maximize_on_interval([&](double mu) { return ll(Params{mu, value}); }, lo, hi);
        if (m.x > lo + 0.05 * half && m.x < hi - 0.05 * half) break;
        half *= 4.0;
    }
    return m.value;
}

/// Profile-likelihood interval for one parameter: the set where the profile
/// log-likelihood lies within chi2_1(level)/2 of its maximum. Bounds are bracketed by
/// doubling steps away from the estimate and then bisected. The tau2 lower bound is 0
/// when the drop is not reached on [0, tau2_hat].
template <class LogLik>
Interval profile_ci(LogLik&& ll, ProfileTarget target, double level, const Params& fit,
                    const ProfileOptions& opts = {}) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("profile_ci: level must be in (0, 1)");
    const double drop = detail::profile_drop(level);
    const double lmax = ll(fit);
    auto deviance = [&](double x) {
        return lmax - profile_loglik(ll, target, x, fit, opts.scale);
    };
    const double est = target == ProfileTarget::mu ? fit.mu : fit.tau2;

    auto bisect = [&](double inside, double outside) {
        while (std::abs(outside - inside) > opts.tol) {
            const double mid = 0.5 * (inside + outside);
            (deviance(mid) < drop ? inside : outside) = mid;
        }
        return 0.5 * (inside + outside);
    };
    auto bracket = [&](double direction, double step) {
        double inside = est;
        double dist = step;
        while (deviance(est + direction * dist) < drop) {
            inside = est + direction * dist;
            dist *= 2.0;
            if (dist > opts.horizon) {
                std::ostringstream msg;
                msg << "profile_ci: " << (direction > 0 ? "upper" : "lower") << " bound for "
                    << (target == ProfileTarget::mu ? "mu" : "tau2")
                    << " not bracketed within horizon " << opts.horizon;
                throw NumericalError(msg.str());
            }
        }
        return bisect(inside, est + direction * dist);
    };

    if (target == ProfileTarget::mu) {
        const double step = std::max(1e-3, 0.1 * opts.scale);
        return {bracket(-1.0, step), bracket(+1.0, step)};
    }
    const double step = std::max(1e-3, 0.1 * (fit.tau2 + opts.scale * opts.scale));
    double lower = 0.0;
    if (fit.tau2 > 0.0 && deviance(0.0) >= drop) lower = bisect(fit.tau2, 0.0);
    return {std::max(0.0, lower), bracket(+1.0, step)};
}

} // namespace orb
