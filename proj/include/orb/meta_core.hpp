#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orb/detail/normal.hpp"
#include "orb/error.hpp"
#include "orb/optimize.hpp"
#include "orb/params.hpp"
#include "orb/profile.hpp"

namespace orb {

/// One trial's contribution to a meta-analysis of a single outcome.
struct Study {
    std::string id;
    int n_treat = 0;
    int n_ctrl = 0;
    std::optional<int> events_treat;
    std::optional<int> events_ctrl;
    std::optional<double> y;      // log risk ratio or generic normal effect
    std::optional<double> sigma;  // standard error of y
    bool reported = false;

    int n_total() const { return n_treat + n_ctrl; }
};

/// Only the beneficial direction is implemented; harmful is reserved.
enum class OutcomeDirection { beneficial };

struct MetaAnalysis {
    std::vector<Study> studies;
    OutcomeDirection outcome_direction = OutcomeDirection::beneficial;

    std::size_t n_reported() const {
        return static_cast<std::size_t>(
            std::count_if(studies.begin(), studies.end(), [](const Study& s) { return s.reported; }));
    }
    std::size_t n_unreported() const { return studies.size() - n_reported(); }
};

/// Observed effect with its standard error.
struct Effect {
    double y = 0.0;
    double sigma = 1.0;
};

inline void validate(const Study& s) {
    auto fail = [&](const std::string& why) { throw ValidationError("study '" + s.id + "': " + why); };
    if (s.n_treat <= 0 || s.n_ctrl <= 0) fail("arm sizes must be positive");
    if (s.events_treat && (*s.events_treat < 0 || *s.events_treat > s.n_treat))
        fail("treatment events outside [0, n_treat]");
    if (s.events_ctrl && (*s.events_ctrl < 0 || *s.events_ctrl > s.n_ctrl))
        fail("control events outside [0, n_ctrl]");
    if (s.reported) {
        if (!s.y || !s.sigma) fail("reported study needs y and sigma");
        if (!std::isfinite(*s.y) || !(*s.sigma > 0.0) || !std::isfinite(*s.sigma))
            fail("reported study needs finite y and sigma > 0");
    } else if (s.y || s.sigma) {
        fail("unreported study must not carry y or sigma");
    }
}

inline void validate(const MetaAnalysis& ma) {
    for (const auto& s : ma.studies) validate(s);
}

inline std::vector<Effect> reported_effects(const MetaAnalysis& ma) {
    std::vector<Effect> out;
    for (const auto& s : ma.studies)
        if (s.reported) out.push_back({*s.y, *s.sigma});
    return out;
}

enum class ContinuityCorrection {
    add_half_if_any_zero,  // 0.5 added to all four cells when any cell is zero
};

/// Log risk ratio and its standard error from a 2x2 table.
inline Effect log_rr_from_counts(int events_treat, int n_treat, int events_ctrl, int n_ctrl,
                                 ContinuityCorrection = ContinuityCorrection::add_half_if_any_zero) {
    if (n_treat <= 0 || n_ctrl <= 0) throw ValidationError("log_rr_from_counts: arm sizes must be positive");
    if (events_treat < 0 || events_treat > n_treat || events_ctrl < 0 || events_ctrl > n_ctrl)
        throw ValidationError("log_rr_from_counts: events must lie in [0, n]");
    double a = events_treat;
    double c = events_ctrl;
    double n1 = n_treat;
    double n2 = n_ctrl;
    if (events_treat == 0 || events_treat == n_treat || events_ctrl == 0 || events_ctrl == n_ctrl) {
        a += 0.5;
        c += 0.5;
        n1 += 1.0;
        n2 += 1.0;
    }
    return {std::log((a / n1) / (c / n2)), std::sqrt(1.0 / a - 1.0 / n1 + 1.0 / c - 1.0 / n2)};
}

/// Normal random-effects log-likelihood of the reported effects, constants included.
inline double naive_loglik(const Params& p, std::span<const Effect> studies) {
    if (studies.empty()) throw ValidationError("naive_loglik: at least one study required");
    double ll = 0.0;
    for (const auto& e : studies) ll += detail::norm_logpdf(e.y, p.mu, e.sigma * e.sigma + p.tau2);
    return ll;
}

namespace detail {

struct StartValues {
    double mu = 0.0;
    double tau = 0.0;
    double mu_se = 1.0;
    double scale = 1.0;
};

/// Precision-weighted mean and DerSimonian–Laird tau, used to seed the optimizer.
inline StartValues start_values(std::span<const Effect> effects) {
    double sw = 0.0, sw2 = 0.0, swy = 0.0;
    for (const auto& e : effects) {
        const double w = 1.0 / (e.sigma * e.sigma);
        sw += w;
        sw2 += w * w;
        swy += w * e.y;
    }
    const double mean = swy / sw;
    double q = 0.0;
    for (const auto& e : effects) q += (e.y - mean) * (e.y - mean) / (e.sigma * e.sigma);
    const double k = static_cast<double>(effects.size());
    const double tau2 = std::max(0.0, (q - (k - 1.0)) / (sw - sw2 / sw));

    double sre = 0.0, ybar = 0.0, s2bar = 0.0;
    for (const auto& e : effects) {
        sre += 1.0 / (e.sigma * e.sigma + tau2);
        ybar += e.y / k;
        s2bar += e.sigma * e.sigma / k;
    }
    double vy = 0.0;
    for (const auto& e : effects) vy += (e.y - ybar) * (e.y - ybar) / k;
    return {mean, std::sqrt(tau2), std::sqrt(1.0 / sre), std::sqrt(vy + s2bar)};
}

/// Joint ML over (mu, tau2 >= 0) followed by profile intervals for both parameters.
/// The simplex works on (mu, tau) and evaluates at |tau|, i.e. reflects at tau = 0.
template <class LogLik>
FitResult fit_max_likelihood(LogLik&& ll, const StartValues& start, double level, std::string method) {
    auto objective = [&](const std::array<double, 2>& x) { return -ll(Params{x[0], x[1] * x[1]}); };

    const double step = std::max(0.05, 0.25 * start.scale);
    const std::array<std::array<double, 2>, 3> starts{{
        {start.mu, start.tau},
        {start.mu - 2.0 * start.mu_se, start.tau + 0.5 * start.scale},
        {start.mu + 2.0 * start.mu_se, 0.5 * start.tau},
    }};
    NelderMeadResult best;
    best.fx = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        auto r = nelder_mead(objective, s, {step, step});
        if (r.fx < best.fx) best = r;
    }
    // Restart from the incumbent with a fresh simplex until it stops improving.
    for (int i = 0; i < 5; ++i) {
        auto r = nelder_mead(objective, best.x, {0.05 * step, 0.05 * step});
        const bool improved = r.fx < best.fx - 1e-12;
        if (r.fx <= best.fx) best = r;
        if (!improved) break;
    }

    FitResult fit;
    fit.method = std::move(method);
    fit.params = {best.x[0], best.x[1] * best.x[1]};
    fit.loglik = ll(fit.params);
    fit.converged = best.converged && std::isfinite(fit.loglik);

    const ProfileOptions opts{.scale = start.scale};
    const double inf = std::numeric_limits<double>::infinity();
    try {
        fit.ci_mu = profile_ci(ll, ProfileTarget::mu, level, fit.params, opts);
    } catch (const NumericalError&) {
        fit.ci_mu = {-inf, inf};
        fit.converged = false;
    }
    try {
        fit.ci_tau2 = profile_ci(ll, ProfileTarget::tau2, level, fit.params, opts);
    } catch (const NumericalError&) {
        fit.ci_tau2 = {0.0, inf};
        fit.converged = false;
    }
    return fit;
}

inline void check_fit_inputs(std::size_t n_reported, double level) {
    if (n_reported < 2) throw ValidationError("at least 2 reported studies are required for a fit");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must be in (0, 1)");
}

} // namespace detail

/// Random-effects ML fit of a set of effects (all treated as observed).
inline FitResult fit_random_effects(std::span<const Effect> effects, double level, std::string method) {
    detail::check_fit_inputs(effects.size(), level);
    return detail::fit_max_likelihood([&](const Params& p) { return naive_loglik(p, effects); },
                                      detail::start_values(effects), level, std::move(method));
}

/// Fit using only the reported outcomes, ignoring unreported studies.
inline FitResult fit_naive(const MetaAnalysis& ma, double level = 0.95) {
    validate(ma);
    const auto effects = reported_effects(ma);
    return fit_random_effects(effects, level, "naive");
}

} // namespace orb
