#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "orb/detail/normal.hpp"
#include "orb/error.hpp"
#include "orb/meta_core.hpp"
#include "orb/quadrature.hpp"
#include "orb/selection.hpp"

namespace orb {

/// Which ORB-adjusted likelihood to maximize. `simplified` assumes no selection on
/// the reported outcomes (weight 1); `generic` also conditions each reported outcome
/// on having been reported.
enum class LikelihoodForm { simplified, generic };

struct AdjustedModel {
    std::vector<Effect> reported;
    std::vector<double> unreported_sigma2;  // imputed, one per unreported study
    SelectionSpec spec;
    LikelihoodForm form = LikelihoodForm::simplified;
};

/// Sample size and standard error of a reported study, the inputs to variance imputation.
struct ReportedSize {
    double sigma = 0.0;
    double n_total = 0.0;
};

/// Imputed variance 1 / (k n) for an unreported study of size n, where
/// k = sum(1/sigma_i^2) / sum(n_i) over reported studies only.
inline double impute_missing_variance(std::span<const ReportedSize> reported, double n_unrep) {
    if (reported.empty()) throw ValidationError("impute_missing_variance: no reported studies");
    if (!(n_unrep > 0.0)) throw ValidationError("impute_missing_variance: sample size must be positive");
    double precision = 0.0;
    double n = 0.0;
    for (const auto& r : reported) {
        if (!(r.sigma > 0.0) || !(r.n_total > 0.0))
            throw ValidationError("impute_missing_variance: reported sigma and n must be positive");
        precision += 1.0 / (r.sigma * r.sigma);
        n += r.n_total;
    }
    const double k_hat = precision / n;
    return 1.0 / (k_hat * n_unrep);
}

namespace detail {

/// Half-width of the integration window in units of the marginal standard deviation.
/// The normal mass outside +/-10 sd is below 1.6e-23 and is dropped.
inline constexpr double kWindowSd = 10.0;
inline constexpr std::size_t kPanelNodes = 128;
// A breakpoint up to this far out still pulls the window to it. Beyond it the
// mass on the far side underflows anyway.
inline constexpr double kReachSd = 40.0;
inline constexpr double kMarginSd = 4.0;

/// log of the integral of N(y; mu, sigma^2 + tau^2) * h(w(y)) dy, with h selecting
/// either w or 1 - w. Gauss–Legendre panels are aligned with the weight's breakpoints.
/// When the integrand lives only beyond a breakpoint in the normal tail, the window
/// is stretched to cover it so the log stays accurate for tiny masses.
template <class H>
double log_weighted_mass(const Params& p, double sigma2, const SelectionSpec& spec, H&& h) {
    const double sigma = std::sqrt(sigma2);
    const double sd = std::sqrt(sigma2 + p.tau2);
    const auto w = weight_as_function_of_y(spec, sigma);
    auto integrand = [&](double y) {
        return norm_pdf((y - p.mu) / sd) / sd * h(w(y));
    };
    const double core_lo = p.mu - kWindowSd * sd;
    const double core_hi = p.mu + kWindowSd * sd;
    double lo = core_lo;
    double hi = core_hi;
    auto cuts = weight_breakpoints(spec, sigma);
    for (double bp : cuts) {
        if (std::abs(bp - p.mu) > kReachSd * sd) continue;
        lo = std::min(lo, bp - kMarginSd * sd);
        hi = std::max(hi, bp + kMarginSd * sd);
    }
    cuts.push_back(core_lo);
    cuts.push_back(core_hi);
    std::sort(cuts.begin(), cuts.end());
    const double mass = integrate_piecewise<kPanelNodes>(integrand, lo, hi, cuts);
    return mass > 0.0 ? std::log(mass) : -std::numeric_limits<double>::infinity();
}

/// Probability mass under N(mu, sigma^2 + tau^2) of the non-significant region, for
/// the step weight A: Phi((z sigma - mu)/sd) one-sided, a Phi difference two-sided.
inline double step_nonsignificant_mass(const Params& p, double sigma2, const SelectionSpec& spec) {
    const double sigma = std::sqrt(sigma2);
    const double sd = std::sqrt(sigma2 + p.tau2);
    if (spec.p_side == PSide::one) return norm_cdf((sigma * norm_quantile(1.0 - spec.alpha) - p.mu) / sd);
    const double z = norm_quantile(1.0 - 0.5 * spec.alpha);
    return norm_interval((-z * sigma - p.mu) / sd, (z * sigma - p.mu) / sd);
}

inline double log_or_sentinel(double x) {
    return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

} // namespace detail

/// log of the probability that a study with variance sigma2 leaves the outcome
/// unreported, by quadrature for any weight function.
inline double unreported_term_quadrature(const Params& p, double sigma2, const SelectionSpec& spec) {
    return detail::log_weighted_mass(p, sigma2, spec, [](double w) { return 1.0 - w; });
}

/// Closed form of unreported_term for the step weight A.
inline double unreported_term_closed_form(const Params& p, double sigma2, const SelectionSpec& spec) {
    if (spec.kind != SelectionKind::A) throw ValidationError("closed form only exists for selection function A");
    if (spec.p_side == PSide::one) {
        const double sigma = std::sqrt(sigma2);
        const double sd = std::sqrt(sigma2 + p.tau2);
        return detail::norm_logcdf((sigma * detail::norm_quantile(1.0 - spec.alpha) - p.mu) / sd);
    }
    return detail::log_or_sentinel(detail::step_nonsignificant_mass(p, sigma2, spec));
}

/// Contribution of one unreported study: log of the integral of f(y; mu, tau2) (1 - w(y)).
/// Returns -inf when the mass underflows; never throws for valid inputs.
inline double unreported_term(const Params& p, double sigma2, const SelectionSpec& spec) {
    if (spec.kind == SelectionKind::A) return unreported_term_closed_form(p, sigma2, spec);
    return unreported_term_quadrature(p, sigma2, spec);
}

inline double reported_weight_term_quadrature(const Params& p, double sigma, const SelectionSpec& spec) {
    return detail::log_weighted_mass(p, sigma * sigma, spec, [](double w) { return w; });
}

/// Normalizer of a reported study's conditional density: log of the integral of f(y) w(y).
inline double reported_weight_term(const Params& p, double sigma, const SelectionSpec& spec) {
    if (spec.kind == SelectionKind::A) {
        const double sigma2 = sigma * sigma;
        const double sd = std::sqrt(sigma2 + p.tau2);
        if (spec.p_side == PSide::one)
            return detail::norm_logcdf((p.mu - sigma * detail::norm_quantile(1.0 - spec.alpha)) / sd);
        const double z = detail::norm_quantile(1.0 - 0.5 * spec.alpha);
        const double tails = detail::norm_cdf((-z * sigma - p.mu) / sd) + detail::norm_sf((z * sigma - p.mu) / sd);
        return detail::log_or_sentinel(tails);
    }
    return reported_weight_term_quadrature(p, sigma, spec);
}

inline double orb_adjusted_loglik(const Params& p, const AdjustedModel& model) {
    double ll = naive_loglik(p, model.reported);
    // Imputed variances repeat whenever sample sizes do; reuse the last term.
    double last_sigma2 = std::numeric_limits<double>::quiet_NaN();
    double last_term = 0.0;
    for (double s2 : model.unreported_sigma2) {
        if (s2 != last_sigma2) {
            last_term = unreported_term(p, s2, model.spec);
            last_sigma2 = s2;
        }
        ll += last_term;
    }
    if (model.form == LikelihoodForm::generic)
        for (const auto& e : model.reported) ll -= reported_weight_term(p, e.sigma, model.spec);
    return ll;
}

/// Build the adjusted model: reported effects plus imputed variances for unreported
/// studies, using total sample size n_treat + n_ctrl.
inline AdjustedModel make_adjusted_model(const MetaAnalysis& ma, const SelectionSpec& spec,
                                         LikelihoodForm form = LikelihoodForm::simplified) {
    validate(ma);
    validate(spec);
    AdjustedModel model{.reported = reported_effects(ma), .unreported_sigma2 = {}, .spec = spec, .form = form};
    std::vector<ReportedSize> sizes;
    for (const auto& s : ma.studies)
        if (s.reported) sizes.push_back({*s.sigma, static_cast<double>(s.n_total())});
    for (const auto& s : ma.studies)
        if (!s.reported)
            model.unreported_sigma2.push_back(impute_missing_variance(sizes, static_cast<double>(s.n_total())));
    return model;
}

inline std::string adjusted_method_label(const SelectionSpec& spec, LikelihoodForm form) {
    return (form == LikelihoodForm::generic ? "adj-generic:" : "adj:") + to_string(spec);
}

inline FitResult fit_orb_adjusted(const AdjustedModel& model, double level = 0.95) {
    detail::check_fit_inputs(model.reported.size(), level);
    return detail::fit_max_likelihood([&](const Params& p) { return orb_adjusted_loglik(p, model); },
                                      detail::start_values(model.reported), level,
                                      adjusted_method_label(model.spec, model.form));
}

/// ML fit of the ORB-adjusted likelihood with profile intervals for mu and tau2.
inline FitResult fit_orb_adjusted(const MetaAnalysis& ma, const SelectionSpec& spec,
                                  LikelihoodForm form = LikelihoodForm::simplified, double level = 0.95) {
    return fit_orb_adjusted(make_adjusted_model(ma, spec, form), level);
}

} // namespace orb
