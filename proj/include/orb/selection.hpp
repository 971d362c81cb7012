#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orb/detail/normal.hpp"
#include "orb/error.hpp"

namespace orb {

/// Weight-function families mapping a p-value to a reporting probability.
///   A:   step, 1 for significant outcomes and 0 otherwise
///   B:   1 when significant, (alpha/p)^beta decay above alpha
///   C:   1 - (p/alpha)^gamma when significant, 0 otherwise
///   D:   1 - (1-omega)(p/alpha)^gamma below alpha, omega (alpha/p)^beta above
///   DGM: exp(-4 p^gamma), the censoring law used by the simulation engine
enum class SelectionKind { A, B, C, D, DGM };

enum class PSide { one, two };

struct SelectionSpec {
    SelectionKind kind = SelectionKind::A;
    std::optional<double> beta;
    std::optional<double> gamma;
    double omega_alpha = 0.5;
    double alpha = 0.05;
    PSide p_side = PSide::one;

    static SelectionSpec a() { return {}; }
    static SelectionSpec b(double beta) { return {.kind = SelectionKind::B, .beta = beta}; }
    static SelectionSpec c(double gamma) { return {.kind = SelectionKind::C, .gamma = gamma}; }
    static SelectionSpec d(double beta, double gamma, double omega_alpha = 0.5) {
        return {.kind = SelectionKind::D, .beta = beta, .gamma = gamma, .omega_alpha = omega_alpha};
    }
    static SelectionSpec dgm(double gamma) { return {.kind = SelectionKind::DGM, .gamma = gamma}; }

    bool operator==(const SelectionSpec&) const = default;
};

/// Scale constant of the simulation censoring law exp(-4 p^gamma).
inline constexpr double kDgmScale = 4.0;

inline void validate(const SelectionSpec& s) {
    auto positive = [](const std::optional<double>& v) { return v && *v > 0.0 && std::isfinite(*v); };
    const bool needs_beta = s.kind == SelectionKind::B || s.kind == SelectionKind::D;
    const bool needs_gamma =
        s.kind == SelectionKind::C || s.kind == SelectionKind::D || s.kind == SelectionKind::DGM;
    if (needs_beta && !positive(s.beta)) throw ValidationError("selection spec: beta > 0 required");
    if (needs_gamma && !positive(s.gamma)) throw ValidationError("selection spec: gamma > 0 required");
    if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw ValidationError("selection spec: alpha must be in (0, 1)");
    if (!(s.omega_alpha >= 0.0 && s.omega_alpha <= 1.0))
        throw ValidationError("selection spec: omega_alpha must be in [0, 1]");
}

inline double p_value(double y, double sigma, PSide side) {
    const double z = y / sigma;
    if (side == PSide::one) return detail::norm_cdf(-z);
    return std::min(1.0, 2.0 * detail::norm_sf(std::abs(z)));
}

inline double eval_weight(const SelectionSpec& s, double p) {
    const bool significant = p <= s.alpha;
    switch (s.kind) {
    case SelectionKind::A:
        return significant ? 1.0 : 0.0;
    case SelectionKind::B:
        return significant ? 1.0 : std::pow(s.alpha / p, *s.beta);
    case SelectionKind::C:
        return significant ? 1.0 - std::pow(p / s.alpha, *s.gamma) : 0.0;
    case SelectionKind::D:
        return significant ? 1.0 - (1.0 - s.omega_alpha) * std::pow(p / s.alpha, *s.gamma)
                           : s.omega_alpha * std::pow(s.alpha / p, *s.beta);
    case SelectionKind::DGM:
        return std::exp(-kDgmScale * std::pow(p, *s.gamma));
    }
    return 0.0;
}

/// Reporting probability as a function of the effect estimate for a study with
/// standard error sigma.
inline auto weight_as_function_of_y(const SelectionSpec& s, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("weight_as_function_of_y: sigma must be positive");
    return [s, sigma](double y) { return eval_weight(s, p_value(y, sigma, s.p_side)); };
}

/// Effect values where the weight (as a function of y) is discontinuous or kinked,
/// sorted ascending. These are the p = alpha crossings; DGM is smooth everywhere.
inline std::vector<double> weight_breakpoints(const SelectionSpec& s, double sigma) {
    if (s.kind == SelectionKind::DGM) return {};
    if (s.p_side == PSide::one) return {sigma * detail::norm_quantile(1.0 - s.alpha)};
    const double y = sigma * detail::norm_quantile(1.0 - 0.5 * s.alpha);
    return {-y, y};
}

namespace detail {

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline double parse_number(std::string_view text, std::string_view context) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty())
        throw ValidationError("cannot parse number '" + std::string(text) + "' in '" +
                              std::string(context) + "'");
    return v;
}

} // namespace detail

/// Text form: A, B:<beta>, C:<gamma>, D:<beta>:<gamma>, DGM:<gamma>, with an optional
/// "@two" suffix for two-sided p-values.
inline std::string to_string(const SelectionSpec& s) {
    using detail::format_number;
    std::string out;
    switch (s.kind) {
    case SelectionKind::A: out = "A"; break;
    case SelectionKind::B: out = "B:" + format_number(*s.beta); break;
    case SelectionKind::C: out = "C:" + format_number(*s.gamma); break;
    case SelectionKind::D: out = "D:" + format_number(*s.beta) + ":" + format_number(*s.gamma); break;
    case SelectionKind::DGM: out = "DGM:" + format_number(*s.gamma); break;
    }
    if (s.p_side == PSide::two) out += "@two";
    return out;
}

inline SelectionSpec parse_selection_spec(std::string_view text, double alpha = 0.05) {
    const std::string context(text);
    SelectionSpec s;
    s.alpha = alpha;
    if (const auto at = text.find('@'); at != std::string_view::npos) {
        const auto side = text.substr(at + 1);
        if (side == "two") s.p_side = PSide::two;
        else if (side == "one") s.p_side = PSide::one;
        else throw ValidationError("unknown p-value side in selection spec '" + context + "'");
        text = text.substr(0, at);
    }
    std::vector<std::string_view> parts;
    for (std::size_t start = 0;;) {
        const auto colon = text.find(':', start);
        parts.push_back(text.substr(start, colon - start));
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    auto expect = [&](std::size_t n) {
        if (parts.size() != n) throw ValidationError("wrong parameter count in selection spec '" + context + "'");
    };
    auto num = [&](std::size_t i) { return detail::parse_number(parts[i], context); };
    const auto kind = parts[0];
    if (kind == "A") {
        expect(1);
        s.kind = SelectionKind::A;
    } else if (kind == "B") {
        expect(2);
        s.kind = SelectionKind::B;
        s.beta = num(1);
    } else if (kind == "C") {
        expect(2);
        s.kind = SelectionKind::C;
        s.gamma = num(1);
    } else if (kind == "D") {
        expect(3);
        s.kind = SelectionKind::D;
        s.beta = num(1);
        s.gamma = num(2);
    } else if (kind == "DGM") {
        expect(2);
        s.kind = SelectionKind::DGM;
        s.gamma = num(1);
    } else {
        throw ValidationError("unknown selection function in '" + context + "'");
    }
    validate(s);
    return s;
}

/// The five weight functions used for adjustment by default: A, B(3), C(3), D(1.5, 7), D(7, 1.5).
inline std::vector<SelectionSpec> default_selection_specs() {
    return {SelectionSpec::a(), SelectionSpec::b(3.0), SelectionSpec::c(3.0), SelectionSpec::d(1.5, 7.0),
            SelectionSpec::d(7.0, 1.5)};
}

} // namespace orb
