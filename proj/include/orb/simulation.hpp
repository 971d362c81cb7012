#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "orb/error.hpp"
#include "orb/meta_core.hpp"
#include "orb/orb_likelihood.hpp"
#include "orb/selection.hpp"

namespace orb {

/// One estimator applied to every replication of a scenario.
struct MethodDescriptor {
    enum class Kind { naive, complete, adjusted };
    Kind kind = Kind::naive;
    std::optional<SelectionSpec> spec;  // adjusted only

    std::string label() const {
        switch (kind) {
        case Kind::naive: return "naive";
        case Kind::complete: return "complete";
        case Kind::adjusted: return adjusted_method_label(*spec, LikelihoodForm::simplified);
        }
        return {};
    }
    bool operator==(const MethodDescriptor&) const = default;
};

/// "naive", "complete" or "adj:<selection spec>".
inline MethodDescriptor parse_method(std::string_view text, double alpha = 0.05) {
    if (text == "naive") return {MethodDescriptor::Kind::naive, std::nullopt};
    if (text == "complete") return {MethodDescriptor::Kind::complete, std::nullopt};
    if (text.starts_with("adj:"))
        return {MethodDescriptor::Kind::adjusted, parse_selection_spec(text.substr(4), alpha)};
    throw ValidationError("unknown method '" + std::string(text) + "'");
}

/// One cell of the simulation grid.
struct ScenarioConfig {
    int K = 15;
    double mu = 0.0;
    double i2 = 0.0;
    double gamma_dgm = 1.5;
    int n_per_arm = 50;
    int n_sim = 100;
    std::uint64_t seed = 1;
    std::vector<MethodDescriptor> methods;
    double alpha = 0.05;
    double level = 0.95;
};

inline void validate(const ScenarioConfig& c) {
    if (c.K < 2) throw ValidationError("scenario: K must be at least 2");
    if (c.n_sim < 2) throw ValidationError("scenario: n_sim must be at least 2");
    if (c.n_per_arm < 2) throw ValidationError("scenario: n_per_arm must be at least 2");
    if (!(c.i2 >= 0.0 && c.i2 < 1.0)) throw ValidationError("scenario: i2 must be in [0, 1)");
    if (!(c.gamma_dgm > 0.0)) throw ValidationError("scenario: gamma_dgm must be positive");
    if (!(c.level > 0.0 && c.level < 1.0)) throw ValidationError("scenario: level must be in (0, 1)");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ValidationError("scenario: alpha must be in (0, 1)");
    if (c.methods.empty()) throw ValidationError("scenario: no methods to fit");
}

/// tau2 = sigma2_typical * I2 / (1 - I2).
inline double i2_to_tau2(double i2, double sigma2_typical) {
    if (!(i2 >= 0.0 && i2 < 1.0)) throw ValidationError("i2_to_tau2: i2 must be in [0, 1)");
    if (!(sigma2_typical > 0.0)) throw ValidationError("i2_to_tau2: sigma2_typical must be positive");
    return sigma2_typical * i2 / (1.0 - i2);
}

/// Within-study variance of the data-generating model, 2/n with n per arm.
inline double dgm_within_variance(int n_per_arm) { return 2.0 / n_per_arm; }

inline double scenario_tau2(const ScenarioConfig& c) {
    return i2_to_tau2(c.i2, dgm_within_variance(c.n_per_arm));
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t absorb(std::uint64_t state, std::uint64_t word) { return splitmix64(state ^ word); }

} // namespace detail

/// Seed of the RNG owned by one (scenario, replication) unit. The key chains
/// splitmix64 over: master seed, K, n_per_arm, the bit patterns of mu, I2 and gamma,
/// then the replication index. It does not depend on grid position or thread count.
inline std::uint64_t replication_key(const ScenarioConfig& c, std::uint64_t rep_index) {
    std::uint64_t s = detail::splitmix64(c.seed);
    s = detail::absorb(s, static_cast<std::uint64_t>(c.K));
    s = detail::absorb(s, static_cast<std::uint64_t>(c.n_per_arm));
    s = detail::absorb(s, std::bit_cast<std::uint64_t>(c.mu));
    s = detail::absorb(s, std::bit_cast<std::uint64_t>(c.i2));
    s = detail::absorb(s, std::bit_cast<std::uint64_t>(c.gamma_dgm));
    return detail::absorb(s, rep_index);
}

using Rng = std::mt19937_64;

/// Draw a complete random-effects meta-analysis: theta_i ~ N(mu, tau2),
/// y_i ~ N(theta_i, 2/n), reported sigma_i^2 ~ chi2_{2n-2} / ((n-1) n).
inline MetaAnalysis generate_meta(const ScenarioConfig& c, Rng& rng) {
    const double tau = std::sqrt(scenario_tau2(c));
    const double within_sd = std::sqrt(dgm_within_variance(c.n_per_arm));
    const double n = c.n_per_arm;
    std::normal_distribution<double> standard(0.0, 1.0);
    std::chi_squared_distribution<double> chisq(2.0 * n - 2.0);

    MetaAnalysis ma;
    ma.studies.reserve(static_cast<std::size_t>(c.K));
    for (int i = 0; i < c.K; ++i) {
        const double theta = c.mu + tau * standard(rng);
        const double y = theta + within_sd * standard(rng);
        const double sigma2 = chisq(rng) / ((n - 1.0) * n);
        Study s{.id = "S" + std::to_string(i + 1), .n_treat = c.n_per_arm, .n_ctrl = c.n_per_arm};
        s.y = y;
        s.sigma = std::sqrt(sigma2);
        s.reported = true;
        ma.studies.push_back(std::move(s));
    }
    return ma;
}

/// Censor outcomes: each study stays reported with probability exp(-4 p^gamma),
/// p the one-sided p-value from its own y and sigma. Sample sizes are kept.
inline MetaAnalysis apply_orb(const MetaAnalysis& ma, double gamma_dgm, Rng& rng) {
    const auto dgm = SelectionSpec::dgm(gamma_dgm);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    MetaAnalysis out = ma;
    for (auto& s : out.studies) {
        if (!s.reported) continue;
        const double keep = eval_weight(dgm, p_value(*s.y, *s.sigma, PSide::one));
        if (unif(rng) < keep) continue;
        s.reported = false;
        s.y.reset();
        s.sigma.reset();
        s.events_treat.reset();
        s.events_ctrl.reset();
    }
    return out;
}

struct SimulatedData {
    MetaAnalysis complete;
    MetaAnalysis censored;
    int attempts = 1;
};

inline constexpr int kMaxOrbAttempts = 1'000'000;

/// Generate and censor, regenerating the whole meta-analysis until at least two
/// outcomes are reported.
inline SimulatedData simulate_censored(const ScenarioConfig& c, Rng& rng) {
    for (int attempt = 1; attempt <= kMaxOrbAttempts; ++attempt) {
        auto complete = generate_meta(c, rng);
        auto censored = apply_orb(complete, c.gamma_dgm, rng);
        if (censored.n_reported() >= 2) return {std::move(complete), std::move(censored), attempt};
    }
    throw NumericalError("ORB censoring left fewer than 2 reported studies in every attempt");
}

struct MethodEstimate {
    std::string method;
    Params params;
    Interval ci_mu;
    Interval ci_tau2;
    bool converged = false;
};

struct Replication {
    std::uint64_t rep_index = 0;
    int k_reported = 0;
    std::vector<MethodEstimate> estimates;  // cfg.methods order
};

inline FitResult fit_method(const MethodDescriptor& m, const SimulatedData& data, const ScenarioConfig& c) {
    switch (m.kind) {
    case MethodDescriptor::Kind::naive:
        return fit_naive(data.censored, c.level);
    case MethodDescriptor::Kind::complete: {
        auto fit = fit_naive(data.complete, c.level);
        fit.method = "complete";
        return fit;
    }
    case MethodDescriptor::Kind::adjusted: {
        auto spec = *m.spec;
        spec.alpha = c.alpha;
        return fit_orb_adjusted(data.censored, spec, LikelihoodForm::simplified, c.level);
    }
    }
    return {};
}

inline Replication run_replication(const ScenarioConfig& c, std::uint64_t rep_index) {
    Rng rng(replication_key(c, rep_index));
    const auto data = simulate_censored(c, rng);
    Replication rep{rep_index, static_cast<int>(data.censored.n_reported()), {}};
    rep.estimates.reserve(c.methods.size());
    for (const auto& m : c.methods) {
        MethodEstimate est{.method = m.label()};
        try {
            const auto fit = fit_method(m, data, c);
            est.params = fit.params;
            est.ci_mu = fit.ci_mu;
            est.ci_tau2 = fit.ci_tau2;
            est.converged = fit.converged;
        } catch (const NumericalError&) {
            est.converged = false;
        }
        rep.estimates.push_back(std::move(est));
    }
    return rep;
}

enum class TargetParameter { mu, tau2 };

inline std::string_view to_string(TargetParameter p) { return p == TargetParameter::mu ? "mu" : "tau2"; }

/// Performance of one method for one parameter over a scenario's replications.
struct PerfRow {
    int K = 0;
    double mu = 0.0;
    double i2 = 0.0;
    double gamma_dgm = 0.0;
    int n_per_arm = 0;
    std::string method;
    TargetParameter parameter = TargetParameter::mu;
    int n_converged = 0;
    double bias = 0.0, ese = 0.0, mse = 0.0, coverage = 0.0, power = 0.0;
    double mcse_bias = 0.0, mcse_ese = 0.0, mcse_mse = 0.0, mcse_coverage = 0.0, mcse_power = 0.0;
};

/// Bias, ESE, MSE, coverage and power (mu only) with Monte Carlo standard errors,
/// over converged replications. Fewer than two converged fits give NaN metrics.
inline std::vector<PerfRow> aggregate(const ScenarioConfig& c, std::span<const Replication> reps) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<PerfRow> rows;
    for (std::size_t m = 0; m < c.methods.size(); ++m) {
        for (auto param : {TargetParameter::mu, TargetParameter::tau2}) {
            const double truth = param == TargetParameter::mu ? c.mu : scenario_tau2(c);
            PerfRow row{.K = c.K, .mu = c.mu, .i2 = c.i2, .gamma_dgm = c.gamma_dgm, .n_per_arm = c.n_per_arm,
                        .method = c.methods[m].label(), .parameter = param};

            std::vector<double> est;
            std::size_t covered = 0, significant = 0;
            for (const auto& r : reps) {
                const auto& e = r.estimates.at(m);
                if (!e.converged) continue;
                const double v = param == TargetParameter::mu ? e.params.mu : e.params.tau2;
                const auto& ci = param == TargetParameter::mu ? e.ci_mu : e.ci_tau2;
                est.push_back(v);
                covered += ci.contains(truth) ? 1 : 0;
                significant += e.ci_mu.excludes_zero() ? 1 : 0;
            }
            row.n_converged = static_cast<int>(est.size());
            if (est.size() < 2) {
                row.bias = row.ese = row.mse = row.coverage = row.power = nan;
                row.mcse_bias = row.mcse_ese = row.mcse_mse = row.mcse_coverage = row.mcse_power = nan;
                rows.push_back(row);
                continue;
            }

            const double n = static_cast<double>(est.size());
            double mean = 0.0, mse = 0.0;
            for (double v : est) {
                mean += v / n;
                mse += (v - truth) * (v - truth) / n;
            }
            double var = 0.0, var_sq = 0.0;
            for (double v : est) {
                var += (v - mean) * (v - mean) / (n - 1.0);
                const double d = (v - truth) * (v - truth) - mse;
                var_sq += d * d / (n - 1.0);
            }
            row.bias = mean - truth;
            row.ese = std::sqrt(var);
            row.mse = mse;
            row.coverage = static_cast<double>(covered) / n;
            row.mcse_bias = row.ese / std::sqrt(n);
            row.mcse_ese = row.ese / std::sqrt(2.0 * (n - 1.0));
            row.mcse_mse = std::sqrt(var_sq) / std::sqrt(n);
            row.mcse_coverage = std::sqrt(row.coverage * (1.0 - row.coverage) / n);
            if (param == TargetParameter::mu) {
                row.power = static_cast<double>(significant) / n;
                row.mcse_power = std::sqrt(row.power * (1.0 - row.power) / n);
            } else {
                row.power = row.mcse_power = nan;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

struct GridResult {
    std::vector<PerfRow> perf;                    // scenario order, then method, then parameter
    std::vector<std::vector<Replication>> raw;    // per scenario; empty unless requested
};

/// Run every (scenario, replication) unit on `parallelism` threads. Each unit owns
/// its RNG (see replication_key) and writes to its own slot, so output does not
/// depend on scheduling.
inline GridResult run_grid(std::span<const ScenarioConfig> grid, unsigned parallelism, bool keep_raw = false) {
    for (const auto& c : grid) validate(c);
    std::vector<std::vector<Replication>> reps(grid.size());
    std::vector<std::pair<std::size_t, std::uint64_t>> units;
    for (std::size_t s = 0; s < grid.size(); ++s) {
        reps[s].resize(static_cast<std::size_t>(grid[s].n_sim));
        for (int r = 0; r < grid[s].n_sim; ++r) units.emplace_back(s, static_cast<std::uint64_t>(r));
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t u = next++; u < units.size(); u = next++) {
            const auto [s, r] = units[u];
            try {
                reps[s][r] = run_replication(grid[s], r);
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    const auto& c = grid[s];
                    failure = std::make_exception_ptr(NumericalError(
                        "scenario K=" + std::to_string(c.K) + " mu=" + detail::format_number(c.mu) +
                        " i2=" + detail::format_number(c.i2) + " gamma=" + detail::format_number(c.gamma_dgm) +
                        " replication " + std::to_string(r) + ": " + e.what()));
                }
                next = units.size();
            }
        }
    };
    const unsigned n_threads = std::max(1u, parallelism);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
    }
    if (failure) std::rethrow_exception(failure);

    GridResult out;
    for (std::size_t s = 0; s < grid.size(); ++s) {
        auto rows = aggregate(grid[s], reps[s]);
        out.perf.insert(out.perf.end(), rows.begin(), rows.end());
    }
    if (keep_raw) out.raw = std::move(reps);
    return out;
}

} // namespace orb
