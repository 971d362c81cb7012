#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "orb/error.hpp"
#include "orb/io.hpp"
#include "orb/meta_core.hpp"
#include "orb/orb_likelihood.hpp"
#include "orb/simulation.hpp"

namespace orb::cli {

inline constexpr std::string_view kVersion = "0.1.0";

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kInputError = 2, kNumericalFailure = 3 };

struct AdjustArgs {
    std::string data;
    io::DatasetFormat format = io::DatasetFormat::counts;
    std::vector<std::string> select;
    double alpha = 0.05;
    double level = 0.95;
    LikelihoodForm form = LikelihoodForm::simplified;
    std::optional<std::string> out;
};

namespace detail {

inline std::string fixed(double v, int digits = 3) {
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Text forest plot: one line per fit, estimate and interval on a shared log-RR axis.
inline void print_forest(std::ostream& os, std::span<const FitResult> fits, double level) {
    double lo = 0.0, hi = 0.0;
    for (const auto& f : fits) {
        if (std::isfinite(f.ci_mu.lower)) lo = std::min(lo, f.ci_mu.lower);
        if (std::isfinite(f.ci_mu.upper)) hi = std::max(hi, f.ci_mu.upper);
    }
    constexpr int width = 41;
    auto column = [&](double x) {
        const double t = (std::clamp(x, lo, hi) - lo) / (hi - lo > 0 ? hi - lo : 1.0);
        return static_cast<int>(std::lround(t * (width - 1)));
    };
    char head[160];
    std::snprintf(head, sizeof head, "%-14s %8s %20s %8s %20s  %s\n", "method", "log-RR",
                  (fixed(100 * level, 0) + "% PL CI").c_str(), "RR", "RR CI", "forest (log scale)");
    os << head;
    for (const auto& f : fits) {
        std::string bar(width, ' ');
        const int zero = column(0.0);
        for (int c = column(f.ci_mu.lower); c <= column(f.ci_mu.upper); ++c) bar[c] = '-';
        bar[zero] = '|';
        bar[column(f.params.mu)] = 'o';
        const std::string ci = "[" + fixed(f.ci_mu.lower) + ", " + fixed(f.ci_mu.upper) + "]";
        const std::string rr_ci =
            "[" + fixed(std::exp(f.ci_mu.lower)) + ", " + fixed(std::exp(f.ci_mu.upper)) + "]";
        char line[256];
        std::snprintf(line, sizeof line, "%-14s %8s %20s %8s %20s  %s%s\n", f.method.c_str(),
                      fixed(f.params.mu).c_str(), ci.c_str(), fixed(std::exp(f.params.mu)).c_str(), rr_ci.c_str(),
                      bar.c_str(), f.converged ? "" : "  (not converged)");
        os << line;
    }
}

} // namespace detail

/// Naive fit plus one adjusted fit per selection spec; CSV to --out, forest table to `out`.
inline int cmd_adjust(const AdjustArgs& args, std::ostream& out, std::ostream& err) {
    std::vector<FitResult> fits;
    try {
        const auto ma = io::parse_dataset(args.data, args.format);
        std::vector<SelectionSpec> specs;
        for (const auto& s : args.select) specs.push_back(parse_selection_spec(s, args.alpha));
        if (!(args.level > 0.0 && args.level < 1.0)) throw ValidationError("--level must be in (0, 1)");
        if (ma.n_reported() < 2) throw ValidationError("at least 2 reported studies are required");

        fits.push_back(fit_naive(ma, args.level));
        for (const auto& spec : specs) fits.push_back(fit_orb_adjusted(ma, spec, args.form, args.level));
        if (args.out) io::write_file(*args.out, io::write_adjust_csv(fits));
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    detail::print_forest(out, fits, args.level);
    const bool any = std::any_of(fits.begin(), fits.end(), [](const FitResult& f) { return f.converged; });
    if (!any) {
        err << "error: no method converged\n";
        return kNumericalFailure;
    }
    return kOk;
}

struct SimulateArgs {
    std::string config;
    unsigned threads = 1;
    std::optional<std::string> out_dir;
};

/// Run the configured grid and write perf.csv, optionally raw.csv, and manifest.json.
/// ORB_SEED in the environment overrides the configured seed.
inline int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    io::RunConfig rc;
    std::vector<ScenarioConfig> grid;
    std::filesystem::path dir;
    try {
        rc = io::parse_run_config(io::read_file(args.config));
        if (const char* env = std::getenv("ORB_SEED"); env && *env) {
            const std::string s(env);
            std::uint64_t seed = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
            if (ec != std::errc() || ptr != s.data() + s.size())
                throw ValidationError("ORB_SEED must be an unsigned integer, got '" + s + "'");
            rc.seed = seed;
        }
        grid = io::expand_grid(rc);
        dir = args.out_dir ? *args.out_dir : (rc.out_dir.empty() ? std::string(".") : rc.out_dir);
        std::filesystem::create_directories(dir);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    GridResult result;
    try {
        result = run_grid(grid, args.threads, rc.emit_raw);
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalFailure;
    }
    try {
        io::write_file((dir / "perf.csv").string(), io::write_perf_csv(result.perf));
        if (rc.emit_raw) io::write_file((dir / "raw.csv").string(), io::write_raw_csv(grid, result.raw));
        auto manifest = io::manifest_json(rc, grid.size(), kVersion);
        manifest["threads"] = args.threads;
        io::write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    out << "wrote " << result.perf.size() << " performance rows for " << grid.size() << " scenarios to "
        << dir.string() << '\n';
    return kOk;
}

struct SummarizeArgs {
    std::string perf;
    std::string metric;
    std::string parameter;
};

/// Pivot a perf table: one block per (gamma, K, I2), rows are true mu, columns are methods.
inline int cmd_summarize(const SummarizeArgs& args, std::ostream& out, std::ostream& err) {
    static const std::vector<std::string> metrics{"bias", "coverage", "power", "mse", "ese"};
    if (std::find(metrics.begin(), metrics.end(), args.metric) == metrics.end()) {
        err << "error: unknown metric '" << args.metric << "' (expected bias, coverage, power, mse or ese)\n";
        return kInputError;
    }
    if (args.parameter != "mu" && args.parameter != "tau2") {
        err << "error: unknown parameter '" << args.parameter << "' (expected mu or tau2)\n";
        return kInputError;
    }
    if (args.metric == "power" && args.parameter == "tau2") {
        err << "error: power is defined for mu only\n";
        return kInputError;
    }
    std::vector<PerfRow> rows;
    try {
        rows = io::read_perf_csv(io::read_file(args.perf));
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    const auto target = args.parameter == "mu" ? TargetParameter::mu : TargetParameter::tau2;
    auto value = [&](const PerfRow& r) {
        if (args.metric == "bias") return r.bias;
        if (args.metric == "coverage") return r.coverage;
        if (args.metric == "power") return r.power;
        if (args.metric == "mse") return r.mse;
        return r.ese;
    };

    struct BlockKey {
        double gamma;
        int K;
        double i2;
        bool operator==(const BlockKey&) const = default;
    };
    std::vector<BlockKey> blocks;
    std::vector<std::string> methods;
    for (const auto& r : rows) {
        if (r.parameter != target) continue;
        const BlockKey key{r.gamma_dgm, r.K, r.i2};
        if (std::find(blocks.begin(), blocks.end(), key) == blocks.end()) blocks.push_back(key);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    }
    for (const auto& b : blocks) {
        out << "== " << args.metric << " of " << args.parameter << " | gamma=" << orb::detail::format_number(b.gamma)
            << " K=" << b.K << " I2=" << orb::detail::format_number(b.i2) << " ==\n";
        std::vector<double> mus;
        for (const auto& r : rows)
            if (r.parameter == target && BlockKey{r.gamma_dgm, r.K, r.i2} == b &&
                std::find(mus.begin(), mus.end(), r.mu) == mus.end())
                mus.push_back(r.mu);
        std::sort(mus.begin(), mus.end());
        char cell[64];
        std::snprintf(cell, sizeof cell, "%-8s", "mu");
        out << cell;
        for (const auto& m : methods) {
            std::snprintf(cell, sizeof cell, " %14s", m.c_str());
            out << cell;
        }
        out << '\n';
        for (double mu : mus) {
            std::snprintf(cell, sizeof cell, "%-8s", orb::detail::format_number(mu).c_str());
            out << cell;
            for (const auto& m : methods) {
                std::string v = "-";
                for (const auto& r : rows)
                    if (r.parameter == target && BlockKey{r.gamma_dgm, r.K, r.i2} == b && r.mu == mu && r.method == m)
                        v = detail::fixed(value(r), 4);
                std::snprintf(cell, sizeof cell, " %14s", v.c_str());
                out << cell;
            }
            out << '\n';
        }
        out << '\n';
    }
    return kOk;
}

} // namespace orb::cli
