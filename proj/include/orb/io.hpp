#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orb/error.hpp"
#include "orb/meta_core.hpp"
#include "orb/simulation.hpp"

namespace orb::io {

enum class DatasetFormat { counts, effects };

inline constexpr std::string_view kCountsHeader = "study,n_treat,n_ctrl,events_treat,events_ctrl";
inline constexpr std::string_view kEffectsHeader = "study,n_total,y,sigma";
inline constexpr std::string_view kUnreportedToken = "Unrep";

inline DatasetFormat parse_format(std::string_view s) {
    if (s == "counts") return DatasetFormat::counts;
    if (s == "effects") return DatasetFormat::effects;
    throw ValidationError("unknown dataset format '" + std::string(s) + "' (expected counts or effects)");
}

/// 17 significant digits; NA for NaN, Inf/-Inf for infinities.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view s) {
    if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Inf") return std::numeric_limits<double>::infinity();
    if (s == "-Inf") return -std::numeric_limits<double>::infinity();
    return orb::detail::parse_number(s, s);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << content;
    if (!out) throw ValidationError("write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        auto field = line.substr(start, comma - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
        out.emplace_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Non-blank lines with their 1-based line numbers; carriage returns stripped.
inline std::vector<std::pair<int, std::string>> csv_lines(std::string_view text) {
    std::vector<std::pair<int, std::string>> lines;
    int number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        std::string line(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") != std::string::npos) lines.emplace_back(number, std::move(line));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return lines;
}

inline int parse_count(const std::string& s, int line, std::string_view column) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ValidationError("line " + std::to_string(line) + ": column " + std::string(column) +
                              ": expected an integer, got '" + s + "'");
    return v;
}

} // namespace detail

/// Parse a study table. counts: study,n_treat,n_ctrl,events_treat,events_ctrl with the
/// token Unrep in both event columns for an unreported outcome; effects:
/// study,n_total,y,sigma with y and sigma empty when unreported.
inline MetaAnalysis parse_dataset_text(std::string_view text, DatasetFormat format) {
    const auto lines = detail::csv_lines(text);
    if (lines.empty()) throw ValidationError("dataset is empty");
    const auto expected = format == DatasetFormat::counts ? kCountsHeader : kEffectsHeader;
    if (lines.front().second != expected)
        throw ValidationError("line " + std::to_string(lines.front().first) + ": header must be '" +
                              std::string(expected) + "'");
    if (lines.size() == 1) throw ValidationError("dataset has a header but no studies");

    MetaAnalysis ma;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [ln, line] = lines[i];
        const auto f = detail::split_csv_line(line);
        auto where = [ln = ln](const std::string& msg) { return "line " + std::to_string(ln) + ": " + msg; };
        if (f.size() != (format == DatasetFormat::counts ? 5u : 4u))
            throw ValidationError(where("expected " + std::to_string(format == DatasetFormat::counts ? 5 : 4) +
                                        " columns, got " + std::to_string(f.size())));
        if (f[0].empty()) throw ValidationError(where("empty study name"));
        Study s{.id = f[0]};
        try {
            if (format == DatasetFormat::counts) {
                s.n_treat = detail::parse_count(f[1], ln, "n_treat");
                s.n_ctrl = detail::parse_count(f[2], ln, "n_ctrl");
                const bool unrep_t = f[3] == kUnreportedToken;
                const bool unrep_c = f[4] == kUnreportedToken;
                if (unrep_t != unrep_c)
                    throw ValidationError(where("Unrep must appear in both event columns or neither"));
                if (!unrep_t) {
                    s.events_treat = detail::parse_count(f[3], ln, "events_treat");
                    s.events_ctrl = detail::parse_count(f[4], ln, "events_ctrl");
                    if (*s.events_treat > s.n_treat || *s.events_ctrl > s.n_ctrl || *s.events_treat < 0 ||
                        *s.events_ctrl < 0)
                        throw ValidationError(where("events outside [0, n] for study '" + s.id + "'"));
                    const auto e = log_rr_from_counts(*s.events_treat, s.n_treat, *s.events_ctrl, s.n_ctrl);
                    s.y = e.y;
                    s.sigma = e.sigma;
                    s.reported = true;
                }
            } else {
                const int n = detail::parse_count(f[1], ln, "n_total");
                if (n < 2) throw ValidationError(where("n_total must be at least 2"));
                // Only the total is known; it is split into two arms so n_total() round-trips.
                s.n_ctrl = n / 2;
                s.n_treat = n - s.n_ctrl;
                const bool has_y = !f[2].empty();
                const bool has_sigma = !f[3].empty();
                if (has_y != has_sigma) throw ValidationError(where("y and sigma must both be present or both empty"));
                if (has_y) {
                    s.y = orb::detail::parse_number(f[2], line);
                    s.sigma = orb::detail::parse_number(f[3], line);
                    s.reported = true;
                }
            }
            validate(s);
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            if (msg.starts_with("line ")) throw;
            throw ValidationError(where(msg));
        }
        ma.studies.push_back(std::move(s));
    }
    return ma;
}

inline MetaAnalysis parse_dataset(const std::string& path, DatasetFormat format) {
    try {
        return parse_dataset_text(read_file(path), format);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

/// Serialize in the given format. counts needs event counts for every reported study.
inline std::string write_dataset(const MetaAnalysis& ma, DatasetFormat format) {
    std::ostringstream out;
    out << (format == DatasetFormat::counts ? kCountsHeader : kEffectsHeader) << '\n';
    for (const auto& s : ma.studies) {
        if (format == DatasetFormat::counts) {
            out << s.id << ',' << s.n_treat << ',' << s.n_ctrl << ',';
            if (!s.reported) {
                out << kUnreportedToken << ',' << kUnreportedToken;
            } else {
                if (!s.events_treat || !s.events_ctrl)
                    throw ValidationError("study '" + s.id + "' has no event counts to write");
                out << *s.events_treat << ',' << *s.events_ctrl;
            }
        } else {
            out << s.id << ',' << s.n_total() << ',';
            if (s.reported) out << format_double(*s.y) << ',' << format_double(*s.sigma);
            else out << ',';
        }
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

inline constexpr std::string_view kAdjustHeader = "method,mu_hat,mu_lo,mu_hi,tau2_hat,tau2_lo,tau2_hi,loglik,converged";

inline std::string write_adjust_csv(std::span<const FitResult> fits) {
    std::ostringstream out;
    out << kAdjustHeader << '\n';
    for (const auto& f : fits) {
        out << f.method << ',' << format_double(f.params.mu) << ',' << format_double(f.ci_mu.lower) << ','
            << format_double(f.ci_mu.upper) << ',' << format_double(f.params.tau2) << ','
            << format_double(f.ci_tau2.lower) << ',' << format_double(f.ci_tau2.upper) << ','
            << format_double(f.loglik) << ',' << (f.converged ? "true" : "false") << '\n';
    }
    return out.str();
}

inline const std::vector<std::string>& perf_columns() {
    static const std::vector<std::string> cols{
        "K",        "mu",        "i2",  "gamma_dgm", "n_per_arm", "method",   "parameter",     "n_converged", "bias",
        "mcse_bias", "ese",      "mcse_ese", "mse",  "mcse_mse",  "coverage", "mcse_coverage", "power",       "mcse_power"};
    return cols;
}

inline std::string write_perf_csv(std::span<const PerfRow> rows) {
    std::ostringstream out;
    const auto& cols = perf_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : rows) {
        out << r.K << ',' << format_double(r.mu) << ',' << format_double(r.i2) << ',' << format_double(r.gamma_dgm)
            << ',' << r.n_per_arm << ',' << r.method << ',' << to_string(r.parameter) << ',' << r.n_converged;
        for (double v : {r.bias, r.mcse_bias, r.ese, r.mcse_ese, r.mse, r.mcse_mse, r.coverage, r.mcse_coverage,
                         r.power, r.mcse_power})
            out << ',' << format_double(v);
        out << '\n';
    }
    return out.str();
}

/// Parse a perf table by column name; a missing column is reported by name.
inline std::vector<PerfRow> read_perf_csv(std::string_view text) {
    const auto lines = detail::csv_lines(text);
    if (lines.empty()) throw ValidationError("perf table is empty");
    const auto header = detail::split_csv_line(lines.front().second);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
    for (const auto& c : perf_columns())
        if (!index.contains(c)) throw ValidationError("perf table is missing column '" + c + "'");

    std::vector<PerfRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [ln, line] = lines[i];
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            throw ValidationError("perf table line " + std::to_string(ln) + ": expected " +
                                  std::to_string(header.size()) + " fields");
        auto get = [&](const char* c) -> const std::string& { return f[index.at(c)]; };
        auto num = [&](const char* c) { return parse_double(get(c)); };
        PerfRow r;
        r.K = detail::parse_count(get("K"), ln, "K");
        r.mu = num("mu");
        r.i2 = num("i2");
        r.gamma_dgm = num("gamma_dgm");
        r.n_per_arm = detail::parse_count(get("n_per_arm"), ln, "n_per_arm");
        r.method = get("method");
        const auto& p = get("parameter");
        if (p != "mu" && p != "tau2")
            throw ValidationError("perf table line " + std::to_string(ln) + ": unknown parameter '" + p + "'");
        r.parameter = p == "mu" ? TargetParameter::mu : TargetParameter::tau2;
        r.n_converged = detail::parse_count(get("n_converged"), ln, "n_converged");
        r.bias = num("bias");
        r.mcse_bias = num("mcse_bias");
        r.ese = num("ese");
        r.mcse_ese = num("mcse_ese");
        r.mse = num("mse");
        r.mcse_mse = num("mcse_mse");
        r.coverage = num("coverage");
        r.mcse_coverage = num("mcse_coverage");
        r.power = num("power");
        r.mcse_power = num("mcse_power");
        rows.push_back(std::move(r));
    }
    return rows;
}

inline constexpr std::string_view kRawHeader =
    "K,mu,i2,gamma_dgm,n_per_arm,rep,k_reported,method,mu_hat,mu_lo,mu_hi,tau2_hat,tau2_lo,tau2_hi,converged";

inline std::string write_raw_csv(std::span<const ScenarioConfig> grid, const std::vector<std::vector<Replication>>& raw) {
    std::ostringstream out;
    out << kRawHeader << '\n';
    for (std::size_t s = 0; s < raw.size(); ++s) {
        const auto& c = grid[s];
        for (const auto& rep : raw[s]) {
            for (const auto& e : rep.estimates) {
                out << c.K << ',' << format_double(c.mu) << ',' << format_double(c.i2) << ','
                    << format_double(c.gamma_dgm) << ',' << c.n_per_arm << ',' << rep.rep_index << ','
                    << rep.k_reported << ',' << e.method << ',' << format_double(e.params.mu) << ','
                    << format_double(e.ci_mu.lower) << ',' << format_double(e.ci_mu.upper) << ','
                    << format_double(e.params.tau2) << ',' << format_double(e.ci_tau2.lower) << ','
                    << format_double(e.ci_tau2.upper) << ',' << (e.converged ? "true" : "false") << '\n';
            }
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Simulation run description, read from flat JSON:
///   {"K": [5, 15, 30], "mu": [...], "i2": [...], "gamma_dgm": [1.5, 0.5],
///    "n_per_arm": 50, "n_sim": 3200, "seed": 20240101,
///    "methods": ["naive", "complete", "adj:A", "adj:DGM"], "alpha": 0.05,
///    "level": 0.95, "emit_raw": false}
/// The method "adj:DGM" without a parameter uses each scenario's own gamma_dgm.
struct RunConfig {
    std::vector<int> K;
    std::vector<double> mu;
    std::vector<double> i2;
    std::vector<double> gamma_dgm;
    int n_per_arm = 50;
    int n_sim = 0;
    std::uint64_t seed = 1;
    std::vector<std::string> methods;
    double alpha = 0.05;
    double level = 0.95;
    bool emit_raw = false;
    std::string out_dir;
};

inline std::vector<std::string> default_methods() {
    return {"naive", "complete", "adj:A", "adj:B:3", "adj:C:3", "adj:D:1.5:7", "adj:D:7:1.5", "adj:DGM"};
}

inline RunConfig parse_run_config(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    static const std::vector<std::string> known{"K",    "mu",      "i2",    "gamma_dgm", "n_per_arm", "n_sim",
                                                "seed", "methods", "alpha", "level",     "emit_raw",  "out_dir"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ValidationError("config: unknown key '" + key + "'");

    RunConfig c;
    try {
        auto axis = [&](const char* key, auto& dst) {
            if (!j.contains(key)) throw ValidationError(std::string("config: missing grid axis '") + key + "'");
            j.at(key).get_to(dst);
            if (dst.empty()) throw ValidationError(std::string("config: grid axis '") + key + "' is empty");
        };
        axis("K", c.K);
        axis("mu", c.mu);
        axis("i2", c.i2);
        axis("gamma_dgm", c.gamma_dgm);
        if (!j.contains("n_sim")) throw ValidationError("config: missing 'n_sim'");
        c.n_sim = j.at("n_sim").get<int>();
        c.n_per_arm = j.value("n_per_arm", c.n_per_arm);
        c.seed = j.value("seed", c.seed);
        c.methods = j.value("methods", default_methods());
        c.alpha = j.value("alpha", c.alpha);
        c.level = j.value("level", c.level);
        c.emit_raw = j.value("emit_raw", c.emit_raw);
        c.out_dir = j.value("out_dir", c.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (c.methods.empty()) throw ValidationError("config: 'methods' is empty");
    return c;
}

/// Scenario list in a fixed order: gamma_dgm, then K, then I2, then mu (innermost).
inline std::vector<ScenarioConfig> expand_grid(const RunConfig& rc) {
    std::vector<ScenarioConfig> grid;
    for (double gamma : rc.gamma_dgm)
        for (int k : rc.K)
            for (double i2 : rc.i2)
                for (double mu : rc.mu) {
                    ScenarioConfig c{.K = k, .mu = mu, .i2 = i2, .gamma_dgm = gamma, .n_per_arm = rc.n_per_arm,
                                     .n_sim = rc.n_sim, .seed = rc.seed, .methods = {}, .alpha = rc.alpha,
                                     .level = rc.level};
                    for (const auto& m : rc.methods)
                        c.methods.push_back(m == "adj:DGM" ? MethodDescriptor{MethodDescriptor::Kind::adjusted,
                                                                              SelectionSpec::dgm(gamma)}
                                                           : parse_method(m, rc.alpha));
                    validate(c);
                    grid.push_back(std::move(c));
                }
    return grid;
}

inline nlohmann::json manifest_json(const RunConfig& rc, std::size_t n_scenarios, std::string_view version) {
    return nlohmann::json{{"version", version},     {"seed", rc.seed},       {"n_sim", rc.n_sim},
                          {"n_per_arm", rc.n_per_arm}, {"alpha", rc.alpha},  {"level", rc.level},
                          {"methods", rc.methods},  {"emit_raw", rc.emit_raw},
                          {"grid", {{"K", rc.K}, {"mu", rc.mu}, {"i2", rc.i2}, {"gamma_dgm", rc.gamma_dgm}}},
                          {"n_scenarios", n_scenarios}};
}

} // namespace orb::io
