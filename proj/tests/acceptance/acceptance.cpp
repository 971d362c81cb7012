// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//
//   acceptance --data-dir <dir> --cli <orbmeta> --work-dir <dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "orb/orb.hpp"

using namespace orb;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s  %-34s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void quadrature_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int points = 0;
    for (auto side : {PSide::one, PSide::two}) {
        auto spec = SelectionSpec::a();
        spec.p_side = side;
        for (double mu : {-1.0, -0.3, 0.0, 0.5, 1.5})
            for (double tau2 : {0.0, 0.01, 0.1, 0.5, 2.0})
                for (double sigma : {0.1, 0.2, 0.3, 0.7, 1.0}) {
                    const Params p{mu, tau2};
                    const double s2 = sigma * sigma;
                    worst = std::max(worst, std::abs(unreported_term_quadrature(p, s2, spec) -
                                                     unreported_term_closed_form(p, s2, spec)));
                    ++points;
                }
    }
    const double secs = seconds_since(t0);
    report(worst < 1e-8 && secs < 1.0, "quadrature_vs_closed_form",
           fmt("max|diff|=%.2e over %d points (tol 1e-8), %.3fs (limit 1s)", worst, points, secs));
}

void complementarity() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240101);
    std::uniform_real_distribution<double> mu(-1.0, 1.5), tau2(0.0, 1.0), sigma(0.05, 1.0);
    double worst = 0.0;
    for (const auto& spec : default_selection_specs())
        for (int i = 0; i < 50; ++i) {
            const Params p{mu(rng), tau2(rng)};
            const double s = sigma(rng);
            worst = std::max(worst, std::abs(std::exp(reported_weight_term(p, s, spec)) +
                                             std::exp(unreported_term(p, s * s, spec)) - 1.0));
        }
    const double secs = seconds_since(t0);
    report(worst < 1e-10 && secs < 1.0, "complementarity",
           fmt("max|sum-1|=%.2e over 5 specs x 50 points (tol 1e-10), %.3fs (limit 1s)", worst, secs));
}

void epilepsy(const fs::path& data_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sf = io::parse_dataset((data_dir / "topiramate_seizure_freedom.csv").string(), io::DatasetFormat::counts);
    const auto half = io::parse_dataset((data_dir / "topiramate_50pct_reduction.csv").string(), io::DatasetFormat::counts);

    const auto naive_sf = fit_naive(sf);
    const auto naive_half = fit_naive(half);
    std::vector<FitResult> adj_sf, adj_half;
    for (const auto& spec : default_selection_specs()) {
        adj_sf.push_back(fit_orb_adjusted(sf, spec));
        adj_half.push_back(fit_orb_adjusted(half, spec));
    }
    const double secs = seconds_since(t0);

    report(naive_sf.ci_mu.excludes_zero() && naive_half.ci_mu.excludes_zero() && naive_sf.converged &&
               naive_half.converged,
           "epilepsy_a_naive_significant",
           fmt("seizure freedom [%.3f, %.3f], 50%% reduction [%.3f, %.3f]", naive_sf.ci_mu.lower,
               naive_sf.ci_mu.upper, naive_half.ci_mu.lower, naive_half.ci_mu.upper));

    bool all_overlap = true;
    std::string lows;
    for (const auto& f : adj_sf) {
        all_overlap = all_overlap && f.converged && f.ci_mu.contains(0.0);
        lows += fmt("%s:[%.3f,%.3f] ", f.method.c_str(), f.ci_mu.lower, f.ci_mu.upper);
    }
    report(all_overlap, "epilepsy_b_adjusted_overlap_zero", lows);

    const double a = adj_sf[0].params.mu, b = adj_sf[1].params.mu, c = adj_sf[2].params.mu;
    report(b <= a && a <= c && c <= naive_sf.params.mu, "epilepsy_c_ordering",
           fmt("B:3=%.4f <= A=%.4f <= C:3=%.4f <= naive=%.4f", b, a, c, naive_sf.params.mu));

    double shift = 0.0;
    for (const auto& f : adj_half) shift = std::max(shift, std::abs(f.params.mu - naive_half.params.mu));
    report(shift < 0.1 && secs < 10.0, "epilepsy_d_minor_shift",
           fmt("max|adj-naive|=%.4f (limit 0.1), all fits %.2fs (limit 10s)", shift, secs));
}

struct Sim {
    std::vector<ScenarioConfig> grid;
    std::vector<PerfRow> perf;

    const PerfRow& row(int K, double mu, double i2, const std::string& method, TargetParameter p) const {
        for (const auto& r : perf)
            if (r.K == K && r.mu == mu && r.i2 == i2 && r.method == method && r.parameter == p) return r;
        throw std::runtime_error(fmt("no perf row for K=%d mu=%g i2=%g %s", K, mu, i2, method.c_str()));
    }
};

Sim run_simulation() {
    std::vector<MethodDescriptor> methods{parse_method("naive"), parse_method("complete"),
                                          parse_method("adj:DGM:1.5")};
    Sim sim;
    auto add = [&](int K, double mu, double i2) {
        sim.grid.push_back({.K = K, .mu = mu, .i2 = i2, .gamma_dgm = 1.5, .n_per_arm = 50, .n_sim = 500,
                            .seed = 20240101, .methods = methods});
    };
    for (int K : {5, 15, 30})
        for (double i2 : {0.0, 0.9})
            for (double mu : {0.0, 0.8}) add(K, mu, i2);
    add(15, 0.4, 0.5);

    const auto t0 = std::chrono::steady_clock::now();
    const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    sim.perf = run_grid(sim.grid, threads).perf;
    std::printf("      simulation: %zu scenarios x 500 replications on %u threads in %.1fs\n", sim.grid.size(),
                threads, seconds_since(t0));
    return sim;
}

void orb_impact(const Sim& sim) {
    using enum TargetParameter;
    const auto& lo = sim.row(15, 0.0, 0.0, "naive", mu);
    const auto& hi = sim.row(15, 0.0, 0.9, "naive", mu);
    const auto& lo8 = sim.row(15, 0.8, 0.0, "naive", mu);
    const auto& hi8 = sim.row(15, 0.8, 0.9, "naive", mu);
    const bool positive = lo.bias > 3 * lo.mcse_bias && hi.bias > 3 * hi.mcse_bias;
    report(positive, "sim_naive_bias_positive",
           fmt("K=15 mu=0: I2=0 bias %.4f (3*MCSE %.4f), I2=0.9 bias %.4f (3*MCSE %.4f)", lo.bias,
               3 * lo.mcse_bias, hi.bias, 3 * hi.mcse_bias));
    report(hi.bias > lo.bias, "sim_naive_bias_grows_with_i2",
           fmt("K=15 mu=0: I2=0.9 %.4f > I2=0 %.4f", hi.bias, lo.bias));
    report(lo8.bias < lo.bias && hi8.bias < hi.bias, "sim_naive_bias_falls_with_mu",
           fmt("K=15 I2=0: mu=0.8 %.4f < mu=0 %.4f; I2=0.9: mu=0.8 %.4f < mu=0 %.4f", lo8.bias, lo.bias,
               hi8.bias, hi.bias));
}

void correct_spec(const Sim& sim) {
    using enum TargetParameter;
    bool ok = true;
    std::string detail;
    for (int K : {15, 30})
        for (double i2 : {0.0, 0.9}) {
            const auto& r = sim.row(K, 0.0, i2, "adj:DGM:1.5", mu);
            ok = ok && std::abs(r.bias) <= 2 * r.mcse_bias;
            detail += fmt("K=%d I2=%g: %.4f (2*MCSE %.4f); ", K, i2, r.bias, 2 * r.mcse_bias);
        }
    report(ok, "sim_correct_spec_unbiased", detail);

    bool reduced = true;
    detail.clear();
    for (double i2 : {0.0, 0.9}) {
        const auto& adj = sim.row(5, 0.0, i2, "adj:DGM:1.5", mu);
        const auto& naive = sim.row(5, 0.0, i2, "naive", mu);
        reduced = reduced && std::abs(adj.bias) < std::abs(naive.bias);
        detail += fmt("K=5 I2=%g: |adj| %.4f < |naive| %.4f; ", i2, std::abs(adj.bias), std::abs(naive.bias));
    }
    report(reduced, "sim_correct_spec_k5_reduced", detail);
}

void coverage_power(const Sim& sim) {
    using enum TargetParameter;
    const auto& naive = sim.row(30, 0.0, 0.9, "naive", mu);
    const auto& adj = sim.row(30, 0.0, 0.9, "adj:DGM:1.5", mu);
    report(naive.coverage < 0.90, "sim_naive_undercoverage",
           fmt("K=30 I2=0.9 mu=0: naive coverage %.3f (limit < 0.90)", naive.coverage));
    report(naive.power > adj.power, "sim_naive_power_inflated",
           fmt("naive power %.3f > adjusted power %.3f", naive.power, adj.power));
    report(std::abs(adj.coverage - 0.95) <= 3 * adj.mcse_coverage, "sim_adjusted_coverage",
           fmt("adjusted coverage %.3f within 0.95 +/- %.3f", adj.coverage, 3 * adj.mcse_coverage));
}

void heterogeneity(const Sim& sim) {
    const auto& r = sim.row(15, 0.4, 0.5, "naive", TargetParameter::tau2);
    report(r.bias < -2 * r.mcse_bias, "sim_tau2_underestimated",
           fmt("K=15 mu=0.4 I2=0.5: naive tau2 bias %.5f (-2*MCSE %.5f)", r.bias, -2 * r.mcse_bias));
}

void determinism(const fs::path& cli, const fs::path& work) {
    fs::create_directories(work);
    const auto config = work / "determinism.json";
    io::write_file(config.string(), R"({"K": [5, 15], "mu": [0, 0.4], "i2": [0, 0.9], "gamma_dgm": [1.5],
  "n_sim": 20, "seed": 7, "methods": ["naive", "complete", "adj:DGM", "adj:B:3"]})");
    auto run = [&](int threads) {
        const auto out = work / ("threads" + std::to_string(threads));
        fs::remove_all(out);
        const std::string cmd = "\"" + cli.string() + "\" simulate --config \"" + config.string() + "\" --threads " +
                                std::to_string(threads) + " --out-dir \"" + out.string() + "\" > /dev/null";
        const int rc = std::system(cmd.c_str());
        return std::make_pair(rc, rc == 0 ? io::read_file((out / "perf.csv").string()) : std::string());
    };
    const auto [rc1, one] = run(1);
    const auto [rc8, eight] = run(8);
    report(rc1 == 0 && rc8 == 0 && !one.empty() && one == eight, "determinism_threads_1_vs_8",
           fmt("exit codes %d/%d, perf.csv %zu vs %zu bytes, identical=%s", rc1, rc8, one.size(), eight.size(),
               one == eight ? "yes" : "no"));
}

void full_scale() {
    const auto rc = io::parse_run_config(R"({"K": [5, 15, 30], "mu": [0, 0.2, 0.4, 0.6, 0.8],
  "i2": [0, 0.25, 0.5, 0.75, 0.9], "gamma_dgm": [1.5, 0.5], "n_sim": 3200, "seed": 20240101})");
    const auto grid = io::expand_grid(rc);
    bool ok = grid.size() == 150;
    for (const auto& c : grid) ok = ok && c.n_sim == 3200;
    report(ok, "full_scale_grid_supported",
           fmt("%zu scenarios x 3200 replications expand and validate (run outside CI)", grid.size()));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite"};
    std::string data_dir, cli_path, work_dir;
    app.add_option("--data-dir", data_dir)->required();
    app.add_option("--cli", cli_path)->required();
    app.add_option("--work-dir", work_dir)->required();
    CLI11_PARSE(app, argc, argv);

    const auto t0 = std::chrono::steady_clock::now();
    quadrature_oracle();
    complementarity();
    epilepsy(data_dir);
    const auto sim = run_simulation();
    orb_impact(sim);
    correct_spec(sim);
    coverage_power(sim);
    heterogeneity(sim);
    determinism(cli_path, work_dir);
    full_scale();
    std::printf("%s: %d failure(s), %.1fs\n", failures ? "FAILED" : "ALL PASSED", failures, seconds_since(t0));
    return failures ? 1 : 0;
}
