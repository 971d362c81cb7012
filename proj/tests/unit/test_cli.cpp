// Unit tests for the command handlers behind the orbmeta executable.

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "orb/cli.hpp"

using namespace orb;
using Catch::Matchers::ContainsSubstring;

namespace fs = std::filesystem;

namespace {

std::string data_path(const char* name) { return std::string(ORB_DATA_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("orb_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

cli::AdjustArgs adjust_args(const char* dataset) {
    cli::AdjustArgs a;
    a.data = data_path(dataset);
    a.select = {"A", "B:3", "C:3", "D:1.5:7", "D:7:1.5"};
    return a;
}

const char* kSmallConfig = R"({"K": [5, 15], "mu": [0, 0.4], "i2": [0.5], "gamma_dgm": [1.5],
  "n_sim": 4, "seed": 17, "methods": ["naive", "complete", "adj:DGM"]})";

} // namespace

TEST_CASE("adjust on seizure freedom", "[cli]") {
    const auto dir = scratch("adjust");
    auto args = adjust_args("topiramate_seizure_freedom.csv");
    args.out = (dir / "adjust.csv").string();
    std::ostringstream out, err;
    REQUIRE(cli::cmd_adjust(args, out, err) == cli::kOk);

    const auto csv = io::read_file(*args.out);
    const auto lines = io::detail::csv_lines(csv);
    REQUIRE(lines.size() == 7);
    CHECK(lines[0].second == io::kAdjustHeader);
    CHECK(lines[1].second.starts_with("naive,"));
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const auto f = io::detail::split_csv_line(lines[i].second);
        INFO(lines[i].second);
        CHECK(f[0].starts_with("adj:"));
        CHECK(io::parse_double(f[2]) < 0.0);  // adjusted lower bound crosses zero
        CHECK(f[8] == "true");
    }
    CHECK_THAT(out.str(), ContainsSubstring("forest"));
    CHECK_THAT(out.str(), ContainsSubstring("adj:D:7:1.5"));
}

TEST_CASE("adjust on 50% reduction keeps the naive interval away from zero", "[cli]") {
    auto args = adjust_args("topiramate_50pct_reduction.csv");
    args.select = {"A"};
    const auto fit = fit_naive(io::parse_dataset(args.data, args.format));
    CHECK(fit.ci_mu.excludes_zero());
    std::ostringstream out, err;
    CHECK(cli::cmd_adjust(args, out, err) == cli::kOk);
}

TEST_CASE("adjust input errors exit with 2", "[cli]") {
    std::ostringstream out, err;
    auto bad_spec = adjust_args("topiramate_seizure_freedom.csv");
    bad_spec.select = {"Q:1"};
    CHECK(cli::cmd_adjust(bad_spec, out, err) == cli::kInputError);
    CHECK_THAT(err.str(), ContainsSubstring("Q:1"));

    auto missing = adjust_args("no_such_file.csv");
    CHECK(cli::cmd_adjust(missing, out, err) == cli::kInputError);

    auto level = adjust_args("topiramate_seizure_freedom.csv");
    level.level = 95;
    CHECK(cli::cmd_adjust(level, out, err) == cli::kInputError);
}

TEST_CASE("simulate and summarize", "[cli]") {
    const auto dir = scratch("simulate");
    io::write_file((dir / "config.json").string(), kSmallConfig);
    ::unsetenv("ORB_SEED");

    auto run = [&](unsigned threads, const fs::path& out_dir) {
        std::ostringstream out, err;
        cli::SimulateArgs a{.config = (dir / "config.json").string(), .threads = threads, .out_dir = out_dir.string()};
        const int rc = cli::cmd_simulate(a, out, err);
        INFO(err.str());
        REQUIRE(rc == cli::kOk);
        return io::read_file((out_dir / "perf.csv").string());
    };
    const auto one = run(1, dir / "t1");
    const auto four = run(4, dir / "t4");
    CHECK(one == four);
    CHECK(fs::exists(dir / "t1" / "manifest.json"));
    CHECK_FALSE(fs::exists(dir / "t1" / "raw.csv"));
    // 4 scenarios x 3 methods x 2 parameters
    CHECK(io::read_perf_csv(one).size() == 24);

    ::setenv("ORB_SEED", "18", 1);
    const auto reseeded = run(1, dir / "seed18");
    ::unsetenv("ORB_SEED");
    CHECK(reseeded != one);

    std::ostringstream out, err;
    cli::SummarizeArgs s{.perf = (dir / "t1" / "perf.csv").string(), .metric = "bias", .parameter = "mu"};
    REQUIRE(cli::cmd_summarize(s, out, err) == cli::kOk);
    std::size_t blocks = 0;
    for (std::size_t pos = 0; (pos = out.str().find("== bias", pos)) != std::string::npos; ++pos) ++blocks;
    CHECK(blocks == 2);  // |K| x |I2|
    CHECK_THAT(out.str(), ContainsSubstring("adj:DGM:1.5"));

    s.metric = "power";
    s.parameter = "tau2";
    CHECK(cli::cmd_summarize(s, out, err) == cli::kInputError);
    s.metric = "median";
    s.parameter = "mu";
    CHECK(cli::cmd_summarize(s, out, err) == cli::kInputError);
    s.metric = "coverage";
    s.perf = (dir / "config.json").string();
    CHECK(cli::cmd_summarize(s, out, err) == cli::kInputError);
}

TEST_CASE("simulate input errors exit with 2", "[cli]") {
    const auto dir = scratch("simulate_bad");
    io::write_file((dir / "config.json").string(), R"({"K": [5], "mu": [0], "i2": [0], "gamma_dgm": [1.5]})");
    std::ostringstream out, err;
    cli::SimulateArgs a{.config = (dir / "config.json").string(), .threads = 1, .out_dir = dir.string()};
    CHECK(cli::cmd_simulate(a, out, err) == cli::kInputError);
    CHECK_THAT(err.str(), ContainsSubstring("n_sim"));

    ::setenv("ORB_SEED", "abc", 1);
    io::write_file((dir / "config.json").string(), kSmallConfig);
    CHECK(cli::cmd_simulate(a, out, err) == cli::kInputError);
    ::unsetenv("ORB_SEED");
}
