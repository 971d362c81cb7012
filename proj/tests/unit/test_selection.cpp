// Unit tests for p-values, the selection weight families and their text form.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "orb/selection.hpp"

using namespace orb;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<SelectionSpec> all_specs() {
    std::vector<SelectionSpec> out = default_selection_specs();
    out.push_back(SelectionSpec::dgm(1.5));
    out.push_back(SelectionSpec::d(2.0, 2.0, 0.2));
    const auto n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
        auto two = out[i];
        two.p_side = PSide::two;
        out.push_back(two);
    }
    return out;
}

} // namespace

TEST_CASE("p_value", "[selection]") {
    CHECK_THAT(p_value(0.0, 1.0, PSide::one), WithinAbs(0.5, 1e-15));
    CHECK_THAT(p_value(1.959963984540054, 1.0, PSide::one), WithinAbs(0.025, 1e-12));
    CHECK_THAT(p_value(-1.959963984540054, 1.0, PSide::two), WithinAbs(0.05, 1e-12));
    CHECK_THAT(p_value(0.3, 0.2, PSide::one), WithinAbs(0.066807201268858, 1e-12));
    CHECK(p_value(0.0, 1.0, PSide::two) == 1.0);
    // Large positive effects give tiny one-sided p-values without rounding to 0 early.
    CHECK(p_value(8.0, 1.0, PSide::one) > 0.0);
    CHECK(p_value(8.0, 1.0, PSide::one) < 1e-14);
}

TEST_CASE("eval_weight examples", "[selection]") {
    const auto a = SelectionSpec::a();
    CHECK(eval_weight(a, 0.01) == 1.0);
    CHECK(eval_weight(a, 0.05) == 1.0);  // boundary counts as significant
    CHECK(eval_weight(a, 0.0500001) == 0.0);

    const auto b = SelectionSpec::b(3.0);
    CHECK(eval_weight(b, 0.03) == 1.0);
    CHECK_THAT(eval_weight(b, 0.1), WithinAbs(0.125, 1e-15));
    CHECK_THAT(eval_weight(b, 0.5), WithinAbs(0.001, 1e-15));

    const auto c = SelectionSpec::c(3.0);
    CHECK(eval_weight(c, 0.0) == 1.0);
    CHECK_THAT(eval_weight(c, 0.025), WithinAbs(0.875, 1e-15));
    CHECK(eval_weight(c, 0.05) == 0.0);
    CHECK(eval_weight(c, 0.2) == 0.0);

    const auto d = SelectionSpec::d(1.5, 7.0);
    CHECK(eval_weight(d, 0.0) == 1.0);
    CHECK_THAT(eval_weight(d, 0.05), WithinAbs(0.5, 1e-15));
    CHECK_THAT(eval_weight(d, 0.025), WithinAbs(1.0 - 0.5 * std::pow(0.5, 7.0), 1e-15));
    CHECK_THAT(eval_weight(d, 0.2), WithinAbs(0.5 * std::pow(0.25, 1.5), 1e-15));

    const auto dgm = SelectionSpec::dgm(1.5);
    CHECK(eval_weight(dgm, 0.0) == 1.0);
    CHECK_THAT(eval_weight(dgm, 0.5), WithinAbs(0.2431167344342142, 1e-15));
    CHECK_THAT(eval_weight(dgm, 1.0), WithinAbs(std::exp(-4.0), 1e-15));
}

TEST_CASE("weight families are non-increasing in p and stay in [0, 1]", "[selection][property]") {
    for (const auto& spec : all_specs()) {
        INFO(to_string(spec));
        double prev = eval_weight(spec, 0.0);
        for (int i = 0; i <= 100000; ++i) {
            const double p = i / 100000.0;
            const double w = eval_weight(spec, p);
            REQUIRE(w >= 0.0);
            REQUIRE(w <= 1.0);
            REQUIRE(w <= prev + 1e-15);
            prev = w;
        }
    }
}

TEST_CASE("B and D are continuous at alpha", "[selection][property]") {
    const double eps = 1e-9;
    for (const auto& spec : {SelectionSpec::b(3.0), SelectionSpec::b(0.5), SelectionSpec::d(1.5, 7.0),
                             SelectionSpec::d(7.0, 1.5), SelectionSpec::d(2.0, 2.0, 0.1)}) {
        INFO(to_string(spec));
        CHECK_THAT(eval_weight(spec, spec.alpha - eps), WithinAbs(eval_weight(spec, spec.alpha + eps), 1e-6));
    }
}

TEST_CASE("weight_as_function_of_y", "[selection]") {
    const auto w = weight_as_function_of_y(SelectionSpec::a(), 0.2);
    const double crit = 0.2 * 1.6448536269514722;
    CHECK(w(crit + 1e-9) == 1.0);
    CHECK(w(crit - 1e-6) == 0.0);
    CHECK(w(-1.0) == 0.0);

    auto two = SelectionSpec::a();
    two.p_side = PSide::two;
    const auto w2 = weight_as_function_of_y(two, 0.2);
    CHECK(w2(-0.5) == 1.0);
    CHECK(w2(0.5) == 1.0);
    CHECK(w2(0.0) == 0.0);

    const auto wd = weight_as_function_of_y(SelectionSpec::dgm(1.5), 1.0);
    CHECK_THAT(wd(0.0), WithinAbs(0.2431167344342142, 1e-15));

    CHECK_THROWS_AS(weight_as_function_of_y(SelectionSpec::a(), 0.0), ValidationError);
}

TEST_CASE("weight_breakpoints", "[selection]") {
    const auto one = weight_breakpoints(SelectionSpec::b(3.0), 0.5);
    REQUIRE(one.size() == 1);
    CHECK_THAT(one[0], WithinAbs(0.5 * 1.6448536269514722, 1e-12));
    auto two_spec = SelectionSpec::c(3.0);
    two_spec.p_side = PSide::two;
    const auto two = weight_breakpoints(two_spec, 0.5);
    REQUIRE(two.size() == 2);
    CHECK_THAT(two[1], WithinAbs(0.5 * 1.959963984540054, 1e-12));
    CHECK(two[0] == -two[1]);
    CHECK(weight_breakpoints(SelectionSpec::dgm(1.5), 0.5).empty());
}

TEST_CASE("selection spec text form", "[selection]") {
    CHECK(to_string(SelectionSpec::a()) == "A");
    CHECK(to_string(SelectionSpec::b(3.0)) == "B:3");
    CHECK(to_string(SelectionSpec::d(1.5, 7.0)) == "D:1.5:7");
    CHECK(to_string(SelectionSpec::dgm(1.5)) == "DGM:1.5");

    for (const auto& spec : all_specs()) {
        if (spec.omega_alpha != 0.5) continue;  // omega is not part of the text form
        CHECK(parse_selection_spec(to_string(spec)) == spec);
    }

    const auto parsed = parse_selection_spec("C:2.5@two", 0.1);
    CHECK(parsed.kind == SelectionKind::C);
    CHECK(*parsed.gamma == 2.5);
    CHECK(parsed.alpha == 0.1);
    CHECK(parsed.p_side == PSide::two);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int i = 0; i < 200; ++i) {
        const auto spec = SelectionSpec::d(std::round(u(rng) * 100) / 100, std::round(u(rng) * 100) / 100);
        CHECK(parse_selection_spec(to_string(spec)) == spec);
    }
}

TEST_CASE("selection spec errors", "[selection]") {
    for (const char* bad : {"", "E", "B", "B:", "B:x", "B:-1", "C:0", "D:1.5", "D:1:2:3", "A:1", "A@three",
                            "DGM", "b:3"}) {
        INFO(bad);
        CHECK_THROWS_AS(parse_selection_spec(bad), ValidationError);
    }
    CHECK_THROWS_AS(parse_selection_spec("A", 1.0), ValidationError);
    CHECK_THROWS_AS(parse_selection_spec("A", 0.0), ValidationError);
    CHECK_THROWS_WITH(parse_selection_spec("B:x"), Catch::Matchers::ContainsSubstring("B:x"));
}
