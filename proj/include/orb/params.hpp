#pragma once

#include <string>

namespace orb {

/// Random-effects parameters: pooled effect and between-study variance.
struct Params {
    double mu = 0.0;
    double tau2 = 0.0;
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double x) const { return lower <= x && x <= upper; }
    bool excludes_zero() const { return lower > 0.0 || upper < 0.0; }
};

struct FitResult {
    Params params;
    Interval ci_mu;
    Interval ci_tau2;
    double loglik = 0.0;
    bool converged = false;
    std::string method;
};

} // namespace orb
