#pragma once

#include <span>
#include <vector>

#include "spq/relation.hpp"

namespace spq::risk {

enum class Tail { Lower, Upper };

/// Empirical alpha-quantile: the ceil(alpha*m)-th smallest sample (1-based).
/// Throws std::domain_error on an empty sample list.
double estimate_var(double alpha, std::span<const double> samples);

/// SAA conditional value-at-risk. Lower tail: mean of the k = floor(alpha*m)
/// smallest samples, or the minimum when k = 0. Upper tail mirrors on the k
/// largest (maximum when k = 0).
double estimate_cvar(double alpha, std::span<const double> samples, Tail tail = Tail::Lower);

/// Per-tuple lower-tail CVaR coefficients: element i = estimate_cvar(alpha, row i).
std::vector<double> lcvar_coefficients(double alpha, const ScenarioMatrix& scen);

/// Package sum per scenario: element j = sum_i values[i][j] * x_i.
/// Throws std::domain_error when a package tuple-id is not a matrix row.
std::vector<double> package_scenario_sums(const Package& pkg, const ScenarioMatrix& scen);

enum class RiskKind { VaR, CvarLower, CvarUpper };
enum class Dir { Geq, Leq };

struct RiskMetric {
    RiskKind kind = RiskKind::VaR;
    double alpha = 1.0;  // in (0, 1]
    Dir dir = Dir::Geq;
    double bound = 0.0;  // V
};

struct RiskEval {
    double value = 0;
    bool satisfied = false;
};

/// Evaluates one risk metric on the package-sum samples. Comparisons against
/// the bound are exact (no epsilon); bisection slack lives in delta upstream.
RiskEval evaluate_risk(const Package& pkg, const RiskMetric& metric, const ScenarioMatrix& scen);

/// Mean absolute distance between paired sample vectors: mean |xs_j - ys_j|.
double mad(std::span<const double> xs, std::span<const double> ys);

/// E|X - Y| for X - Y ~ N(delta, sigma^2) (folded normal); |delta| at sigma=0.
double folded_normal_mad(double delta, double sigma);

/// Sample size for MAD estimation: ceil((pi/2 - 1)(d + eps)^2 z_{1-p}^2 / eps^2).
long mad_required_samples(double d, double eps, double p);

// --------------------------------------------------------------------------
// CvarTable: per-tuple sorted sample rows + prefix sums, so the L-CVaR
// coefficient vector for any alpha costs O(n) instead of O(n m log m). The
// alpha-search probes dozens of alphas against the same scenario set.
// --------------------------------------------------------------------------
struct CvarTable {
    size_t m = 0;
    std::vector<int64_t> ids;
    std::vector<double> sorted;  // n x m, each row ascending
    std::vector<double> prefix;  // n x (m+1), prefix[i][k] = sum of k smallest

    static CvarTable build(const ScenarioMatrix& scen);
    double cvar(size_t row, double alpha) const;  // lower tail
    std::vector<double> coefficients(double alpha) const;
};

}  // namespace spq::risk
