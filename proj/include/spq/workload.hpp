#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spq/partition.hpp"
#include "spq/rcl.hpp"
#include "spq/sketch.hpp"

namespace spq::workload {

// One tuple per (company, sell-after interval); det Price shared per company,
// stochastic Gain under geometric Brownian motion with synthetic priors.
StochasticRelation gen_portfolio(size_t companies, size_t half_day_steps, uint64_t seed);

// Deterministic Tax plus Gaussian-noise Price and Quantity per tuple.
StochasticRelation gen_tpch_like(size_t n, uint64_t seed);

// Central-limit inputs for one constraint: pooled per-selection mean and
// variance of the constrained attribute plus the package cardinality used.
struct ConstraintStat {
    size_t constraint_index = 0;
    double mu = 0;
    double sigma2 = 0;
    double s = 1;
};

struct HardnessReport {
    std::vector<size_t> constraint_index;
    std::vector<double> prob;  // per-constraint satisfaction probability
    double h = 0;              // -sum log prob; +inf when any prob underflows
    double s = 1;
};

// P(sum over s picks of N(mu, sigma2) meets the bound), one factor per
// constraint listed in stats; count constraints are skipped by the caller.
HardnessReport hardness(const spaql::QuerySpec& q, const std::vector<ConstraintStat>& stats);

// Pooled attribute moments per constraint (law of total variance across the
// slice) and the LP-relaxed deterministic-core cardinality.
std::vector<ConstraintStat> derive_constraint_stats(const spaql::QuerySpec& q,
                                                    const StochasticRelation& rel);

// Full-SAA baseline at validation scale: big-M indicator rows per VaR
// constraint, Rockafellar-Uryasev rows per CVaR constraint, means elsewhere.
// Refuses (budget_exhausted) when the scenario matrix would not fit memory.
rcl::RclResult naive_solve(const spaql::QuerySpec& q, const StochasticRelation& rel,
                           const rcl::RclParams& params);

struct VerifyResult {
    bool feasible = false;
    std::vector<char> risk_ok;  // canonical risk constraints, in order
    double omega = std::numeric_limits<double>::quiet_NaN();  // maximize sense
};

// Re-evaluates every constraint of q for the package on freshly generated
// scenarios of the given purpose/size. extra_seed perturbs the stream so a
// robustness set can be decoupled from the relation seed.
VerifyResult verify_package(const spaql::QuerySpec& q, const StochasticRelation& rel,
                            const Package& pkg, rng::Purpose purpose, size_t m,
                            uint64_t extra_seed = 0);

// Optimistic surrogate bound: risk constraints relaxed to their expected-sum
// form with exact generator means, integrality dropped. NaN when unavailable.
double lp_relaxation_bound(const spaql::QuerySpec& q, const StochasticRelation& rel);

struct RunReport {
    std::string method;  // rcl | sketch-refine | naive-saa
    std::string status;  // solved | unsolvable | budget
    std::string phase, note;
    double seconds_total = 0;
    std::map<std::string, double> phase_seconds;
    size_t m_opt = 0, m_validation = 0;
    // user-facing objective sense (MINIMIZE reported as the cost itself)
    double omega = std::numeric_limits<double>::quiet_NaN();
    double omega_bar = std::numeric_limits<double>::quiet_NaN();
    double omega_lp = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::quiet_NaN();  // (omega - omega_lp) / omega_lp
    bool certified = false;
    bool feasible_validation = false;
    bool feasible_test = false;
    size_t package_size = 0;
    double package_total = 0;
};

struct QueryRun {
    std::string method = "rcl";  // rcl | sketchrefine | naive
    rcl::RclParams rcl;
    sketch::SketchParams sketch;
    const partition::Partitioning* partitioning = nullptr;
    uint64_t test_seed = 0;   // extra entropy for the robustness scenario set
    bool want_lp = false;     // fill QueryOutcome::lp_text
};

struct QueryOutcome {
    int exit_code = 0;  // 0 solved, 2 unsolvable, 3 budget/no package
    RunReport report;
    std::optional<Package> package;
    rcl::TraceLog trace;
    std::string lp_text;  // linearized master model at canonical parameters
};

QueryOutcome run_query(const spaql::QuerySpec& q, const StochasticRelation& rel,
                       const QueryRun& cfg);

}  // namespace spq::workload
