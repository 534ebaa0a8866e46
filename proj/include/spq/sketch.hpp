#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spq/norta.hpp"
#include "spq/partition.hpp"
#include "spq/rcl.hpp"

namespace spq::sketch {

struct SketchParams {
    long p_max = 30;          // max distinct tuples per package
    double gamma = -1.0;      // risk tolerance; negative = size via bisection
    double delta_gamma = 0.03;
    double delta_rho = 0.1;   // latent-correlation bump on refine failure
    size_t tau = 2000;        // refine bin capacity / duplicate budget bound
    rcl::RclParams rcl;
};

struct DuplicateSpec {
    int pid = 0;
    size_t d = 1;          // duplicate count
    double rho_bar = 1.0;  // target Pearson correlation
    std::map<std::string, double> kappa;           // fitted latent correlation per attr
    std::map<std::string, cdf::CdfPtr> marginals;  // representative distributions
    std::map<std::string, double> det;             // representative det values
    size_t size = 1;       // real member count |P_t|
    double capacity = 1;   // total multiplicity budget across the duplicates
};

struct RefinePlan {
    std::vector<std::vector<int>> groups;  // best-fit-decreasing bins of partition ids
    std::vector<int> order;                // visit order, revised by backtracking
};

// Duplicate ids are negative so they can flow through Package / ILP plumbing
// next to real tuple ids without collisions.
inline int64_t duplicate_id(int pid, size_t slot) {
    return -1 - (static_cast<int64_t>(pid) << 20) - static_cast<int64_t>(slot);
}
inline bool is_duplicate_id(int64_t id) { return id < 0; }
inline std::pair<int, size_t> decode_duplicate(int64_t id) {
    int64_t k = -1 - id;
    return {static_cast<int>(k >> 20), static_cast<size_t>(k & ((1 << 20) - 1))};
}

/// Scenario source over a mix of real tuples and NORTA duplicates. Duplicates
/// of one partition share each scenario's latent draws, so their values carry
/// the fitted equicorrelation while preserving the representative's marginal.
class SketchSource final : public rcl::ScenarioSource {
public:
    SketchSource(const StochasticRelation& rel, std::map<int, DuplicateSpec> specs);

    ScenarioMatrix scenarios(const std::string& attr, rng::Purpose purpose, size_t first,
                             size_t count, const std::vector<int64_t>& ids) const override;
    double det_value(int64_t id, const std::string& attr) const override;

    const std::map<int, DuplicateSpec>& specs() const { return specs_; }

private:
    const StochasticRelation* rel_;
    std::map<int, DuplicateSpec> specs_;
};

// Relative risk drop gamma(r, d) from spreading multiplicity P_max over d
// correlated duplicates instead of P_max singletons, estimated on m scenarios.
double gamma_risk_drop(const DuplicateSpec& spec, const spaql::RiskParam& r, size_t d, size_t m,
                       long p_max, uint64_t seed_tag);

// Smallest d in 1..P_max with gamma(r, d) <= Gamma.
size_t duplicates_for_constraint(const DuplicateSpec& spec, const spaql::RiskParam& r,
                                 double Gamma, size_t m, long p_max, uint64_t seed_tag);

// max over the query's risk constraints, capped at the partition size.
size_t number_of_duplicates(const DuplicateSpec& spec, const std::vector<spaql::RiskParam>& risks,
                            double Gamma, size_t m, long p_max, size_t partition_size,
                            uint64_t seed_tag);

// gamma(r, d) for every (partition, risk constraint, d = 1..P_max), cached so
// duplicate counts under any Gamma are table lookups.
struct GammaCurves {
    long p_max = 0;
    // [pid index][risk index][d-1]
    std::vector<std::vector<std::vector<double>>> g;

    size_t duplicates(size_t rep_index, double Gamma, size_t partition_size) const;
    size_t total(const std::vector<size_t>& partition_sizes, double Gamma) const;
};
GammaCurves compute_gamma_curves(const std::vector<DuplicateSpec>& specs,
                                 const std::vector<spaql::RiskParam>& risks, size_t m, long p_max,
                                 uint64_t seed_tag);

// Largest Gamma whose total duplicate count still fits max(tau, #reps);
// 0 when even Gamma=0 fits, 1 when Gamma=1 still exceeds the budget.
double initial_risk_tolerance(size_t tau, const GammaCurves& curves,
                              const std::vector<size_t>& partition_sizes);

struct SketchResult {
    std::optional<Package> package;  // over duplicate ids (real ids on the quick path)
    double omega = std::numeric_limits<double>::quiet_NaN();  // sketch objective, maximize sense
    size_t m = 0;                    // optimization scenarios the sketch settled on
    double gamma = 0;                // final risk tolerance
    std::map<int, DuplicateSpec> specs;
    bool proven_infeasible = false;
    std::string note;
};

SketchResult solve_sketch(const spaql::QuerySpec& q, const StochasticRelation& rel,
                          const partition::Partitioning& parts, const SketchParams& params,
                          const std::map<int, double>& kappa_bump = {});

RefinePlan bin_partitions(const Package& sketch_pkg, const partition::Partitioning& parts,
                          size_t tau);

struct RefineOutcome {
    std::optional<Package> package;  // real tuples only
    double omega = std::numeric_limits<double>::quiet_NaN();
    bool first_position_failure = false;  // caller should bump kappa and re-sketch
    std::vector<int> failed_group;        // partitions of the group that failed first
    size_t solves = 0;
    std::string note;
};

RefineOutcome refine(const SketchResult& sketch, const RefinePlan& plan,
                     const spaql::QuerySpec& q, const StochasticRelation& rel,
                     const partition::Partitioning& parts, const SketchParams& params);

struct SketchRefineResult {
    std::optional<Package> package;  // real tuples only
    double omega = std::numeric_limits<double>::quiet_NaN();      // maximize sense
    double omega_bar = std::numeric_limits<double>::quiet_NaN();  // sketch objective
    bool certified = false;
    bool proven_infeasible = false;
    std::string phase;  // "" on success; "sketch" / "refine" on null
    std::string note;
    size_t m_sketch = 0;
    double gamma = 0;
    double seconds_sketch = 0, seconds_refine = 0;
    rcl::TraceLog trace;  // degenerate path passthrough
};

SketchRefineResult stochastic_sketch_refine(const spaql::QuerySpec& q,
                                            const StochasticRelation& rel,
                                            const partition::Partitioning& parts,
                                            const SketchParams& params);

// Theorem-style lower bound (1-eps)^2 (omega_star - d_o * p_max).
double approximation_lower_bound(double omega_star, double epsilon, double d_o, long p_max);

// Irwin-Hall tail probability that a CVaR constraint with slack delta survives
// replacing s tuples by duplicates whose CVaR differs by at most d_c each.
double sketch_feasibility_probability(long s, double delta, double alpha, double d_c);

}  // namespace spq::sketch
