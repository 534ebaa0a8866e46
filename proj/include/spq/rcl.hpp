#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spq/ilp_build.hpp"
#include "spq/relation.hpp"
#include "spq/risk.hpp"
#include "spq/spaql.hpp"

namespace spq::rcl {

struct RclParams {
    size_t m0 = 100;               // initial optimization scenarios
    size_t validation_size = 10000;
    double epsilon = 0.05;         // approximation slack
    double delta = 1e-2;           // bisection resolution
    double ilp_time_limit_sec = 120.0;
    size_t max_passes = 64;        // alternating-search passes per scenario level
    bool relax_integrality = false;
};

// One solver probe, for --trace output.
struct TraceRow {
    std::string phase;       // "quick", "alpha", "v", "probe"
    size_t constraint = 0;   // risk-constraint ordinal
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double v = std::numeric_limits<double>::quiet_NaN();
    bool ilp_feasible = false;
    bool feasible = false;   // package passes validation
    double omega = std::numeric_limits<double>::quiet_NaN();
};
using TraceLog = std::vector<TraceRow>;

/// Problem seen by the alternating parameter search. The production
/// implementation wraps the sample-average ILP; tests may plug in exact
/// oracles to exercise the search in isolation.
class ApsProblem {
public:
    virtual ~ApsProblem() = default;
    virtual size_t risk_count() const = 0;
    virtual double alpha_orig(size_t r) const = 0;  // canonical alpha_r
    virtual double v_orig(size_t r) const = 0;      // canonical V_r (upper end of V')
    virtual double v_lower(size_t r) const = 0;     // lower end of V' interval

    /// Solve the linearized problem at (alpha', V'). nullopt = infeasible.
    virtual std::optional<Package> solve_at(const std::vector<double>& alphas,
                                            const std::vector<double>& vs) = 0;

    struct Eval {
        bool feasible = false;      // every original constraint holds out-of-sample
        std::vector<char> risk_ok;  // per risk constraint
        double omega = 0;           // out-of-sample objective, maximize sense
        bool need_scenarios = false;
    };
    virtual Eval evaluate(const Package& pkg) = 0;
};

enum class ApsStatus { Done, NeedScenarios, NoProgress };

struct ApsResult {
    ApsStatus status = ApsStatus::NoProgress;
    std::optional<Package> best;  // best validated package seen, if any
    double best_omega = -std::numeric_limits<double>::infinity();
    std::vector<double> best_alpha, best_v;
};

/// Objective acceptance bar: omega_bar minus epsilon of its magnitude (equals
/// (1-epsilon)*omega_bar for nonnegative bounds, and stays reachable when the
/// bound is negative, e.g. minimization runs).
inline double approx_threshold(double omega_bar, double epsilon) {
    return omega_bar - epsilon * std::abs(omega_bar);
}

struct ApsState {
    std::vector<double> alpha, v;  // current params; always the last validated point
    std::vector<double> alpha_hi;  // relaxed end for the next alpha phase
    std::vector<double> v_lo;      // per-constraint V' floor
};

enum class PhaseStatus { Done, NeedScenarios, Found, NotFound };

/// One alpha phase: probe the relaxed corner (alpha_hi, v); if the package
/// fails validation, bisect the violated constraints' alphas down toward
/// alpha_orig until each interval is below delta, then adopt the feasible
/// side. Constraints that newly break mid-search join the active set and the
/// phase restarts (at most risk_count() times).
PhaseStatus alpha_search(ApsProblem& prob, ApsState& st, double delta, double epsilon,
                         double omega_bar, ApsResult& acc, TraceLog* trace = nullptr);

/// One V phase: from the validated point (alpha, v), bisect every V' down
/// toward v_lo, keeping the smallest bound that still validates.
PhaseStatus v_search(ApsProblem& prob, ApsState& st, double delta, double epsilon,
                     double omega_bar, ApsResult& acc, TraceLog* trace = nullptr);

/// Alternating search over (alpha', V'): an alpha-phase that raises each
/// alpha' as far as validation feasibility allows, then a V-phase that lowers
/// each V'; V' is then decreased by delta so the next alpha-phase starts
/// infeasible and regains feasibility. Stops when a validated package reaches
/// approx_threshold(omega_bar, epsilon), when the sample gap trips, or when a
/// full round moves no parameter by at least delta.
ApsResult aps_search(ApsProblem& prob, double delta, double epsilon, double omega_bar,
                     TraceLog* trace = nullptr, size_t max_passes = 64);

/// Linearized bound at the search origin: sum over the package of the
/// per-tuple empirical CVaR at level alpha.
double compute_v0_hat(double alpha, const ScenarioMatrix& scen, const Package& pkg);

/// |o - v| / max(|v|, 1e-9) > epsilon
bool relative_gap_exceeds(double opt_value, double val_value, double epsilon);

/// True when any risk or expectation statistic of the package differs between
/// the two scenario sets by more than epsilon (relative). `opt` and `val` map
/// each stochastic attribute used by the query to its scenario matrix.
bool check_saa_gap(const Package& pkg, const spaql::QuerySpec& q,
                   const std::map<std::string, ScenarioMatrix>& opt,
                   const std::map<std::string, ScenarioMatrix>& val, double epsilon);

struct RclResult {
    std::optional<Package> package;
    double omega = std::numeric_limits<double>::quiet_NaN();      // validation objective, maximize sense
    double omega_bar = std::numeric_limits<double>::quiet_NaN();  // bound used for the guarantee
    bool certified = false;          // omega >= (1-epsilon) * omega_bar out of sample
    bool proven_infeasible = false;  // deterministic core infeasible
    bool need_scenarios = false;     // S-variant: caller should enlarge the input
    bool budget_exhausted = false;   // scenario budget hit without certification
    size_t scenarios_used = 0;
    bool quick_path = false;
    std::string note;
    TraceLog trace;
};

/// Where tuples get their realizations. The base implementation draws from
/// the relation's generators; sketches substitute correlated duplicates.
class ScenarioSource {
public:
    virtual ~ScenarioSource() = default;
    virtual ScenarioMatrix scenarios(const std::string& attr, rng::Purpose purpose,
                                     size_t first, size_t count,
                                     const std::vector<int64_t>& ids) const = 0;
    virtual double det_value(int64_t id, const std::string& attr) const = 0;
};

class RelationSource final : public ScenarioSource {
public:
    explicit RelationSource(const StochasticRelation& rel) : rel_(&rel) {}
    ScenarioMatrix scenarios(const std::string& attr, rng::Purpose purpose, size_t first,
                             size_t count, const std::vector<int64_t>& ids) const override;
    double det_value(int64_t id, const std::string& attr) const override;

private:
    const StochasticRelation* rel_;
};

enum class RclVariant {
    Base,     // doubles scenarios in place, best effort at budget end
    Sketch,   // NeedScenarios bubbles up to the caller; no doubling
    Refine,   // fixed m, external omega_bar, no best effort
};

struct RclOptions {
    RclVariant variant = RclVariant::Base;
    std::optional<double> omega_bar_override;  // Refine: sketch objective
    size_t fixed_m = 0;                        // Refine: scenario count
    std::map<int64_t, double> ub_override;
    std::vector<std::pair<int64_t, double>> pins;
    std::vector<std::pair<std::vector<int64_t>, double>> group_capacity;
};

/// Sample-average instantiation of ApsProblem: linearized ILPs over the
/// optimization scenarios, validation on a lazily drawn held-out set.
class SaaProblem final : public ApsProblem {
public:
    SaaProblem(const spaql::QuerySpec& q, const ScenarioSource& src, std::vector<int64_t> slice,
               const RclParams& params, const RclOptions& opts = {});

    size_t risk_count() const override { return risks_.size(); }
    double alpha_orig(size_t r) const override { return risks_[r].alpha; }
    double v_orig(size_t r) const override { return risks_[r].v; }
    double v_lower(size_t r) const override { return v_lower_[r]; }
    std::optional<Package> solve_at(const std::vector<double>& alphas,
                                    const std::vector<double>& vs) override;
    Eval evaluate(const Package& pkg) override;

    /// Deterministic core only (no expected or risk rows). nullopt when that
    /// core is infeasible or unbounded (see quick_unbounded()).
    std::optional<Package> quick_solve();
    bool quick_unbounded() const { return unbounded_; }

    /// Recomputes each V' floor as sum_i cvar_{alpha_r}(t_i) * x_i for the
    /// warm-start package, capped at V_r.
    void refresh_origin(const Package& x_d);

    void extend();  // doubles the optimization scenario count
    size_t opt_m() const { return m_; }
    size_t validation_m() const { return params_.validation_size; }

private:
    const spaql::QuerySpec* q_;
    const ScenarioSource* src_;
    std::vector<int64_t> ids_;
    RclParams params_;
    RclOptions opts_;
    std::vector<spaql::RiskParam> risks_;
    size_t m_ = 0;
    std::map<std::string, ScenarioMatrix> opt_;                     // stoch attr -> matrix
    std::map<std::pair<std::string, int>, risk::CvarTable> tables_;  // (attr, sign)
    std::map<std::string, std::vector<double>> opt_means_;
    std::map<std::string, std::vector<double>> det_vals_;
    std::map<std::string, std::map<int64_t, std::vector<double>>> val_rows_;
    std::vector<double> v_lower_;
    bool unbounded_ = false;

    void rebuild_opt_side();
    const std::vector<double>& val_row(const std::string& attr, int64_t id);
    std::vector<double> opt_sums(const std::string& attr, const Package& pkg) const;
    std::vector<double> val_sums(const std::string& attr, const Package& pkg);
    ilp::ModelInputs base_inputs(bool probabilistic) const;
    std::optional<Package> run_model(const ilp::IlpModel& model);
};

/// Risk-constraint linearization solve over the tuples named in `slice`
/// (pass all ids for a whole relation; WHERE filtering happens upstream).
/// The query must already be normalized and bound.
RclResult rcl_solve(const spaql::QuerySpec& q, const ScenarioSource& src,
                    const std::vector<int64_t>& slice, const RclParams& params,
                    const RclOptions& opts = {});

/// Convenience: normalize + bind + filter + solve against a concrete relation.
RclResult rcl_solve(const spaql::QuerySpec& q, const StochasticRelation& rel,
                    const RclParams& params, const RclOptions& opts = {});

/// Tuple ids passing the WHERE clause, in relation order.
std::vector<int64_t> where_slice(const spaql::QuerySpec& q, const StochasticRelation& rel);

}  // namespace spq::rcl
