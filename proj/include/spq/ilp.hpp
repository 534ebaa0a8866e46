#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace spq::ilp {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Rel { Leq, Geq, Eq };

struct Row {
    std::vector<std::pair<int, double>> coeffs;  // (var index, coefficient)
    Rel rel = Rel::Leq;
    double rhs = 0;
    std::string name;
};

// Maximization model. Variable lower bounds are >= 0 by construction of the
// package formulation; auxiliary continuous variables shift signs instead.
struct IlpModel {
    int var_count = 0;
    std::vector<double> objective;
    std::vector<Row> rows;
    std::vector<double> lo, hi;       // hi may be +inf
    std::vector<char> integrality;    // 1 = integer
    std::vector<std::string> var_names;

    int add_var(double lo_, double hi_, bool integral, double obj, std::string name = {});
    void pin(int var, double value);  // lo = hi = value
    void check() const;               // invariant validation, throws
};

enum class Status { Optimal, Infeasible, Unbounded, TimeLimit };

struct SolveResult {
    Status status = Status::TimeLimit;
    std::optional<std::vector<double>> assignment;
    std::optional<double> objective;
    long node_count = 0;
    double wall_seconds = 0;
    std::string limit_reason;  // set when status == TimeLimit
};

struct LpResult {
    Status status = Status::TimeLimit;
    std::vector<double> x;
    double objective = 0;
};

/// Primal simplex (bounded variables, two phases, Bland's rule) on the model
/// with integrality ignored.
LpResult solve_lp_relaxation(const IlpModel& model);

/// Exact branch-and-bound: best-bound node selection, most-fractional
/// branching, LP-rounding incumbent at the root. Relative MIP gap 1e-6,
/// feasibility tolerance 1e-7, integrality tolerance 1e-6.
SolveResult solve(const IlpModel& model, std::chrono::duration<double> time_limit);

/// Pluggable solver seam; the built-in engine is the default.
struct SolverBackend {
    virtual ~SolverBackend() = default;
    virtual SolveResult solve(const IlpModel& model, std::chrono::duration<double> limit) = 0;
};
std::shared_ptr<SolverBackend> builtin_solver();

/// LP-format text dump for debugging (--dump-lp).
std::string dump_lp(const IlpModel& model);

}  // namespace spq::ilp
