#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spq/relation.hpp"
#include "spq/risk.hpp"

namespace spq::spaql {

using risk::Dir;

struct ParseError : std::runtime_error {
    int line, col;
    ParseError(const std::string& msg, int l, int c)
        : std::runtime_error(msg + " (line " + std::to_string(l) + ", col " + std::to_string(c) + ")"),
          line(l), col(c) {}
};

struct SemanticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// WHERE predicate over deterministic attributes
struct Pred {
    enum Kind { Cmp, And, Or, Not } kind = Cmp;
    std::string attr, op;  // op in { <=, >=, <, >, =, != }
    double value = 0;
    std::vector<Pred> kids;
};
bool eval_pred(const Pred& p, const Tuple& t);

// --- constraints -----------------------------------------------------------

enum class CountRel { Leq, Geq, Eq };

struct CCount {
    CountRel rel;
    double bound;
};
struct CDetSum {
    std::string attr;
    Dir dir;
    double bound;
};
struct CExpSum {
    std::string attr;
    Dir dir;
    double bound;
};
// SUM(attr) dir bound WITH PROBABILITY prob_dir prob.
// After normalize(): canonical VaR_{alpha}(sign * attr) >= v with
// sign = (neg ? -1 : +1); the surface fields are rewritten to match.
struct CVaR {
    std::string attr;
    Dir dir;
    double bound;
    Dir prob_dir;
    double prob;
    bool neg = false;
    double alpha = 0, v = 0;  // canonical params (valid once normalized)
};
// EXPECTED SUM(attr) dir bound IN {LOWER|UPPER} alpha TAIL.
// Canonical form: lower tail, dir >=; upper-tail forms are rewritten onto the
// negated attribute.
struct CCvar {
    std::string attr;
    Dir dir;
    double bound;
    risk::Tail tail;
    double tail_alpha;
    bool neg = false;
    double alpha = 0, v = 0;
};

using Constraint = std::variant<CCount, CDetSum, CExpSum, CVaR, CCvar>;

enum class Sense { Maximize, Minimize };

struct Objective {
    Sense sense = Sense::Maximize;
    bool expected = false;
    std::string attr;
    // set by normalize() when the surface sense is MINIMIZE: solvers maximize
    // the negated objective and reports restore the user-facing sign
    bool negated = false;
};

struct QuerySpec {
    std::string relation_name, alias;
    std::optional<long> repeat_bound;  // REPEAT R => x_i <= 1 + R
    std::optional<Pred> predicate;
    std::vector<Constraint> constraints;
    Objective objective;
    bool normalized = false;
};

/// Parses one SPaQL+ query. Keywords are case-insensitive; identifiers keep
/// their spelling until bind(). Throws ParseError with position info.
QuerySpec parse(const std::string& text);

/// Rewrites all risk constraints into canonical lower-tail >= form (possibly
/// on negated attributes), turns MINIMIZE into a negated MAXIMIZE, and
/// validates probabilities. Idempotent. Throws SemanticError for forms with
/// no canonical equivalent (upper-tail >= / lower-tail <= CVaR bounds).
QuerySpec normalize(const QuerySpec& q);

/// Emits canonical query text; parse(render(q)) reproduces the AST.
std::string render(const QuerySpec& q);

/// Resolves attribute spellings case-insensitively against the relation and
/// checks attribute roles (WHERE/SUM need deterministic attrs; EXPECTED/risk
/// clauses and the EXPECTED objective need stochastic attrs).
void bind(QuerySpec& q, const StochasticRelation& rel);

struct RiskParam {
    size_t constraint_index;  // position in QuerySpec::constraints
    risk::RiskKind kind;      // VaR or CvarLower (canonical)
    std::string attr;
    bool neg;
    double alpha;
    double v;
};

/// Canonical (alpha_r, V_r) per risk constraint, in constraint-list order.
std::vector<RiskParam> extract_risk_params(const QuerySpec& q);

}  // namespace spq::spaql
