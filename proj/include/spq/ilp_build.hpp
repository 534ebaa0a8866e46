#pragma once

#include <map>
#include <vector>

#include "spq/ilp.hpp"
#include "spq/spaql.hpp"

namespace spq::ilp {

// One linearized risk constraint: sum coeffs[i] * x_i >= v_prime.
struct LinearizedRisk {
    size_t constraint_index = 0;  // index into QuerySpec::constraints
    std::vector<double> coeffs;
    double v_prime = 0;
};

struct ModelInputs {
    std::vector<int64_t> ids;               // variable order
    std::vector<double> objective;          // internal maximize sense
    std::map<std::string, std::vector<double>> det_values;      // per det attr
    std::map<std::string, std::vector<double>> expected_means;  // per stoch attr
    std::vector<LinearizedRisk> risk_rows;
    bool include_probabilistic = true;  // QuickSolve drops expected + risk rows
    std::map<int64_t, double> ub_override;        // duplicate capacity in sketches
    std::vector<std::pair<int64_t, double>> pins;  // equality-pinned multiplicities
    // sum of x over the id set <= cap (per-partition duplicate budgets)
    std::vector<std::pair<std::vector<int64_t>, double>> group_capacity;
    bool relax_integrality = false;
};

/// Assembles the package ILP: one variable per tuple; REPEAT -> upper bounds;
/// COUNT -> cardinality row; SUM/EXPECTED SUM -> coefficient rows; each risk
/// constraint -> one L-CVaR row (>= form). Throws on dimension mismatch.
IlpModel build_model(const spaql::QuerySpec& q, const ModelInputs& in);

}  // namespace spq::ilp
