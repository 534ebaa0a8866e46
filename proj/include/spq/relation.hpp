#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "spq/cdf.hpp"
#include "spq/rng.hpp"

namespace spq {

// ---------------------------------------------------------------------------
// Variable-generation specs: how a stochastic attribute realizes per scenario.
// ---------------------------------------------------------------------------

// Gain of holding an asset for `horizon_days` under geometric Brownian motion.
struct GbmSpec {
    double price = 0;       // current price
    double drift = 0;       // per year
    double volatility = 0;  // per sqrt(year)
    double horizon_days = 1;
};

// base + N(noise_mean, noise_var)
struct GaussianNoiseSpec {
    double base = 0;
    double noise_mean = 0;
    double noise_var = 0;
};

// Draws from an arbitrary distribution handle via inverse transform.
struct EmpiricalSpec {
    cdf::CdfPtr dist;
};

using VgSpec = std::variant<GbmSpec, GaussianNoiseSpec, EmpiricalSpec>;

double vg_draw(const VgSpec& vg, const rng::Key& key, uint64_t scenario);
double vg_mean(const VgSpec& vg);  // exact expectation of one draw
double vg_var(const VgSpec& vg);   // exact variance of one draw

struct Tuple {
    int64_t id = 0;
    std::map<std::string, double> det;
    std::map<std::string, VgSpec> stoch;
};

struct StochasticRelation {
    std::string name;
    uint64_t seed = 0;  // keys every scenario stream of this relation
    std::vector<std::string> det_attrs;
    std::vector<std::string> stoch_attrs;
    std::vector<Tuple> tuples;

    bool is_det_attr(const std::string& a) const;
    bool is_stoch_attr(const std::string& a) const;
    const Tuple& at(int64_t id) const;
    std::optional<size_t> index_of(int64_t id) const;

    void rebuild_index();

  private:
    std::map<int64_t, size_t> index_;
};

// ---------------------------------------------------------------------------
// Scenario matrices: n tuple rows x m scenario columns, row-major.
// Column j of stream (purpose) is a pure function of (relation seed, tuple id,
// attr, purpose, j), so append-only growth reproduces earlier columns exactly.
// ---------------------------------------------------------------------------

struct ScenarioMatrix {
    std::string attr;
    rng::Purpose purpose = rng::Purpose::Opt;
    std::vector<int64_t> ids;  // row order
    size_t m = 0;
    std::vector<double> v;  // ids.size() * m

    double at(size_t row, size_t col) const { return v[row * m + col]; }
    std::span<const double> row(size_t r) const { return {v.data() + r * m, m}; }
    size_t row_of(int64_t id) const;
};

// Generates scenario columns [first, first+count) for the given tuples.
ScenarioMatrix generate_scenarios(const StochasticRelation& rel, const std::vector<int64_t>& ids,
                                  const std::string& attr, rng::Purpose purpose, size_t first,
                                  size_t count);

// Appends `count` fresh columns (continuing the same stream).
void extend_scenarios(const StochasticRelation& rel, ScenarioMatrix& scen, size_t count);

// ---------------------------------------------------------------------------
// Packages
// ---------------------------------------------------------------------------

struct Package {
    // (tuple id, multiplicity), multiplicity > 0; integer-valued for ILP
    // solutions, possibly fractional for LP relaxations.
    std::vector<std::pair<int64_t, double>> entries;

    bool empty() const { return entries.empty(); }
    double total() const;
    double mult_of(int64_t id) const;
    void set(int64_t id, double mult);  // mult == 0 removes the entry
    std::vector<int64_t> ids() const;
};

}  // namespace spq
