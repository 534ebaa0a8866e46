#include "spq/relation.hpp"

#include <algorithm>
#include <cmath>

namespace spq {

double vg_draw(const VgSpec& vg, const rng::Key& key, uint64_t scenario) {
    if (const auto* g = std::get_if<GbmSpec>(&vg)) {
        double h = g->horizon_days / 365.0;
        double z = key.normal(scenario, 0);
        double growth = std::exp((g->drift - 0.5 * g->volatility * g->volatility) * h +
                                 g->volatility * std::sqrt(h) * z);
        return g->price * (growth - 1.0);
    }
    if (const auto* n = std::get_if<GaussianNoiseSpec>(&vg))
        return n->base + n->noise_mean + std::sqrt(n->noise_var) * key.normal(scenario, 0);
    const auto& e = std::get<EmpiricalSpec>(vg);
    return e.dist->inv(key.u01(scenario, 0));
}

double vg_mean(const VgSpec& vg) {
    if (const auto* g = std::get_if<GbmSpec>(&vg))
        return g->price * (std::exp(g->drift * g->horizon_days / 365.0) - 1.0);
    if (const auto* n = std::get_if<GaussianNoiseSpec>(&vg)) return n->base + n->noise_mean;
    return std::get<EmpiricalSpec>(vg).dist->mean();
}

double vg_var(const VgSpec& vg) {
    if (const auto* g = std::get_if<GbmSpec>(&vg)) {
        double h = g->horizon_days / 365.0;
        double s2 = g->volatility * g->volatility * h;
        // price * (X - 1) with X lognormal; Var = price^2 e^{2 drift h}(e^{s2}-1)
        return g->price * g->price * std::exp(2.0 * g->drift * h) * (std::exp(s2) - 1.0);
    }
    if (const auto* n = std::get_if<GaussianNoiseSpec>(&vg)) return n->noise_var;
    return std::get<EmpiricalSpec>(vg).dist->var();
}

bool StochasticRelation::is_det_attr(const std::string& a) const {
    return std::find(det_attrs.begin(), det_attrs.end(), a) != det_attrs.end();
}

bool StochasticRelation::is_stoch_attr(const std::string& a) const {
    return std::find(stoch_attrs.begin(), stoch_attrs.end(), a) != stoch_attrs.end();
}

void StochasticRelation::rebuild_index() {
    index_.clear();
    for (size_t i = 0; i < tuples.size(); ++i) index_[tuples[i].id] = i;
}

const Tuple& StochasticRelation::at(int64_t id) const {
    auto idx = index_of(id);
    if (!idx) throw std::domain_error("unknown tuple id " + std::to_string(id));
    return tuples[*idx];
}

std::optional<size_t> StochasticRelation::index_of(int64_t id) const {
    if (index_.size() != tuples.size()) {
        // index not built; linear fallback keeps const-correctness
        for (size_t i = 0; i < tuples.size(); ++i)
            if (tuples[i].id == id) return i;
        return std::nullopt;
    }
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

size_t ScenarioMatrix::row_of(int64_t id) const {
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == id) return i;
    throw std::domain_error("tuple id not in scenario matrix: " + std::to_string(id));
}

ScenarioMatrix generate_scenarios(const StochasticRelation& rel, const std::vector<int64_t>& ids,
                                  const std::string& attr, rng::Purpose purpose, size_t first,
                                  size_t count) {
    ScenarioMatrix scen;
    scen.attr = attr;
    scen.purpose = purpose;
    scen.ids = ids;
    scen.m = count;
    scen.v.resize(ids.size() * count);
    uint64_t attr_h = rng::fnv1a(attr);
    for (size_t r = 0; r < ids.size(); ++r) {
        const Tuple& t = rel.at(ids[r]);
        auto it = t.stoch.find(attr);
        if (it == t.stoch.end()) throw std::domain_error("tuple lacks stochastic attr " + attr);
        rng::Key key(rel.seed, static_cast<uint64_t>(t.id), attr_h, purpose);
        double* out = scen.v.data() + r * count;
        for (size_t j = 0; j < count; ++j) out[j] = vg_draw(it->second, key, first + j);
    }
    return scen;
}

void extend_scenarios(const StochasticRelation& rel, ScenarioMatrix& scen, size_t count) {
    ScenarioMatrix fresh = generate_scenarios(rel, scen.ids, scen.attr, scen.purpose, scen.m, count);
    std::vector<double> merged((scen.ids.size()) * (scen.m + count));
    for (size_t r = 0; r < scen.ids.size(); ++r) {
        std::copy_n(scen.v.data() + r * scen.m, scen.m, merged.data() + r * (scen.m + count));
        std::copy_n(fresh.v.data() + r * count, count, merged.data() + r * (scen.m + count) + scen.m);
    }
    scen.m += count;
    scen.v = std::move(merged);
}

double Package::total() const {
    double s = 0;
    for (auto& [id, x] : entries) s += x;
    return s;
}

double Package::mult_of(int64_t id) const {
    for (auto& [tid, x] : entries)
        if (tid == id) return x;
    return 0;
}

void Package::set(int64_t id, double mult) {
    for (auto it = entries.begin(); it != entries.end(); ++it) {
        if (it->first == id) {
            if (mult == 0)
                entries.erase(it);
            else
                it->second = mult;
            return;
        }
    }
    if (mult != 0) entries.emplace_back(id, mult);
}

std::vector<int64_t> Package::ids() const {
    std::vector<int64_t> out;
    out.reserve(entries.size());
    for (auto& [id, x] : entries) out.push_back(id);
    return out;
}

}  // namespace spq
