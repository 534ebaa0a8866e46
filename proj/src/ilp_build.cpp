#include "spq/ilp_build.hpp"

#include <stdexcept>

namespace spq::ilp {

namespace {

Rel to_rel(spaql::Dir d) { return d == spaql::Dir::Geq ? Rel::Geq : Rel::Leq; }

}  // namespace

IlpModel build_model(const spaql::QuerySpec& q, const ModelInputs& in) {
    if (!q.normalized) throw std::logic_error("build_model: query must be normalized");
    const size_t n = in.ids.size();
    if (in.objective.size() != n) throw std::invalid_argument("build_model: objective size");

    IlpModel m;
    std::map<int64_t, int> var_of;
    double base_ub = kInf;
    if (q.repeat_bound) base_ub = 1.0 + static_cast<double>(*q.repeat_bound);
    for (size_t i = 0; i < n; ++i) {
        double ub = base_ub;
        if (auto it = in.ub_override.find(in.ids[i]); it != in.ub_override.end())
            ub = std::min(ub, it->second);
        int v = m.add_var(0.0, ub, !in.relax_integrality, in.objective[i],
                          "t" + std::to_string(in.ids[i]));
        var_of[in.ids[i]] = v;
    }

    auto dense_row = [&](const std::vector<double>& c, Rel rel, double rhs, std::string name) {
        if (c.size() != n) throw std::invalid_argument("build_model: row size for " + name);
        Row r;
        r.rel = rel;
        r.rhs = rhs;
        r.name = std::move(name);
        r.coeffs.reserve(n);
        for (size_t i = 0; i < n; ++i)
            if (c[i] != 0.0) r.coeffs.emplace_back(static_cast<int>(i), c[i]);
        m.rows.push_back(std::move(r));
    };

    size_t ci = 0;
    for (const auto& con : q.constraints) {
        std::string name = "c" + std::to_string(ci);
        if (const auto* cc = std::get_if<spaql::CCount>(&con)) {
            Row r;
            r.rel = cc->rel == spaql::CountRel::Leq   ? Rel::Leq
                    : cc->rel == spaql::CountRel::Geq ? Rel::Geq
                                                      : Rel::Eq;
            r.rhs = static_cast<double>(cc->bound);
            r.name = name + "_count";
            for (size_t i = 0; i < n; ++i) r.coeffs.emplace_back(static_cast<int>(i), 1.0);
            m.rows.push_back(std::move(r));
        } else if (const auto* cd = std::get_if<spaql::CDetSum>(&con)) {
            auto it = in.det_values.find(cd->attr);
            if (it == in.det_values.end())
                throw std::invalid_argument("build_model: missing det values for " + cd->attr);
            dense_row(it->second, to_rel(cd->dir), cd->bound, name + "_sum");
        } else if (const auto* ce = std::get_if<spaql::CExpSum>(&con)) {
            if (!in.include_probabilistic) {
                ++ci;
                continue;
            }
            auto it = in.expected_means.find(ce->attr);
            if (it == in.expected_means.end())
                throw std::invalid_argument("build_model: missing means for " + ce->attr);
            dense_row(it->second, to_rel(ce->dir), ce->bound, name + "_esum");
        }
        // VaR / CVaR constraints arrive through in.risk_rows.
        ++ci;
    }

    if (in.include_probabilistic) {
        for (const auto& rr : in.risk_rows)
            dense_row(rr.coeffs, Rel::Geq, rr.v_prime,
                      "r" + std::to_string(rr.constraint_index));
    }

    size_t gi = 0;
    for (const auto& [ids, cap] : in.group_capacity) {
        Row r;
        r.rel = Rel::Leq;
        r.rhs = cap;
        r.name = "g" + std::to_string(gi++);
        for (int64_t id : ids) {
            auto it = var_of.find(id);
            if (it == var_of.end())
                throw std::invalid_argument("build_model: group id not in slice");
            r.coeffs.emplace_back(it->second, 1.0);
        }
        m.rows.push_back(std::move(r));
    }

    for (const auto& [id, val] : in.pins) {
        auto it = var_of.find(id);
        if (it == var_of.end()) throw std::invalid_argument("build_model: pin id not in slice");
        m.pin(it->second, val);
    }

    m.check();
    return m;
}

}  // namespace spq::ilp
