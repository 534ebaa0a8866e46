#include "spq/workload.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

#include "spq/cdf.hpp"
#include "spq/ilp_build.hpp"
#include "spq/risk.hpp"

namespace spq::workload {

namespace {

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

StochasticRelation gen_portfolio(size_t companies, size_t half_day_steps, uint64_t seed) {
    StochasticRelation rel;
    rel.name = "portfolio";
    rel.seed = seed;
    rel.det_attrs = {"Price"};
    rel.stoch_attrs = {"Gain"};
    rel.tuples.reserve(companies * half_day_steps);
    int64_t id = 0;
    for (size_t c = 0; c < companies; ++c) {
        rng::Key kp(seed, c, "price", rng::Purpose::Params);
        rng::Key kd(seed, c, "drift", rng::Purpose::Params);
        rng::Key kv(seed, c, "volatility", rng::Purpose::Params);
        double price = 10.0 + 90.0 * kp.u01(0, 0);
        double drift = -0.1 + 0.4 * kd.u01(0, 0);          // per year
        double vol = 0.1 + 0.7 * kv.u01(0, 0);             // per sqrt(year)
        for (size_t k = 0; k < half_day_steps; ++k) {
            Tuple t;
            t.id = id++;
            t.det["Price"] = price;
            t.stoch["Gain"] = GbmSpec{price, drift, vol, 0.5 * static_cast<double>(k + 1)};
            rel.tuples.push_back(std::move(t));
        }
    }
    rel.rebuild_index();
    return rel;
}

StochasticRelation gen_tpch_like(size_t n, uint64_t seed) {
    StochasticRelation rel;
    rel.name = "tpch";
    rel.seed = seed;
    rel.det_attrs = {"Tax"};
    rel.stoch_attrs = {"Price", "Quantity"};
    rel.tuples.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Tuple t;
        t.id = static_cast<int64_t>(i);
        t.det["Tax"] = 0.08 * rng::Key(seed, i, "tax", rng::Purpose::Params).u01(0, 0);
        auto noisy = [&](const std::string& a, double lo, double hi) {
            double base = lo + (hi - lo) * rng::Key(seed, i, a + ".base", rng::Purpose::Params).u01(0, 0);
            double mean = rng::Key(seed, i, a + ".mean", rng::Purpose::Params).normal(0, 0);
            // Exp(2) via inverse transform; u01 never returns 0
            double var = -0.5 * std::log(rng::Key(seed, i, a + ".var", rng::Purpose::Params).u01(0, 0));
            return GaussianNoiseSpec{base, mean, var};
        };
        t.stoch["Price"] = noisy("price", 10.0, 100.0);
        t.stoch["Quantity"] = noisy("quantity", 1.0, 10.0);
        rel.tuples.push_back(std::move(t));
    }
    rel.rebuild_index();
    return rel;
}

HardnessReport hardness(const spaql::QuerySpec& q0, const std::vector<ConstraintStat>& stats) {
    const spaql::QuerySpec q = q0.normalized ? q0 : spaql::normalize(q0);
    HardnessReport rep;
    for (const auto& st : stats) {
        const auto& c = q.constraints.at(st.constraint_index);
        risk::Dir dir;
        double bound;
        if (const auto* d = std::get_if<spaql::CDetSum>(&c)) {
            dir = d->dir;
            bound = d->bound;
        } else if (const auto* e = std::get_if<spaql::CExpSum>(&c)) {
            dir = e->dir;
            bound = e->bound;
        } else if (const auto* vr = std::get_if<spaql::CVaR>(&c)) {
            dir = risk::Dir::Geq;  // canonical: VaR(sign * attr) >= v
            bound = vr->v;
        } else if (const auto* cv = std::get_if<spaql::CCvar>(&c)) {
            dir = risk::Dir::Geq;
            bound = cv->v;
        } else {
            continue;  // COUNT has no distributional mass
        }
        rep.s = st.s;
        double mu_s = st.mu * st.s;
        double sd = std::sqrt(std::max(0.0, st.sigma2 * st.s));
        double prob;
        if (sd <= 0)
            prob = (dir == risk::Dir::Leq ? mu_s <= bound : mu_s >= bound) ? 1.0 : 0.0;
        else
            prob = cdf::phi((dir == risk::Dir::Leq ? bound - mu_s : mu_s - bound) / sd);
        rep.constraint_index.push_back(st.constraint_index);
        rep.prob.push_back(prob);
        if (!(prob > 0))
            rep.h = std::numeric_limits<double>::infinity();
        else if (std::isfinite(rep.h))
            rep.h += -std::log(prob);
    }
    return rep;
}

namespace {

// Shared surrogate: every risk constraint replaced by its expected-sum row
// with exact generator means; integrality dropped by the LP solver.
struct MeanModel {
    ilp::IlpModel model;
    std::vector<int64_t> ids;
};

MeanModel mean_model(const spaql::QuerySpec& q, const StochasticRelation& rel,
                     const std::vector<int64_t>& slice) {
    ilp::ModelInputs in;
    in.ids = slice;
    const double sgn_obj = q.objective.negated ? -1.0 : 1.0;
    in.objective.reserve(slice.size());
    for (int64_t id : slice) {
        const Tuple& t = rel.at(id);
        double v = q.objective.expected ? vg_mean(t.stoch.at(q.objective.attr))
                                        : t.det.at(q.objective.attr);
        in.objective.push_back(sgn_obj * v);
    }
    for (const auto& c : q.constraints) {
        if (const auto* d = std::get_if<spaql::CDetSum>(&c)) {
            auto& col = in.det_values[d->attr];
            if (col.empty())
                for (int64_t id : slice) col.push_back(rel.at(id).det.at(d->attr));
        } else if (const auto* e = std::get_if<spaql::CExpSum>(&c)) {
            auto& col = in.expected_means[e->attr];
            if (col.empty())
                for (int64_t id : slice) col.push_back(vg_mean(rel.at(id).stoch.at(e->attr)));
        }
    }
    for (const auto& rp : spaql::extract_risk_params(q)) {
        ilp::LinearizedRisk row;
        row.constraint_index = rp.constraint_index;
        row.v_prime = rp.v;
        const double sgn = rp.neg ? -1.0 : 1.0;
        row.coeffs.reserve(slice.size());
        for (int64_t id : slice) row.coeffs.push_back(sgn * vg_mean(rel.at(id).stoch.at(rp.attr)));
        in.risk_rows.push_back(std::move(row));
    }
    in.relax_integrality = true;
    return {ilp::build_model(q, in), slice};
}

double fallback_cardinality(const spaql::QuerySpec& q) {
    double eq = -1, leq = -1, geq = -1;
    for (const auto& c : q.constraints)
        if (const auto* cc = std::get_if<spaql::CCount>(&c)) {
            if (cc->rel == spaql::CountRel::Eq) eq = cc->bound;
            if (cc->rel == spaql::CountRel::Leq) leq = cc->bound;
            if (cc->rel == spaql::CountRel::Geq) geq = cc->bound;
        }
    if (eq > 0) return eq;
    if (leq > 0) return leq;
    if (geq > 0) return geq;
    return 1.0;
}

}  // namespace

std::vector<ConstraintStat> derive_constraint_stats(const spaql::QuerySpec& q0,
                                                    const StochasticRelation& rel) {
    spaql::QuerySpec q = q0.normalized ? q0 : spaql::normalize(q0);
    spaql::bind(q, rel);
    auto slice = rcl::where_slice(q, rel);
    if (slice.empty()) throw std::domain_error("derive_constraint_stats: WHERE selects no tuples");

    // LP-relaxed total multiplicity of the mean surrogate as cardinality
    double s = fallback_cardinality(q);
    {
        auto mm = mean_model(q, rel, slice);
        auto lp = ilp::solve_lp_relaxation(mm.model);
        if (lp.status == ilp::Status::Optimal) {
            double tot = 0;
            for (size_t i = 0; i < slice.size(); ++i) tot += lp.x[i];
            s = std::max(1.0, tot);
        }
    }

    // pooled per-selection moments: law of total variance across the slice
    auto pooled = [&](const std::string& attr, bool stoch, bool neg) {
        double sum_mu = 0, sum_mu2 = 0, sum_var = 0;
        for (int64_t id : slice) {
            const Tuple& t = rel.at(id);
            double mu = stoch ? vg_mean(t.stoch.at(attr)) : t.det.at(attr);
            double va = stoch ? vg_var(t.stoch.at(attr)) : 0.0;
            sum_mu += mu;
            sum_mu2 += mu * mu;
            sum_var += va;
        }
        double n = static_cast<double>(slice.size());
        double mbar = sum_mu / n;
        double var = sum_var / n + std::max(0.0, sum_mu2 / n - mbar * mbar);
        return std::pair<double, double>{neg ? -mbar : mbar, var};
    };

    std::vector<ConstraintStat> out;
    for (size_t i = 0; i < q.constraints.size(); ++i) {
        const auto& c = q.constraints[i];
        std::pair<double, double> mv;
        if (const auto* d = std::get_if<spaql::CDetSum>(&c))
            mv = pooled(d->attr, false, false);
        else if (const auto* e = std::get_if<spaql::CExpSum>(&c))
            mv = pooled(e->attr, true, false);
        else if (const auto* vr = std::get_if<spaql::CVaR>(&c))
            mv = pooled(vr->attr, true, vr->neg);
        else if (const auto* cv = std::get_if<spaql::CCvar>(&c))
            mv = pooled(cv->attr, true, cv->neg);
        else
            continue;
        out.push_back({i, mv.first, mv.second, s});
    }
    return out;
}

double lp_relaxation_bound(const spaql::QuerySpec& q0, const StochasticRelation& rel) {
    spaql::QuerySpec q = q0.normalized ? q0 : spaql::normalize(q0);
    spaql::bind(q, rel);
    auto slice = rcl::where_slice(q, rel);
    auto mm = mean_model(q, rel, slice);
    auto lp = ilp::solve_lp_relaxation(mm.model);
    if (lp.status != ilp::Status::Optimal) return std::numeric_limits<double>::quiet_NaN();
    return lp.objective;  // internal maximize sense
}

VerifyResult verify_package(const spaql::QuerySpec& q0, const StochasticRelation& rel,
                            const Package& pkg, rng::Purpose purpose, size_t m,
                            uint64_t extra_seed) {
    spaql::QuerySpec q = q0.normalized ? q0 : spaql::normalize(q0);
    spaql::bind(q, rel);
    if (m == 0) throw std::domain_error("verify_package: m must be positive");

    // sub-relation over the support keeps fresh draws cheap; streams are keyed
    // per tuple id, so values match the full relation for the same seed
    StochasticRelation sub;
    sub.name = rel.name;
    sub.seed = extra_seed ? rng::mix64(rel.seed ^ rng::mix64(extra_seed)) : rel.seed;
    sub.det_attrs = rel.det_attrs;
    sub.stoch_attrs = rel.stoch_attrs;
    for (const auto& [id, x] : pkg.entries) {
        if (x < 0) throw std::domain_error("verify_package: negative multiplicity");
        sub.tuples.push_back(rel.at(id));
    }
    sub.rebuild_index();
    auto ids = pkg.ids();

    std::map<std::string, ScenarioMatrix> mats;
    auto sums_of = [&](const std::string& attr, bool neg) {
        auto it = mats.find(attr);
        if (it == mats.end())
            it = mats.emplace(attr, generate_scenarios(sub, ids, attr, purpose, 0, m)).first;
        std::vector<double> s = ids.empty() ? std::vector<double>(m, 0.0)
                                            : risk::package_scenario_sums(pkg, it->second);
        if (neg)
            for (double& v : s) v = -v;
        return s;
    };
    auto mean_of = [](const std::vector<double>& s) {
        double t = 0;
        for (double v : s) t += v;
        return t / static_cast<double>(s.size());
    };
    auto tol = [](double b) { return 1e-7 * std::max(1.0, std::fabs(b)); };

    VerifyResult out;
    out.feasible = true;
    if (q.repeat_bound) {
        double ub = 1.0 + static_cast<double>(*q.repeat_bound);
        for (const auto& [id, x] : pkg.entries) out.feasible = out.feasible && x <= ub + 1e-7;
    }
    for (const auto& c : q.constraints) {
        if (const auto* cc = std::get_if<spaql::CCount>(&c)) {
            double t = pkg.total();
            bool ok = cc->rel == spaql::CountRel::Leq   ? t <= cc->bound + tol(cc->bound)
                      : cc->rel == spaql::CountRel::Geq ? t >= cc->bound - tol(cc->bound)
                                                        : std::fabs(t - cc->bound) <= tol(cc->bound);
            out.feasible = out.feasible && ok;
        } else if (const auto* d = std::get_if<spaql::CDetSum>(&c)) {
            double t = 0;
            for (const auto& [id, x] : pkg.entries) t += x * rel.at(id).det.at(d->attr);
            bool ok = d->dir == risk::Dir::Leq ? t <= d->bound + tol(d->bound)
                                               : t >= d->bound - tol(d->bound);
            out.feasible = out.feasible && ok;
        } else if (const auto* e = std::get_if<spaql::CExpSum>(&c)) {
            double t = mean_of(sums_of(e->attr, false));
            bool ok = e->dir == risk::Dir::Leq ? t <= e->bound + tol(e->bound)
                                               : t >= e->bound - tol(e->bound);
            out.feasible = out.feasible && ok;
        }
    }
    for (const auto& rp : spaql::extract_risk_params(q)) {
        auto s = sums_of(rp.attr, rp.neg);
        double v = rp.kind == risk::RiskKind::VaR ? risk::estimate_var(rp.alpha, s)
                                                  : risk::estimate_cvar(rp.alpha, s);
        bool ok = v >= rp.v - tol(rp.v);
        out.risk_ok.push_back(ok ? 1 : 0);
        out.feasible = out.feasible && ok;
    }

    const double sgn = q.objective.negated ? -1.0 : 1.0;
    if (q.objective.expected)
        out.omega = sgn * mean_of(sums_of(q.objective.attr, false));
    else {
        double t = 0;
        for (const auto& [id, x] : pkg.entries) t += x * rel.at(id).det.at(q.objective.attr);
        out.omega = sgn * t;
    }
    return out;
}

rcl::RclResult naive_solve(const spaql::QuerySpec& q0, const StochasticRelation& rel,
                           const rcl::RclParams& params) {
    auto t0 = std::chrono::steady_clock::now();
    spaql::QuerySpec q = q0.normalized ? q0 : spaql::normalize(q0);
    spaql::bind(q, rel);
    auto slice = rcl::where_slice(q, rel);
    const size_t n = slice.size();
    const size_t m = params.validation_size;

    rcl::RclResult res;
    res.scenarios_used = m;

    // a finite per-variable bound is required for the big-M rows
    double ub = std::numeric_limits<double>::infinity();
    if (q.repeat_bound) ub = 1.0 + static_cast<double>(*q.repeat_bound);
    for (const auto& c : q.constraints)
        if (const auto* cc = std::get_if<spaql::CCount>(&c))
            if (cc->rel != spaql::CountRel::Geq) ub = std::min(ub, cc->bound);
    auto risks = spaql::extract_risk_params(q);
    if (!std::isfinite(ub) && !risks.empty()) {
        res.budget_exhausted = true;
        res.note = "naive baseline needs REPEAT or a COUNT upper bound";
        return res;
    }

    if (n * m > 50'000'000) {
        res.budget_exhausted = true;
        res.note = "scenario matrix exceeds memory cap";
        return res;
    }

    // full-size SAA matrices on the validation stream
    std::set<std::string> attrs;
    if (q.objective.expected) attrs.insert(q.objective.attr);
    for (const auto& c : q.constraints)
        if (const auto* e = std::get_if<spaql::CExpSum>(&c)) attrs.insert(e->attr);
    for (const auto& rp : risks) attrs.insert(rp.attr);
    std::map<std::string, ScenarioMatrix> mats;
    for (const auto& a : attrs)
        mats.emplace(a, generate_scenarios(rel, slice, a, rng::Purpose::Val, 0, m));

    auto row_mean = [&](const ScenarioMatrix& sm, size_t i) {
        double t = 0;
        for (double v : sm.row(i)) t += v;
        return t / static_cast<double>(sm.m);
    };

    // deterministic skeleton (REPEAT/COUNT/SUM rows) via the shared builder,
    // with sample means standing in for expectations
    ilp::ModelInputs in;
    in.ids = slice;
    const double sgn_obj = q.objective.negated ? -1.0 : 1.0;
    for (size_t i = 0; i < n; ++i) {
        const Tuple& t = rel.at(slice[i]);
        double v = q.objective.expected ? row_mean(mats.at(q.objective.attr), i)
                                        : t.det.at(q.objective.attr);
        in.objective.push_back(sgn_obj * v);
    }
    for (const auto& c : q.constraints) {
        if (const auto* d = std::get_if<spaql::CDetSum>(&c)) {
            auto& col = in.det_values[d->attr];
            if (col.empty())
                for (int64_t id : slice) col.push_back(rel.at(id).det.at(d->attr));
        } else if (const auto* e = std::get_if<spaql::CExpSum>(&c)) {
            auto& col = in.expected_means[e->attr];
            if (col.empty())
                for (size_t i = 0; i < n; ++i) col.push_back(row_mean(mats.at(e->attr), i));
        }
    }
    in.relax_integrality = params.relax_integrality;
    ilp::IlpModel model = ilp::build_model(q, in);

    // one indicator block per VaR constraint, one RU block per CVaR constraint
    for (const auto& rp : risks) {
        const auto& sm = mats.at(rp.attr);
        const double sgn = rp.neg ? -1.0 : 1.0;
        if (rp.kind == risk::RiskKind::VaR) {
            // estimate_var(alpha, sums) >= v  <=>  at most ceil(alpha m) - 1
            // scenarios may fall below v
            auto kk = static_cast<size_t>(std::ceil(rp.alpha * static_cast<double>(m)));
            kk = std::clamp<size_t>(kk, 1, m);
            ilp::Row budget;
            budget.rel = ilp::Rel::Leq;
            budget.rhs = static_cast<double>(kk - 1);
            budget.name = "varbudget" + std::to_string(rp.constraint_index);
            for (size_t j = 0; j < m; ++j) {
                double min_lhs = 0;
                for (size_t i = 0; i < n; ++i) min_lhs += std::min(0.0, sgn * sm.at(i, j)) * ub;
                double big_m = std::max(0.0, rp.v - min_lhs);
                int z = model.add_var(0, 1, !params.relax_integrality, 0,
                                      "z" + std::to_string(rp.constraint_index) + "_" + std::to_string(j));
                ilp::Row r;
                r.rel = ilp::Rel::Geq;
                r.rhs = rp.v;
                for (size_t i = 0; i < n; ++i) {
                    double cc = sgn * sm.at(i, j);
                    if (cc != 0) r.coeffs.emplace_back(static_cast<int>(i), cc);
                }
                r.coeffs.emplace_back(z, big_m);
                model.rows.push_back(std::move(r));
                budget.coeffs.emplace_back(z, 1.0);
            }
            model.rows.push_back(std::move(budget));
        } else {
            auto k = static_cast<size_t>(std::floor(rp.alpha * static_cast<double>(m)));
            if (k == 0) {
                // mean of 0 smallest degenerates to the minimum: every scenario row
                for (size_t j = 0; j < m; ++j) {
                    ilp::Row r;
                    r.rel = ilp::Rel::Geq;
                    r.rhs = rp.v;
                    for (size_t i = 0; i < n; ++i) {
                        double cc = sgn * sm.at(i, j);
                        if (cc != 0) r.coeffs.emplace_back(static_cast<int>(i), cc);
                    }
                    model.rows.push_back(std::move(r));
                }
            } else {
                // Rockafellar-Uryasev at level k/m reproduces the k-smallest
                // average exactly; t is free, split into tp - tn
                int tp = model.add_var(0, ilp::kInf, false, 0, "tp" + std::to_string(rp.constraint_index));
                int tn = model.add_var(0, ilp::kInf, false, 0, "tn" + std::to_string(rp.constraint_index));
                ilp::Row main;
                main.rel = ilp::Rel::Geq;
                main.rhs = rp.v;
                main.coeffs.emplace_back(tp, 1.0);
                main.coeffs.emplace_back(tn, -1.0);
                for (size_t j = 0; j < m; ++j) {
                    int u = model.add_var(0, ilp::kInf, false, 0,
                                          "u" + std::to_string(rp.constraint_index) + "_" + std::to_string(j));
                    ilp::Row r;  // u_j >= t - sum_i S_ij x_i
                    r.rel = ilp::Rel::Geq;
                    r.rhs = 0;
                    r.coeffs.emplace_back(u, 1.0);
                    r.coeffs.emplace_back(tp, -1.0);
                    r.coeffs.emplace_back(tn, 1.0);
                    for (size_t i = 0; i < n; ++i) {
                        double cc = sgn * sm.at(i, j);
                        if (cc != 0) r.coeffs.emplace_back(static_cast<int>(i), cc);
                    }
                    model.rows.push_back(std::move(r));
                    main.coeffs.emplace_back(u, -1.0 / static_cast<double>(k));
                }
                model.rows.push_back(std::move(main));
            }
        }
    }

    double remaining = params.ilp_time_limit_sec - elapsed_since(t0);
    auto sr = ilp::solve(model, std::chrono::duration<double>(std::max(1.0, remaining)));
    if (sr.status == ilp::Status::Infeasible) {
        res.proven_infeasible = true;
        res.note = "infeasible on the validation sample";
    } else if (sr.status == ilp::Status::Unbounded) {
        res.budget_exhausted = true;
        res.note = "objective unbounded";
    } else if (sr.assignment) {
        Package pkg;
        for (size_t i = 0; i < n; ++i) {
            double x = (*sr.assignment)[i];
            if (params.relax_integrality ? x > 1e-9 : x > 0.5)
                pkg.set(slice[i], params.relax_integrality ? x : std::round(x));
        }
        res.package = std::move(pkg);
        res.omega = *sr.objective;
        res.omega_bar = res.omega;
        if (sr.status == ilp::Status::Optimal) {
            res.certified = true;  // exact optimum of the sample problem
        } else {
            res.budget_exhausted = true;
            res.note = "time limit: " + sr.limit_reason;
        }
    } else {
        res.budget_exhausted = true;
        res.note = "time limit before a feasible incumbent: " + sr.limit_reason;
    }
    res.trace.push_back({"naive", 0, std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN(), res.package.has_value(),
                         res.package.has_value(), res.omega});
    return res;
}

namespace {

// The master problem as the solver first sees it: L-CVaR rows at the
// canonical (alpha_r, V_r) over the first m0 optimization scenarios.
std::string initial_lp_text(const spaql::QuerySpec& q, const StochasticRelation& rel,
                            const rcl::RclParams& params) {
    auto slice = rcl::where_slice(q, rel);
    const size_t n = slice.size();
    std::map<std::string, ScenarioMatrix> mats;
    auto mat = [&](const std::string& a) -> const ScenarioMatrix& {
        auto it = mats.find(a);
        if (it == mats.end())
            it = mats.emplace(a, generate_scenarios(rel, slice, a, rng::Purpose::Opt, 0, params.m0))
                     .first;
        return it->second;
    };
    auto row_mean = [](const ScenarioMatrix& sm, size_t i) {
        double t = 0;
        for (double v : sm.row(i)) t += v;
        return t / static_cast<double>(sm.m);
    };

    ilp::ModelInputs in;
    in.ids = slice;
    const double sgn_obj = q.objective.negated ? -1.0 : 1.0;
    for (size_t i = 0; i < n; ++i) {
        double v = q.objective.expected ? row_mean(mat(q.objective.attr), i)
                                        : rel.at(slice[i]).det.at(q.objective.attr);
        in.objective.push_back(sgn_obj * v);
    }
    for (const auto& c : q.constraints) {
        if (const auto* d = std::get_if<spaql::CDetSum>(&c)) {
            auto& col = in.det_values[d->attr];
            if (col.empty())
                for (int64_t id : slice) col.push_back(rel.at(id).det.at(d->attr));
        } else if (const auto* e = std::get_if<spaql::CExpSum>(&c)) {
            auto& col = in.expected_means[e->attr];
            if (col.empty())
                for (size_t i = 0; i < n; ++i) col.push_back(row_mean(mat(e->attr), i));
        }
    }
    for (const auto& rp : spaql::extract_risk_params(q)) {
        const auto& sm = mat(rp.attr);
        ilp::LinearizedRisk row;
        row.constraint_index = rp.constraint_index;
        row.v_prime = rp.v;
        row.coeffs.resize(n);
        for (size_t i = 0; i < n; ++i) {
            std::vector<double> r(sm.row(i).begin(), sm.row(i).end());
            if (rp.neg)
                for (double& x : r) x = -x;
            row.coeffs[i] = risk::estimate_cvar(rp.alpha, r);
        }
        in.risk_rows.push_back(std::move(row));
    }
    return ilp::dump_lp(ilp::build_model(q, in));
}

}  // namespace

QueryOutcome run_query(const spaql::QuerySpec& q0, const StochasticRelation& rel,
                       const QueryRun& cfg) {
    spaql::QuerySpec q = q0.normalized ? q0 : spaql::normalize(q0);
    spaql::bind(q, rel);

    QueryOutcome out;
    auto& rep = out.report;
    auto t0 = std::chrono::steady_clock::now();
    bool budget = false, infeasible = false;
    double omega_int = std::numeric_limits<double>::quiet_NaN();
    double omega_bar_int = std::numeric_limits<double>::quiet_NaN();

    if (cfg.method == "rcl") {
        rep.method = "rcl";
        auto rr = rcl::rcl_solve(q, rel, cfg.rcl);
        out.package = rr.package;
        out.trace = std::move(rr.trace);
        omega_int = rr.omega;
        omega_bar_int = rr.omega_bar;
        rep.certified = rr.certified;
        rep.note = rr.note;
        rep.m_opt = rr.scenarios_used;
        budget = rr.budget_exhausted;
        infeasible = rr.proven_infeasible;
        rep.phase_seconds["rcl"] = elapsed_since(t0);
    } else if (cfg.method == "sketchrefine") {
        rep.method = "sketch-refine";
        if (!cfg.partitioning)
            throw std::invalid_argument("run_query: sketchrefine needs a partitioning");
        sketch::SketchParams sp = cfg.sketch;
        sp.rcl = cfg.rcl;
        auto sr = sketch::stochastic_sketch_refine(q, rel, *cfg.partitioning, sp);
        out.package = sr.package;
        out.trace = std::move(sr.trace);
        omega_int = sr.omega;
        omega_bar_int = sr.omega_bar;
        rep.certified = sr.certified;
        rep.note = sr.note;
        rep.phase = sr.phase;
        rep.m_opt = sr.m_sketch;
        infeasible = sr.proven_infeasible;
        budget = !sr.package && !sr.proven_infeasible;
        rep.phase_seconds["sketch"] = sr.seconds_sketch;
        rep.phase_seconds["refine"] = sr.seconds_refine;
    } else if (cfg.method == "naive") {
        rep.method = "naive-saa";
        auto nr = naive_solve(q, rel, cfg.rcl);
        out.package = nr.package;
        out.trace = std::move(nr.trace);
        omega_int = nr.omega;
        omega_bar_int = nr.omega_bar;
        rep.certified = nr.certified;
        rep.note = nr.note;
        rep.m_opt = nr.scenarios_used;
        budget = nr.budget_exhausted;
        infeasible = nr.proven_infeasible;
        rep.phase_seconds["naive"] = elapsed_since(t0);
    } else {
        throw std::invalid_argument("run_query: unknown method " + cfg.method);
    }

    rep.m_validation = cfg.rcl.validation_size;
    if (out.package) {
        rep.feasible_validation =
            verify_package(q, rel, *out.package, rng::Purpose::Val, cfg.rcl.validation_size).feasible;
        rep.feasible_test =
            verify_package(q, rel, *out.package, rng::Purpose::Test, cfg.rcl.validation_size,
                           cfg.test_seed)
                .feasible;
        rep.package_size = out.package->entries.size();
        rep.package_total = out.package->total();
    }

    const double sgn = q.objective.negated ? -1.0 : 1.0;
    rep.omega = sgn * omega_int;
    rep.omega_bar = sgn * omega_bar_int;
    rep.omega_lp = sgn * lp_relaxation_bound(q, rel);
    if (std::isfinite(rep.omega) && std::isfinite(rep.omega_lp) && std::fabs(rep.omega_lp) > 1e-12)
        rep.gap = (rep.omega - rep.omega_lp) / rep.omega_lp;
    rep.seconds_total = elapsed_since(t0);

    if (out.package && !budget) {
        rep.status = "solved";
        out.exit_code = 0;
    } else if (infeasible) {
        rep.status = "unsolvable";
        out.exit_code = 2;
    } else {
        rep.status = "budget";
        out.exit_code = 3;
    }
    if (cfg.want_lp) out.lp_text = initial_lp_text(q, rel, cfg.rcl);
    return out;
}

}  // namespace spq::workload
