#include "spq/sketch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

namespace spq::sketch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// synthetic tuple id keying a representative's latent scenario streams
uint64_t rep_stream_id(int pid) {
    return (0x5250ull << 32) | static_cast<uint32_t>(pid);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double binom(long n, long k) {
    double c = 1;
    for (long i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

// risk statistic of a sketch holding the partition's tuples as d duplicates
// with multiplicities summing to p_max (ceil/floor split), on m scenarios
double sketch_stat(const DuplicateSpec& spec, const spaql::RiskParam& r, size_t d, size_t m,
                   long p_max, uint64_t seed_tag) {
    auto mit = spec.marginals.find(r.attr);
    if (mit == spec.marginals.end())
        throw std::domain_error("sketch_stat: representative lacks marginal for " + r.attr);
    double kap = 0.0;
    if (auto kit = spec.kappa.find(r.attr); kit != spec.kappa.end()) kap = kit->second;

    std::vector<double> mult(d, std::floor(static_cast<double>(p_max) / static_cast<double>(d)));
    for (size_t i = 0; i < static_cast<size_t>(p_max) % d; ++i) mult[i] += 1.0;

    // layout (d) folded into the stream so S_max and S_d draws are disjoint
    rng::Key key(seed_tag, rep_stream_id(spec.pid), rng::fnv1a(r.attr) ^ rng::mix64(d),
                 rng::Purpose::Gamma);
    double sign = r.neg ? -1.0 : 1.0;
    std::vector<double> sums(m), lat(d);
    for (size_t j = 0; j < m; ++j) {
        for (size_t i = 0; i < d; ++i) lat[i] = key.normal(j, i);
        auto vals = norta::generate_duplicate_scenario(*mit->second, kap, lat);
        double s = 0;
        for (size_t i = 0; i < d; ++i) s += mult[i] * vals[i];
        sums[j] = sign * s;
    }
    return r.kind == risk::RiskKind::VaR ? risk::estimate_var(r.alpha, sums)
                                         : risk::estimate_cvar(r.alpha, sums);
}

std::vector<int64_t> partition_slice(const std::vector<int64_t>& members,
                                     const spaql::QuerySpec& q, const StochasticRelation& rel) {
    std::vector<int64_t> out;
    out.reserve(members.size());
    for (int64_t id : members)
        if (!q.predicate || spaql::eval_pred(*q.predicate, rel.at(id))) out.push_back(id);
    return out;
}

}  // namespace

// --- scenario source -------------------------------------------------------

SketchSource::SketchSource(const StochasticRelation& rel, std::map<int, DuplicateSpec> specs)
    : rel_(&rel), specs_(std::move(specs)) {}

double SketchSource::det_value(int64_t id, const std::string& attr) const {
    const std::map<std::string, double>* det;
    if (is_duplicate_id(id))
        det = &specs_.at(decode_duplicate(id).first).det;
    else
        det = &rel_->at(id).det;
    auto it = det->find(attr);
    if (it == det->end()) throw std::domain_error("det_value: no deterministic attr " + attr);
    return it->second;
}

ScenarioMatrix SketchSource::scenarios(const std::string& attr, rng::Purpose purpose, size_t first,
                                       size_t count, const std::vector<int64_t>& ids) const {
    ScenarioMatrix out;
    out.attr = attr;
    out.purpose = purpose;
    out.ids = ids;
    out.m = count;
    out.v.assign(ids.size() * count, 0.0);

    std::vector<int64_t> real;
    std::map<int, std::vector<std::pair<size_t, size_t>>> dup;  // pid -> (out row, slot)
    for (size_t r = 0; r < ids.size(); ++r) {
        if (is_duplicate_id(ids[r])) {
            auto [pid, slot] = decode_duplicate(ids[r]);
            dup[pid].emplace_back(r, slot);
        } else {
            real.push_back(ids[r]);
        }
    }

    if (!real.empty()) {
        auto base = generate_scenarios(*rel_, real, attr, purpose, first, count);
        size_t k = 0;
        for (size_t r = 0; r < ids.size(); ++r) {
            if (is_duplicate_id(ids[r])) continue;
            auto row = base.row(k++);
            std::copy(row.begin(), row.end(), out.v.begin() + r * count);
        }
    }

    for (const auto& [pid, rows] : dup) {
        const auto& spec = specs_.at(pid);
        auto mit = spec.marginals.find(attr);
        if (mit == spec.marginals.end())
            throw std::domain_error("sketch scenarios: no marginal for " + attr);
        double kap = 0.0;
        if (auto kit = spec.kappa.find(attr); kit != spec.kappa.end()) kap = kit->second;
        for (const auto& [row, slot] : rows)
            if (slot >= spec.d) throw std::logic_error("sketch scenarios: slot out of range");

        rng::Key key(rel_->seed, rep_stream_id(pid), attr, purpose);
        std::vector<double> lat(spec.d);
        for (size_t j = 0; j < count; ++j) {
            uint64_t sc = first + j;
            for (size_t i = 0; i < spec.d; ++i) lat[i] = key.normal(sc, i);
            auto vals = norta::generate_duplicate_scenario(*mit->second, kap, lat);
            for (const auto& [row, slot] : rows) out.v[row * count + j] = vals[slot];
        }
    }
    return out;
}

// --- duplicate sizing --------------------------------------------------------

double gamma_risk_drop(const DuplicateSpec& spec, const spaql::RiskParam& r, size_t d, size_t m,
                       long p_max, uint64_t seed_tag) {
    if (d < 1 || d > static_cast<size_t>(p_max))
        throw std::domain_error("gamma_risk_drop: d out of range");
    double smax = sketch_stat(spec, r, static_cast<size_t>(p_max), m, p_max, seed_tag);
    if (std::fabs(smax) < 1e-9) return 0.0;
    double sd = sketch_stat(spec, r, d, m, p_max, seed_tag);
    return (smax - sd) / std::fabs(smax);
}

size_t duplicates_for_constraint(const DuplicateSpec& spec, const spaql::RiskParam& r,
                                 double Gamma, size_t m, long p_max, uint64_t seed_tag) {
    for (size_t d = 1; d < static_cast<size_t>(p_max); ++d)
        if (gamma_risk_drop(spec, r, d, m, p_max, seed_tag) <= Gamma) return d;
    return static_cast<size_t>(p_max);  // gamma(P_max) = 0 by construction
}

size_t number_of_duplicates(const DuplicateSpec& spec, const std::vector<spaql::RiskParam>& risks,
                            double Gamma, size_t m, long p_max, size_t partition_size,
                            uint64_t seed_tag) {
    if (risks.empty()) return 1;
    size_t need = 1;
    for (const auto& r : risks)
        need = std::max(need, duplicates_for_constraint(spec, r, Gamma, m, p_max, seed_tag));
    return std::max<size_t>(1, std::min(need, partition_size));
}

GammaCurves compute_gamma_curves(const std::vector<DuplicateSpec>& specs,
                                 const std::vector<spaql::RiskParam>& risks, size_t m, long p_max,
                                 uint64_t seed_tag) {
    GammaCurves out;
    out.p_max = p_max;
    out.g.resize(specs.size());
    for (size_t t = 0; t < specs.size(); ++t) {
        if (risks.empty()) continue;
        out.g[t].resize(risks.size());
        for (size_t r = 0; r < risks.size(); ++r) {
            double smax = sketch_stat(specs[t], risks[r], static_cast<size_t>(p_max), m, p_max,
                                      seed_tag);
            auto& curve = out.g[t][r];
            curve.assign(static_cast<size_t>(p_max), 0.0);
            if (std::fabs(smax) < 1e-9) continue;
            for (size_t d = 1; d <= static_cast<size_t>(p_max); ++d) {
                double sd = d == static_cast<size_t>(p_max)
                                ? smax
                                : sketch_stat(specs[t], risks[r], d, m, p_max, seed_tag);
                curve[d - 1] = (smax - sd) / std::fabs(smax);
            }
        }
    }
    return out;
}

size_t GammaCurves::duplicates(size_t rep_index, double Gamma, size_t partition_size) const {
    const auto& per_risk = g.at(rep_index);
    if (per_risk.empty()) return 1;
    size_t need = 1;
    for (const auto& curve : per_risk) {
        size_t d = curve.size();
        for (size_t i = 0; i < curve.size(); ++i)
            if (curve[i] <= Gamma) {
                d = i + 1;
                break;
            }
        need = std::max(need, d);
    }
    return std::max<size_t>(1, std::min(need, partition_size));
}

size_t GammaCurves::total(const std::vector<size_t>& partition_sizes, double Gamma) const {
    size_t s = 0;
    for (size_t t = 0; t < g.size(); ++t) s += duplicates(t, Gamma, partition_sizes.at(t));
    return s;
}

double initial_risk_tolerance(size_t tau, const GammaCurves& curves,
                              const std::vector<size_t>& partition_sizes) {
    if (curves.g.empty()) throw std::domain_error("initial_risk_tolerance: no representatives");
    size_t budget = std::max(tau, curves.g.size());
    auto total = [&](double g) { return curves.total(partition_sizes, g); };
    if (total(0.0) <= budget) return 0.0;
    if (total(1.0) > budget) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 40 && total(lo) != total(hi); ++it) {
        double mid = 0.5 * (lo + hi);
        (total(mid) <= budget ? hi : lo) = mid;
    }
    return hi;
}

// --- solve sketch ------------------------------------------------------------

SketchResult solve_sketch(const spaql::QuerySpec& q0, const StochasticRelation& rel,
                          const partition::Partitioning& parts, const SketchParams& params,
                          const std::map<int, double>& kappa_bump) {
    if (params.p_max < 1 || params.delta_gamma <= 0 ||
        (params.gamma >= 0 && params.gamma > 1.0))
        throw std::invalid_argument("solve_sketch: bad parameters");
    if (parts.reps.size() != parts.partitions.size())
        throw std::logic_error("solve_sketch: representatives not built");

    SketchResult out;
    auto q = spaql::normalize(q0);
    spaql::bind(q, rel);
    auto risks = spaql::extract_risk_params(q);

    std::vector<int> active;
    std::vector<std::vector<int64_t>> members(parts.partitions.size());
    for (size_t pid = 0; pid < parts.partitions.size(); ++pid) {
        members[pid] = partition_slice(parts.partitions[pid], q, rel);
        if (!members[pid].empty()) active.push_back(static_cast<int>(pid));
    }
    if (active.empty()) {
        out.note = "predicate excludes every tuple";
        return out;
    }

    std::vector<DuplicateSpec> base;
    std::vector<size_t> sizes;
    for (int pid : active) {
        DuplicateSpec s;
        s.pid = pid;
        s.d = 1;
        s.rho_bar = parts.median_rho.at(pid);
        s.marginals = parts.reps[pid].marginals;
        s.det = parts.reps[pid].det;
        s.size = members[pid].size();
        s.capacity = q.repeat_bound ? (1.0 + static_cast<double>(*q.repeat_bound)) *
                                          static_cast<double>(s.size)
                                    : kInf;
        for (const auto& [a, f] : s.marginals) {
            double kap = norta::norta_fit(std::min(s.rho_bar, 0.999), *f);
            if (auto it = kappa_bump.find(pid); it != kappa_bump.end())
                kap = std::min(kap + it->second, 0.99);
            s.kappa[a] = kap;
        }
        base.push_back(std::move(s));
        sizes.push_back(members[pid].size());
    }

    // deterministic pass over representatives (one duplicate per partition)
    {
        std::map<int, DuplicateSpec> qspecs;
        std::vector<int64_t> slice;
        for (const auto& s : base) {
            qspecs.emplace(s.pid, s);
            slice.push_back(duplicate_id(s.pid, 0));
        }
        SketchSource src(rel, qspecs);
        rcl::RclOptions ro;
        ro.variant = rcl::RclVariant::Sketch;
        rcl::SaaProblem sp(q, src, slice, params.rcl, ro);
        auto xq = sp.quick_solve();
        if (!xq) {
            if (sp.quick_unbounded()) {
                out.note = "objective unbounded without probabilistic constraints";
            } else {
                out.proven_infeasible = true;
                out.note = "deterministic core infeasible over representatives";
            }
            return out;
        }
        auto ev = sp.evaluate(*xq);
        if (ev.feasible) {
            out.package = *xq;
            out.omega = ev.omega;
            out.m = sp.opt_m();
            out.specs = std::move(qspecs);
            return out;
        }
    }

    size_t m = params.rcl.m0;
    const size_t opt_cap = std::min<size_t>(params.rcl.validation_size, 100000);
    GammaCurves curves;
    size_t curves_m = 0;
    auto curves_for = [&](size_t mm) -> const GammaCurves& {
        if (curves_m != mm) {
            curves = compute_gamma_curves(base, risks, mm, params.p_max, rel.seed);
            curves_m = mm;
        }
        return curves;
    };

    double Gamma = params.gamma;
    if (Gamma < 0)
        Gamma = risks.empty() ? 0.0 : initial_risk_tolerance(params.tau, curves_for(m), sizes);

    while (true) {
        const auto& cv = curves_for(m);
        std::map<int, DuplicateSpec> specs;
        std::vector<int64_t> slice;
        for (size_t t = 0; t < base.size(); ++t) {
            DuplicateSpec s = base[t];
            s.d = cv.duplicates(t, Gamma, sizes[t]);
            for (size_t k = 0; k < s.d; ++k) slice.push_back(duplicate_id(s.pid, k));
            specs.emplace(s.pid, std::move(s));
        }
        SketchSource src(rel, specs);
        rcl::RclOptions ro;
        ro.variant = rcl::RclVariant::Sketch;
        ro.fixed_m = m;
        auto rr = rcl_solve(q, src, slice, params.rcl, ro);
        if (rr.proven_infeasible) {
            out.proven_infeasible = true;
            out.note = rr.note;
            return out;
        }
        if (rr.package) {
            out.package = rr.package;
            out.omega = rr.omega;
            out.m = rr.scenarios_used;
            out.gamma = Gamma;
            out.specs = std::move(specs);
            return out;
        }
        if (rr.need_scenarios) {
            if (m >= opt_cap) {
                out.note = "scenario budget exhausted in sketch";
                return out;
            }
            m = std::min(2 * m, opt_cap);
        } else if (Gamma > 0) {
            Gamma = std::max(Gamma - params.delta_gamma, 0.0);
        } else {
            if (m >= opt_cap) {
                out.note = "sketch stalled at scenario cap";
                return out;
            }
            m = std::min(2 * m, opt_cap);
        }
    }
}

// --- refine ------------------------------------------------------------------

RefinePlan bin_partitions(const Package& sketch_pkg, const partition::Partitioning& parts,
                          size_t tau) {
    std::set<int> pids;
    for (const auto& [id, mult] : sketch_pkg.entries)
        if (is_duplicate_id(id)) pids.insert(decode_duplicate(id).first);

    std::vector<std::pair<size_t, int>> order;  // (size, pid), size desc then pid asc
    order.reserve(pids.size());
    for (int pid : pids) order.emplace_back(parts.partitions.at(pid).size(), pid);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    RefinePlan plan;
    std::vector<size_t> load;
    for (const auto& [sz, pid] : order) {
        int best = -1;
        size_t best_load = 0;
        for (size_t b = 0; b < plan.groups.size(); ++b)
            if (load[b] + sz <= tau && (best < 0 || load[b] > best_load)) {
                best = static_cast<int>(b);
                best_load = load[b];
            }
        if (best < 0) {
            plan.groups.push_back({pid});
            load.push_back(sz);
        } else {
            plan.groups[best].push_back(pid);
            load[best] += sz;
        }
    }
    plan.order.resize(plan.groups.size());
    for (size_t i = 0; i < plan.order.size(); ++i) plan.order[i] = static_cast<int>(i);
    return plan;
}

RefineOutcome refine(const SketchResult& sketch, const RefinePlan& plan,
                     const spaql::QuerySpec& q0, const StochasticRelation& rel,
                     const partition::Partitioning& parts, const SketchParams& params) {
    RefineOutcome out;
    if (!sketch.package) throw std::invalid_argument("refine: null sketch package");
    auto q = spaql::normalize(q0);
    spaql::bind(q, rel);

    std::map<int, std::vector<std::pair<int64_t, double>>> dup_by_pid;
    std::map<int64_t, double> fixed;  // committed real multiplicities
    for (const auto& [id, mult] : sketch.package->entries) {
        if (is_duplicate_id(id))
            dup_by_pid[decode_duplicate(id).first].emplace_back(id, mult);
        else
            fixed[id] = mult;  // already real (degenerate sketches)
    }

    std::vector<int> order = plan.order;
    const size_t K = order.size();
    double omega = sketch.omega;
    SketchSource src(rel, sketch.specs);

    const size_t max_attempts = K * K + 1;
    size_t attempts = 0;
    std::vector<std::vector<std::pair<int64_t, double>>> added(K);
    size_t k = 0;
    while (k < K) {
        const auto& group = plan.groups[order[k]];

        std::vector<int64_t> slice;
        for (int pid : group)
            for (int64_t id : partition_slice(parts.partitions.at(pid), q, rel))
                if (!fixed.count(id)) slice.push_back(id);

        rcl::RclOptions ro;
        ro.variant = rcl::RclVariant::Refine;
        ro.fixed_m = sketch.m;
        ro.omega_bar_override = sketch.omega;
        for (const auto& [id, mult] : fixed) {
            slice.push_back(id);
            ro.pins.emplace_back(id, mult);
        }
        for (size_t u = k + 1; u < K; ++u)
            for (int pid : plan.groups[order[u]])
                for (const auto& [id, mult] : dup_by_pid[pid]) {
                    slice.push_back(id);
                    ro.pins.emplace_back(id, mult);
                }

        auto rr = rcl_solve(q, src, slice, params.rcl, ro);
        ++out.solves;
        if (rr.package) {
            added[k].clear();
            for (int pid : group)
                for (int64_t id : parts.partitions.at(pid)) {
                    if (fixed.count(id)) continue;
                    double mult = rr.package->mult_of(id);
                    if (mult > 0) added[k].emplace_back(id, mult);
                }
            for (const auto& [id, mult] : added[k]) fixed[id] = mult;
            omega = rr.omega;
            ++k;
            continue;
        }

        if (k == 0) {
            out.first_position_failure = true;
            out.failed_group = group;
            out.note = "group infeasible in first position";
            return out;
        }
        if (++attempts >= max_attempts) {
            out.note = "backtracking exhausted";
            return out;
        }
        for (const auto& [id, mult] : added[k - 1]) fixed.erase(id);
        added[k - 1].clear();
        std::swap(order[k - 1], order[k]);
        --k;
    }

    Package pkg;
    for (const auto& [id, mult] : fixed) pkg.entries.emplace_back(id, mult);
    out.package = std::move(pkg);
    out.omega = omega;
    return out;
}

SketchRefineResult stochastic_sketch_refine(const spaql::QuerySpec& q0,
                                            const StochasticRelation& rel,
                                            const partition::Partitioning& parts,
                                            const SketchParams& params) {
    SketchRefineResult out;
    auto q = spaql::normalize(q0);
    spaql::bind(q, rel);

    if (rel.tuples.size() <= params.tau) {  // whole relation fits one refine bin
        auto t0 = std::chrono::steady_clock::now();
        auto rr = rcl_solve(q, rel, params.rcl);
        out.seconds_refine = seconds_since(t0);
        out.package = rr.package;
        out.omega = rr.omega;
        out.omega_bar = rr.omega_bar;
        out.certified = rr.certified;
        out.proven_infeasible = rr.proven_infeasible;
        out.m_sketch = rr.scenarios_used;
        out.trace = std::move(rr.trace);
        if (!out.package) {
            out.phase = "rcl";
            out.note = rr.note;
        }
        return out;
    }

    std::map<int, double> bump;
    for (int restart = 0; restart < 100; ++restart) {
        auto t0 = std::chrono::steady_clock::now();
        auto sk = solve_sketch(q, rel, parts, params, bump);
        out.seconds_sketch += seconds_since(t0);
        out.m_sketch = sk.m;
        out.gamma = sk.gamma;
        out.omega_bar = sk.omega;
        if (!sk.package) {
            out.phase = "sketch";
            out.note = sk.note;
            out.proven_infeasible = sk.proven_infeasible;
            return out;
        }

        auto plan = bin_partitions(*sk.package, parts, params.tau);
        auto t1 = std::chrono::steady_clock::now();
        auto rf = refine(sk, plan, q, rel, parts, params);
        out.seconds_refine += seconds_since(t1);
        if (rf.package) {
            out.package = std::move(rf.package);
            out.omega = rf.omega;
            out.certified = true;
            return out;
        }
        if (!rf.first_position_failure) {
            out.phase = "refine";
            out.note = rf.note;
            return out;
        }
        // raise the failing partitions' duplicate correlation and re-sketch
        bool moved = false;
        for (int pid : rf.failed_group) {
            auto it = sk.specs.find(pid);
            bool can = false;
            if (it != sk.specs.end())
                for (const auto& [a, kap] : it->second.kappa) can = can || kap < 0.989;
            if (can) {
                bump[pid] += params.delta_rho;
                moved = true;
            }
        }
        if (!moved) {
            out.phase = "refine";
            out.note = "duplicate correlation exhausted";
            return out;
        }
    }
    out.phase = "refine";
    out.note = "restart cap reached";
    return out;
}

// --- theorem utilities ---------------------------------------------------------

double approximation_lower_bound(double omega_star, double epsilon, double d_o, long p_max) {
    return (1.0 - epsilon) * (1.0 - epsilon) *
           (omega_star - d_o * static_cast<double>(p_max));
}

double sketch_feasibility_probability(long s, double delta, double alpha, double d_c) {
    if (s < 1 || d_c <= 0 || alpha <= 0 || alpha > 1 || delta < 0)
        throw std::domain_error("sketch_feasibility_probability: arguments out of range");
    double t = 0.5 * static_cast<double>(s) - delta * alpha / (2.0 * d_c);
    if (t < 0) return 1.0;
    double sum = 0;
    double sfact = 1;
    for (long i = 2; i <= s; ++i) sfact *= static_cast<double>(i);
    for (long k = 0; k <= static_cast<long>(std::floor(t)); ++k) {
        double term = binom(s, k) * std::pow(t - static_cast<double>(k), static_cast<double>(s));
        sum += (k % 2 ? -term : term);
    }
    return std::clamp(1.0 - sum / sfact, 0.0, 1.0);
}

}  // namespace spq::sketch
