#include "spq/rcl.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace spq::rcl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> xs) {
    if (xs.empty()) return 0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// value `a` satisfies `a dir b` up to a relative slack
bool dir_ok(double a, spaql::Dir dir, double b) {
    double tol = 1e-7 * std::max(1.0, std::abs(b));
    return dir == spaql::Dir::Geq ? a >= b - tol : a <= b + tol;
}

}  // namespace

// --- scenario sources -------------------------------------------------------

ScenarioMatrix RelationSource::scenarios(const std::string& attr, rng::Purpose purpose,
                                         size_t first, size_t count,
                                         const std::vector<int64_t>& ids) const {
    return generate_scenarios(*rel_, ids, attr, purpose, first, count);
}

double RelationSource::det_value(int64_t id, const std::string& attr) const {
    return rel_->at(id).det.at(attr);
}

std::vector<int64_t> where_slice(const spaql::QuerySpec& q, const StochasticRelation& rel) {
    std::vector<int64_t> out;
    out.reserve(rel.tuples.size());
    for (const auto& t : rel.tuples)
        if (!q.predicate || spaql::eval_pred(*q.predicate, t)) out.push_back(t.id);
    return out;
}

// --- small ops ---------------------------------------------------------------

double compute_v0_hat(double alpha, const ScenarioMatrix& scen, const Package& pkg) {
    double v0 = 0;
    for (const auto& [id, mult] : pkg.entries)
        v0 += mult * risk::estimate_cvar(alpha, scen.row(scen.row_of(id)));
    return v0;
}

bool relative_gap_exceeds(double opt_value, double val_value, double epsilon) {
    return std::abs(opt_value - val_value) / std::max(std::abs(val_value), 1e-9) > epsilon;
}

bool check_saa_gap(const Package& pkg, const spaql::QuerySpec& q,
                   const std::map<std::string, ScenarioMatrix>& opt,
                   const std::map<std::string, ScenarioMatrix>& val, double epsilon) {
    if (!q.normalized) throw std::logic_error("check_saa_gap: query must be normalized");
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> sums;
    auto sums_for = [&](const std::string& attr)
        -> const std::pair<std::vector<double>, std::vector<double>>& {
        auto it = sums.find(attr);
        if (it == sums.end()) {
            auto o = risk::package_scenario_sums(pkg, opt.at(attr));
            auto v = risk::package_scenario_sums(pkg, val.at(attr));
            it = sums.emplace(attr, std::make_pair(std::move(o), std::move(v))).first;
        }
        return it->second;
    };
    auto signum = [](bool neg) { return neg ? -1.0 : 1.0; };

    for (const auto& rp : spaql::extract_risk_params(q)) {
        const auto& [so, sv] = sums_for(rp.attr);
        double s = signum(rp.neg);
        std::vector<double> o(so.size()), v(sv.size());
        for (size_t j = 0; j < so.size(); ++j) o[j] = s * so[j];
        for (size_t j = 0; j < sv.size(); ++j) v[j] = s * sv[j];
        double vo, vv;
        if (rp.kind == risk::RiskKind::VaR) {
            vo = risk::estimate_var(rp.alpha, o);
            vv = risk::estimate_var(rp.alpha, v);
        } else {
            vo = risk::estimate_cvar(rp.alpha, o);
            vv = risk::estimate_cvar(rp.alpha, v);
        }
        if (relative_gap_exceeds(vo, vv, epsilon)) return true;
    }
    for (const auto& con : q.constraints) {
        if (const auto* ce = std::get_if<spaql::CExpSum>(&con)) {
            const auto& [so, sv] = sums_for(ce->attr);
            if (relative_gap_exceeds(mean_of(so), mean_of(sv), epsilon)) return true;
        }
    }
    if (q.objective.expected) {
        const auto& [so, sv] = sums_for(q.objective.attr);
        if (relative_gap_exceeds(mean_of(so), mean_of(sv), epsilon)) return true;
    }
    return false;
}

// --- alternating parameter search --------------------------------------------

namespace {

struct Probe {
    bool ilp_ok = false;
    Package pkg;
    ApsProblem::Eval ev;
};

struct SearchCtx {
    ApsProblem& prob;
    double delta, epsilon, omega_bar, thr;
    ApsResult& acc;
    TraceLog* trace;

    Probe run(const std::vector<double>& a, const std::vector<double>& v, const char* phase) {
        Probe pr;
        auto sol = prob.solve_at(a, v);
        if (sol) {
            pr.ilp_ok = true;
            pr.pkg = std::move(*sol);
            pr.ev = prob.evaluate(pr.pkg);
        }
        if (trace) {
            size_t rows = std::max<size_t>(prob.risk_count(), 1);
            for (size_t r = 0; r < rows; ++r) {
                TraceRow t;
                t.phase = phase;
                t.constraint = r;
                t.alpha = r < a.size() ? a[r] : kNaN;
                t.v = r < v.size() ? v[r] : kNaN;
                t.ilp_feasible = pr.ilp_ok;
                t.feasible = pr.ilp_ok && pr.ev.feasible;
                t.omega = pr.ilp_ok ? pr.ev.omega : kNaN;
                trace->push_back(std::move(t));
            }
        }
        if (pr.ilp_ok && pr.ev.feasible && pr.ev.omega > acc.best_omega) {
            acc.best = pr.pkg;
            acc.best_omega = pr.ev.omega;
            acc.best_alpha = a;
            acc.best_v = v;
        }
        return pr;
    }

    // Done / NeedScenarios short-circuits; Done takes priority.
    std::optional<PhaseStatus> hard_exit(const Probe& pr) const {
        if (!pr.ilp_ok) return std::nullopt;
        if (pr.ev.feasible && pr.ev.omega >= thr) return PhaseStatus::Done;
        if (pr.ev.need_scenarios) return PhaseStatus::NeedScenarios;
        return std::nullopt;
    }
};

}  // namespace

PhaseStatus alpha_search(ApsProblem& prob, ApsState& st, double delta, double epsilon,
                         double omega_bar, ApsResult& acc, TraceLog* trace) {
    SearchCtx ctx{prob, delta, epsilon, omega_bar, approx_threshold(omega_bar, epsilon), acc,
                  trace};
    const size_t R = prob.risk_count();
    if (R == 0) {
        auto pr = ctx.run(st.alpha, st.v, "alpha");
        if (auto ex = ctx.hard_exit(pr)) return *ex;
        return pr.ilp_ok && pr.ev.feasible ? PhaseStatus::Found : PhaseStatus::NotFound;
    }

    std::vector<double> v = st.v;
    auto pr = ctx.run(st.alpha_hi, v, "alpha");
    if (auto ex = ctx.hard_exit(pr)) return *ex;
    if (!pr.ilp_ok) {
        // Dead even at the relaxed corner: drop V' to its floor, which the
        // warm-start package is known to satisfy, and retry.
        bool lowered = false;
        for (size_t r = 0; r < R; ++r)
            if (v[r] > st.v_lo[r]) {
                v[r] = st.v_lo[r];
                lowered = true;
            }
        if (!lowered) return PhaseStatus::NotFound;
        pr = ctx.run(st.alpha_hi, v, "alpha");
        if (auto ex = ctx.hard_exit(pr)) return *ex;
        if (!pr.ilp_ok) return PhaseStatus::NotFound;
    }
    if (pr.ev.feasible) {
        st.alpha = st.alpha_hi;
        st.v = v;
        return PhaseStatus::Found;
    }

    // Problematic set: constraints violated at the relaxed corner. If the
    // failure lies elsewhere (expected rows), search every alpha.
    std::vector<char> active(R, 0);
    bool any = false;
    for (size_t r = 0; r < R; ++r)
        if (!pr.ev.risk_ok[r]) active[r] = any = true;
    if (!any) active.assign(R, 1);

    bool found = false;
    std::vector<double> fa, fv;
    std::vector<double> lo(R), hi(R);
    size_t restarts = 0;
    bool restart = true;
    while (restart) {
        restart = false;
        for (size_t r = 0; r < R; ++r) {
            lo[r] = prob.alpha_orig(r);
            hi[r] = st.alpha_hi[r];
        }
        while (true) {
            bool step = false;
            std::vector<double> mid(R);
            for (size_t r = 0; r < R; ++r) {
                if (!active[r]) {
                    mid[r] = st.alpha_hi[r];
                } else if (hi[r] - lo[r] >= delta) {
                    mid[r] = 0.5 * (lo[r] + hi[r]);
                    step = true;
                } else {
                    mid[r] = lo[r];
                }
            }
            if (!step) break;
            auto p2 = ctx.run(mid, v, "alpha");
            if (auto ex = ctx.hard_exit(p2)) return *ex;
            if (!p2.ilp_ok) {
                // infeasible ILP sits below the validated band: move up
                for (size_t r = 0; r < R; ++r)
                    if (active[r] && hi[r] - lo[r] >= delta) lo[r] = mid[r];
                continue;
            }
            if (p2.ev.feasible) {
                found = true;
                fa = mid;
                fv = v;
            }
            bool newly = false;
            for (size_t r = 0; r < R; ++r) {
                if (active[r]) {
                    if (hi[r] - lo[r] < delta) continue;
                    if (p2.ev.risk_ok[r])
                        lo[r] = mid[r];
                    else
                        hi[r] = mid[r];
                } else if (!p2.ev.risk_ok[r]) {
                    active[r] = 1;
                    newly = true;
                }
            }
            if (newly && restarts < R) {
                ++restarts;
                restart = true;
                break;
            }
        }
    }

    std::vector<double> fin(R);
    for (size_t r = 0; r < R; ++r) fin[r] = active[r] ? lo[r] : st.alpha_hi[r];
    auto p3 = ctx.run(fin, v, "alpha");
    if (auto ex = ctx.hard_exit(p3)) return *ex;
    if (p3.ilp_ok && p3.ev.feasible) {
        st.alpha = fin;
        st.v = v;
        return PhaseStatus::Found;
    }
    if (found) {
        st.alpha = fa;
        st.v = fv;
        return PhaseStatus::Found;
    }
    return PhaseStatus::NotFound;
}

PhaseStatus v_search(ApsProblem& prob, ApsState& st, double delta, double epsilon,
                     double omega_bar, ApsResult& acc, TraceLog* trace) {
    SearchCtx ctx{prob, delta, epsilon, omega_bar, approx_threshold(omega_bar, epsilon), acc,
                  trace};
    const size_t R = prob.risk_count();
    if (R == 0) {
        auto pr = ctx.run(st.alpha, st.v, "v");
        if (auto ex = ctx.hard_exit(pr)) return *ex;
        return pr.ilp_ok && pr.ev.feasible ? PhaseStatus::Found : PhaseStatus::NotFound;
    }

    std::vector<double> lo = st.v_lo, hi = st.v;
    bool found = false;
    std::vector<double> fv;
    while (true) {
        bool step = false;
        std::vector<double> mid(R);
        for (size_t r = 0; r < R; ++r) {
            if (hi[r] - lo[r] >= delta) {
                mid[r] = 0.5 * (lo[r] + hi[r]);
                step = true;
            } else {
                mid[r] = hi[r];
            }
        }
        if (!step) break;
        auto pr = ctx.run(st.alpha, mid, "v");
        if (auto ex = ctx.hard_exit(pr)) return *ex;
        if (!pr.ilp_ok) {
            // should not happen below a solvable V_U; push back up
            for (size_t r = 0; r < R; ++r)
                if (hi[r] - lo[r] >= delta) lo[r] = mid[r];
            continue;
        }
        if (pr.ev.feasible) {
            found = true;
            fv = mid;
        }
        for (size_t r = 0; r < R; ++r) {
            if (hi[r] - lo[r] < delta) continue;
            if (pr.ev.risk_ok[r])
                hi[r] = mid[r];
            else
                lo[r] = mid[r];
        }
    }
    auto p3 = ctx.run(st.alpha, hi, "v");
    if (auto ex = ctx.hard_exit(p3)) return *ex;
    if (p3.ilp_ok && p3.ev.feasible) {
        st.v = hi;
        return PhaseStatus::Found;
    }
    if (found) {
        st.v = fv;
        return PhaseStatus::Found;
    }
    return PhaseStatus::NotFound;
}

ApsResult aps_search(ApsProblem& prob, double delta, double epsilon, double omega_bar,
                     TraceLog* trace, size_t max_passes) {
    ApsResult res;
    const size_t R = prob.risk_count();
    ApsState st;
    st.alpha.assign(R, 1.0);
    st.alpha_hi.assign(R, 1.0);
    st.v.resize(R);
    st.v_lo.resize(R);
    for (size_t r = 0; r < R; ++r) {
        st.v[r] = prob.v_orig(r);
        st.v_lo[r] = std::min(prob.v_lower(r), prob.v_orig(r));
    }

    std::vector<double> prev_a, prev_v;
    for (size_t pass = 0; pass < max_passes; ++pass) {
        auto ao = alpha_search(prob, st, delta, epsilon, omega_bar, res, trace);
        if (ao == PhaseStatus::Done) {
            res.status = ApsStatus::Done;
            return res;
        }
        if (ao == PhaseStatus::NeedScenarios) {
            res.status = ApsStatus::NeedScenarios;
            return res;
        }
        if (ao == PhaseStatus::NotFound) {
            res.status = ApsStatus::NoProgress;
            return res;
        }
        st.alpha_hi = st.alpha;

        auto vo = v_search(prob, st, delta, epsilon, omega_bar, res, trace);
        if (vo == PhaseStatus::Done) {
            res.status = ApsStatus::Done;
            return res;
        }
        if (vo == PhaseStatus::NeedScenarios) {
            res.status = ApsStatus::NeedScenarios;
            return res;
        }
        if (R == 0) break;

        if (!prev_a.empty()) {
            double prog = 0;
            for (size_t r = 0; r < R; ++r)
                prog = std::max({prog, std::abs(prev_a[r] - st.alpha[r]),
                                 std::abs(prev_v[r] - st.v[r])});
            if (prog < delta) break;
        }
        prev_a = st.alpha;
        prev_v = st.v;

        // tighten V' so the next alpha phase starts from an infeasible corner
        bool moved = false;
        for (size_t r = 0; r < R; ++r) {
            double nv = std::max(st.v[r] - delta, st.v_lo[r]);
            if (nv < st.v[r]) moved = true;
            st.v[r] = nv;
        }
        if (!moved) break;
    }
    res.status = ApsStatus::NoProgress;
    return res;
}

// --- SAA problem --------------------------------------------------------------

SaaProblem::SaaProblem(const spaql::QuerySpec& q, const ScenarioSource& src,
                       std::vector<int64_t> slice, const RclParams& params,
                       const RclOptions& opts)
    : q_(&q), src_(&src), ids_(std::move(slice)), params_(params), opts_(opts) {
    if (!q.normalized) throw std::logic_error("SaaProblem: query must be normalized");
    risks_ = spaql::extract_risk_params(q);
    m_ = opts_.fixed_m ? opts_.fixed_m : params_.m0;
    v_lower_.resize(risks_.size());
    for (size_t r = 0; r < risks_.size(); ++r) v_lower_[r] = risks_[r].v;

    std::vector<std::string> det_attrs;
    for (const auto& con : q.constraints)
        if (const auto* cd = std::get_if<spaql::CDetSum>(&con)) det_attrs.push_back(cd->attr);
    if (!q.objective.expected) det_attrs.push_back(q.objective.attr);
    for (const auto& a : det_attrs) {
        if (det_vals_.count(a)) continue;
        std::vector<double> col(ids_.size());
        for (size_t i = 0; i < ids_.size(); ++i) col[i] = src_->det_value(ids_[i], a);
        det_vals_[a] = std::move(col);
    }
    rebuild_opt_side();
}

void SaaProblem::rebuild_opt_side() {
    opt_.clear();
    tables_.clear();
    opt_means_.clear();

    std::vector<std::string> stoch_attrs;
    for (const auto& rp : risks_) stoch_attrs.push_back(rp.attr);
    for (const auto& con : q_->constraints)
        if (const auto* ce = std::get_if<spaql::CExpSum>(&con)) stoch_attrs.push_back(ce->attr);
    if (q_->objective.expected) stoch_attrs.push_back(q_->objective.attr);

    for (const auto& a : stoch_attrs) {
        if (opt_.count(a)) continue;
        opt_.emplace(a, src_->scenarios(a, rng::Purpose::Opt, 0, m_, ids_));
    }
    for (const auto& [a, scen] : opt_) {
        std::vector<double> mu(ids_.size());
        for (size_t i = 0; i < ids_.size(); ++i) mu[i] = mean_of(scen.row(i));
        opt_means_[a] = std::move(mu);
    }
    for (const auto& rp : risks_) {
        int sign = rp.neg ? -1 : 1;
        auto key = std::make_pair(rp.attr, sign);
        if (tables_.count(key)) continue;
        const auto& scen = opt_.at(rp.attr);
        if (sign > 0) {
            tables_.emplace(key, risk::CvarTable::build(scen));
        } else {
            ScenarioMatrix negd = scen;
            for (auto& x : negd.v) x = -x;
            tables_.emplace(key, risk::CvarTable::build(negd));
        }
    }
}

void SaaProblem::extend() {
    m_ *= 2;
    rebuild_opt_side();
}

void SaaProblem::refresh_origin(const Package& x_d) {
    for (size_t r = 0; r < risks_.size(); ++r) {
        const auto& rp = risks_[r];
        const auto& tab = tables_.at({rp.attr, rp.neg ? -1 : 1});
        const auto& scen = opt_.at(rp.attr);
        double v0 = 0;
        for (const auto& [id, mult] : x_d.entries)
            v0 += mult * tab.cvar(scen.row_of(id), rp.alpha);
        v_lower_[r] = std::min(v0, rp.v);
    }
}

const std::vector<double>& SaaProblem::val_row(const std::string& attr, int64_t id) {
    auto& per_attr = val_rows_[attr];
    auto it = per_attr.find(id);
    if (it == per_attr.end()) {
        auto scen =
            src_->scenarios(attr, rng::Purpose::Val, 0, params_.validation_size, {id});
        it = per_attr.emplace(id, std::vector<double>(scen.v)).first;
    }
    return it->second;
}

std::vector<double> SaaProblem::opt_sums(const std::string& attr, const Package& pkg) const {
    return risk::package_scenario_sums(pkg, opt_.at(attr));
}

std::vector<double> SaaProblem::val_sums(const std::string& attr, const Package& pkg) {
    std::vector<double> out(params_.validation_size, 0.0);
    for (const auto& [id, mult] : pkg.entries) {
        const auto& row = val_row(attr, id);
        for (size_t j = 0; j < out.size(); ++j) out[j] += mult * row[j];
    }
    return out;
}

ilp::ModelInputs SaaProblem::base_inputs(bool probabilistic) const {
    ilp::ModelInputs in;
    in.ids = ids_;
    in.det_values = det_vals_;
    in.expected_means = opt_means_;
    in.include_probabilistic = probabilistic;
    in.ub_override = opts_.ub_override;
    in.pins = opts_.pins;
    in.group_capacity = opts_.group_capacity;
    in.relax_integrality = params_.relax_integrality;

    double sign = q_->objective.negated ? -1.0 : 1.0;
    in.objective.resize(ids_.size());
    if (q_->objective.expected) {
        const auto& mu = opt_means_.at(q_->objective.attr);
        for (size_t i = 0; i < ids_.size(); ++i) in.objective[i] = sign * mu[i];
    } else {
        const auto& dv = det_vals_.at(q_->objective.attr);
        for (size_t i = 0; i < ids_.size(); ++i) in.objective[i] = sign * dv[i];
    }
    return in;
}

std::optional<Package> SaaProblem::run_model(const ilp::IlpModel& model) {
    std::vector<double> x;
    if (params_.relax_integrality) {
        auto lp = ilp::solve_lp_relaxation(model);
        if (lp.status == ilp::Status::Unbounded) {
            unbounded_ = true;
            return std::nullopt;
        }
        if (lp.status != ilp::Status::Optimal) return std::nullopt;
        x = lp.x;
    } else {
        auto res = ilp::solve(model, std::chrono::duration<double>(params_.ilp_time_limit_sec));
        if (res.status == ilp::Status::Unbounded) {
            unbounded_ = true;
            return std::nullopt;
        }
        if (!res.assignment) return std::nullopt;
        x = std::move(*res.assignment);
    }
    Package pkg;
    for (size_t i = 0; i < ids_.size(); ++i) {
        double mult = params_.relax_integrality ? x[i] : std::round(x[i]);
        if (mult > 1e-9) pkg.entries.emplace_back(ids_[i], mult);
    }
    return pkg;
}

std::optional<Package> SaaProblem::quick_solve() {
    auto model = ilp::build_model(*q_, base_inputs(false));
    return run_model(model);
}

std::optional<Package> SaaProblem::solve_at(const std::vector<double>& alphas,
                                            const std::vector<double>& vs) {
    if (alphas.size() != risks_.size() || vs.size() != risks_.size())
        throw std::invalid_argument("solve_at: parameter count mismatch");
    auto in = base_inputs(true);
    for (size_t r = 0; r < risks_.size(); ++r) {
        const auto& rp = risks_[r];
        ilp::LinearizedRisk row;
        row.constraint_index = rp.constraint_index;
        row.coeffs = tables_.at({rp.attr, rp.neg ? -1 : 1}).coefficients(alphas[r]);
        row.v_prime = vs[r];
        in.risk_rows.push_back(std::move(row));
    }
    auto model = ilp::build_model(*q_, in);
    return run_model(model);
}

ApsProblem::Eval SaaProblem::evaluate(const Package& pkg) {
    Eval ev;
    ev.risk_ok.assign(risks_.size(), 1);
    bool ok = true;

    if (q_->repeat_bound) {
        double cap = 1.0 + static_cast<double>(*q_->repeat_bound);
        for (const auto& [id, mult] : pkg.entries)
            if (mult > cap + 1e-7) ok = false;
    }

    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> sums;
    auto sums_for = [&](const std::string& attr)
        -> const std::pair<std::vector<double>, std::vector<double>>& {
        auto it = sums.find(attr);
        if (it == sums.end())
            it = sums.emplace(attr, std::make_pair(opt_sums(attr, pkg), val_sums(attr, pkg)))
                     .first;
        return it->second;
    };

    for (const auto& con : q_->constraints) {
        if (const auto* cc = std::get_if<spaql::CCount>(&con)) {
            double total = pkg.total();
            double tol = 1e-7 * std::max(1.0, std::abs(cc->bound));
            bool sat = cc->rel == spaql::CountRel::Leq   ? total <= cc->bound + tol
                       : cc->rel == spaql::CountRel::Geq ? total >= cc->bound - tol
                                                         : std::abs(total - cc->bound) <= tol;
            ok &= sat;
        } else if (const auto* cd = std::get_if<spaql::CDetSum>(&con)) {
            double s = 0;
            for (const auto& [id, mult] : pkg.entries)
                s += mult * src_->det_value(id, cd->attr);
            ok &= dir_ok(s, cd->dir, cd->bound);
        } else if (const auto* ce = std::get_if<spaql::CExpSum>(&con)) {
            const auto& [so, sv] = sums_for(ce->attr);
            ok &= dir_ok(mean_of(sv), ce->dir, ce->bound);
            if (relative_gap_exceeds(mean_of(so), mean_of(sv), params_.epsilon))
                ev.need_scenarios = true;
        }
    }

    for (size_t r = 0; r < risks_.size(); ++r) {
        const auto& rp = risks_[r];
        const auto& [so, sv] = sums_for(rp.attr);
        double sgn = rp.neg ? -1.0 : 1.0;
        std::vector<double> o(so.size()), v(sv.size());
        for (size_t j = 0; j < so.size(); ++j) o[j] = sgn * so[j];
        for (size_t j = 0; j < sv.size(); ++j) v[j] = sgn * sv[j];
        double vo, vv;
        if (rp.kind == risk::RiskKind::VaR) {
            vo = risk::estimate_var(rp.alpha, o);
            vv = risk::estimate_var(rp.alpha, v);
        } else {
            vo = risk::estimate_cvar(rp.alpha, o);
            vv = risk::estimate_cvar(rp.alpha, v);
        }
        bool sat = vv >= rp.v - 1e-7 * std::max(1.0, std::abs(rp.v));
        ev.risk_ok[r] = sat;
        ok &= sat;
        if (relative_gap_exceeds(vo, vv, params_.epsilon)) ev.need_scenarios = true;
    }

    double sign = q_->objective.negated ? -1.0 : 1.0;
    if (q_->objective.expected) {
        const auto& [so, sv] = sums_for(q_->objective.attr);
        ev.omega = sign * mean_of(sv);
        if (relative_gap_exceeds(sign * mean_of(so), ev.omega, params_.epsilon))
            ev.need_scenarios = true;
    } else {
        double s = 0;
        for (const auto& [id, mult] : pkg.entries)
            s += mult * src_->det_value(id, q_->objective.attr);
        ev.omega = sign * s;
    }

    ev.feasible = ok;
    return ev;
}

// --- driver --------------------------------------------------------------------

RclResult rcl_solve(const spaql::QuerySpec& q, const ScenarioSource& src,
                    const std::vector<int64_t>& slice, const RclParams& params,
                    const RclOptions& opts) {
    if (!q.normalized) throw std::logic_error("rcl_solve: query must be normalized");
    if (params.m0 < 1 || params.validation_size < params.m0 || params.delta <= 0 ||
        params.epsilon <= 0 || params.epsilon >= 1)
        throw std::invalid_argument("rcl_solve: bad parameters");

    RclResult out;
    SaaProblem sp(q, src, slice, params, opts);
    out.scenarios_used = sp.opt_m();

    auto quick_trace = [&](const std::optional<Package>& p, const ApsProblem::Eval* ev) {
        size_t rows = std::max<size_t>(sp.risk_count(), 1);
        for (size_t r = 0; r < rows; ++r) {
            TraceRow t;
            t.phase = "quick";
            t.constraint = r;
            t.ilp_feasible = p.has_value();
            t.feasible = ev && ev->feasible;
            t.omega = ev ? ev->omega : kNaN;
            out.trace.push_back(std::move(t));
        }
    };

    auto xd = sp.quick_solve();
    if (!xd) {
        quick_trace(xd, nullptr);
        if (sp.quick_unbounded())
            out.note = "objective unbounded without probabilistic constraints";
        else {
            out.proven_infeasible = true;
            out.note = "deterministic core infeasible";
        }
        return out;
    }
    auto evd = sp.evaluate(*xd);
    quick_trace(xd, &evd);

    double omega_bar = opts.omega_bar_override.value_or(evd.omega);
    out.omega_bar = omega_bar;
    const double thr = approx_threshold(omega_bar, params.epsilon);
    if (evd.feasible && (opts.variant != RclVariant::Refine || evd.omega >= thr)) {
        out.package = *xd;
        out.omega = evd.omega;
        out.certified = true;
        out.quick_path = true;
        return out;
    }

    std::optional<Package> inc;
    double inc_omega = -std::numeric_limits<double>::infinity();
    bool certified = false;
    while (true) {
        sp.refresh_origin(*xd);
        ApsResult ar =
            aps_search(sp, params.delta, params.epsilon, omega_bar, &out.trace, params.max_passes);
        if (ar.best && ar.best_omega > inc_omega) {
            inc = ar.best;
            inc_omega = ar.best_omega;
        }
        out.scenarios_used = sp.opt_m();
        if (ar.status == ApsStatus::Done) {
            certified = true;
            break;
        }
        if (opts.variant == RclVariant::Sketch) {
            out.need_scenarios = ar.status == ApsStatus::NeedScenarios;
            out.note = out.need_scenarios ? "sample gap at current scenario count"
                                          : "search stalled";
            return out;
        }
        if (opts.variant == RclVariant::Refine) {
            out.note = "no certified package at fixed scenario count";
            return out;
        }
        if (2 * sp.opt_m() > params.validation_size) {
            out.budget_exhausted = true;
            out.note = "scenario budget exhausted";
            break;
        }
        sp.extend();
    }

    if (inc) {
        out.package = *inc;
        out.omega = inc_omega;
        out.certified = certified;
    }
    return out;
}

RclResult rcl_solve(const spaql::QuerySpec& q0, const StochasticRelation& rel,
                    const RclParams& params, const RclOptions& opts) {
    auto q = spaql::normalize(q0);
    spaql::bind(q, rel);
    RelationSource src(rel);
    return rcl_solve(q, src, where_slice(q, rel), params, opts);
}

}  // namespace spq::rcl
