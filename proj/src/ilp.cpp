#include "spq/ilp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace spq::ilp {

namespace {
constexpr double kFeasTol = 1e-7;
constexpr double kIntTol = 1e-6;
constexpr double kRelGap = 1e-6;
constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
// refuse to build simplex workspaces beyond ~1.2 GB of doubles
constexpr double kMemCapDoubles = 1.5e8;
}  // namespace

int IlpModel::add_var(double lo_, double hi_, bool integral, double obj, std::string name) {
    lo.push_back(lo_);
    hi.push_back(hi_);
    integrality.push_back(integral ? 1 : 0);
    objective.push_back(obj);
    var_names.push_back(name.empty() ? "x" + std::to_string(var_count) : std::move(name));
    return var_count++;
}

void IlpModel::pin(int var, double value) {
    lo[var] = value;
    hi[var] = value;
}

void IlpModel::check() const {
    if (static_cast<int>(lo.size()) != var_count || static_cast<int>(hi.size()) != var_count ||
        static_cast<int>(objective.size()) != var_count ||
        static_cast<int>(integrality.size()) != var_count)
        throw std::invalid_argument("IlpModel: inconsistent dimensions");
    for (int j = 0; j < var_count; ++j) {
        if (!(lo[j] <= hi[j])) throw std::invalid_argument("IlpModel: lo > hi for var " + std::to_string(j));
        if (lo[j] < 0) throw std::invalid_argument("IlpModel: negative lower bound");
    }
    for (auto& r : rows)
        for (auto& [j, v] : r.coeffs)
            if (j < 0 || j >= var_count) throw std::invalid_argument("IlpModel: bad row index");
}

namespace {

// ---------------------------------------------------------------------------
// Bounded-variable primal simplex with dense basis inverse.
// Columns: [0, n) structural, [n, n+R) slacks, [n+R, n+2R) artificials.
// ---------------------------------------------------------------------------
struct Simplex {
    int n = 0, R = 0, N = 0;  // structural / rows / total columns
    std::vector<std::vector<std::pair<int, double>>> cols;
    std::vector<double> lo, hi, cost;  // phase-2 cost
    std::vector<double> b;
    std::vector<double> binv;  // R x R row-major
    std::vector<int> basis;    // var index per row
    std::vector<int> state;    // 0 = at lo, 1 = at hi, 2 = basic
    std::vector<double> xval;  // current value per column
    long iter_cap = 0;

    enum class Out { Optimal, Infeasible, Unbounded, IterLimit };

    explicit Simplex(const IlpModel& m, const std::vector<double>& vlo, const std::vector<double>& vhi) {
        n = m.var_count;
        R = static_cast<int>(m.rows.size());
        N = n + 2 * R;
        cols.resize(N);
        lo.assign(N, 0.0);
        hi.assign(N, 0.0);
        cost.assign(N, 0.0);
        for (int j = 0; j < n; ++j) {
            lo[j] = vlo[j];
            hi[j] = vhi[j];
            cost[j] = m.objective[j];
        }
        b.resize(R);
        for (int r = 0; r < R; ++r) {
            const Row& row = m.rows[r];
            b[r] = row.rhs;
            for (auto& [j, v] : row.coeffs)
                if (v != 0.0) cols[j].emplace_back(r, v);
            int s = n + r;
            cols[s].emplace_back(r, 1.0);
            switch (row.rel) {
                case Rel::Leq: lo[s] = 0; hi[s] = kInf; break;
                case Rel::Geq: lo[s] = -kInf; hi[s] = 0; break;
                case Rel::Eq: lo[s] = 0; hi[s] = 0; break;
            }
            int a = n + R + r;
            cols[a].emplace_back(r, 1.0);  // sign fixed up in init()
            lo[a] = 0;
            hi[a] = 0;  // opened only during phase 1
        }
        iter_cap = 20000 + 50L * N;
    }

    double colval(int j, int r) const {
        for (auto& [rr, v] : cols[j])
            if (rr == r) return v;
        return 0;
    }

    void mult_binv(const std::vector<std::pair<int, double>>& col, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (auto& [k, v] : col)
            for (int i = 0; i < R; ++i) out[i] += binv[static_cast<size_t>(i) * R + k] * v;
    }

    // basic values from scratch: x_B = B^-1 (b - sum_nonbasic A_j x_j)
    void refresh_basics() {
        std::vector<double> rhs = b;
        for (int j = 0; j < N; ++j) {
            if (state[j] == 2 || xval[j] == 0.0) continue;
            for (auto& [r, v] : cols[j]) rhs[r] -= v * xval[j];
        }
        for (int i = 0; i < R; ++i) {
            double s = 0;
            for (int k = 0; k < R; ++k) s += binv[static_cast<size_t>(i) * R + k] * rhs[k];
            xval[basis[i]] = s;
        }
    }

    Out run(const std::vector<double>& c, bool phase1, long& iters) {
        std::vector<double> y(R), w(R);
        while (true) {
            if (++iters > iter_cap) return Out::IterLimit;
            // y = c_B B^-1
            for (int k = 0; k < R; ++k) {
                double s = 0;
                for (int i = 0; i < R; ++i) s += c[basis[i]] * binv[static_cast<size_t>(i) * R + k];
                y[k] = s;
            }
            // Bland: smallest improving column index
            int enter = -1;
            double d_enter = 0;
            for (int j = 0; j < N; ++j) {
                if (state[j] == 2 || lo[j] == hi[j]) continue;
                if (!phase1 && j >= n + R) continue;  // artificials sealed in phase 2
                double d = c[j];
                for (auto& [r, v] : cols[j]) d -= y[r] * v;
                if ((state[j] == 0 && d > kCostTol) || (state[j] == 1 && d < -kCostTol)) {
                    enter = j;
                    d_enter = d;
                    break;
                }
            }
            if (enter < 0) return Out::Optimal;
            bool up = state[enter] == 0;  // moving away from lower bound?
            mult_binv(cols[enter], w);
            // ratio test; basic vars move as x_B -= sign * t * w
            double t_max = hi[enter] - lo[enter];  // own-bound flip distance
            int leave_pos = -1;
            double sign = up ? 1.0 : -1.0;
            for (int i = 0; i < R; ++i) {
                double wi = sign * w[i];
                int bi = basis[i];
                double t;
                if (wi > kPivotTol)
                    t = (xval[bi] - lo[bi]) / wi;  // decreasing toward lo
                else if (wi < -kPivotTol)
                    t = (hi[bi] - xval[bi]) / (-wi);  // increasing toward hi
                else
                    continue;
                if (t < 0) t = 0;
                // Bland: strict improvement, or tie broken on smallest var index
                if (t < t_max - 1e-12) {
                    t_max = t;
                    leave_pos = i;
                } else if (t <= t_max + 1e-12 && leave_pos >= 0 && basis[i] < basis[leave_pos]) {
                    leave_pos = i;
                }
            }
            if (leave_pos < 0 && !(t_max < 1e290)) return Out::Unbounded;
            // apply the step
            for (int i = 0; i < R; ++i) xval[basis[i]] -= sign * t_max * w[i];
            xval[enter] = up ? lo[enter] + t_max : hi[enter] - t_max;
            if (leave_pos < 0) {
                state[enter] = up ? 1 : 0;  // bound flip
                continue;
            }
            int leave = basis[leave_pos];
            double wl = w[leave_pos];
            // leaving var lands on the bound it hit (wi > 0 drove it to lo)
            state[leave] = sign * wl > 0 ? 0 : 1;
            xval[leave] = state[leave] == 0 ? lo[leave] : hi[leave];
            basis[leave_pos] = enter;
            state[enter] = 2;
            // eta update of B^-1
            double piv = wl;
            double* rowp = binv.data() + static_cast<size_t>(leave_pos) * R;
            for (int k = 0; k < R; ++k) rowp[k] /= piv;
            for (int i = 0; i < R; ++i) {
                if (i == leave_pos) continue;
                double f = w[i];
                if (std::abs(f) < kPivotTol) continue;
                double* ri = binv.data() + static_cast<size_t>(i) * R;
                for (int k = 0; k < R; ++k) ri[k] -= f * rowp[k];
            }
            if (iters % 64 == 0) refresh_basics();
        }
    }

    LpResult solve() {
        LpResult out;
        xval.assign(N, 0.0);
        state.assign(N, 0);
        // nonbasic start: structural + slacks at the finite bound nearest zero
        for (int j = 0; j < n + R; ++j) {
            if (lo[j] != -kInf) {
                state[j] = 0;
                xval[j] = lo[j];
            } else {
                state[j] = 1;
                xval[j] = hi[j];
            }
        }
        // basis: slack when the start residual fits its bounds, else artificial
        basis.resize(R);
        binv.assign(static_cast<size_t>(R) * R, 0.0);
        std::vector<double> resid(R);
        for (int r = 0; r < R; ++r) {
            resid[r] = b[r];
            xval[n + r] = 0;  // slack, provisional
        }
        for (int j = 0; j < n; ++j)
            if (xval[j] != 0.0)
                for (auto& [r, v] : cols[j]) resid[r] -= v * xval[j];
        bool need_phase1 = false;
        for (int r = 0; r < R; ++r) {
            int s = n + r, a = n + R + r;
            bool fits = resid[r] >= lo[s] - kFeasTol && resid[r] <= hi[s] + kFeasTol;
            if (fits) {
                basis[r] = s;
                state[s] = 2;
                xval[s] = resid[r];
                binv[static_cast<size_t>(r) * R + r] = 1.0;
            } else {
                need_phase1 = true;
                // slack parks at its finite bound, which is always 0
                state[s] = lo[s] == -kInf ? 1 : 0;
                xval[s] = 0.0;
                double res2 = resid[r];
                cols[a][0].second = res2 >= 0 ? 1.0 : -1.0;
                hi[a] = kInf;
                basis[r] = a;
                state[a] = 2;
                xval[a] = std::abs(res2);
                binv[static_cast<size_t>(r) * R + r] = cols[a][0].second;  // diag basis is its own inverse
            }
        }
        long iters = 0;
        if (need_phase1) {
            std::vector<double> c1(N, 0.0);
            for (int r = 0; r < R; ++r) c1[n + R + r] = -1.0;  // maximize -sum(artificials)
            Out res = run(c1, true, iters);
            if (res == Out::IterLimit) { out.status = Status::TimeLimit; return out; }
            double infeas = 0;
            for (int r = 0; r < R; ++r) infeas += xval[n + R + r];
            if (infeas > 1e-6) { out.status = Status::Infeasible; return out; }
            // seal artificials
            for (int r = 0; r < R; ++r) {
                int a = n + R + r;
                hi[a] = 0;
                if (state[a] == 2) xval[a] = 0;  // degenerate basic artificial stays at 0
            }
        }
        Out res = run(cost, false, iters);
        refresh_basics();
        if (res == Out::IterLimit) { out.status = Status::TimeLimit; return out; }
        if (res == Out::Unbounded) { out.status = Status::Unbounded; return out; }
        out.status = Status::Optimal;
        out.x.assign(xval.begin(), xval.begin() + n);
        out.objective = 0;
        for (int j = 0; j < n; ++j) out.objective += cost[j] * out.x[j];
        return out;
    }
};

bool row_satisfied(const Row& row, const std::vector<double>& x) {
    double s = 0;
    for (auto& [j, v] : row.coeffs) s += v * x[j];
    double slackTol = kFeasTol * std::max(1.0, std::abs(row.rhs));
    switch (row.rel) {
        case Rel::Leq: return s <= row.rhs + slackTol;
        case Rel::Geq: return s >= row.rhs - slackTol;
        case Rel::Eq: return std::abs(s - row.rhs) <= slackTol;
    }
    return false;
}

bool feasible_point(const IlpModel& m, const std::vector<double>& x, const std::vector<double>& vlo,
                    const std::vector<double>& vhi) {
    for (int j = 0; j < m.var_count; ++j)
        if (x[j] < vlo[j] - kFeasTol || x[j] > vhi[j] + kFeasTol) return false;
    for (auto& r : m.rows)
        if (!row_satisfied(r, x)) return false;
    return true;
}

struct Node {
    double bound;
    long seq;
    int parent;  // index into pool, -1 = root
    int var = -1;
    bool upper_side = false;  // true: hi tightened, false: lo tightened
    double value = 0;
};

}  // namespace

LpResult solve_lp_relaxation(const IlpModel& model) {
    model.check();
    double est = static_cast<double>(model.rows.size()) * static_cast<double>(model.rows.size()) +
                 2.0 * static_cast<double>(model.var_count);
    if (est > kMemCapDoubles) {
        LpResult r;
        r.status = Status::TimeLimit;
        return r;
    }
    if (model.var_count == 0) return {Status::Optimal, {}, 0};
    Simplex sx(model, model.lo, model.hi);
    return sx.solve();
}

SolveResult solve(const IlpModel& model, std::chrono::duration<double> time_limit) {
    auto t0 = std::chrono::steady_clock::now();
    model.check();
    SolveResult out;
    double est = static_cast<double>(model.rows.size()) * static_cast<double>(model.rows.size()) +
                 2.0 * static_cast<double>(model.var_count);
    if (est > kMemCapDoubles) {
        out.status = Status::TimeLimit;
        out.limit_reason = "model exceeds memory cap";
        return out;
    }
    if (model.var_count == 0) {
        out.status = Status::Optimal;
        out.assignment = std::vector<double>{};
        out.objective = 0;
        return out;
    }

    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0); };
    auto lp_with_bounds = [&](const std::vector<double>& vlo, const std::vector<double>& vhi) {
        Simplex sx(model, vlo, vhi);
        return sx.solve();
    };

    std::vector<Node> pool;
    auto bounds_of = [&](int node_idx, std::vector<double>& vlo, std::vector<double>& vhi) {
        vlo = model.lo;
        vhi = model.hi;
        for (int i = node_idx; i >= 0; i = pool[i].parent) {
            const Node& nd = pool[i];
            if (nd.var < 0) continue;
            if (nd.upper_side)
                vhi[nd.var] = std::min(vhi[nd.var], nd.value);
            else
                vlo[nd.var] = std::max(vlo[nd.var], nd.value);
        }
    };

    std::vector<double> vlo, vhi;
    bounds_of(-1, vlo, vhi);
    LpResult root = lp_with_bounds(vlo, vhi);
    out.node_count = 1;
    if (root.status == Status::Infeasible) {
        out.status = Status::Infeasible;
        out.wall_seconds = elapsed().count();
        return out;
    }
    if (root.status == Status::Unbounded) {
        out.status = Status::Unbounded;
        out.wall_seconds = elapsed().count();
        return out;
    }
    if (root.status == Status::TimeLimit) {
        out.status = Status::TimeLimit;
        out.limit_reason = "simplex iteration cap";
        out.wall_seconds = elapsed().count();
        return out;
    }

    double incumbent_obj = -kInf;
    std::vector<double> incumbent;
    auto try_incumbent = [&](std::vector<double> x) {
        for (int j = 0; j < model.var_count; ++j)
            if (model.integrality[j]) x[j] = std::round(x[j]);
        if (!feasible_point(model, x, model.lo, model.hi)) return;
        double obj = 0;
        for (int j = 0; j < model.var_count; ++j) obj += model.objective[j] * x[j];
        if (obj > incumbent_obj) {
            incumbent_obj = obj;
            incumbent = std::move(x);
        }
    };
    try_incumbent(root.x);  // rounding heuristic

    auto most_fractional = [&](const std::vector<double>& x) {
        int best = -1;
        double best_score = kIntTol;
        for (int j = 0; j < model.var_count; ++j) {
            if (!model.integrality[j]) continue;
            double f = x[j] - std::floor(x[j]);
            double score = std::min(f, 1.0 - f);
            if (score > best_score) {
                best_score = score;
                best = j;
            }
        }
        return best;
    };

    using QEntry = std::pair<double, long>;  // (-bound, seq)
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> queue;
    std::vector<int> queue_node;
    long seq = 0;

    auto push_node = [&](int parent, int var, bool upper_side, double value, double bound) {
        pool.push_back({bound, seq, parent, var, upper_side, value});
        queue_node.push_back(static_cast<int>(pool.size()) - 1);
        queue.emplace(-bound, seq);
        ++seq;
    };

    int frac_root = most_fractional(root.x);
    if (frac_root < 0) {
        try_incumbent(root.x);
        out.status = Status::Optimal;
        out.assignment = incumbent;
        out.objective = incumbent_obj;
        out.wall_seconds = elapsed().count();
        return out;
    }
    double fval = root.x[frac_root];
    push_node(-1, frac_root, true, std::floor(fval), root.objective);
    push_node(-1, frac_root, false, std::floor(fval) + 1.0, root.objective);

    const long node_cap = 2'000'000;
    bool hit_limit = false;
    std::string limit_reason;
    while (!queue.empty()) {
        if (elapsed() > time_limit) {
            hit_limit = true;
            limit_reason = "time limit";
            break;
        }
        if (out.node_count > node_cap) {
            hit_limit = true;
            limit_reason = "node cap";
            break;
        }
        auto [negbound, s] = queue.top();
        queue.pop();
        double bound = -negbound;
        if (bound <= incumbent_obj + kRelGap * std::max(1.0, std::abs(incumbent_obj))) continue;
        int node_idx = queue_node[s];
        bounds_of(node_idx, vlo, vhi);
        bool box_ok = true;
        for (int j = 0; j < model.var_count && box_ok; ++j)
            if (vlo[j] > vhi[j] + kFeasTol) box_ok = false;
        if (!box_ok) continue;
        LpResult lr = lp_with_bounds(vlo, vhi);
        ++out.node_count;
        if (lr.status == Status::TimeLimit) {
            hit_limit = true;
            limit_reason = "simplex iteration cap";
            break;
        }
        if (lr.status != Status::Optimal) continue;  // infeasible branch
        if (lr.objective <= incumbent_obj + kRelGap * std::max(1.0, std::abs(incumbent_obj))) continue;
        int frac = most_fractional(lr.x);
        if (frac < 0) {
            try_incumbent(lr.x);
            continue;
        }
        double fv = lr.x[frac];
        push_node(node_idx, frac, true, std::floor(fv), lr.objective);
        push_node(node_idx, frac, false, std::floor(fv) + 1.0, lr.objective);
    }

    out.wall_seconds = elapsed().count();
    if (hit_limit) {
        out.status = Status::TimeLimit;
        out.limit_reason = limit_reason;
        if (incumbent_obj > -kInf) {
            out.assignment = incumbent;
            out.objective = incumbent_obj;
        }
        return out;
    }
    if (incumbent_obj == -kInf) {
        out.status = Status::Infeasible;
        return out;
    }
    out.status = Status::Optimal;
    out.assignment = incumbent;
    out.objective = incumbent_obj;
    return out;
}

namespace {
struct Builtin final : SolverBackend {
    SolveResult solve(const IlpModel& m, std::chrono::duration<double> limit) override {
        return ilp::solve(m, limit);
    }
};
}  // namespace

std::shared_ptr<SolverBackend> builtin_solver() { return std::make_shared<Builtin>(); }

std::string dump_lp(const IlpModel& m) {
    std::ostringstream os;
    os.precision(17);
    os << "\\ generated model\nMaximize\n obj:";
    for (int j = 0; j < m.var_count; ++j)
        if (m.objective[j] != 0)
            os << (m.objective[j] >= 0 ? " +" : " ") << m.objective[j] << " " << m.var_names[j];
    os << "\nSubject To\n";
    for (size_t r = 0; r < m.rows.size(); ++r) {
        const Row& row = m.rows[r];
        os << " " << (row.name.empty() ? "c" + std::to_string(r) : row.name) << ":";
        for (auto& [j, v] : row.coeffs)
            if (v != 0) os << (v >= 0 ? " +" : " ") << v << " " << m.var_names[j];
        os << (row.rel == Rel::Leq ? " <= " : row.rel == Rel::Geq ? " >= " : " = ") << row.rhs << "\n";
    }
    os << "Bounds\n";
    for (int j = 0; j < m.var_count; ++j) {
        os << " " << m.lo[j] << " <= " << m.var_names[j];
        if (m.hi[j] != kInf) os << " <= " << m.hi[j];
        os << "\n";
    }
    os << "General\n";
    for (int j = 0; j < m.var_count; ++j)
        if (m.integrality[j]) os << " " << m.var_names[j];
    os << "\nEnd\n";
    return os.str();
}

}  // namespace spq::ilp
