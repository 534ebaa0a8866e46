#pragma once
// Brute-force reference implementations the unit and acceptance tests pin
// expected values against. Everything here favors obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

// Finite discrete distribution: atoms sorted ascending, probabilities > 0.
struct Dist {
    std::vector<std::pair<double, double>> atoms;  // (value, probability)
};

inline Dist make_dist(const std::vector<std::pair<double, double>>& raw) {
    std::map<double, double> merged;
    double total = 0;
    for (auto& [v, p] : raw) {
        if (p < 0) throw std::domain_error("negative probability");
        if (p == 0) continue;
        merged[v] += p;
        total += p;
    }
    if (merged.empty() || std::fabs(total - 1.0) > 1e-9)
        throw std::domain_error("probabilities must sum to 1");
    Dist d;
    for (auto& [v, p] : merged) d.atoms.push_back({v, p / total});
    return d;
}

inline double dist_mean(const Dist& d) {
    double s = 0;
    for (auto& [v, p] : d.atoms) s += v * p;
    return s;
}

// Lower quantile: smallest atom whose cumulative probability reaches alpha.
inline double exact_var(double alpha, const Dist& d) {
    double cum = 0;
    for (auto& [v, p] : d.atoms) {
        cum += p;
        if (cum >= alpha - 1e-12) return v;
    }
    return d.atoms.back().first;
}

// Conditional tail expectation E[Z | Z <= VaR_alpha(Z)]: the average of all
// mass at or below the quantile. This is the package-level CVaR the worked
// example in the docs evaluates.
inline double exact_cte(double alpha, const Dist& d) {
    double q = exact_var(alpha, d);
    double mass = 0, sum = 0;
    for (auto& [v, p] : d.atoms) {
        if (v <= q + 1e-12) {
            mass += p;
            sum += v * p;
        }
    }
    return sum / mass;
}

// Tail average (1/alpha) * integral_0^alpha q_u du: mean of the lowest alpha
// probability mass, splitting the atom that straddles the boundary. This is
// the per-tuple CVaR that L-CVaR coefficients linearize (it is what averaging
// the lowest floor(alpha*m) of m equal-weight samples estimates), and it is
// superadditive, so the L-CVaR <= CVaR <= VaR ordering is provable from it.
inline double exact_tail_average(double alpha, const Dist& d) {
    double need = alpha, sum = 0;
    for (auto& [v, p] : d.atoms) {
        double take = std::min(need, p);
        sum += v * take;
        need -= take;
        if (need <= 1e-15) break;
    }
    return sum / alpha;
}

// Joint distribution over n tuples: outcome k assigns values[k][i] to tuple i.
struct Joint {
    std::vector<std::vector<double>> values;
    std::vector<double> prob;

    size_t tuple_count() const { return values.empty() ? 0 : values[0].size(); }
};

inline Dist marginal(const Joint& j, size_t i) {
    std::vector<std::pair<double, double>> raw;
    raw.reserve(j.prob.size());
    for (size_t k = 0; k < j.prob.size(); ++k) raw.push_back({j.values[k][i], j.prob[k]});
    return make_dist(raw);
}

// Distribution of sum_i mult[i] * t_i.A under the joint.
inline Dist weighted_sum_dist(const Joint& j, const std::vector<double>& mult) {
    std::vector<std::pair<double, double>> raw;
    raw.reserve(j.prob.size());
    for (size_t k = 0; k < j.prob.size(); ++k) {
        double s = 0;
        for (size_t i = 0; i < mult.size(); ++i) s += mult[i] * j.values[k][i];
        raw.push_back({s, j.prob[k]});
    }
    return make_dist(raw);
}

inline double exact_lcvar(double alpha, const Joint& j, const std::vector<double>& mult) {
    double s = 0;
    for (size_t i = 0; i < mult.size(); ++i)
        if (mult[i] != 0) s += mult[i] * exact_tail_average(alpha, marginal(j, i));
    return s;
}

// E|t_a.A - t_b.A| under the joint (exact MAD between two tuples).
inline double joint_mean_abs_diff(const Joint& j, size_t a, size_t b) {
    double s = 0;
    for (size_t k = 0; k < j.prob.size(); ++k)
        s += j.prob[k] * std::fabs(j.values[k][a] - j.values[k][b]);
    return s;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Quantile by bisection on normal_cdf; plenty accurate for test tolerances.
inline double normal_quantile(double p) {
    if (!(p > 0 && p < 1)) throw std::domain_error("quantile needs p in (0,1)");
    double lo = -40, hi = 40;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// All multiplicity vectors with x_i <= ub[i] and 1 <= sum x_i <= max_total.
inline std::vector<std::vector<long>> enumerate_packages(const std::vector<long>& ub,
                                                         long max_total) {
    std::vector<std::vector<long>> out;
    std::vector<long> cur(ub.size(), 0);
    auto rec = [&](auto&& self, size_t i, long left) -> void {
        if (i == ub.size()) {
            if (left < max_total) out.push_back(cur);  // at least one pick
            return;
        }
        for (long x = 0; x <= std::min(ub[i], left); ++x) {
            cur[i] = x;
            self(self, i + 1, left - x);
        }
        cur[i] = 0;
    };
    rec(rec, 0, max_total);
    return out;
}

// Sample Pearson correlation of paired vectors.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    size_t n = xs.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0;
    return sxy / std::sqrt(sxx * syy);
}

// Two-sample Kolmogorov-Smirnov: true when the max CDF gap stays below the
// level-alpha critical value c(alpha) * sqrt((n+m)/(n*m)).
inline bool ks_two_sample_pass(std::vector<double> a, std::vector<double> b, double c_alpha) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
    double dmax = 0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        double gap = std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / m);
        dmax = std::max(dmax, gap);
    }
    return dmax <= c_alpha * std::sqrt((n + m) / (n * m));
}

}  // namespace oracle
