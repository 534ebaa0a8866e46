#include "spq/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "spq/cdf.hpp"

namespace spq::risk {

double estimate_var(double alpha, std::span<const double> samples) {
    if (samples.empty()) throw std::domain_error("estimate_var: empty sample list");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("estimate_var: alpha outside (0,1]");
    auto m = static_cast<double>(samples.size());
    auto k = static_cast<size_t>(std::ceil(alpha * m));  // 1-based order statistic
    k = std::clamp<size_t>(k, 1, samples.size());
    std::vector<double> s(samples.begin(), samples.end());
    std::nth_element(s.begin(), s.begin() + (k - 1), s.end());
    return s[k - 1];
}

double estimate_cvar(double alpha, std::span<const double> samples, Tail tail) {
    if (samples.empty()) throw std::domain_error("estimate_cvar: empty sample list");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("estimate_cvar: alpha outside (0,1]");
    auto m = samples.size();
    auto k = static_cast<size_t>(std::floor(alpha * static_cast<double>(m)));
    std::vector<double> s(samples.begin(), samples.end());
    if (tail == Tail::Lower) {
        if (k == 0) return *std::min_element(s.begin(), s.end());
        std::nth_element(s.begin(), s.begin() + (k - 1), s.end());
        return std::accumulate(s.begin(), s.begin() + k, 0.0) / static_cast<double>(k);
    }
    if (k == 0) return *std::max_element(s.begin(), s.end());
    std::nth_element(s.begin(), s.end() - k, s.end());
    return std::accumulate(s.end() - k, s.end(), 0.0) / static_cast<double>(k);
}

std::vector<double> lcvar_coefficients(double alpha, const ScenarioMatrix& scen) {
    std::vector<double> out(scen.ids.size());
    for (size_t i = 0; i < scen.ids.size(); ++i) out[i] = estimate_cvar(alpha, scen.row(i));
    return out;
}

std::vector<double> package_scenario_sums(const Package& pkg, const ScenarioMatrix& scen) {
    std::vector<double> sums(scen.m, 0.0);
    for (auto& [id, x] : pkg.entries) {
        auto r = scen.row_of(id);  // throws on unknown id
        const double* row = scen.v.data() + r * scen.m;
        for (size_t j = 0; j < scen.m; ++j) sums[j] += row[j] * x;
    }
    return sums;
}

RiskEval evaluate_risk(const Package& pkg, const RiskMetric& metric, const ScenarioMatrix& scen) {
    auto sums = package_scenario_sums(pkg, scen);
    double value;
    switch (metric.kind) {
        case RiskKind::VaR: value = estimate_var(metric.alpha, sums); break;
        case RiskKind::CvarLower: value = estimate_cvar(metric.alpha, sums, Tail::Lower); break;
        case RiskKind::CvarUpper: value = estimate_cvar(metric.alpha, sums, Tail::Upper); break;
        default: throw std::domain_error("evaluate_risk: bad kind");
    }
    bool ok = metric.dir == Dir::Geq ? value >= metric.bound : value <= metric.bound;
    return {value, ok};
}

double mad(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.empty()) throw std::domain_error("mad: length mismatch");
    double s = 0;
    for (size_t j = 0; j < xs.size(); ++j) s += std::abs(xs[j] - ys[j]);
    return s / static_cast<double>(xs.size());
}

double folded_normal_mad(double delta, double sigma) {
    if (sigma <= 0) return std::abs(delta);
    static const double sqrt_2_over_pi = std::sqrt(2.0 / 3.14159265358979323846);
    return sigma * sqrt_2_over_pi * std::exp(-delta * delta / (2 * sigma * sigma)) +
           delta * (1.0 - 2.0 * cdf::phi(-delta / sigma));
}

long mad_required_samples(double d, double eps, double p) {
    double z = cdf::phi_inv(1.0 - p);
    double n = (0.5 * 3.14159265358979323846 - 1.0) * (d + eps) * (d + eps) * z * z / (eps * eps);
    return std::max(1L, static_cast<long>(std::ceil(n)));
}

CvarTable CvarTable::build(const ScenarioMatrix& scen) {
    CvarTable t;
    t.m = scen.m;
    t.ids = scen.ids;
    size_t n = scen.ids.size();
    t.sorted.resize(n * t.m);
    t.prefix.resize(n * (t.m + 1));
    for (size_t i = 0; i < n; ++i) {
        auto row = scen.row(i);
        std::copy(row.begin(), row.end(), t.sorted.begin() + i * t.m);
        std::sort(t.sorted.begin() + i * t.m, t.sorted.begin() + (i + 1) * t.m);
        double* pre = t.prefix.data() + i * (t.m + 1);
        pre[0] = 0;
        for (size_t k = 0; k < t.m; ++k) pre[k + 1] = pre[k] + t.sorted[i * t.m + k];
    }
    return t;
}

double CvarTable::cvar(size_t row, double alpha) const {
    auto k = static_cast<size_t>(std::floor(alpha * static_cast<double>(m)));
    if (k == 0) return sorted[row * m];  // minimum
    const double* pre = prefix.data() + row * (m + 1);
    return pre[k] / static_cast<double>(k);
}

std::vector<double> CvarTable::coefficients(double alpha) const {
    std::vector<double> out(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) out[i] = cvar(i, alpha);
    return out;
}

}  // namespace spq::risk
