#include "spq/cdf.hpp"

#include <cassert>
#include <stdexcept>

namespace spq::cdf {

double phi_inv(double p) {
    // Acklam's inverse-normal approximation with one Halley refinement step.
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("phi_inv: p outside (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    double e = phi(x) - p;
    double u = e * std::sqrt(2 * 3.14159265358979323846) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

DiscreteCdf::DiscreteCdf(std::vector<double> values, std::vector<double> probs) {
    if (values.empty() || values.size() != probs.size())
        throw std::domain_error("DiscreteCdf: bad support");
    std::vector<size_t> order(values.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    double acc = 0;
    for (size_t i : order) {
        atom.push_back(values[i]);
        acc += probs[i];
        cum.push_back(acc);
    }
    cum.back() = 1.0;
}

double DiscreteCdf::inv(double u) const {
    auto it = std::lower_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) return atom.back();
    return atom[static_cast<size_t>(it - cum.begin())];
}

double DiscreteCdf::cdf(double x) const {
    double acc = 0;
    for (size_t i = 0; i < atom.size(); ++i)
        if (atom[i] <= x) acc = cum[i];
    return acc;
}

double DiscreteCdf::mean() const {
    double s = 0, prev = 0;
    for (size_t i = 0; i < atom.size(); ++i) {
        s += atom[i] * (cum[i] - prev);
        prev = cum[i];
    }
    return s;
}

double DiscreteCdf::var() const {
    double mu = mean(), s = 0, prev = 0;
    for (size_t i = 0; i < atom.size(); ++i) {
        s += (atom[i] - mu) * (atom[i] - mu) * (cum[i] - prev);
        prev = cum[i];
    }
    return s;
}

HistogramCdf HistogramCdf::from_samples(std::span<const double> xs, int bins) {
    if (xs.empty()) throw std::domain_error("HistogramCdf: no samples");
    HistogramCdf h;
    h.lo = *std::min_element(xs.begin(), xs.end());
    h.hi = *std::max_element(xs.begin(), xs.end());
    if (h.hi <= h.lo) h.hi = h.lo + 1e-12;  // degenerate: all samples equal
    std::vector<double> count(static_cast<size_t>(bins), 0.0);
    double w = (h.hi - h.lo) / bins;
    for (double x : xs) {
        auto k = static_cast<size_t>(std::min<long>(bins - 1, static_cast<long>((x - h.lo) / w)));
        count[k] += 1.0;
    }
    h.cum.resize(count.size());
    double acc = 0;
    for (size_t k = 0; k < count.size(); ++k) {
        acc += count[k] / static_cast<double>(xs.size());
        h.cum[k] = acc;
    }
    h.cum.back() = 1.0;
    return h;
}

double HistogramCdf::inv(double u) const {
    auto it = std::lower_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) return hi;
    size_t k = static_cast<size_t>(it - cum.begin());
    double prev = k == 0 ? 0.0 : cum[k - 1];
    double w = width();
    double frac = cum[k] > prev ? (u - prev) / (cum[k] - prev) : 1.0;
    return lo + (static_cast<double>(k) + frac) * w;
}

double HistogramCdf::cdf(double x) const {
    if (x <= lo) return 0;
    if (x >= hi) return 1;
    double w = width();
    size_t k = std::min(cum.size() - 1, static_cast<size_t>((x - lo) / w));
    double prev = k == 0 ? 0.0 : cum[k - 1];
    double frac = (x - (lo + static_cast<double>(k) * w)) / w;
    return prev + frac * (cum[k] - prev);
}

double HistogramCdf::mean() const {
    // piecewise-uniform: each bin's mass sits at its midpoint on average
    double w = width(), s = 0, prev = 0;
    for (size_t k = 0; k < cum.size(); ++k) {
        s += (cum[k] - prev) * (lo + (static_cast<double>(k) + 0.5) * w);
        prev = cum[k];
    }
    return s;
}

double HistogramCdf::var() const {
    double w = width(), mu = mean(), s = 0, prev = 0;
    for (size_t k = 0; k < cum.size(); ++k) {
        double p = cum[k] - prev, mid = lo + (static_cast<double>(k) + 0.5) * w;
        s += p * ((mid - mu) * (mid - mu) + w * w / 12.0);
        prev = cum[k];
    }
    return s;
}

}  // namespace spq::cdf
