#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace spq::cdf {

// standard normal CDF
inline double phi(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

// standard normal quantile (Acklam's rational approximation, |err| < 1.2e-9)
double phi_inv(double p);

/// Marginal distribution handle used by NORTA generation, norta_fit quadrature
/// and empirical-tuple sampling. Implementations must be immutable after
/// construction.
struct Cdf {
    virtual ~Cdf() = default;
    virtual double inv(double u) const = 0;  // quantile, u in (0,1)
    virtual double cdf(double x) const = 0;
    virtual double mean() const = 0;
    virtual double var() const = 0;
};

using CdfPtr = std::shared_ptr<const Cdf>;

struct NormalCdf final : Cdf {
    double mu, sigma;
    NormalCdf(double m, double s) : mu(m), sigma(s) {}
    double inv(double u) const override { return mu + sigma * phi_inv(u); }
    double cdf(double x) const override { return sigma > 0 ? phi((x - mu) / sigma) : (x >= mu ? 1.0 : 0.0); }
    double mean() const override { return mu; }
    double var() const override { return sigma * sigma; }
};

struct UniformCdf final : Cdf {
    double lo, hi;
    UniformCdf(double a, double b) : lo(a), hi(b) {}
    double inv(double u) const override { return lo + u * (hi - lo); }
    double cdf(double x) const override { return std::clamp((x - lo) / (hi - lo), 0.0, 1.0); }
    double mean() const override { return 0.5 * (lo + hi); }
    double var() const override { return (hi - lo) * (hi - lo) / 12.0; }
};

// Finite discrete distribution (atoms sorted ascending, probabilities > 0
// summing to 1). inv() is the usual generalized inverse: smallest atom whose
// cumulative probability reaches u.
struct DiscreteCdf final : Cdf {
    std::vector<double> atom;
    std::vector<double> cum;  // cumulative probability, last = 1
    DiscreteCdf(std::vector<double> values, std::vector<double> probs);
    double inv(double u) const override;
    double cdf(double x) const override;
    double mean() const override;
    double var() const override;
};

/// Histogram CDF: equal-width bins with linear interpolation inside each bin.
/// Built from samples; this is the representative-distribution handle carried
/// by sketch duplicates and persisted in the partition-metadata sidecar.
struct HistogramCdf final : Cdf {
    double lo = 0, hi = 1;
    std::vector<double> cum;  // cum[k] = P(X <= lo + (k+1)*w), size = bins

    HistogramCdf() = default;
    static HistogramCdf from_samples(std::span<const double> xs, int bins = 1000);

    double width() const { return (hi - lo) / static_cast<double>(cum.size()); }
    double inv(double u) const override;
    double cdf(double x) const override;
    double mean() const override;
    double var() const override;
};

}  // namespace spq::cdf
