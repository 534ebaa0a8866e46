#include "spq/norta.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace spq::norta {

namespace {

// Newton iteration on the physicists' Hermite polynomials, largest root
// first; standard initial guesses (Numerical Recipes gauher).
GaussHermite compute_gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: n >= 1");
    GaussHermite gh;
    gh.nodes.resize(n);
    gh.weights.resize(n);
    const double eps = 3e-14;
    const int half = (n + 1) / 2;
    double z = 0;
    for (int i = 0; i < half; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(n, 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * gh.nodes[0];
        else if (i == 3)
            z = 1.91 * z - 0.91 * gh.nodes[1];
        else
            z = 2.0 * z - gh.nodes[i - 2];

        double pp = 0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = std::pow(M_PI, -0.25);  // orthonormal recurrence
            double p2 = 0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 -
                     std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= eps) break;
        }
        gh.nodes[i] = z;
        gh.nodes[n - 1 - i] = -z;
        gh.weights[i] = 2.0 / (pp * pp);
        gh.weights[n - 1 - i] = gh.weights[i];
    }
    return gh;
}

}  // namespace

const GaussHermite& gauss_hermite(int n) {
    static std::mutex mu;
    static std::map<int, GaussHermite> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_gauss_hermite(n)).first;
    return it->second;
}

double implied_rho(double kappa, const cdf::Cdf& f, int nodes) {
    kappa = std::clamp(kappa, -0.999999, 0.999999);
    const auto& gh = gauss_hermite(nodes);
    const double root2 = std::sqrt(2.0);
    const double mix = std::sqrt(1.0 - kappa * kappa);
    double exy = 0;
    for (int a = 0; a < nodes; ++a) {
        double z1 = root2 * gh.nodes[a];
        double x = f.inv(cdf::phi(z1));
        double inner = 0;
        for (int b = 0; b < nodes; ++b) {
            double z2 = kappa * z1 + mix * root2 * gh.nodes[b];
            inner += gh.weights[b] * f.inv(cdf::phi(z2));
        }
        exy += gh.weights[a] * x * inner;
    }
    exy /= M_PI;
    double mu = f.mean(), var = f.var();
    if (var <= 0) return 0;
    return (exy - mu * mu) / var;
}

double norta_fit(double rho_bar, const cdf::Cdf& f) {
    if (rho_bar <= 0) return 0;
    double lo = 0, hi = 0.999;
    double rho_hi = implied_rho(hi, f);
    if (rho_bar >= rho_hi) return hi;  // near-comonotone target
    for (int i = 0; i < 60; ++i) {
        double mid = 0.5 * (lo + hi);
        double r = implied_rho(mid, f);
        if (std::abs(r - rho_bar) <= 1e-4) return mid;
        (r < rho_bar ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> correlate_latents(std::span<const double> latents, double kappa_bar) {
    const size_t d = latents.size();
    if (d == 0) return {};
    kappa_bar = std::clamp(kappa_bar, 0.0, 0.999999);
    double lam1 = 1.0 + (d - 1) * kappa_bar;
    double lam2 = 1.0 - kappa_bar;
    double mean = 0;
    for (double s : latents) mean += s;
    mean /= static_cast<double>(d);
    double a = std::sqrt(lam2), b = std::sqrt(lam1);
    std::vector<double> out(d);
    for (size_t i = 0; i < d; ++i) out[i] = a * (latents[i] - mean) + b * mean;
    return out;
}

std::vector<double> generate_duplicate_scenario(const cdf::Cdf& f, double kappa_bar,
                                                std::span<const double> latents) {
    auto s = correlate_latents(latents, kappa_bar);
    for (auto& x : s) x = f.inv(cdf::phi(x));
    return s;
}

}  // namespace spq::norta
