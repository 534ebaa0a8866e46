#pragma once

#include <span>
#include <vector>

#include "spq/cdf.hpp"

namespace spq::norta {

// Physicists' Gauss-Hermite rule: integrates exp(-x^2) * g(x) exactly for
// polynomials up to degree 2n-1.
struct GaussHermite {
    std::vector<double> nodes, weights;
};
const GaussHermite& gauss_hermite(int n);

/// Pearson correlation of (F^{-1}(Phi(Z1)), F^{-1}(Phi(Z2))) when (Z1, Z2)
/// are standard normal with correlation kappa; 32x32 product quadrature.
double implied_rho(double kappa, const cdf::Cdf& f, int nodes = 32);

/// Latent correlation whose implied Pearson correlation matches rho_bar, via
/// bisection on [0, 0.999] to 1e-4; returns 0.999 when the target exceeds the
/// achievable range (near-comonotone marginals).
double norta_fit(double rho_bar, const cdf::Cdf& f);

/// Equicorrelated latent vector: given iid standard normal latents s_1..s_d,
/// returns s' with unit variances and pairwise correlation kappa_bar
/// (symmetric square root of the equicorrelation matrix).
std::vector<double> correlate_latents(std::span<const double> latents, double kappa_bar);

/// One scenario of d correlated duplicates: correlate the latents, then map
/// each through F^{-1}(Phi(.)) so every coordinate keeps the marginal.
std::vector<double> generate_duplicate_scenario(const cdf::Cdf& f, double kappa_bar,
                                                std::span<const double> latents);

}  // namespace spq::norta
