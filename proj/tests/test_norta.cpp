#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "spq/cdf.hpp"
#include "spq/norta.hpp"

using namespace spq;
using namespace spq::norta;

TEST_CASE("gauss_hermite reproduces exact weighted moments") {
    const auto& gh = gauss_hermite(32);
    REQUIRE(gh.nodes.size() == 32);
    double m0 = 0, m1 = 0, m2 = 0, m4 = 0, m10 = 0;
    for (int i = 0; i < 32; ++i) {
        double x = gh.nodes[i], w = gh.weights[i];
        m0 += w;
        m1 += w * x;
        m2 += w * x * x;
        m4 += w * std::pow(x, 4);
        m10 += w * std::pow(x, 10);
    }
    double rpi = std::sqrt(M_PI);
    CHECK(m0 == doctest::Approx(rpi).epsilon(1e-12));
    CHECK(m1 == doctest::Approx(0).epsilon(1e-12));
    CHECK(m2 == doctest::Approx(rpi / 2).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(3 * rpi / 4).epsilon(1e-12));
    CHECK(m10 == doctest::Approx(945.0 / 32.0 * rpi).epsilon(1e-10));
}

TEST_CASE("implied_rho is the identity for normal marginals") {
    cdf::NormalCdf n01(0, 1);
    CHECK(std::fabs(implied_rho(0.0, n01)) < 1e-12);
    for (double k : {0.3, 0.5, 0.7, 0.9})
        CHECK(implied_rho(k, n01) == doctest::Approx(k).epsilon(2e-3));

    // scale invariance: correlations ignore affine marginal transforms
    cdf::NormalCdf n37(3, 7);
    CHECK(implied_rho(0.6, n37) == doctest::Approx(implied_rho(0.6, n01)).epsilon(1e-6));
}

TEST_CASE("norta_fit pinned values") {
    cdf::NormalCdf n01(0, 1);
    CHECK(norta_fit(0.0, n01) == 0);
    CHECK(norta_fit(-0.2, n01) == 0);
    CHECK(norta_fit(0.3, n01) == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(norta_fit(0.7, n01) == doctest::Approx(0.7).epsilon(1e-3));

    // uniform marginals obey kappa = 2 sin(pi rho / 6)
    cdf::UniformCdf u(0, 1);
    CHECK(norta_fit(0.5, u) == doctest::Approx(2 * std::sin(M_PI * 0.5 / 6)).epsilon(1e-3));
    CHECK(norta_fit(0.3, u) == doctest::Approx(2 * std::sin(M_PI * 0.3 / 6)).epsilon(1e-3));

    // unreachable targets saturate at the near-comonotone ceiling
    CHECK(norta_fit(0.9995, n01) == doctest::Approx(0.999));
}

TEST_CASE("correlate_latents: exact small cases") {
    // d=1 is the identity for any kappa
    std::vector<double> one{0.7};
    CHECK(correlate_latents(one, 0.9)[0] == doctest::Approx(0.7));

    // kappa=0 is the identity for any d
    std::vector<double> s{0.3, -1.1, 2.4};
    auto id = correlate_latents(s, 0.0);
    for (size_t i = 0; i < s.size(); ++i) CHECK(id[i] == doctest::Approx(s[i]));

    // near-comonotone: all coordinates collapse onto the shared factor
    auto co = correlate_latents(s, 0.999999);
    CHECK(co[0] == doctest::Approx(co[1]).epsilon(1e-2));
    CHECK(co[1] == doctest::Approx(co[2]).epsilon(1e-2));
}

TEST_CASE("correlate_latents matches the equicorrelation covariance") {
    const size_t n = 20000, d = 3;
    const double kappa = 0.5;  // lambda1 = 2, lambda2 = 0.5
    std::mt19937_64 gen(41);
    std::normal_distribution<double> n01(0, 1);
    std::vector<std::vector<double>> cols(d, std::vector<double>(n));
    for (size_t t = 0; t < n; ++t) {
        std::vector<double> s(d);
        for (auto& x : s) x = n01(gen);
        auto out = correlate_latents(s, kappa);
        for (size_t i = 0; i < d; ++i) cols[i][t] = out[i];
    }
    auto dot = [&](size_t i, size_t j) {
        double acc = 0;
        for (size_t t = 0; t < n; ++t) acc += cols[i][t] * cols[j][t];
        return acc / static_cast<double>(n);
    };
    double se_var = 3 * std::sqrt(2.0 / n);                      // Var(x^2)=2 for N(0,1)
    double se_cov = 3 * std::sqrt((1 + kappa * kappa) / n);
    for (size_t i = 0; i < d; ++i) CHECK(std::fabs(dot(i, i) - 1.0) <= se_var);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = i + 1; j < d; ++j) CHECK(std::fabs(dot(i, j) - kappa) <= se_cov);
}

TEST_CASE("generate_duplicate_scenario preserves marginals") {
    cdf::UniformCdf u(2, 6);
    const size_t n = 10000, d = 3;
    std::mt19937_64 gen(43);
    std::normal_distribution<double> n01(0, 1);
    std::vector<double> first, last, direct;
    for (size_t t = 0; t < n; ++t) {
        std::vector<double> s(d);
        for (auto& x : s) x = n01(gen);
        auto out = generate_duplicate_scenario(u, 0.5, s);
        first.push_back(out[0]);
        last.push_back(out[2]);
    }
    for (size_t t = 0; t < 10 * n; ++t) direct.push_back(u.inv(cdf::phi(n01(gen))));

    CHECK(oracle::ks_two_sample_pass(first, direct, 1.628));
    CHECK(oracle::ks_two_sample_pass(last, direct, 1.628));

    // d=1: exact inverse-transform of the single latent
    std::vector<double> lone{0.7};
    auto single = generate_duplicate_scenario(cdf::NormalCdf(3, 2), 0.25, lone);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == doctest::Approx(3 + 2 * 0.7));
}

TEST_CASE("duplicate coordinates hit the target Pearson correlation") {
    const size_t n = 20000, d = 2;
    std::mt19937_64 gen(47);
    std::normal_distribution<double> n01(0, 1);

    // normal marginals: kappa equals rho directly
    {
        cdf::NormalCdf f(1, 3);
        double rho_bar = 0.5, kappa = norta_fit(rho_bar, f);
        std::vector<double> xs(n), ys(n);
        for (size_t t = 0; t < n; ++t) {
            std::vector<double> s{n01(gen), n01(gen)};
            auto out = generate_duplicate_scenario(f, kappa, s);
            xs[t] = out[0];
            ys[t] = out[1];
        }
        double r = oracle::pearson(xs, ys);
        double se = (1 - rho_bar * rho_bar) / std::sqrt(static_cast<double>(n));
        CHECK(std::fabs(r - rho_bar) <= 3 * se);
    }
    // uniform marginals: rho recovered through the fitted kappa
    {
        cdf::UniformCdf f(0, 1);
        double rho_bar = 0.7, kappa = norta_fit(rho_bar, f);
        std::vector<double> xs(n), ys(n);
        for (size_t t = 0; t < n; ++t) {
            std::vector<double> s{n01(gen), n01(gen)};
            auto out = generate_duplicate_scenario(f, kappa, s);
            xs[t] = out[0];
            ys[t] = out[1];
        }
        double r = oracle::pearson(xs, ys);
        double se = (1 - rho_bar * rho_bar) / std::sqrt(static_cast<double>(n));
        CHECK(std::fabs(r - rho_bar) <= 3 * se + 1e-3);  // quadrature tolerance
    }
}

TEST_CASE("kappa=0 duplicates stay uncorrelated") {
    const size_t n = 20000;
    std::mt19937_64 gen(53);
    std::normal_distribution<double> n01(0, 1);
    cdf::UniformCdf f(0, 1);
    std::vector<double> xs(n), ys(n);
    for (size_t t = 0; t < n; ++t) {
        std::vector<double> s{n01(gen), n01(gen)};
        auto out = generate_duplicate_scenario(f, 0.0, s);
        xs[t] = out[0];
        ys[t] = out[1];
    }
    CHECK(std::fabs(oracle::pearson(xs, ys)) <= 3.0 / std::sqrt(static_cast<double>(n)));
}
