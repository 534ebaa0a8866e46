#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "spq/risk.hpp"

using namespace spq;
using namespace spq::risk;

namespace {

ScenarioMatrix make_matrix(std::vector<std::vector<double>> rows) {
    ScenarioMatrix scen;
    scen.attr = "A";
    scen.m = rows.empty() ? 0 : rows[0].size();
    for (size_t i = 0; i < rows.size(); ++i) {
        scen.ids.push_back(static_cast<int64_t>(i + 1));
        scen.v.insert(scen.v.end(), rows[i].begin(), rows[i].end());
    }
    return scen;
}

}  // namespace

TEST_CASE("estimate_var pinned values") {
    CHECK(estimate_var(0.5, std::vector<double>{-2, 0, 0, 2}) == 0);
    CHECK(estimate_var(1.0, std::vector<double>{3, 1, 2}) == 3);
    CHECK(estimate_var(0.25, std::vector<double>{5, 1, 9, 3}) == 1);
    CHECK_THROWS_AS(estimate_var(0.5, std::vector<double>{}), std::domain_error);
}

TEST_CASE("estimate_cvar pinned values") {
    CHECK(estimate_cvar(0.5, std::vector<double>{-1, 1}) == -1);
    CHECK(estimate_cvar(1.0, std::vector<double>{4, 0, 2}) == doctest::Approx(2.0));
    CHECK(estimate_cvar(0.4, std::vector<double>{-3, -1, 0, 2, 5}) == doctest::Approx(-2.0));
    // floor(alpha*m) = 0 falls back to the extreme sample
    CHECK(estimate_cvar(0.1, std::vector<double>{4, 7}) == 4);
    CHECK(estimate_cvar(0.1, std::vector<double>{4, 7}, Tail::Upper) == 7);
    CHECK(estimate_cvar(0.5, std::vector<double>{-1, 1}, Tail::Upper) == 1);
    CHECK_THROWS_AS(estimate_cvar(0.5, std::vector<double>{}), std::domain_error);
}

TEST_CASE("estimate_cvar monotone in alpha, mean at alpha=1, below var") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> val(-50, 50);
    for (int rep = 0; rep < 50; ++rep) {
        size_t m = 1 + gen() % 40;
        std::vector<double> xs(m);
        for (auto& x : xs) x = val(gen);
        double mean = 0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(m);
        CHECK(estimate_cvar(1.0, xs) == doctest::Approx(mean));
        double prev = -1e300;
        for (double a = 0.05; a <= 1.0; a += 0.05) {
            double c = estimate_cvar(a, xs);
            CHECK(c >= prev - 1e-12);
            CHECK(c <= estimate_var(a, xs) + 1e-12);
            prev = c;
        }
    }
}

TEST_CASE("lcvar_coefficients") {
    auto scen = make_matrix({{-1, 1}, {1, -1}});
    auto c = lcvar_coefficients(0.5, scen);
    REQUIRE(c.size() == 2);
    CHECK(c[0] == -1);
    CHECK(c[1] == -1);

    auto consts = make_matrix({{3, 3, 3}, {-7, -7, -7}});
    auto c2 = lcvar_coefficients(1.0, consts);
    CHECK(c2[0] == doctest::Approx(3));
    CHECK(c2[1] == doctest::Approx(-7));

    auto mixed = make_matrix({{-3, -1, 0, 2}, {0, 0, 0, 0}});
    auto c3 = lcvar_coefficients(0.5, mixed);
    CHECK(c3[0] == doctest::Approx(-2));
    CHECK(c3[1] == doctest::Approx(0));
}

TEST_CASE("package_scenario_sums") {
    auto scen = make_matrix({{-1, 1}, {-1, 1}});
    Package p;
    p.set(1, 1);
    p.set(2, 1);
    auto sums = package_scenario_sums(p, scen);
    CHECK(sums == std::vector<double>{-2, 2});

    auto single = make_matrix({{5, 5}});
    Package q;
    q.set(1, 1);
    CHECK(package_scenario_sums(q, single) == std::vector<double>{5, 5});

    auto two = make_matrix({{1, 0}, {0, 3}});
    Package r;
    r.set(1, 2);
    r.set(2, 1);
    CHECK(package_scenario_sums(r, two) == std::vector<double>{2, 3});

    Package bad;
    bad.set(99, 1);
    CHECK_THROWS_AS(package_scenario_sums(bad, scen), std::domain_error);
}

TEST_CASE("evaluate_risk on the four-outcome example") {
    // SAA over the full joint of two independent +-1 coins
    auto scen = make_matrix({{-1, -1, 1, 1}, {-1, 1, -1, 1}});
    Package p;
    p.set(1, 1);
    p.set(2, 1);

    RiskMetric cv{RiskKind::CvarLower, 0.5, Dir::Geq, -1.0};
    auto ev = evaluate_risk(p, cv, scen);
    CHECK(ev.value == doctest::Approx(-1.0));
    CHECK(ev.satisfied);

    RiskMetric var{RiskKind::VaR, 0.5, Dir::Geq, 0.0};
    auto ev2 = evaluate_risk(p, var, scen);
    CHECK(ev2.value == doctest::Approx(0.0));
    CHECK(ev2.satisfied);

    RiskMetric loose{RiskKind::CvarUpper, 0.5, Dir::Leq, 1e18};
    CHECK(evaluate_risk(p, loose, scen).satisfied);
}

TEST_CASE("mad basics and folded-normal oracle") {
    std::vector<double> same{1, 2, 3};
    CHECK(mad(same, same) == 0);
    CHECK(mad(std::vector<double>{0, 0}, std::vector<double>{2, 4}) == doctest::Approx(3));
    CHECK_THROWS_AS(mad(std::vector<double>{1}, std::vector<double>{1, 2}), std::domain_error);

    // iid N(0,1) pairs: X - Y ~ N(0, 2), E|X-Y| = sqrt(2) * sqrt(2/pi)
    std::mt19937_64 gen(11);
    std::normal_distribution<double> n01(0, 1);
    size_t n = 200000;
    std::vector<double> xs(n), ys(n);
    for (size_t i = 0; i < n; ++i) {
        xs[i] = n01(gen);
        ys[i] = n01(gen);
    }
    double got = mad(xs, ys);
    double want = std::sqrt(2.0) * std::sqrt(2.0 / M_PI);
    // Var|D| = 2 - want^2; three standard errors
    double se = std::sqrt((2.0 - want * want) / static_cast<double>(n));
    CHECK(std::fabs(got - want) <= 3 * se);
}

TEST_CASE("folded_normal_mad") {
    CHECK(folded_normal_mad(0, 1) == doctest::Approx(std::sqrt(2.0 / M_PI)));
    CHECK(folded_normal_mad(5, 0) == doctest::Approx(5));
    CHECK(folded_normal_mad(-5, 0) == doctest::Approx(5));

    // Monte-Carlo oracle for delta=1, sigma=1
    std::mt19937_64 gen(13);
    std::normal_distribution<double> d(1, 1);
    size_t n = 1000000;
    double sum = 0, sum2 = 0;
    for (size_t i = 0; i < n; ++i) {
        double x = std::fabs(d(gen));
        sum += x;
        sum2 += x * x;
    }
    double mc = sum / static_cast<double>(n);
    double var = sum2 / static_cast<double>(n) - mc * mc;
    double se = std::sqrt(var / static_cast<double>(n));
    CHECK(std::fabs(folded_normal_mad(1, 1) - mc) <= 3 * se);
}

TEST_CASE("mad_required_samples") {
    long n = mad_required_samples(100, 10, 0.05);
    CHECK(n >= 185);
    CHECK(n <= 191);

    // vanishing requirement: with p near 0.5 the z-term shrinks below 1
    CHECK(mad_required_samples(100, 1e12, 0.45) == 1);

    // independent arithmetic oracle
    double z = oracle::normal_quantile(0.99);
    double direct = (0.5 * M_PI - 1.0) * (4 + 0.5) * (4 + 0.5) * z * z / (0.5 * 0.5);
    CHECK(mad_required_samples(4, 0.5, 0.01) == static_cast<long>(std::ceil(direct)));
}

TEST_CASE("mad is a pseudometric") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> val(-5, 5);
    for (int rep = 0; rep < 100; ++rep) {
        size_t m = 2 + gen() % 10;
        std::vector<double> x(m), y(m), z(m);
        for (size_t i = 0; i < m; ++i) {
            x[i] = val(gen);
            y[i] = val(gen);
            z[i] = val(gen);
        }
        CHECK(mad(x, y) == doctest::Approx(mad(y, x)));
        CHECK(mad(x, x) == 0);
        CHECK(mad(x, z) <= mad(x, y) + mad(y, z) + 1e-12);
    }
}

TEST_CASE("CvarTable matches direct estimates") {
    std::mt19937_64 gen(19);
    std::uniform_real_distribution<double> val(-20, 20);
    std::vector<std::vector<double>> rows(3, std::vector<double>(17));
    for (auto& r : rows)
        for (auto& x : r) x = val(gen);
    auto scen = make_matrix(rows);
    auto table = CvarTable::build(scen);
    for (double a : {0.05, 0.3, 0.5, 0.77, 1.0}) {
        auto coeffs = table.coefficients(a);
        for (size_t i = 0; i < rows.size(); ++i) {
            double direct = estimate_cvar(a, rows[i]);
            CHECK(table.cvar(i, a) == doctest::Approx(direct));
            CHECK(coeffs[i] == doctest::Approx(direct));
        }
    }
}

TEST_CASE("worked two-tuple example under exact enumeration") {
    // two iid tuples valued -1 or +1 with equal probability, x = (1,1)
    oracle::Joint j;
    j.values = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    j.prob = {0.25, 0.25, 0.25, 0.25};
    std::vector<double> x{1, 1};

    CHECK(oracle::exact_lcvar(0.5, j, x) == doctest::Approx(-2.0));
    auto z = oracle::weighted_sum_dist(j, x);
    CHECK(oracle::exact_cte(0.5, z) == doctest::Approx(-2.0 / 3.0));
    CHECK(oracle::exact_var(0.5, z) == doctest::Approx(0.0));
}

TEST_CASE("risk ordering holds on random enumerable instances") {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> val(-10, 10);
    std::uniform_real_distribution<double> pr(0.05, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        size_t n = 1 + gen() % 3;
        size_t k = 2 + gen() % 3;
        oracle::Joint j;
        double tot = 0;
        for (size_t o = 0; o < k; ++o) {
            std::vector<double> row(n);
            for (auto& v : row) v = val(gen);
            j.values.push_back(row);
            double p = pr(gen);
            j.prob.push_back(p);
            tot += p;
        }
        for (auto& p : j.prob) p /= tot;
        std::vector<double> x(n);
        bool any = false;
        for (auto& m : x) {
            m = static_cast<double>(gen() % 4);
            any = any || m > 0;
        }
        if (!any) x[0] = 1;

        for (double a : {0.25, 0.5, 0.75}) {
            auto z = oracle::weighted_sum_dist(j, x);
            double lc = oracle::exact_lcvar(a, j, x);
            double cv = oracle::exact_cte(a, z);
            double vr = oracle::exact_var(a, z);
            CHECK(lc <= cv + 1e-9);
            CHECK(cv <= vr + 1e-9);
        }
    }
}

TEST_CASE("per-tuple CVaR difference bounded by MAD over alpha") {
    std::mt19937_64 gen(29);
    std::uniform_real_distribution<double> val(-10, 10);
    std::uniform_real_distribution<double> pr(0.05, 1.0);
    std::uniform_real_distribution<double> al(0.1, 1.0);
    for (int rep = 0; rep < 500; ++rep) {
        size_t k = 2 + gen() % 5;
        oracle::Joint j;
        double tot = 0;
        for (size_t o = 0; o < k; ++o) {
            j.values.push_back({val(gen), val(gen)});
            double p = pr(gen);
            j.prob.push_back(p);
            tot += p;
        }
        for (auto& p : j.prob) p /= tot;
        double a = al(gen);
        double c1 = oracle::exact_tail_average(a, oracle::marginal(j, 0));
        double c2 = oracle::exact_tail_average(a, oracle::marginal(j, 1));
        double bound = oracle::joint_mean_abs_diff(j, 0, 1) / a;
        CHECK(std::fabs(c1 - c2) <= bound + 1e-9);
    }
}
