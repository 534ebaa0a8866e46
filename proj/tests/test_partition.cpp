#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "spq/partition.hpp"
#include "spq/risk.hpp"

using namespace spq;
using namespace spq::partition;

namespace {

ScenarioMatrix make_matrix(std::vector<int64_t> ids, std::vector<std::vector<double>> rows) {
    ScenarioMatrix m;
    m.attr = "A";
    m.ids = std::move(ids);
    m.m = rows.empty() ? 0 : rows[0].size();
    for (auto& r : rows) m.v.insert(m.v.end(), r.begin(), r.end());
    return m;
}

// ids 1..n with det X = xs[i]
StochasticRelation det_relation(const std::vector<double>& xs) {
    StochasticRelation rel;
    rel.name = "det";
    rel.seed = 7;
    rel.det_attrs = {"X"};
    for (size_t i = 0; i < xs.size(); ++i)
        rel.tuples.push_back({static_cast<int64_t>(i + 1), {{"X", xs[i]}}, {}});
    rel.rebuild_index();
    return rel;
}

// ids 1..n, det Cost = 10(i+1), stoch A = base[i] + N(0, var[i])
StochasticRelation gauss_relation(const std::vector<double>& base, const std::vector<double>& var,
                                  uint64_t seed) {
    StochasticRelation rel;
    rel.name = "g";
    rel.seed = seed;
    rel.det_attrs = {"Cost"};
    rel.stoch_attrs = {"A"};
    for (size_t i = 0; i < base.size(); ++i) {
        Tuple t;
        t.id = static_cast<int64_t>(i + 1);
        t.det["Cost"] = 10.0 * static_cast<double>(i + 1);
        t.stoch["A"] = GaussianNoiseSpec{base[i], 0.0, var[i]};
        rel.tuples.push_back(std::move(t));
    }
    rel.rebuild_index();
    return rel;
}

// mirrors the engine's constant-row handling for deterministic attributes
ScenarioMatrix det_matrix(const StochasticRelation& rel, const std::string& attr,
                          const std::vector<int64_t>& ids) {
    std::vector<std::vector<double>> rows;
    for (int64_t id : ids) rows.push_back({rel.at(id).det.at(attr)});
    return make_matrix(ids, rows);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// worst-case replacement cost, recomputed the obvious way
double replacement_cost(const std::vector<int64_t>& members, int64_t who,
                        const ScenarioMatrix& scen) {
    double total = 0;
    auto r = scen.row(scen.row_of(who));
    for (size_t j = 0; j < scen.m; ++j) {
        double lo = r[j], hi = r[j];
        for (int64_t id : members) {
            double x = scen.at(scen.row_of(id), j);
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        total += std::max(hi - r[j], r[j] - lo);
    }
    return total;
}

}  // namespace

TEST_CASE("pivot_scan orders members by distance to the pivot") {
    // constant rows: MAD reduces to absolute difference
    auto scen = make_matrix({1, 2, 3}, {{0}, {3}, {7}});
    auto out = pivot_scan({1, 2, 3}, 1, scen);
    REQUIRE(out.size() == 3);
    CHECK(out[0] == std::pair<int64_t, double>{1, 0.0});
    CHECK(out[1] == std::pair<int64_t, double>{2, 3.0});
    CHECK(out[2] == std::pair<int64_t, double>{3, 7.0});
    CHECK(out.back().second == 7.0);

    // identical rows: everything at distance zero, pivot first then by id
    auto same = make_matrix({4, 2, 9}, {{1, 1}, {1, 1}, {1, 1}});
    auto tied = pivot_scan({4, 2, 9}, 9, same);
    CHECK(tied[0].first == 9);
    CHECK(tied[1].first == 2);
    CHECK(tied[2].first == 4);
    for (auto& [id, d] : tied) CHECK(d == 0.0);

    // four enumerated rows: distances match the pairwise MAD oracle
    auto four = make_matrix({1, 2, 3, 4},
                            {{0, 0, 0, 0}, {1, -1, 3, 1}, {2, 2, 2, 2}, {-4, 0, 4, 0}});
    auto got = pivot_scan({1, 2, 3, 4}, 2, four);
    std::map<int64_t, double> dist;
    for (auto& [id, d] : got) dist[id] = d;
    for (int64_t id : {1, 3, 4}) {
        double want = 0;
        for (size_t j = 0; j < 4; ++j)
            want += std::fabs(four.at(four.row_of(id), j) - four.at(four.row_of(2), j));
        CHECK(dist[id] == doctest::Approx(want / 4).epsilon(1e-12));
    }
    CHECK(dist[2] == 0.0);
    for (size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].second <= got[i].second);

    CHECK_THROWS_AS(pivot_scan({1, 2}, 3, scen), std::domain_error);     // pivot not a member
    CHECK_THROWS_AS(pivot_scan({1, 5}, 1, scen), std::domain_error);     // member not in matrix
}

TEST_CASE("dist_partition separates the two clusters") {
    auto rel = det_relation({0, 1, 10, 11});
    PartitionConfig cfg;
    cfg.tau = 2;
    cfg.diameters = {{"X", 2.0}};
    cfg.offline_scenarios = 16;

    auto p = dist_partition(rel, cfg);
    REQUIRE(p.partitions.size() == 2);
    std::vector<std::vector<int64_t>> sorted = p.partitions;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted[0] == std::vector<int64_t>{1, 2});
    CHECK(sorted[1] == std::vector<int64_t>{3, 4});

    // assignment is a total function consistent with membership
    for (size_t pid = 0; pid < p.partitions.size(); ++pid)
        for (int64_t id : p.partitions[pid]) CHECK(p.assignment.at(id) == static_cast<int>(pid));
    CHECK(p.assignment.size() == 4);

    // certificates: 2 * max pivot distance within the attribute diameter
    REQUIRE(p.certificates.size() == 2);
    for (size_t pid = 0; pid < 2; ++pid) {
        const auto& cert = p.certificates[pid];
        CHECK(std::count(p.partitions[pid].begin(), p.partitions[pid].end(), cert.pivot) == 1);
        CHECK(2 * cert.dmax.at("X") <= 2.0);
    }
}

TEST_CASE("dist_partition trivial shapes") {
    {
        auto p = dist_partition(det_relation({42}), {.tau = 5, .diameters = {{"X", 1.0}}});
        REQUIRE(p.partitions.size() == 1);
        CHECK(p.partitions[0] == std::vector<int64_t>{1});
    }
    {
        // n <= tau and every pairwise distance within d/2: accepted as one leaf
        auto p = dist_partition(det_relation({0, 0.5, 1.0}), {.tau = 5, .diameters = {{"X", 2.0}}});
        REQUIRE(p.partitions.size() == 1);
        CHECK(p.partitions[0] == std::vector<int64_t>{1, 2, 3});
        CHECK(p.certificates[0].dmax.at("X") <= 1.0);
    }
    {
        // no diameters at all: pure size chunking over id order
        auto p = dist_partition(det_relation(std::vector<double>(10, 3.0)), {.tau = 4});
        REQUIRE(p.partitions.size() == 3);
        std::vector<std::vector<int64_t>> sorted = p.partitions;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted[0] == std::vector<int64_t>{1, 2, 3, 4});
        CHECK(sorted[1] == std::vector<int64_t>{5, 6, 7, 8});
        CHECK(sorted[2] == std::vector<int64_t>{9, 10});
    }

    auto rel = det_relation({1, 2});
    CHECK_THROWS_AS(dist_partition(rel, {.tau = 0}), std::domain_error);
    CHECK_THROWS_AS(dist_partition(rel, {.tau = 2, .diameters = {{"X", 0.0}}}),
                    std::domain_error);
    CHECK_THROWS_AS(dist_partition(rel, {.tau = 2, .diameters = {{"Nope", 1.0}}}),
                    std::domain_error);
}

TEST_CASE("dist_partition certificates hold on a stochastic relation") {
    const size_t n = 60;
    std::vector<double> base(n), var(n);
    for (size_t i = 0; i < n; ++i) {
        base[i] = 0.5 * static_cast<double>(i);
        var[i] = 0.09;
    }
    auto rel = gauss_relation(base, var, 1234);
    PartitionConfig cfg;
    cfg.tau = 8;
    cfg.diameters = {{"A", 6.0}, {"Cost", 400.0}};
    cfg.offline_scenarios = 64;
    cfg.seed = 5;

    auto p = dist_partition(rel, cfg);

    std::vector<int64_t> all;
    for (const auto& t : rel.tuples) all.push_back(t.id);
    auto scen_a = generate_scenarios(rel, all, "A", rng::Purpose::Offline, 0, 64);
    auto scen_c = det_matrix(rel, "Cost", all);

    size_t covered = 0;
    for (size_t pid = 0; pid < p.partitions.size(); ++pid) {
        const auto& mem = p.partitions[pid];
        covered += mem.size();
        CHECK(mem.size() <= cfg.tau);
        for (int64_t id : mem) CHECK(p.assignment.at(id) == static_cast<int>(pid));

        // re-derive the certificate from the regenerated offline stream
        const auto& cert = p.certificates[pid];
        for (auto* sm : {&scen_a, &scen_c}) {
            auto scan = pivot_scan(mem, cert.pivot, *sm);
            double got = scan.back().second;
            CHECK(got == doctest::Approx(cert.dmax.at(sm->attr)).epsilon(1e-12));
            CHECK(2 * got <= cfg.diameters.at(sm->attr) + 1e-12);
        }

        // triangle-inequality consequence: exhaustive pairwise MAD within d_A
        for (size_t i = 0; i < mem.size(); ++i)
            for (size_t j = i + 1; j < mem.size(); ++j) {
                double d = risk::mad(scen_a.row(scen_a.row_of(mem[i])),
                                     scen_a.row(scen_a.row_of(mem[j])));
                CHECK(d <= cfg.diameters.at("A") + 1e-12);
            }
    }
    CHECK(covered == n);
    CHECK(p.assignment.size() == n);
    CHECK(p.seed_tag == rel.seed);

    // determinism: identical inputs give an identical partitioning
    auto q = dist_partition(rel, cfg);
    CHECK(q.partitions == p.partitions);
    CHECK(q.assignment == p.assignment);
    REQUIRE(q.certificates.size() == p.certificates.size());
    for (size_t pid = 0; pid < p.certificates.size(); ++pid) {
        CHECK(q.certificates[pid].pivot == p.certificates[pid].pivot);
        CHECK(q.certificates[pid].dmax == p.certificates[pid].dmax);
    }
}

TEST_CASE("select_representative minimizes worst-case replacement cost") {
    // middle tuple costs 10 vs 20 at the extremes
    auto scen = make_matrix({1, 2, 3}, {{0, 0}, {10, 10}, {5, 5}});
    CHECK(select_representative({1, 2, 3}, scen) == 3);

    CHECK(select_representative({2}, scen) == 2);  // singleton

    auto tie = make_matrix({7, 4, 6}, {{1, 2}, {1, 2}, {1, 2}});
    CHECK(select_representative({7, 4, 6}, tie) == 4);  // ties break to lowest id

    CHECK_THROWS_AS(select_representative({}, scen), std::domain_error);

    // random matrices agree with the brute-force cost oracle
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int rep = 0; rep < 30; ++rep) {
        size_t k = 2 + gen() % 5, m = 1 + gen() % 6;
        std::vector<int64_t> ids;
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < k; ++i) {
            ids.push_back(static_cast<int64_t>(10 + i));
            rows.emplace_back();
            for (size_t j = 0; j < m; ++j) rows.back().push_back(u(gen));
        }
        auto sm = make_matrix(ids, rows);
        int64_t got = select_representative(ids, sm);
        double got_cost = replacement_cost(ids, got, sm);
        for (int64_t id : ids) {
            double c = replacement_cost(ids, id, sm);
            CHECK(got_cost <= c + 1e-12);
            if (c == got_cost) CHECK(got <= id);  // argmin ties break to lowest id
        }
    }
}

TEST_CASE("build_representatives: singleton and perfectly correlated partitions") {
    // two singletons
    auto rel = gauss_relation({1.0, 2.0}, {0.5, 0.5}, 321);
    auto p = dist_partition(rel, {.tau = 1, .offline_scenarios = 32});
    build_representatives(p, rel);
    REQUIRE(p.reps.size() == 2);
    for (size_t pid = 0; pid < 2; ++pid) {
        int64_t only = p.partitions[pid][0];
        CHECK(p.reps[pid].source.at("A") == only);
        CHECK(p.reps[pid].det.at("Cost") == doctest::Approx(rel.at(only).det.at("Cost")));
        CHECK(p.median_rho[pid] == 1.0);
    }

    // constant equal rows count as perfectly correlated
    auto flat = gauss_relation({5.0, 5.0}, {0.0, 0.0}, 321);
    auto fp = dist_partition(flat, {.tau = 4, .offline_scenarios = 32});
    REQUIRE(fp.partitions.size() == 1);
    build_representatives(fp, flat);
    CHECK(fp.median_rho[0] == 1.0);
    CHECK(fp.reps[0].source.at("A") == 1);  // tie -> lowest id
    CHECK(fp.reps[0].det.at("Cost") == doctest::Approx(15.0));
}

TEST_CASE("build_representatives matches the direct median-correlation oracle") {
    const size_t n = 15;
    std::vector<double> base(n), var(n);
    for (size_t i = 0; i < n; ++i) {
        base[i] = static_cast<double>(i % 5);
        var[i] = 0.5 + 0.1 * static_cast<double>(i);
    }
    auto rel = gauss_relation(base, var, 777);
    PartitionConfig cfg;
    cfg.tau = 5;
    cfg.offline_scenarios = 48;
    auto p = dist_partition(rel, cfg);
    build_representatives(p, rel);

    std::vector<int64_t> all;
    for (const auto& t : rel.tuples) all.push_back(t.id);
    auto scen = generate_scenarios(rel, all, "A", rng::Purpose::Offline, 0, 48);

    REQUIRE(p.reps.size() == p.partitions.size());
    for (size_t pid = 0; pid < p.partitions.size(); ++pid) {
        const auto& mem = p.partitions[pid];
        const auto& rep = p.reps[pid];
        int64_t donor = rep.source.at("A");
        CHECK(std::count(mem.begin(), mem.end(), donor) == 1);

        // donor minimizes total replacement cost (single stoch attr)
        double donor_cost = replacement_cost(mem, donor, scen);
        for (int64_t id : mem) CHECK(donor_cost <= replacement_cost(mem, id, scen) + 1e-12);

        // det attr is the partition mean
        double want = 0;
        for (int64_t id : mem) want += rel.at(id).det.at("Cost");
        CHECK(rep.det.at("Cost") == doctest::Approx(want / mem.size()));

        // median rho against a direct recomputation
        std::vector<double> corr;
        auto dr = scen.row(scen.row_of(donor));
        std::vector<double> drv(dr.begin(), dr.end());
        for (int64_t id : mem) {
            if (id == donor) {
                corr.push_back(1.0);
                continue;
            }
            auto r = scen.row(scen.row_of(id));
            corr.push_back(oracle::pearson(std::vector<double>(r.begin(), r.end()), drv));
        }
        double want_rho = std::clamp(median_of(corr), 0.0, 1.0);
        CHECK(p.median_rho[pid] == doctest::Approx(want_rho).epsilon(1e-12));
        CHECK(p.median_rho[pid] >= 0.0);
        CHECK(p.median_rho[pid] <= 1.0);

        // adopted marginal approximates the donor's distribution
        const auto& vg = rel.at(donor).stoch.at("A");
        CHECK(rep.marginals.at("A")->mean() ==
              doctest::Approx(vg_mean(vg)).epsilon(0.08).scale(1.0));
    }
}

TEST_CASE("correlated attribute groups share one donor") {
    StochasticRelation rel;
    rel.name = "two";
    rel.seed = 55;
    rel.stoch_attrs = {"A", "B"};
    for (int64_t id = 1; id <= 6; ++id) {
        Tuple t;
        t.id = id;
        t.stoch["A"] = GaussianNoiseSpec{static_cast<double>(id), 0.0, 1.0};
        t.stoch["B"] = GaussianNoiseSpec{-static_cast<double>(id), 0.0, 2.0};
        rel.tuples.push_back(std::move(t));
    }
    rel.rebuild_index();

    PartitionConfig cfg;
    cfg.tau = 6;
    cfg.offline_scenarios = 40;
    cfg.correlated_groups = {{"A", "B"}};
    auto p = dist_partition(rel, cfg);
    REQUIRE(p.partitions.size() == 1);
    build_representatives(p, rel);

    int64_t donor = p.reps[0].source.at("A");
    CHECK(p.reps[0].source.at("B") == donor);

    // donor minimizes the cost summed over the group
    std::vector<int64_t> all;
    for (const auto& t : rel.tuples) all.push_back(t.id);
    auto sa = generate_scenarios(rel, all, "A", rng::Purpose::Offline, 0, 40);
    auto sb = generate_scenarios(rel, all, "B", rng::Purpose::Offline, 0, 40);
    double donor_cost = replacement_cost(all, donor, sa) + replacement_cost(all, donor, sb);
    for (int64_t id : all)
        CHECK(donor_cost <= replacement_cost(all, id, sa) + replacement_cost(all, id, sb) + 1e-12);

    // ungrouped runs may disagree on B's donor but must still pick from members
    PartitionConfig solo = cfg;
    solo.correlated_groups.clear();
    auto q = dist_partition(rel, solo);
    build_representatives(q, rel);
    for (const auto& a : {"A", "B"})
        CHECK(std::count(all.begin(), all.end(), q.reps[0].source.at(a)) == 1);
}

TEST_CASE("member-vs-representative CVaR differences respect the diameter bound") {
    const size_t n = 24;
    std::vector<double> base(n), var(n);
    for (size_t i = 0; i < n; ++i) {
        base[i] = 0.25 * static_cast<double>(i % 8);
        var[i] = 0.04;
    }
    auto rel = gauss_relation(base, var, 4242);
    PartitionConfig cfg;
    cfg.tau = 6;
    cfg.diameters = {{"A", 1.5}};
    cfg.offline_scenarios = 80;
    auto p = dist_partition(rel, cfg);
    build_representatives(p, rel);

    std::vector<int64_t> all;
    for (const auto& t : rel.tuples) all.push_back(t.id);
    auto scen = generate_scenarios(rel, all, "A", rng::Purpose::Offline, 0, 80);

    // treating the offline columns as the exact joint distribution, the
    // CVaR Lipschitz bound |cvar(t) - cvar(r)| <= E|t - r| / alpha is slack-free
    for (size_t pid = 0; pid < p.partitions.size(); ++pid) {
        int64_t donor = p.reps[pid].source.at("A");
        auto dr = scen.row(scen.row_of(donor));
        for (int64_t id : p.partitions[pid]) {
            auto r = scen.row(scen.row_of(id));
            double d = risk::mad(r, dr);
            CHECK(d <= cfg.diameters.at("A") + 1e-12);
            for (double alpha : {0.1, 0.25, 0.5, 1.0}) {
                double gap = std::fabs(risk::estimate_cvar(alpha, r) -
                                       risk::estimate_cvar(alpha, dr));
                CHECK(gap <= d / alpha + 1e-9);
                CHECK(gap <= cfg.diameters.at("A") / alpha + 1e-9);
            }
        }
    }
}
