#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <random>

#include "doctest.h"
#include "spq/ilp.hpp"
#include "spq/ilp_build.hpp"
#include "spq/spaql.hpp"

using namespace spq;
using namespace spq::ilp;
using namespace std::chrono_literals;

namespace {

IlpModel box_model(std::vector<double> obj, std::vector<double> hi_) {
    IlpModel m;
    for (size_t j = 0; j < obj.size(); ++j)
        m.add_var(0, hi_[j], true, obj[j], "x" + std::to_string(j));
    return m;
}

// exhaustive optimum over the integer box; nullopt = infeasible
std::optional<double> brute_force(const IlpModel& m) {
    std::vector<long> x(m.var_count, 0);
    std::optional<double> best;
    while (true) {
        bool ok = true;
        for (const Row& r : m.rows) {
            double lhs = 0;
            for (auto [j, c] : r.coeffs) lhs += c * x[j];
            if (r.rel == Rel::Leq) ok = lhs <= r.rhs + 1e-9;
            else if (r.rel == Rel::Geq) ok = lhs >= r.rhs - 1e-9;
            else ok = std::fabs(lhs - r.rhs) <= 1e-9;
            if (!ok) break;
        }
        if (ok) {
            bool in_box = true;
            for (int j = 0; j < m.var_count; ++j)
                if (x[j] < m.lo[j] - 1e-9 || x[j] > m.hi[j] + 1e-9) in_box = false;
            if (in_box) {
                double obj = 0;
                for (int j = 0; j < m.var_count; ++j) obj += m.objective[j] * x[j];
                if (!best || obj > *best) best = obj;
            }
        }
        int j = 0;
        for (; j < m.var_count; ++j) {
            if (x[j] < static_cast<long>(m.hi[j])) { ++x[j]; break; }
            x[j] = 0;
        }
        if (j == m.var_count) break;
    }
    return best;
}

}  // namespace

TEST_CASE("build_model assembles the headline portfolio shape") {
    spaql::QuerySpec q = spaql::normalize(spaql::parse(
        "SELECT PACKAGE(*) FROM Stocks SUCH THAT SUM(Price) <= 1000 AND "
        "SUM(Gain) <= -10 WITH PROBABILITY <= 0.05 MAXIMIZE EXPECTED SUM(Gain)"));
    ModelInputs in;
    in.ids = {1, 2};
    in.objective = {0.3, 0.5};
    in.det_values["Price"] = {500, 400};
    in.risk_rows.push_back({1, {-1, -1}, -2});

    IlpModel m = build_model(q, in);
    CHECK(m.var_count == 2);
    CHECK(m.objective == std::vector<double>{0.3, 0.5});
    CHECK(m.integrality == std::vector<char>{1, 1});
    REQUIRE(m.rows.size() == 2);
    CHECK(m.rows[0].rel == Rel::Leq);
    CHECK(m.rows[0].rhs == 1000);
    REQUIRE(m.rows[0].coeffs.size() == 2);
    CHECK(m.rows[0].coeffs[0].second == 500);
    CHECK(m.rows[0].coeffs[1].second == 400);
    CHECK(m.rows[1].rel == Rel::Geq);
    CHECK(m.rows[1].rhs == -2);
    CHECK(m.rows[1].coeffs[0].second == -1);
    CHECK(m.rows[1].coeffs[1].second == -1);
}

TEST_CASE("build_model honors REPEAT and drops risk rows for quick solves") {
    spaql::QuerySpec q = spaql::normalize(
        spaql::parse("SELECT PACKAGE(*) FROM R REPEAT 0 MAXIMIZE EXPECTED SUM(A)"));
    ModelInputs in;
    in.ids = {7};
    in.objective = {2.5};
    IlpModel m = build_model(q, in);
    CHECK(m.var_count == 1);
    CHECK(m.hi[0] == 1);  // REPEAT 0 = at most one copy
    CHECK(m.rows.empty());
    auto res = solve(m, 5s);
    REQUIRE(res.status == Status::Optimal);
    CHECK((*res.assignment)[0] == doctest::Approx(1));

    spaql::QuerySpec q1 = spaql::normalize(spaql::parse(
        "SELECT PACKAGE(*) FROM Lineitem SUCH THAT COUNT(*) <= 30 AND SUM(Tax) <= 0.05 AND "
        "SUM(Quantity) <= 20 WITH PROBABILITY >= 0.95 AND "
        "SUM(Price) >= 750 WITH PROBABILITY >= 0.90 MAXIMIZE EXPECTED SUM(Price)"));
    ModelInputs in1;
    in1.ids = {1, 2, 3};
    in1.objective = {1, 2, 3};
    in1.det_values["Tax"] = {0.01, 0.02, 0.03};
    in1.risk_rows.push_back({2, {-1, -2, -3}, -40});
    in1.risk_rows.push_back({3, {100, 200, 300}, 750});
    IlpModel full = build_model(q1, in1);
    CHECK(full.rows.size() == 4);  // count + tax + 2 linearized risk rows
    CHECK(full.rows[0].rhs == 30);

    in1.include_probabilistic = false;
    IlpModel quick = build_model(q1, in1);
    CHECK(quick.rows.size() == 2);  // risk rows dropped

    ModelInputs bad = in1;
    bad.objective = {1};
    CHECK_THROWS(build_model(q1, bad));
}

TEST_CASE("solve pinned examples") {
    IlpModel knap = box_model({3, 2}, {1, 1});
    Row r;
    r.coeffs = {{0, 1}, {1, 1}};
    r.rel = Rel::Leq;
    r.rhs = 1;
    knap.rows.push_back(r);
    auto res = solve(knap, 5s);
    REQUIRE(res.status == Status::Optimal);
    CHECK(*res.objective == doctest::Approx(3));
    CHECK((*res.assignment)[0] == doctest::Approx(1));
    CHECK((*res.assignment)[1] == doctest::Approx(0));

    IlpModel infeas = box_model({1}, {0});
    Row need;
    need.coeffs = {{0, 1}};
    need.rel = Rel::Geq;
    need.rhs = 1;
    infeas.rows.push_back(need);
    CHECK(solve(infeas, 5s).status == Status::Infeasible);

    IlpModel zero = box_model({0, 0}, {3, 3});
    auto rz = solve(zero, 5s);
    REQUIRE(rz.status == Status::Optimal);
    CHECK(*rz.objective == doctest::Approx(0));
}

TEST_CASE("lp relaxation vs integral optimum") {
    IlpModel m = box_model({1}, {kInf});
    Row cap;
    cap.coeffs = {{0, 1}};
    cap.rel = Rel::Leq;
    cap.rhs = 2.5;
    m.rows.push_back(cap);
    auto lp = solve_lp_relaxation(m);
    REQUIRE(lp.status == Status::Optimal);
    CHECK(lp.objective == doctest::Approx(2.5));
    auto ip = solve(m, 5s);
    REQUIRE(ip.status == Status::Optimal);
    CHECK(*ip.objective == doctest::Approx(2));

    IlpModel integral = box_model({1}, {3});
    CHECK(solve_lp_relaxation(integral).objective ==
          doctest::Approx(*solve(integral, 5s).objective));

    IlpModel bad = box_model({1}, {0});
    Row need;
    need.coeffs = {{0, 1}};
    need.rel = Rel::Geq;
    need.rhs = 1;
    bad.rows.push_back(need);
    CHECK(solve_lp_relaxation(bad).status == Status::Infeasible);
}

TEST_CASE("unbounded models are detected") {
    IlpModel m = box_model({1}, {kInf});
    CHECK(solve_lp_relaxation(m).status == Status::Unbounded);
    CHECK(solve(m, 5s).status == Status::Unbounded);
}

TEST_CASE("pinning fixes a variable") {
    IlpModel m = box_model({-1, 1}, {3, 3});
    m.pin(0, 2);
    auto res = solve(m, 5s);
    REQUIRE(res.status == Status::Optimal);
    CHECK((*res.assignment)[0] == doctest::Approx(2));
    CHECK((*res.assignment)[1] == doctest::Approx(3));
}

TEST_CASE("solver agrees with exhaustive enumeration") {
    std::mt19937_64 gen(101);
    std::uniform_real_distribution<double> obj(-5, 5);
    std::uniform_int_distribution<int> coeff(-3, 3);
    int infeasible_seen = 0;
    for (int rep = 0; rep < 220; ++rep) {
        int n = 1 + static_cast<int>(gen() % 6);
        std::vector<double> c(n), hi_(n);
        for (int j = 0; j < n; ++j) {
            c[j] = obj(gen);
            hi_[j] = static_cast<double>(gen() % 4);
        }
        IlpModel m = box_model(c, hi_);
        int rows = static_cast<int>(gen() % 5);
        for (int r = 0; r < rows; ++r) {
            Row row;
            for (int j = 0; j < n; ++j) {
                int a = coeff(gen);
                if (a) row.coeffs.push_back({j, static_cast<double>(a)});
            }
            row.rel = gen() % 3 == 0 ? Rel::Geq : Rel::Leq;
            if (gen() % 7 == 0) row.rel = Rel::Eq;
            row.rhs = 0.5 * static_cast<double>(static_cast<int>(gen() % 41) - 16);
            m.rows.push_back(row);
        }

        auto want = brute_force(m);
        auto got = solve(m, 30s);
        if (!want) {
            ++infeasible_seen;
            CHECK(got.status == Status::Infeasible);
            continue;
        }
        REQUIRE(got.status == Status::Optimal);
        CHECK(*got.objective == doctest::Approx(*want).epsilon(1e-6));

        // returned point is feasible and integral, and the LP bound sandwiches
        const auto& x = *got.assignment;
        for (int j = 0; j < n; ++j) {
            CHECK(x[j] == doctest::Approx(std::round(x[j])));
            CHECK(x[j] >= -1e-7);
            CHECK(x[j] <= hi_[j] + 1e-7);
        }
        for (const Row& r : m.rows) {
            double lhs = 0;
            for (auto [j, a] : r.coeffs) lhs += a * x[j];
            if (r.rel == Rel::Leq) CHECK(lhs <= r.rhs + 1e-6);
            else if (r.rel == Rel::Geq) CHECK(lhs >= r.rhs - 1e-6);
            else CHECK(lhs == doctest::Approx(r.rhs).epsilon(1e-6));
        }
        auto lp = solve_lp_relaxation(m);
        REQUIRE(lp.status == Status::Optimal);
        CHECK(lp.objective >= *got.objective - 1e-6);
    }
    CHECK(infeasible_seen > 0);  // the battery exercises both outcomes
}

TEST_CASE("identical inputs give identical results") {
    IlpModel m = box_model({2.3, -1.1, 0.7, 1.9}, {3, 3, 3, 3});
    Row a;
    a.coeffs = {{0, 2}, {1, 1}, {2, -1}, {3, 1}};
    a.rel = Rel::Leq;
    a.rhs = 4.5;
    m.rows.push_back(a);
    Row b;
    b.coeffs = {{0, 1}, {2, 1}};
    b.rel = Rel::Geq;
    b.rhs = 1;
    m.rows.push_back(b);

    auto r1 = solve(m, 5s);
    auto r2 = solve(m, 5s);
    CHECK(r1.status == r2.status);
    CHECK(r1.node_count == r2.node_count);
    CHECK(*r1.objective == *r2.objective);
    CHECK(*r1.assignment == *r2.assignment);
}

TEST_CASE("dump_lp emits readable text") {
    IlpModel m = box_model({3, 2}, {1, kInf});
    Row r;
    r.coeffs = {{0, 1}, {1, 1}};
    r.rel = Rel::Leq;
    r.rhs = 1;
    r.name = "budget";
    m.rows.push_back(r);
    std::string text = dump_lp(m);
    CHECK(text.find("Maximize") != std::string::npos);
    CHECK(text.find("Subject To") != std::string::npos);
    CHECK(text.find("Bounds") != std::string::npos);
    CHECK(text.find("budget") != std::string::npos);
    CHECK(text.find("End") != std::string::npos);
}
