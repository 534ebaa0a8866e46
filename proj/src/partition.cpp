#include "spq/partition.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "spq/cdf.hpp"
#include "spq/risk.hpp"

namespace spq::partition {

using risk::mad;

namespace {

std::unordered_map<int64_t, size_t> row_index(const ScenarioMatrix& scen) {
    std::unordered_map<int64_t, size_t> idx;
    idx.reserve(scen.ids.size());
    for (size_t i = 0; i < scen.ids.size(); ++i) idx.emplace(scen.ids[i], i);
    return idx;
}

// ascending by distance; the pivot leads its tie class, other ties by id
void sort_by_distance(std::vector<std::pair<int64_t, double>>& v, int64_t pivot) {
    std::sort(v.begin(), v.end(), [pivot](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second < y.second;
        if (x.first == pivot) return y.first != pivot;
        if (y.first == pivot) return false;
        return x.first < y.first;
    });
}

// offline draws for stochastic attrs; constant single-column rows for det ones
ScenarioMatrix offline_matrix(const StochasticRelation& rel, const std::vector<int64_t>& ids,
                              const std::string& attr, size_t cols) {
    if (rel.is_stoch_attr(attr))
        return generate_scenarios(rel, ids, attr, rng::Purpose::Offline, 0, cols);
    if (!rel.is_det_attr(attr)) throw std::domain_error("unknown attribute: " + attr);
    ScenarioMatrix m;
    m.attr = attr;
    m.purpose = rng::Purpose::Offline;
    m.ids = ids;
    m.m = 1;
    m.v.reserve(ids.size());
    for (int64_t id : ids) m.v.push_back(rel.at(id).det.at(attr));
    return m;
}

// worst-case replacement cost per member: sum_j max(M_j - S_ij, S_ij - m_j)
std::unordered_map<int64_t, double> replacement_costs(const std::vector<int64_t>& members,
                                                      const ScenarioMatrix& scen,
                                                      const std::unordered_map<int64_t, size_t>& idx) {
    const size_t m = scen.m;
    std::vector<double> lo(m, std::numeric_limits<double>::infinity());
    std::vector<double> hi(m, -std::numeric_limits<double>::infinity());
    for (int64_t id : members) {
        auto r = scen.row(idx.at(id));
        for (size_t j = 0; j < m; ++j) {
            lo[j] = std::min(lo[j], r[j]);
            hi[j] = std::max(hi[j], r[j]);
        }
    }
    std::unordered_map<int64_t, double> cost;
    cost.reserve(members.size());
    for (int64_t id : members) {
        auto r = scen.row(idx.at(id));
        double c = 0;
        for (size_t j = 0; j < m; ++j) c += std::max(hi[j] - r[j], r[j] - lo[j]);
        cost[id] = c;
    }
    return cost;
}

int64_t argmin_cost(const std::vector<int64_t>& members,
                    const std::unordered_map<int64_t, double>& cost) {
    std::vector<int64_t> order = members;
    std::sort(order.begin(), order.end());
    int64_t best = order.front();
    double best_c = std::numeric_limits<double>::infinity();
    for (int64_t id : order) {
        double c = cost.at(id);
        if (c < best_c) {
            best_c = c;
            best = id;
        }
    }
    return best;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t j = 0; j < n; ++j) {
        ma += a[j];
        mb += b[j];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (size_t j = 0; j < n; ++j) {
        sab += (a[j] - ma) * (b[j] - mb);
        saa += (a[j] - ma) * (a[j] - ma);
        sbb += (b[j] - mb) * (b[j] - mb);
    }
    if (saa <= 0 || sbb <= 0) {
        bool same = true;
        for (size_t j = 0; j < n && same; ++j) same = a[j] == b[j];
        return same ? 1.0 : 0.0;
    }
    return sab / std::sqrt(saa * sbb);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<std::pair<int64_t, double>> pivot_scan(const std::vector<int64_t>& members,
                                                   int64_t pivot, const ScenarioMatrix& scen) {
    auto idx = row_index(scen);
    auto it = idx.find(pivot);
    if (it == idx.end()) throw std::domain_error("pivot_scan: pivot not in matrix");
    auto pr = scen.row(it->second);
    std::vector<std::pair<int64_t, double>> out;
    out.reserve(members.size());
    bool saw_pivot = false;
    for (int64_t id : members) {
        saw_pivot = saw_pivot || id == pivot;
        auto mi = idx.find(id);
        if (mi == idx.end()) throw std::domain_error("pivot_scan: member not in matrix");
        out.emplace_back(id, id == pivot ? 0.0 : mad(scen.row(mi->second), pr));
    }
    if (!saw_pivot) throw std::domain_error("pivot_scan: pivot not in members");
    sort_by_distance(out, pivot);
    return out;
}

Partitioning dist_partition(const StochasticRelation& rel, const PartitionConfig& cfg) {
    if (cfg.tau < 1) throw std::domain_error("dist_partition: tau must be >= 1");
    for (const auto& [a, d] : cfg.diameters)
        if (d <= 0) throw std::domain_error("dist_partition: nonpositive diameter for " + a);

    std::vector<std::string> attrs;
    for (const auto& a : rel.det_attrs)
        if (cfg.diameters.count(a)) attrs.push_back(a);
    for (const auto& a : rel.stoch_attrs)
        if (cfg.diameters.count(a)) attrs.push_back(a);
    if (attrs.size() != cfg.diameters.size())
        throw std::domain_error("dist_partition: diameter names an unknown attribute");

    std::vector<int64_t> all;
    all.reserve(rel.tuples.size());
    for (const auto& t : rel.tuples) all.push_back(t.id);

    std::map<std::string, ScenarioMatrix> scen;
    for (const auto& a : attrs) scen.emplace(a, offline_matrix(rel, all, a, cfg.offline_scenarios));
    std::unordered_map<int64_t, size_t> rowidx;
    rowidx.reserve(all.size());
    for (size_t i = 0; i < all.size(); ++i) rowidx.emplace(all[i], i);

    Partitioning out;
    out.config = cfg;
    out.seed_tag = rel.seed;

    uint64_t pivot_draws = 0;

    auto scan = [&](const std::vector<int64_t>& members, int64_t pivot, const std::string& a) {
        const auto& m = scen.at(a);
        auto pr = m.row(rowidx.at(pivot));
        std::vector<std::pair<int64_t, double>> v;
        v.reserve(members.size());
        for (int64_t id : members)
            v.emplace_back(id, id == pivot ? 0.0 : mad(m.row(rowidx.at(id)), pr));
        sort_by_distance(v, pivot);
        return v;
    };

    std::function<void(std::vector<int64_t>, int)> rec = [&](std::vector<int64_t> members,
                                                             int depth) {
        if (members.empty()) return;
        if (depth > 64)
            throw std::runtime_error("dist_partition: recursion depth cap (64) exceeded");

        rng::Key pk(cfg.seed, pivot_draws++, "pivot", rng::Purpose::Params);
        auto pi = static_cast<size_t>(pk.u01(0, 0) * static_cast<double>(members.size()));
        if (pi >= members.size()) pi = members.size() - 1;
        const int64_t pivot = members[pi];

        std::map<std::string, double> dmax;
        std::string astar;
        double best_ratio = -1.0;
        for (const auto& a : attrs) {
            auto s = scan(members, pivot, a);
            dmax[a] = s.back().second;
            double ratio = 2.0 * dmax[a] / cfg.diameters.at(a);
            if (ratio > best_ratio) {
                best_ratio = ratio;
                astar = a;
            }
        }

        bool ok = members.size() <= cfg.tau;
        for (const auto& a : attrs) ok = ok && 2.0 * dmax[a] <= cfg.diameters.at(a);
        if (ok) {
            int pid = static_cast<int>(out.partitions.size());
            std::sort(members.begin(), members.end());
            for (int64_t id : members) out.assignment[id] = pid;
            out.certificates.push_back({pivot, std::move(dmax)});
            out.partitions.push_back(std::move(members));
            return;
        }

        // order members for splitting: along the steepest axis from the
        // farthest tuple, or by id when no diameter is configured
        std::vector<std::pair<int64_t, double>> order;
        if (!astar.empty()) {
            int64_t p2 = scan(members, pivot, astar).back().first;
            order = scan(members, p2, astar);
        } else {
            std::sort(members.begin(), members.end());
            for (int64_t id : members) order.emplace_back(id, 0.0);
        }

        if (members.size() > cfg.tau) {
            for (size_t s = 0; s < order.size(); s += cfg.tau) {
                std::vector<int64_t> chunk;
                chunk.reserve(cfg.tau);
                for (size_t i = s; i < std::min(order.size(), s + cfg.tau); ++i)
                    chunk.push_back(order[i].first);
                rec(std::move(chunk), depth + 1);
            }
            return;
        }

        // size fits but a diameter is violated: bands of width d_{A*},
        // halving until the set actually separates
        if (order.back().second <= 0)
            throw std::logic_error("dist_partition: diameter violation with zero spread");
        double width = cfg.diameters.at(astar);
        while (true) {
            std::vector<std::vector<int64_t>> bands;
            for (const auto& [id, d] : order) {
                auto b = static_cast<size_t>(d / width);
                if (b >= bands.size()) bands.resize(b + 1);
                bands[b].push_back(id);
            }
            size_t nonempty = 0;
            for (const auto& b : bands) nonempty += b.empty() ? 0 : 1;
            if (nonempty >= 2) {
                for (auto& b : bands)
                    if (!b.empty()) rec(std::move(b), depth + 1);
                return;
            }
            width *= 0.5;
        }
    };

    rec(std::move(all), 0);
    return out;
}

int64_t select_representative(const std::vector<int64_t>& members, const ScenarioMatrix& scen) {
    if (members.empty()) throw std::domain_error("select_representative: empty partition");
    auto idx = row_index(scen);
    return argmin_cost(members, replacement_costs(members, scen, idx));
}

void build_representatives(Partitioning& p, const StochasticRelation& rel) {
    const size_t cols = p.config.offline_scenarios;
    const size_t K = p.partitions.size();
    p.reps.assign(K, {});
    p.median_rho.assign(K, 1.0);

    std::vector<int64_t> all;
    all.reserve(rel.tuples.size());
    for (const auto& t : rel.tuples) all.push_back(t.id);

    std::map<std::string, ScenarioMatrix> scen;
    std::unordered_map<int64_t, size_t> rowidx;
    for (const auto& a : rel.stoch_attrs)
        scen.emplace(a, generate_scenarios(rel, all, a, rng::Purpose::Offline, 0, cols));
    rowidx.reserve(all.size());
    for (size_t i = 0; i < all.size(); ++i) rowidx.emplace(all[i], i);

    // attribute groups whose donor is chosen jointly; singletons otherwise
    std::vector<std::vector<std::string>> groups;
    {
        std::map<std::string, bool> grouped;
        for (const auto& g : p.config.correlated_groups) {
            std::vector<std::string> keep;
            for (const auto& a : g)
                if (rel.is_stoch_attr(a)) {
                    keep.push_back(a);
                    grouped[a] = true;
                }
            if (!keep.empty()) groups.push_back(std::move(keep));
        }
        for (const auto& a : rel.stoch_attrs)
            if (!grouped.count(a)) groups.push_back({a});
    }

    for (size_t pid = 0; pid < K; ++pid) {
        const auto& members = p.partitions[pid];
        auto& rep = p.reps[pid];

        for (const auto& a : rel.det_attrs) {
            double s = 0;
            for (int64_t id : members) s += rel.at(id).det.at(a);
            rep.det[a] = s / static_cast<double>(members.size());
        }

        for (const auto& g : groups) {
            std::unordered_map<int64_t, double> total;
            for (int64_t id : members) total[id] = 0.0;
            for (const auto& a : g)
                for (const auto& [id, c] : replacement_costs(members, scen.at(a), rowidx))
                    total[id] += c;
            int64_t donor = argmin_cost(members, total);
            for (const auto& a : g) {
                rep.source[a] = donor;
                const auto& vg = rel.at(donor).stoch.at(a);
                rng::Key key(rel.seed, static_cast<uint64_t>(donor), a, rng::Purpose::Cdf);
                std::vector<double> draws(10000);
                for (size_t j = 0; j < draws.size(); ++j) draws[j] = vg_draw(vg, key, j);
                rep.marginals[a] = std::make_shared<cdf::HistogramCdf>(
                    cdf::HistogramCdf::from_samples(draws, 1000));
            }
        }

        std::vector<double> corr;
        for (const auto& a : rel.stoch_attrs) {
            const auto& m = scen.at(a);
            auto donor_row = m.row(rowidx.at(rep.source.at(a)));
            for (int64_t id : members)
                corr.push_back(id == rep.source.at(a)
                                   ? 1.0
                                   : pearson(m.row(rowidx.at(id)), donor_row));
        }
        if (!corr.empty()) p.median_rho[pid] = std::clamp(median(std::move(corr)), 0.0, 1.0);
    }
}

}  // namespace spq::partition
