#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spq/relation.hpp"

namespace spq::partition {

struct PartitionConfig {
    size_t tau = 2000;
    // per-attribute diameter limits d_A > 0; attributes not listed are free
    std::map<std::string, double> diameters;
    size_t offline_scenarios = 200;
    uint64_t seed = 0;  // pivot selection stream (scenario streams key off the relation seed)
    // attributes whose representative source must be picked jointly
    std::vector<std::vector<std::string>> correlated_groups;
};

struct RepresentativeTuple {
    std::map<std::string, double> det;              // partition means
    std::map<std::string, int64_t> source;          // stoch attr -> donor tuple id
    std::map<std::string, cdf::CdfPtr> marginals;   // empirical per-attr distributions
};

// Evidence recorded when a partition is accepted: the pivot it was validated
// from and the max observed distance per bounded attribute (2*dmax <= d_A).
struct PartitionCertificate {
    int64_t pivot = 0;
    std::map<std::string, double> dmax;
};

struct Partitioning {
    PartitionConfig config;
    uint64_t seed_tag = 0;  // relation seed the offline scenarios were drawn from
    std::vector<std::vector<int64_t>> partitions;
    std::map<int64_t, int> assignment;  // tuple id -> partition index
    std::vector<PartitionCertificate> certificates;
    std::vector<RepresentativeTuple> reps;   // filled by build_representatives
    std::vector<double> median_rho;          // per partition, clamped to [0, 1]

    const std::vector<int64_t>& members(int pid) const { return partitions[pid]; }
};

// Distances of every member to the pivot along one attribute, ascending.
// The pivot itself comes first with distance zero. `scen` holds one row per
// member (deterministic attributes use single-column constant rows).
std::vector<std::pair<int64_t, double>> pivot_scan(const std::vector<int64_t>& members,
                                                   int64_t pivot, const ScenarioMatrix& scen);

// Recursive diameter-bounded partitioning. Offline scenario matrices are drawn
// internally (Purpose::Offline) for every stochastic attribute with a diameter
// limit; deterministic attributes compare by absolute difference.
Partitioning dist_partition(const StochasticRelation& rel, const PartitionConfig& cfg);

// Member whose scenario row minimizes sum_j max(M_j - S_ij, S_ij - m_j) where
// M_j / m_j are the per-column max / min over the partition. Ties -> lowest id.
int64_t select_representative(const std::vector<int64_t>& members, const ScenarioMatrix& scen);

// Fills reps and median_rho: deterministic attributes average over members,
// stochastic attributes adopt a donor member's distribution (per attribute,
// unless declared correlated), and rho_bar is the median Pearson correlation
// between member rows and the donor row (donor included, so never empty).
void build_representatives(Partitioning& p, const StochasticRelation& rel);

}  // namespace spq::partition
