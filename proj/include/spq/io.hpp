#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spq/partition.hpp"
#include "spq/rcl.hpp"
#include "spq/relation.hpp"
#include "spq/workload.hpp"

namespace spq::io {

// Relation directory layout: manifest.json (name, seed, attribute roles and
// generator kinds) plus relation.csv (id, det columns, flattened generator
// parameters). Empirical generators have no parametric form and cannot be
// persisted.
void save_relation(const StochasticRelation& rel, const std::filesystem::path& dir);
StochasticRelation load_relation(const std::filesystem::path& dir);

// Partitioning metadata as JSON with a .cdf sidecar holding the histogram
// marginals (bin range + cumulative mass) of every representative.
void save_partitioning(const partition::Partitioning& p, const std::filesystem::path& meta_path);
partition::Partitioning load_partitioning(const std::filesystem::path& meta_path);

// Binary scenario cache: 32-byte header (magic "SPQSCN1", tuple count,
// scenario count, attribute-name hash) followed by row-major doubles.
void save_scenarios(const ScenarioMatrix& scen, const std::filesystem::path& path);
std::optional<ScenarioMatrix> load_scenarios(const std::filesystem::path& path,
                                             const std::vector<int64_t>& ids,
                                             const std::string& attr, size_t m);
// Loads the cache when present and consistent; regenerates and rewrites it
// otherwise.
ScenarioMatrix cached_scenarios(const StochasticRelation& rel, const std::vector<int64_t>& ids,
                                const std::string& attr, rng::Purpose purpose, size_t m,
                                const std::filesystem::path& dir);

void write_trace(const rcl::TraceLog& log, const std::filesystem::path& path);

std::string report_json(const workload::RunReport& rep, const std::optional<Package>& pkg,
                        const StochasticRelation& rel);
void write_report(const workload::RunReport& rep, const std::optional<Package>& pkg,
                  const StochasticRelation& rel, const std::filesystem::path& path);

}  // namespace spq::io
