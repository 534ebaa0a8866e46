#include "spq/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace spq::io {

using nlohmann::json;

namespace {

std::string generator_kind(const VgSpec& vg) {
    if (std::holds_alternative<GbmSpec>(vg)) return "gbm";
    if (std::holds_alternative<GaussianNoiseSpec>(vg)) return "gauss";
    throw std::domain_error("save_relation: empirical generators cannot be persisted");
}

std::vector<std::string> generator_params(const std::string& kind) {
    if (kind == "gbm") return {"price", "drift", "volatility", "horizon_days"};
    if (kind == "gauss") return {"base", "noise_mean", "noise_var"};
    throw std::domain_error("unknown generator kind: " + kind);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void save_relation(const StochasticRelation& rel, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::map<std::string, std::string> kinds;
    for (const auto& a : rel.stoch_attrs) {
        if (rel.tuples.empty()) throw std::domain_error("save_relation: empty relation");
        kinds[a] = generator_kind(rel.tuples.front().stoch.at(a));
        for (const auto& t : rel.tuples)
            if (generator_kind(t.stoch.at(a)) != kinds[a])
                throw std::domain_error("save_relation: mixed generator kinds for " + a);
    }

    json man;
    man["name"] = rel.name;
    man["seed"] = rel.seed;
    man["det_attrs"] = rel.det_attrs;
    man["stoch_attrs"] = rel.stoch_attrs;
    man["generators"] = kinds;
    man["tuples"] = rel.tuples.size();
    {
        std::ofstream f(dir / "manifest.json");
        if (!f) throw std::runtime_error("save_relation: cannot write manifest");
        f << man.dump(2) << '\n';
    }

    std::ofstream f(dir / "relation.csv");
    if (!f) throw std::runtime_error("save_relation: cannot write relation.csv");
    f << std::setprecision(17);
    f << "id";
    for (const auto& a : rel.det_attrs) f << ',' << a;
    for (const auto& a : rel.stoch_attrs)
        for (const auto& p : generator_params(kinds[a])) f << ',' << a << '.' << p;
    f << '\n';
    for (const auto& t : rel.tuples) {
        f << t.id;
        for (const auto& a : rel.det_attrs) f << ',' << t.det.at(a);
        for (const auto& a : rel.stoch_attrs) {
            const auto& vg = t.stoch.at(a);
            if (const auto* g = std::get_if<GbmSpec>(&vg))
                f << ',' << g->price << ',' << g->drift << ',' << g->volatility << ','
                  << g->horizon_days;
            else if (const auto* gn = std::get_if<GaussianNoiseSpec>(&vg))
                f << ',' << gn->base << ',' << gn->noise_mean << ',' << gn->noise_var;
        }
        f << '\n';
    }
}

StochasticRelation load_relation(const std::filesystem::path& dir) {
    json man;
    {
        std::ifstream f(dir / "manifest.json");
        if (!f) throw std::runtime_error("load_relation: missing manifest.json in " + dir.string());
        f >> man;
    }
    StochasticRelation rel;
    rel.name = man.at("name").get<std::string>();
    rel.seed = man.at("seed").get<uint64_t>();
    rel.det_attrs = man.at("det_attrs").get<std::vector<std::string>>();
    rel.stoch_attrs = man.at("stoch_attrs").get<std::vector<std::string>>();
    std::map<std::string, std::string> kinds =
        man.at("generators").get<std::map<std::string, std::string>>();

    std::ifstream f(dir / "relation.csv");
    if (!f) throw std::runtime_error("load_relation: missing relation.csv in " + dir.string());
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("load_relation: empty relation.csv");
    auto header = split_csv(line);
    if (header.empty() || header[0] != "id")
        throw std::runtime_error("load_relation: relation.csv must start with an id column");

    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw std::runtime_error("load_relation: ragged row in relation.csv");
        Tuple t;
        t.id = std::stoll(cells[0]);
        std::map<std::string, std::map<std::string, double>> params;
        for (size_t c = 1; c < header.size(); ++c) {
            auto dot = header[c].find('.');
            double v = std::stod(cells[c]);
            if (dot == std::string::npos)
                t.det[header[c]] = v;
            else
                params[header[c].substr(0, dot)][header[c].substr(dot + 1)] = v;
        }
        for (const auto& a : rel.stoch_attrs) {
            const auto& p = params.at(a);
            if (kinds.at(a) == "gbm")
                t.stoch[a] = GbmSpec{p.at("price"), p.at("drift"), p.at("volatility"),
                                     p.at("horizon_days")};
            else
                t.stoch[a] = GaussianNoiseSpec{p.at("base"), p.at("noise_mean"), p.at("noise_var")};
        }
        rel.tuples.push_back(std::move(t));
    }
    rel.rebuild_index();
    return rel;
}

void save_partitioning(const partition::Partitioning& p, const std::filesystem::path& meta_path) {
    json j;
    j["config"] = {{"tau", p.config.tau},
                   {"diameters", p.config.diameters},
                   {"offline_scenarios", p.config.offline_scenarios},
                   {"seed", p.config.seed},
                   {"correlated_groups", p.config.correlated_groups}};
    j["seed_tag"] = p.seed_tag;
    j["partitions"] = p.partitions;
    json certs = json::array();
    for (const auto& c : p.certificates) certs.push_back({{"pivot", c.pivot}, {"dmax", c.dmax}});
    j["certificates"] = certs;
    j["median_rho"] = p.median_rho;
    json reps = json::array();
    for (const auto& r : p.reps) reps.push_back({{"det", r.det}, {"source", r.source}});
    j["reps"] = reps;
    {
        std::ofstream f(meta_path);
        if (!f) throw std::runtime_error("save_partitioning: cannot write " + meta_path.string());
        f << j.dump(2) << '\n';
    }

    // histogram marginals live in a binary-ish JSON sidecar next to the meta
    json side;
    json margs = json::array();
    for (const auto& r : p.reps) {
        json per;
        for (const auto& [attr, ptr] : r.marginals) {
            const auto* h = dynamic_cast<const cdf::HistogramCdf*>(ptr.get());
            if (!h)
                throw std::domain_error("save_partitioning: non-histogram marginal for " + attr);
            per[attr] = {{"lo", h->lo}, {"hi", h->hi}, {"cum", h->cum}};
        }
        margs.push_back(std::move(per));
    }
    side["marginals"] = margs;
    std::filesystem::path side_path = meta_path;
    side_path += ".cdf";
    std::ofstream f(side_path);
    if (!f) throw std::runtime_error("save_partitioning: cannot write " + side_path.string());
    f << side.dump() << '\n';
}

partition::Partitioning load_partitioning(const std::filesystem::path& meta_path) {
    json j;
    {
        std::ifstream f(meta_path);
        if (!f) throw std::runtime_error("load_partitioning: missing " + meta_path.string());
        f >> j;
    }
    partition::Partitioning p;
    const auto& c = j.at("config");
    p.config.tau = c.at("tau").get<size_t>();
    p.config.diameters = c.at("diameters").get<std::map<std::string, double>>();
    p.config.offline_scenarios = c.at("offline_scenarios").get<size_t>();
    p.config.seed = c.at("seed").get<uint64_t>();
    p.config.correlated_groups =
        c.at("correlated_groups").get<std::vector<std::vector<std::string>>>();
    p.seed_tag = j.at("seed_tag").get<uint64_t>();
    p.partitions = j.at("partitions").get<std::vector<std::vector<int64_t>>>();
    for (size_t pid = 0; pid < p.partitions.size(); ++pid)
        for (int64_t id : p.partitions[pid]) p.assignment[id] = static_cast<int>(pid);
    for (const auto& cj : j.at("certificates"))
        p.certificates.push_back({cj.at("pivot").get<int64_t>(),
                                  cj.at("dmax").get<std::map<std::string, double>>()});
    p.median_rho = j.at("median_rho").get<std::vector<double>>();
    for (const auto& rj : j.at("reps")) {
        partition::RepresentativeTuple r;
        r.det = rj.at("det").get<std::map<std::string, double>>();
        r.source = rj.at("source").get<std::map<std::string, int64_t>>();
        p.reps.push_back(std::move(r));
    }

    std::filesystem::path side_path = meta_path;
    side_path += ".cdf";
    std::ifstream f(side_path);
    if (!f) throw std::runtime_error("load_partitioning: missing sidecar " + side_path.string());
    json side;
    f >> side;
    const auto& margs = side.at("marginals");
    if (margs.size() != p.reps.size())
        throw std::runtime_error("load_partitioning: sidecar/meta partition count mismatch");
    for (size_t i = 0; i < p.reps.size(); ++i) {
        for (auto it = margs[i].begin(); it != margs[i].end(); ++it) {
            auto h = std::make_shared<cdf::HistogramCdf>();
            h->lo = it.value().at("lo").get<double>();
            h->hi = it.value().at("hi").get<double>();
            h->cum = it.value().at("cum").get<std::vector<double>>();
            p.reps[i].marginals[it.key()] = h;
        }
    }
    return p;
}

namespace {

struct CacheHeader {
    char magic[8];
    uint64_t n = 0, m = 0, attr_hash = 0;
};
static_assert(sizeof(CacheHeader) == 32);
constexpr char kMagic[8] = {'S', 'P', 'Q', 'S', 'C', 'N', '1', '\0'};

}  // namespace

void save_scenarios(const ScenarioMatrix& scen, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_scenarios: cannot write " + path.string());
    CacheHeader h;
    std::copy(std::begin(kMagic), std::end(kMagic), h.magic);
    h.n = scen.ids.size();
    h.m = scen.m;
    h.attr_hash = rng::fnv1a(scen.attr);
    f.write(reinterpret_cast<const char*>(&h), sizeof(h));
    f.write(reinterpret_cast<const char*>(scen.v.data()),
            static_cast<std::streamsize>(scen.v.size() * sizeof(double)));
}

std::optional<ScenarioMatrix> load_scenarios(const std::filesystem::path& path,
                                             const std::vector<int64_t>& ids,
                                             const std::string& attr, size_t m) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    CacheHeader h;
    f.read(reinterpret_cast<char*>(&h), sizeof(h));
    if (!f || !std::equal(std::begin(kMagic), std::end(kMagic), h.magic)) return std::nullopt;
    if (h.n != ids.size() || h.m != m || h.attr_hash != rng::fnv1a(attr)) return std::nullopt;
    ScenarioMatrix scen;
    scen.attr = attr;
    scen.ids = ids;
    scen.m = m;
    scen.v.resize(ids.size() * m);
    f.read(reinterpret_cast<char*>(scen.v.data()),
           static_cast<std::streamsize>(scen.v.size() * sizeof(double)));
    if (!f) return std::nullopt;
    return scen;
}

ScenarioMatrix cached_scenarios(const StochasticRelation& rel, const std::vector<int64_t>& ids,
                                const std::string& attr, rng::Purpose purpose, size_t m,
                                const std::filesystem::path& dir) {
    auto path = dir / ("scen_" + attr + "_p" + std::to_string(static_cast<int>(purpose)) + "_m" +
                       std::to_string(m) + ".bin");
    if (auto hit = load_scenarios(path, ids, attr, m)) {
        hit->purpose = purpose;
        return std::move(*hit);
    }
    auto scen = generate_scenarios(rel, ids, attr, purpose, 0, m);
    std::filesystem::create_directories(dir);
    save_scenarios(scen, path);
    return scen;
}

void write_trace(const rcl::TraceLog& log, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_trace: cannot write " + path.string());
    f << std::setprecision(17);
    f << "phase\tconstraint\talpha\tv\tilp_feasible\tfeasible\tomega\n";
    for (const auto& r : log)
        f << r.phase << '\t' << r.constraint << '\t' << r.alpha << '\t' << r.v << '\t'
          << (r.ilp_feasible ? 1 : 0) << '\t' << (r.feasible ? 1 : 0) << '\t' << r.omega << '\n';
}

std::string report_json(const workload::RunReport& rep, const std::optional<Package>& pkg,
                        const StochasticRelation& rel) {
    json j;
    j["method"] = rep.method;
    j["status"] = rep.status;
    j["phase"] = rep.phase;
    j["note"] = rep.note;
    j["seconds_total"] = rep.seconds_total;
    j["phase_seconds"] = rep.phase_seconds;
    j["m_opt"] = rep.m_opt;
    j["m_validation"] = rep.m_validation;
    j["omega"] = rep.omega;
    j["omega_bar"] = rep.omega_bar;
    j["omega_lp"] = rep.omega_lp;
    j["gap"] = rep.gap;
    j["certified"] = rep.certified;
    j["feasible_validation"] = rep.feasible_validation;
    j["feasible_test"] = rep.feasible_test;
    j["package_size"] = rep.package_size;
    j["package_total"] = rep.package_total;
    json entries = json::array();
    if (pkg) {
        auto sorted = pkg->entries;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [id, x] : sorted) {
            json e;
            e["id"] = id;
            e["count"] = x;
            json det;
            for (const auto& [a, v] : rel.at(id).det) det[a] = v;
            e["det"] = det;
            entries.push_back(std::move(e));
        }
    }
    j["package"] = entries;
    return j.dump(2);
}

void write_report(const workload::RunReport& rep, const std::optional<Package>& pkg,
                  const StochasticRelation& rel, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_report: cannot write " + path.string());
    f << report_json(rep, pkg, rel) << '\n';
}

}  // namespace spq::io
