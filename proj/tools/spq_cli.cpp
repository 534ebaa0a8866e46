#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spq/io.hpp"
#include "spq/workload.hpp"

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// "Gain=50,Price=20" -> {Gain: 50, Price: 20}
std::map<std::string, double> parse_diameters(const std::string& s) {
    std::map<std::string, double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--diameters expects attr=value pairs, got: " + item);
        out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    }
    if (out.empty()) throw std::runtime_error("--diameters lists no attr=value pair");
    return out;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spq: package queries over stochastic relations"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a synthetic relation");
    std::string gen_kind, gen_out;
    size_t gen_n = 1000, gen_steps = 4;
    uint64_t gen_seed = 0;
    gen->add_option("kind", gen_kind, "portfolio | tpch")
        ->required()
        ->check(CLI::IsMember({"portfolio", "tpch"}));
    gen->add_option("--n", gen_n, "tuple count")->required();
    gen->add_option("--seed", gen_seed, "relation seed");
    gen->add_option("--steps", gen_steps, "half-day sell intervals per company (portfolio)")
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "output directory")->required();

    auto* part = app.add_subcommand("partition", "diameter-bounded offline partitioning");
    std::string part_rel, part_diam, part_out;
    std::vector<std::string> part_corr;
    size_t part_tau = 2000, part_off = 200;
    uint64_t part_seed = 0;
    part->add_option("--relation", part_rel, "relation directory")->required();
    part->add_option("--tau", part_tau, "max partition size");
    part->add_option("--diameters", part_diam, "attr=value,... MAD diameter limits")->required();
    part->add_option("--offline-scenarios", part_off, "offline scenario count");
    part->add_option("--seed", part_seed, "pivot-selection seed");
    part->add_option("--correlated", part_corr,
                     "comma-joined attr group whose representative source is chosen jointly");
    part->add_option("--out", part_out, "partition metadata path")->required();

    auto* qry = app.add_subcommand("query", "answer one package query");
    std::string q_rel, q_parts, q_file, q_method = "rcl";
    std::string q_trace, q_dump, q_report;
    double q_eps = 0.05, q_delta = 1e-2, q_gamma = -1.0, q_dgamma = 0.03, q_drho = 0.1;
    double q_tlim = 120.0;
    size_t q_m0 = 100, q_val = 10000, q_tau = 2000;
    long q_pmax = 30;
    uint64_t q_seed = 0;
    bool q_explain = false;
    qry->add_option("--relation", q_rel, "relation directory")->required();
    qry->add_option("--partitions", q_parts, "partition metadata (sketchrefine)");
    qry->add_option("--query", q_file, "query file")->required();
    qry->add_option("--method", q_method, "rcl | sketchrefine | naive")
        ->check(CLI::IsMember({"rcl", "sketchrefine", "naive"}));
    qry->add_option("--epsilon", q_eps, "approximation slack");
    qry->add_option("--delta", q_delta, "bisection resolution");
    qry->add_option("--m0", q_m0, "initial optimization scenario count");
    qry->add_option("--validation", q_val, "validation scenario count");
    qry->add_option("--seed", q_seed, "robustness re-verification seed");
    qry->add_option("--p-max", q_pmax, "package size cap used by the sketch");
    qry->add_option("--gamma", q_gamma, "sketch risk tolerance (negative = auto)");
    qry->add_option("--delta-gamma", q_dgamma, "sketch tolerance decrement");
    qry->add_option("--delta-rho", q_drho, "duplicate correlation bump on refine failure");
    qry->add_option("--tau", q_tau, "refine duplicate budget");
    qry->add_option("--ilp-time-limit", q_tlim, "seconds per ILP solve");
    qry->add_option("--trace", q_trace, "write per-probe trace TSV here");
    qry->add_option("--dump-lp", q_dump, "write the initial linearized master model here");
    qry->add_option("--report", q_report, "write the run report JSON here");
    qry->add_flag("--explain", q_explain, "print the canonical query form");

    auto* hard = app.add_subcommand("hardness", "estimate query hardness");
    std::string h_file, h_rel;
    hard->add_option("--query", h_file, "query file")->required();
    hard->add_option("--relation", h_rel, "relation directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) {
            spq::StochasticRelation rel;
            if (gen_kind == "portfolio") {
                size_t companies = (gen_n + gen_steps - 1) / gen_steps;
                rel = spq::workload::gen_portfolio(companies, gen_steps, gen_seed);
                if (rel.tuples.size() > gen_n) {
                    rel.tuples.resize(gen_n);
                    rel.rebuild_index();
                }
            } else {
                rel = spq::workload::gen_tpch_like(gen_n, gen_seed);
            }
            spq::io::save_relation(rel, gen_out);
            std::cout << "wrote " << gen_out << ": " << rel.tuples.size() << " tuples ("
                      << rel.name << ", seed " << rel.seed << ")\n";
            return 0;
        }

        if (*part) {
            auto rel = spq::io::load_relation(part_rel);
            spq::partition::PartitionConfig cfg;
            cfg.tau = part_tau;
            cfg.diameters = parse_diameters(part_diam);
            cfg.offline_scenarios = part_off;
            cfg.seed = part_seed;
            for (const auto& g : part_corr) cfg.correlated_groups.push_back(split_commas(g));
            auto p = spq::partition::dist_partition(rel, cfg);
            spq::partition::build_representatives(p, rel);
            spq::io::save_partitioning(p, part_out);
            size_t biggest = 0;
            for (const auto& m : p.partitions) biggest = std::max(biggest, m.size());
            std::cout << "wrote " << part_out << ": " << p.partitions.size()
                      << " partitions, largest " << biggest << " tuples\n";
            return 0;
        }

        if (*qry) {
            auto rel = spq::io::load_relation(q_rel);
            auto q = spq::spaql::parse(slurp(q_file));
            if (q_explain) std::cout << spq::spaql::render(spq::spaql::normalize(q)) << "\n";

            spq::partition::Partitioning parts;
            spq::workload::QueryRun cfg;
            cfg.method = q_method;
            cfg.rcl.m0 = q_m0;
            cfg.rcl.validation_size = q_val;
            cfg.rcl.epsilon = q_eps;
            cfg.rcl.delta = q_delta;
            cfg.rcl.ilp_time_limit_sec = q_tlim;
            cfg.sketch.p_max = q_pmax;
            cfg.sketch.gamma = q_gamma;
            cfg.sketch.delta_gamma = q_dgamma;
            cfg.sketch.delta_rho = q_drho;
            cfg.sketch.tau = q_tau;
            cfg.test_seed = q_seed;
            cfg.want_lp = !q_dump.empty();
            if (q_method == "sketchrefine") {
                if (q_parts.empty())
                    throw std::runtime_error("--method sketchrefine needs --partitions");
                parts = spq::io::load_partitioning(q_parts);
                if (parts.seed_tag != rel.seed)
                    throw std::runtime_error(
                        "partition metadata was built from a different relation seed");
                cfg.partitioning = &parts;
            }

            auto out = spq::workload::run_query(q, rel, cfg);
            if (!q_report.empty()) spq::io::write_report(out.report, out.package, rel, q_report);
            if (!q_trace.empty()) spq::io::write_trace(out.trace, q_trace);
            if (!q_dump.empty()) {
                std::ofstream f(q_dump);
                if (!f) throw std::runtime_error("cannot write " + q_dump);
                f << out.lp_text;
            }

            const auto& rep = out.report;
            std::cout << "method: " << rep.method << "\nstatus: " << rep.status
                      << (rep.certified ? " (certified)" : "") << "\n";
            if (!rep.note.empty()) std::cout << "note: " << rep.note << "\n";
            if (!rep.phase.empty()) std::cout << "phase: " << rep.phase << "\n";
            std::cout << "omega: " << rep.omega << "  omega_bar: " << rep.omega_bar
                      << "  lp_bound: " << rep.omega_lp << "  gap: " << rep.gap << "\n";
            std::cout << "scenarios: opt " << rep.m_opt << ", validation " << rep.m_validation
                      << "\nfeasible: validation " << (rep.feasible_validation ? "yes" : "no")
                      << ", fresh test " << (rep.feasible_test ? "yes" : "no") << "\n";
            if (out.package) {
                std::cout << "package (" << rep.package_size << " tuples, total "
                          << rep.package_total << "):\n";
                auto sorted = out.package->entries;
                std::sort(sorted.begin(), sorted.end());
                for (const auto& [id, x] : sorted) {
                    std::cout << "  id=" << id << " count=" << x;
                    for (const auto& [a, v] : rel.at(id).det) std::cout << ' ' << a << '=' << v;
                    std::cout << "\n";
                }
            }
            return out.exit_code;
        }

        if (*hard) {
            auto rel = spq::io::load_relation(h_rel);
            auto q = spq::spaql::parse(slurp(h_file));
            auto stats = spq::workload::derive_constraint_stats(q, rel);
            auto hr = spq::workload::hardness(q, stats);
            nlohmann::json j;
            if (std::isfinite(hr.h))
                j["h"] = hr.h;
            else
                j["h"] = "inf";
            j["s"] = hr.s;
            nlohmann::json cs = nlohmann::json::array();
            for (size_t i = 0; i < hr.constraint_index.size(); ++i)
                cs.push_back({{"constraint", hr.constraint_index[i]}, {"prob", hr.prob[i]}});
            j["constraints"] = cs;
            std::cout << j.dump(2) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
