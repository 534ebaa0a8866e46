// Python bindings: relation generation/persistence, partitioning, query
// execution and the SAA risk estimators.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "spq/io.hpp"
#include "spq/partition.hpp"
#include "spq/relation.hpp"
#include "spq/risk.hpp"
#include "spq/spaql.hpp"
#include "spq/workload.hpp"

namespace py = pybind11;
using namespace spq;

namespace {

py::object json_loads(const std::string& s) {
    return py::module_::import("json").attr("loads")(s);
}

spaql::QuerySpec bound_query(const std::string& text, const StochasticRelation& rel) {
    auto q = spaql::parse(text);
    spaql::bind(q, rel);
    return spaql::normalize(q);
}

}  // namespace

PYBIND11_MODULE(spq, m) {
    m.doc() = "stochastic package queries: risk-constrained package selection over "
              "scenario-sampled relations";

    py::class_<StochasticRelation>(m, "Relation")
        .def_property_readonly("name", [](const StochasticRelation& r) { return r.name; })
        .def_property_readonly("seed", [](const StochasticRelation& r) { return r.seed; })
        .def_property_readonly("det_attrs", [](const StochasticRelation& r) { return r.det_attrs; })
        .def_property_readonly("stoch_attrs",
                               [](const StochasticRelation& r) { return r.stoch_attrs; })
        .def("__len__", [](const StochasticRelation& r) { return r.tuples.size(); })
        .def("save", [](const StochasticRelation& r, const std::filesystem::path& dir) {
            io::save_relation(r, dir);
        })
        .def("__repr__", [](const StochasticRelation& r) {
            return "<Relation " + r.name + ", " + std::to_string(r.tuples.size()) + " tuples>";
        });

    m.def("gen_portfolio", &workload::gen_portfolio, py::arg("companies"),
          py::arg("half_day_steps"), py::arg("seed"),
          "GBM stock relation: det Price, stochastic Gain over half-day horizons");
    m.def("gen_tpch_like", &workload::gen_tpch_like, py::arg("n"), py::arg("seed"),
          "lineitem-style relation: det Tax, stochastic Price and Quantity");
    m.def("load_relation",
          [](const std::filesystem::path& dir) { return io::load_relation(dir); }, py::arg("dir"));

    py::class_<partition::Partitioning>(m, "Partitioning")
        .def_property_readonly("sizes",
                               [](const partition::Partitioning& p) {
                                   std::vector<size_t> out;
                                   for (const auto& m_ : p.partitions) out.push_back(m_.size());
                                   return out;
                               })
        .def_property_readonly("median_rho",
                               [](const partition::Partitioning& p) { return p.median_rho; })
        .def("save", [](const partition::Partitioning& p, const std::filesystem::path& path) {
            io::save_partitioning(p, path);
        })
        .def("__repr__", [](const partition::Partitioning& p) {
            return "<Partitioning, " + std::to_string(p.partitions.size()) + " partitions>";
        });

    m.def(
        "make_partitioning",
        [](const StochasticRelation& rel, size_t tau, const std::map<std::string, double>& diameters,
           size_t offline_scenarios, uint64_t seed) {
            partition::PartitionConfig cfg;
            cfg.tau = tau;
            cfg.diameters = diameters;
            cfg.offline_scenarios = offline_scenarios;
            cfg.seed = seed;
            auto p = partition::dist_partition(rel, cfg);
            partition::build_representatives(p, rel);
            return p;
        },
        py::arg("relation"), py::arg("tau") = 2000,
        py::arg("diameters") = std::map<std::string, double>{}, py::arg("offline_scenarios") = 200,
        py::arg("seed") = 0, "diameter-bounded partitioning with representatives");
    m.def("load_partitioning",
          [](const std::filesystem::path& path) { return io::load_partitioning(path); },
          py::arg("path"));

    m.def("canonical", [](const std::string& text) {
        return spaql::render(spaql::normalize(spaql::parse(text)));
    }, py::arg("query"), "canonical rendering of a query (lower-tail risk forms)");

    m.def(
        "hardness",
        [](const std::string& text, const StochasticRelation& rel) {
            auto q = bound_query(text, rel);
            auto stats = workload::derive_constraint_stats(q, rel);
            auto rep = workload::hardness(q, stats);
            py::dict out;
            out["h"] = rep.h;
            out["s"] = rep.s;
            py::list probs;
            for (size_t i = 0; i < rep.prob.size(); ++i) {
                py::dict row;
                row["constraint"] = rep.constraint_index[i];
                row["prob"] = rep.prob[i];
                probs.append(row);
            }
            out["constraints"] = probs;
            return out;
        },
        py::arg("query"), py::arg("relation"),
        "negative log-probability that a random package satisfies each constraint");

    m.def(
        "run_query",
        [](const std::string& text, const StochasticRelation& rel, const std::string& method,
           const partition::Partitioning* partitioning, double epsilon, double delta, size_t m0,
           size_t validation, uint64_t test_seed) {
            auto q = bound_query(text, rel);
            workload::QueryRun cfg;
            cfg.method = method;
            cfg.rcl.epsilon = epsilon;
            cfg.rcl.delta = delta;
            cfg.rcl.m0 = m0;
            cfg.rcl.validation_size = validation;
            cfg.sketch.rcl = cfg.rcl;
            cfg.partitioning = partitioning;
            cfg.test_seed = test_seed;
            auto out = workload::run_query(q, rel, cfg);
            py::dict d = py::cast<py::dict>(json_loads(io::report_json(out.report, out.package, rel)));
            d["exit_code"] = out.exit_code;
            return d;
        },
        py::arg("query"), py::arg("relation"), py::arg("method") = "rcl",
        py::arg("partitioning") = nullptr, py::arg("epsilon") = 0.05, py::arg("delta") = 1e-2,
        py::arg("m0") = 100, py::arg("validation") = 10000, py::arg("test_seed") = 0,
        "solve a query and return the run report (package included when solved)");

    m.def(
        "estimate_var",
        [](double alpha, const std::vector<double>& xs) { return risk::estimate_var(alpha, xs); },
        py::arg("alpha"), py::arg("samples"), "empirical alpha-quantile");
    m.def(
        "estimate_cvar",
        [](double alpha, const std::vector<double>& xs, const std::string& tail) {
            return risk::estimate_cvar(alpha, xs,
                                       tail == "upper" ? risk::Tail::Upper : risk::Tail::Lower);
        },
        py::arg("alpha"), py::arg("samples"), py::arg("tail") = "lower",
        "SAA conditional value-at-risk");
    m.def(
        "mad",
        [](const std::vector<double>& xs, const std::vector<double>& ys) {
            return risk::mad(xs, ys);
        },
        py::arg("xs"), py::arg("ys"), "mean absolute distance of paired samples");
}
