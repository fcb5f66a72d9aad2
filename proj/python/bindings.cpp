#include "morl/artifacts.hpp"
#include "morl/config.hpp"
#include "morl/env_sim.hpp"
#include "morl/experiments.hpp"
#include "morl/extraction.hpp"
#include "morl/frank_wolfe.hpp"
#include "morl/regulator.hpp"
#include "morl/tabular.hpp"
#include "morl/testbed.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/operators.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace morl;

namespace {

ConstraintSpec make_spec(std::vector<double> alpha, std::vector<double> sign, double cap) {
    ConstraintSpec s = ConstraintSpec::upper_bounds(std::move(alpha), cap);
    if (!sign.empty()) s.sign = std::move(sign);
    s.validate();
    return s;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Constrained multi-objective RL: repeated Lagrangian game, warehouse simulator, tabular testbed";
    m.attr("__version__") = kVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);

    py::class_<ConstraintSpec>(m, "ConstraintSpec")
        .def(py::init(&make_spec), py::arg("alpha"), py::arg("sign") = std::vector<double>{}, py::arg("cap") = 1.0)
        .def_readwrite("alpha", &ConstraintSpec::alpha)
        .def_readwrite("sign", &ConstraintSpec::sign)
        .def_readwrite("cap", &ConstraintSpec::cap)
        .def_readwrite("labels", &ConstraintSpec::labels)
        .def("__len__", &ConstraintSpec::size);

    // regulator
    m.def("project_lambda", [](const std::vector<double>& v, const ConstraintSpec& s) { return project_lambda(v, s).lambda; },
          py::arg("v"), py::arg("spec"));
    m.def("ogd_step",
          [](const std::vector<double>& lam, const std::vector<double>& g, double eta, const ConstraintSpec& s) {
              return ogd_step(LagrangeWeights{lam}, g, eta, s).lambda;
          },
          py::arg("lam"), py::arg("slack"), py::arg("eta"), py::arg("spec"));
    m.def("compute_slacks",
          [](const std::vector<double>& v, const ConstraintSpec& s) { return compute_slacks(std::span<const double>(v), s); },
          py::arg("values"), py::arg("spec"));
    m.def("lambda_diameter", &lambda_diameter);
    m.def("theory_step_size", &theory_step_size, py::arg("diameter"), py::arg("grad_bound"), py::arg("rounds"));

    // tabular MDPs
    py::class_<TabularMDP>(m, "TabularMDP")
        .def_readonly("n_states", &TabularMDP::n_states)
        .def_readonly("n_actions", &TabularMDP::n_actions)
        .def_readonly("horizon", &TabularMDP::horizon)
        .def_readonly("rewards", &TabularMDP::rewards)
        .def_readonly("initial", &TabularMDP::initial)
        .def("to_text", [](const TabularMDP& mdp) {
            std::ostringstream s;
            write_tabular_mdp(s, mdp);
            return s.str();
        })
        .def_static("from_text", [](const std::string& text) {
            std::istringstream s(text);
            return read_tabular_mdp(s);
        });
    m.def("random_tabular_mdp", &random_tabular_mdp, py::arg("n_states"), py::arg("n_actions"), py::arg("horizon"),
          py::arg("n_objectives"), py::arg("seed"), py::arg("stationary") = true);

    py::class_<TabularPolicy>(m, "TabularPolicy")
        .def(py::init<std::size_t, std::size_t, std::size_t, std::vector<double>>())
        .def_static("uniform", &TabularPolicy::uniform)
        .def_static("deterministic", &TabularPolicy::deterministic)
        .def("prob", &TabularPolicy::prob)
        .def_property_readonly("probs", &TabularPolicy::probs)
        .def(py::self == py::self);

    py::class_<OccupancyMeasure>(m, "OccupancyMeasure")
        .def_readonly("total", &OccupancyMeasure::total)
        .def_readonly("per_step", &OccupancyMeasure::per_step)
        .def("blend", &OccupancyMeasure::blend);
    m.def("occupancy_of_policy", &occupancy_of_policy);
    m.def("exact_values", &exact_values);
    m.def("backward_induction", [](const TabularMDP& mdp, const RewardTable& r) {
        auto res = backward_induction(mdp, r);
        return py::make_tuple(res.policy, res.value);
    });
    m.def("estimate_values",
          [](const TabularMDP& mdp, const TabularPolicy& pi, std::size_t n, std::uint64_t seed) {
              const auto v = estimate_values(TabularEnv(mdp), PolicyMixture(std::make_shared<TabularPolicy>(pi)), n, seed);
              return py::make_tuple(v.v, v.std_error);
          },
          py::arg("mdp"), py::arg("policy"), py::arg("episodes"), py::arg("seed"));

    // reformulation, Frank-Wolfe, extraction
    m.def("positive_part_violation", [](const std::vector<double>& v, const ConstraintSpec& s) {
        const auto x = positive_part_violation(std::span<const double>(v), s);
        return py::make_tuple(x.g, x.g_plus);
    });
    m.def("reformulated_lagrangian", &reformulated_lagrangian, py::arg("v0"), py::arg("g_plus"), py::arg("lam"));
    m.def("required_samples",
          py::overload_cast<double, double, double, double, std::size_t>(&required_samples),
          py::arg("lambda_bar"), py::arg("horizon"), py::arg("epsilon"), py::arg("delta"), py::arg("rounds"));
    m.def("jensen_gap", [](double mix, const std::vector<double>& its) { return jensen_gap(mix, its); });

    py::class_<FwResult>(m, "FwResult")
        .def_readonly("value", &FwResult::value)
        .def_readonly("gap", &FwResult::gap)
        .def_readonly("iterations", &FwResult::iterations)
        .def_readonly("policy", &FwResult::policy)
        .def_readonly("occupancy", &FwResult::x);
    m.def("fw_best_response", &fw_best_response, py::arg("mdp"), py::arg("lam"), py::arg("spec"),
          py::arg("max_iterations") = 10000, py::arg("eps") = 1e-3);
    m.def("policy_from_occupancy", &policy_from_occupancy);

    py::class_<ExtractionCertificate>(m, "ExtractionCertificate")
        .def_readonly("l_star", &ExtractionCertificate::l_star)
        .def_readonly("nu", &ExtractionCertificate::nu)
        .def_readonly("epsilon", &ExtractionCertificate::epsilon)
        .def_readonly("jensen", &ExtractionCertificate::jensen)
        .def_readonly("t_star", &ExtractionCertificate::t_star)
        .def_readonly("l_tstar", &ExtractionCertificate::l_tstar)
        .def_readonly("lambda_bar", &ExtractionCertificate::lambda_bar)
        .def_readonly("samples", &ExtractionCertificate::samples)
        .def_readonly("holds", &ExtractionCertificate::holds)
        .def("rhs", &ExtractionCertificate::rhs);
    m.def("extraction_certificate",
          py::overload_cast<const TabularMDP&, const ConstraintSpec&, const std::vector<TabularPolicy>&, double,
                            std::size_t, std::uint64_t, std::size_t>(&extraction_certificate),
          py::arg("mdp"), py::arg("spec"), py::arg("iterates"), py::arg("lambda_bar"), py::arg("n"),
          py::arg("seed"), py::arg("jobs") = 1);

    // testbed
    py::class_<TabularGame>(m, "TabularGame")
        .def_readonly("name", &TabularGame::name)
        .def_readonly("mdp", &TabularGame::mdp)
        .def_readonly("spec", &TabularGame::spec)
        .def_readonly("lam", &TabularGame::lambda)
        .def_readonly("min_violation", &TabularGame::min_violation);
    m.def("load_tabular_game", &load_tabular_game);
    m.def("toy_game", &toy_game, py::arg("seed"), py::arg("cap") = 10.0);
    m.def("vertex_pair_oracle", &vertex_pair_oracle);
    m.def("left_right_cancellation", [](std::size_t H) {
        const auto r = left_right_cancellation(H);
        return py::make_tuple(r.mixture_signed_violation, r.member_positive_part);
    }, py::arg("horizon") = 4);

    py::class_<TabularGameRun>(m, "TabularGameRun")
        .def_readonly("policies", &TabularGameRun::policies)
        .def_readonly("values", &TabularGameRun::values)
        .def_readonly("lambdas", &TabularGameRun::lambdas)
        .def_readonly("lambda_bar", &TabularGameRun::lambda_bar)
        .def_readonly("scalar_lambda_bar", &TabularGameRun::scalar_lambda_bar)
        .def_property_readonly("gaps", [](const TabularGameRun& r) -> py::object {
            if (!r.gaps) return py::none();
            return py::make_tuple(r.gaps->upper, r.gaps->lower, r.gaps->value);
        });
    m.def("run_tabular_game",
          [](const TabularGame& g, const std::string& form, std::size_t rounds) {
              auto cfg = desk_preset();
              cfg.game.rounds = rounds;
              if (form != "lagrangian" && form != "reformulated") throw ConfigError("form must be lagrangian or reformulated");
              return run_tabular_game(g, form == "lagrangian" ? GameForm::Lagrangian : GameForm::Reformulated, cfg);
          },
          py::arg("game"), py::arg("form") = "lagrangian", py::arg("rounds") = 100);

    // warehouse simulator
    py::class_<sim::WarehouseEnv>(m, "WarehouseEnv")
        .def(py::init([](const std::string& config_text) {
                 const auto cfg = parse_config(config_text);
                 return sim::WarehouseEnv(cfg.sim, cfg.constraints());
             }),
             py::arg("config_text") = "")
        .def_property_readonly("horizon", &sim::WarehouseEnv::horizon)
        .def_property_readonly("action_count", &sim::WarehouseEnv::action_count)
        .def_property_readonly("constraints", &sim::WarehouseEnv::constraints)
        .def("reset", [](sim::WarehouseEnv& e, std::uint64_t seed) { return e.reset(seed).features; })
        .def("step", [](sim::WarehouseEnv& e, std::size_t a) {
            auto tr = e.step(a);
            return py::make_tuple(tr.next.features, tr.reward, tr.terminal);
        });

    // config
    m.def("default_config", [] { return desk_preset().serialize(); });
    m.def("full_scale_config", [] { return full_scale_preset().serialize(); });
    m.def("normalize_config", [](const std::string& text) { return parse_config(text).serialize(); });
    m.def("config_hash", [](const std::string& text) { return hex64(parse_config(text).hash()); });
}
