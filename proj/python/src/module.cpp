#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ablfield/abl.hpp"
#include "ablfield/cli.hpp"
#include "ablfield/nonrel.hpp"
#include "ablfield/relmodels.hpp"

namespace py = pybind11;
using namespace ablfield;

namespace {

std::vector<StateVector> states(const std::vector<CVector>& vs) {
  std::vector<StateVector> out;
  for (const CVector& v : vs) out.emplace_back(v);
  return out;
}

std::vector<LinearOperator> operators(const std::vector<CMatrix>& ms) {
  std::vector<LinearOperator> out;
  for (const CMatrix& m : ms) out.emplace_back(m);
  return out;
}

py::dict distribution(const ConditionalDistribution& d) {
  py::dict r;
  r["labels"] = d.labels;
  r["probabilities"] = d.probabilities;
  return r;
}

PrePostScenario scenario(const CVector& initial, const std::vector<CMatrix>& intermediate,
                         const std::vector<double>& labels, const CMatrix& final_projector,
                         const CMatrix& hamiltonian, double t_mid, double t_final) {
  return PrePostScenario{StateVector(initial), ProjectorFamily(operators(intermediate), labels),
                         LinearOperator(final_projector), LinearOperator(hamiltonian), t_mid, t_final};
}

py::array_t<double> field_array(const BeableField& f) {
  py::array_t<double> a({f.grid.t_steps, f.grid.x_steps});
  std::copy(f.values.begin(), f.values.end(), a.mutable_data());
  return a;
}

rel::NatureChoice parse_choice(const std::string& s) {
  if (s == "Cloud1") return rel::NatureChoice::cloud1;
  if (s == "Cloud2") return rel::NatureChoice::cloud2;
  throw ValidationError("choice must be 'Cloud1' or 'Cloud2'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ABL conditional probabilities and beable fields";

  auto base = py::register_exception<Error>(m, "AblfieldError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<CapacityError>(m, "CapacityError", base.ptr());
  py::register_exception<ImpossiblePostSelectionError>(m, "ImpossiblePostSelectionError", base.ptr());
  py::register_exception<ZeroProbabilityBranchError>(m, "ZeroProbabilityBranchError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def(
      "abl_basic",
      [](const CVector& a, const std::vector<CVector>& basis, const CVector& c) {
        const auto b = states(basis);
        return distribution(abl_basic(StateVector(a), b, StateVector(c)));
      },
      py::arg("a"), py::arg("basis"), py::arg("c"));

  m.def(
      "abl_projective",
      [](const CMatrix& pa, const std::vector<CMatrix>& family, const std::vector<double>& labels,
         const CMatrix& pc) {
        return distribution(abl_projective(LinearOperator(pa), ProjectorFamily(operators(family), labels),
                                           LinearOperator(pc)));
      },
      py::arg("initial_projector"), py::arg("family"), py::arg("labels"), py::arg("final_projector"));

  m.def(
      "abl_evolved",
      [](const CVector& initial, const std::vector<CMatrix>& family, const std::vector<double>& labels,
         const CMatrix& pc, const CMatrix& h, double t_mid, double t_final) {
        return distribution(abl_evolved(scenario(initial, family, labels, pc, h, t_mid, t_final)));
      },
      py::arg("initial"), py::arg("family"), py::arg("labels"), py::arg("final_projector"),
      py::arg("hamiltonian"), py::arg("t_mid"), py::arg("t_final"));

  m.def(
      "oracle_conditioned",
      [](const CVector& initial, const std::vector<CMatrix>& family, const std::vector<double>& labels,
         const CMatrix& pc, const CMatrix& h, double t_mid, double t_final) {
        const PrePostScenario s = scenario(initial, family, labels, pc, h, t_mid, t_final);
        const LinearOperator rest = LinearOperator::identity(s.initial.dim()) - s.final_projector;
        const ProjectorFamily finals({s.final_projector, rest}, {1.0, 0.0});
        return distribution(oracle_joint_distribution(s, finals).conditioned());
      },
      "Evolve, measure, collapse, evolve, post-select on the final projector.",
      py::arg("initial"), py::arg("family"), py::arg("labels"), py::arg("final_projector"),
      py::arg("hamiltonian"), py::arg("t_mid"), py::arg("t_final"));

  py::class_<rel::ToyModelConfig>(m, "ToyModel")
      .def(py::init([](int photons, double x1, double x2, double sigma1, double sigma2, Complex amp_a,
                       Complex amp_b, double mass, double t1, std::tuple<double, double, std::size_t> t_range,
                       std::tuple<double, double, std::size_t> x_range) {
             rel::ToyModelConfig c;
             c.photons = photons;
             c.x1 = x1;
             c.x2 = x2;
             c.sigma1 = sigma1;
             c.sigma2 = sigma2;
             c.amp_a = amp_a;
             c.amp_b = amp_b;
             c.mass = mass;
             c.t1 = t1;
             c.grid = GridSpec{std::get<0>(t_range), std::get<1>(t_range), std::get<2>(t_range),
                               std::get<0>(x_range), std::get<1>(x_range), std::get<2>(x_range)};
             c.validate();
             return c;
           }),
           py::arg("photons"), py::arg("x1"), py::arg("x2"), py::arg("sigma1"), py::arg("sigma2"),
           py::arg("amp_a"), py::arg("amp_b"), py::arg("mass"), py::arg("t1"), py::arg("t_range"),
           py::arg("x_range"))
      .def_property_readonly("delta_x", &rel::ToyModelConfig::delta_x)
      .def_property_readonly("t2", &rel::ToyModelConfig::t2)
      .def("in_region", [](const rel::ToyModelConfig& c, double t, double x) {
        return rel::in_region_of_indeterminacy(c, {t, x});
      })
      .def("roi_by_visibility", [](const rel::ToyModelConfig& c, double t, double x) {
        return rel::roi_by_visibility(c, {t, x});
      })
      .def("collapse_time_at", [](const rel::ToyModelConfig& c, double x) { return rel::collapse_time_at(c, x); })
      .def("sample_choice", [](const rel::ToyModelConfig& c, std::uint64_t seed) {
        return rel::to_string(rel::sample_nature_choice(c, seed));
      })
      .def("born_reduction_check", [](const rel::ToyModelConfig& c, double t, double x) {
        return distribution(rel::born_reduction_check(c, {t, x}));
      })
      .def(
          "field",
          [](const rel::ToyModelConfig& c, const std::string& choice, unsigned threads) {
            return field_array(rel::beable_field(c, parse_choice(choice), threads));
          },
          py::arg("choice"), py::arg("threads") = 0)
      .def("slice_mass", [](const rel::ToyModelConfig& c, const std::string& choice, double t) {
        return rel::slice_mass(c, parse_choice(choice), t);
      });

  m.def(
      "catastrophe",
      [](const std::vector<double>& masses, std::size_t sites, double hopping, double t_final,
         std::size_t t_steps, std::uint64_t seed, unsigned threads) {
        const nonrel::LatticeModel model =
            nonrel::engineered_catastrophe_model(masses, sites, hopping, t_final);
        const auto fin = nonrel::sample_final_configuration(model, nonrel::Scope::whole_system, seed);
        const nonrel::CatastropheResult r =
            nonrel::catastrophe_demo(model, nonrel::FinalCondition::occupation(model, fin), t_steps, threads);
        const std::vector<double> spectrum = nonrel::mass_spectrum(model, nonrel::Scope::whole_system);
        py::array_t<double> probs({r.grid.t_steps, r.grid.x_steps, spectrum.size()});
        auto p = probs.mutable_unchecked<3>();
        for (std::size_t ti = 0; ti < r.grid.t_steps; ++ti) {
          for (std::size_t x = 0; x < r.grid.x_steps; ++x) {
            for (std::size_t k = 0; k < spectrum.size(); ++k) {
              p(ti, x, k) = r.distributions[ti * r.grid.x_steps + x].probability_of(spectrum[k]);
            }
          }
        }
        py::dict out;
        out["masses"] = spectrum;
        out["final_configuration"] = fin;
        out["probabilities"] = probs;
        out["max_weight_spread"] = r.max_weight_spread;
        return out;
      },
      py::arg("masses"), py::arg("sites"), py::arg("hopping") = 1.0, py::arg("t_final") = 1.0,
      py::arg("t_steps") = 10, py::arg("seed") = 0, py::arg("threads") = 0);

  m.def(
      "run",
      [](const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::string> out,
         std::optional<std::string> format, std::optional<unsigned> threads) {
        cli::RunOptions o;
        o.seed = seed;
        o.out = out;
        o.threads = threads;
        if (format) {
          if (*format != "csv" && *format != "json") throw ValidationError("format must be csv or json");
          o.format = *format == "csv" ? cli::Format::csv : cli::Format::json;
        }
        std::ostringstream err;
        const int code = cli::run(config, o, err);
        return py::make_tuple(code, err.str());
      },
      "Run a scenario config; returns (exit code, error line).", py::arg("config"), py::arg("seed") = py::none(),
      py::arg("out") = py::none(), py::arg("format") = py::none(), py::arg("threads") = py::none());
}
