#include "molab/born_huang.hpp"
#include "molab/clamped_nuclei.hpp"
#include "molab/error.hpp"
#include "molab/lab.hpp"
#include "molab/nonadiabatic.hpp"
#include "molab/nuclear_motion.hpp"
#include "molab/spectrum_probe.hpp"
#include "molab/system_model.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace molab;

namespace {

ProbeMode probe_mode(const std::string &s) {
  if (s == "h_elec" || s == "H_ELEC") return ProbeMode::HElec;
  if (s == "full_internal" || s == "FULL_INTERNAL") return ProbeMode::FullInternal;
  throw InvalidInput("mode must be h_elec or full_internal");
}

ScanMode scan_mode(const std::string &s) {
  if (s == "molecular" || s == "MOLECULAR") return ScanMode::Molecular;
  if (s == "atomic" || s == "ATOMIC") return ScanMode::Atomic;
  throw InvalidInput("mode must be molecular or atomic");
}

std::optional<Parity> parity(const std::string &s) {
  if (s == "gerade") return Parity::Gerade;
  if (s == "ungerade") return Parity::Ungerade;
  if (s == "none" || s.empty()) return std::nullopt;
  throw InvalidInput("parity must be gerade, ungerade or none");
}

} // namespace

PYBIND11_MODULE(_molab, m) {
  m.doc() = "Clamped-nuclei, nuclear-motion and nonadiabatic solvers for few-body Coulomb systems";
  m.attr("__version__") = kArtifactVersion;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<SolverError>(m, "SolverError", base.ptr());
  py::register_exception<NonSelfAdjointRisk>(m, "NonSelfAdjointRisk", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.attr("INFINITE_MASS") = kInfiniteMass;

  py::class_<MolecularSystem>(m, "MolecularSystem")
      .def_property_readonly("nuclei",
                             [](const MolecularSystem &s) {
                               std::vector<std::pair<double, double>> out;
                               for (const auto &p : s.nuclei()) out.emplace_back(p.mass, p.charge);
                               return out;
                             })
      .def_property_readonly("electron_count", &MolecularSystem::electron_count)
      .def_property_readonly("reference_mass", &MolecularSystem::reference_mass)
      .def_property_readonly("total_nuclear_mass", &MolecularSystem::total_nuclear_mass)
      .def_property_readonly("total_mass", &MolecularSystem::total_mass)
      .def_property_readonly("homonuclear", &MolecularSystem::homonuclear)
      .def("with_nuclear_mass", &MolecularSystem::with_nuclear_mass);

  m.def("build_system", &build_system, py::arg("nuclei"), py::arg("electrons"),
        py::arg("reference_mass") = std::nullopt);
  m.def("kappa", [](const MolecularSystem &s) { return kappa(s).value; });
  m.def("nuclear_reduced_mass", &nuclear_reduced_mass);

  m.def(
      "solve_two_center",
      [](double r, double Z1, double Z2, double effective_mass, int n_states) {
        std::vector<double> e;
        for (const auto &s : solve_two_center(r, Z1, Z2, effective_mass, n_states).states) e.push_back(s.energy_total);
        return e;
      },
      py::arg("r"), py::arg("Z1") = 1.0, py::arg("Z2") = 1.0, py::arg("effective_mass") = 1.0,
      py::arg("n_states") = 1, "Total energies (electronic plus Z1 Z2 / r) of the lowest states.");

  py::class_<PotentialCurve>(m, "PotentialCurve")
      .def_readonly("r", &PotentialCurve::r)
      .def_readonly("energies", &PotentialCurve::energies)
      .def_readonly("threshold", &PotentialCurve::threshold)
      .def_readonly("labels", &PotentialCurve::labels)
      .def_readonly("V0", &PotentialCurve::V0)
      .def_readonly("r_min", &PotentialCurve::r_min)
      .def_readonly("has_minimum", &PotentialCurve::has_minimum)
      .def("csv", &PotentialCurve::csv)
      .def("sidecar_json", &PotentialCurve::sidecar_json);

  m.def(
      "potential_curve",
      [](const MolecularSystem &s, const std::vector<double> &r, int n_states) { return potential_curve(s, r, n_states); },
      py::arg("system"), py::arg("r_grid"), py::arg("n_states") = 1);
  m.def(
      "refine_minimum",
      [](const PotentialCurve &c, std::size_t state) {
        const auto m = refine_minimum(c, state);
        return std::make_pair(m.r_min, m.V0);
      },
      py::arg("curve"), py::arg("state") = 0, "(r_min, V0) on the interpolated curve.");

  m.def(
      "vibrational_levels",
      [](const PotentialCurve &c, double mu, int J, int n_levels, double r_lo, double r_hi, int points) {
        RadialGrid g;
        g.r_lo = r_lo;
        g.r_hi = r_hi;
        g.points = points;
        std::vector<double> e;
        for (const auto &l : solve_radial(c, mu, J, n_levels, g).levels) e.push_back(l.energy);
        return e;
      },
      py::arg("curve"), py::arg("mu"), py::arg("J") = 0, py::arg("n_levels") = 1, py::arg("r_lo") = 0.5,
      py::arg("r_hi") = 10.0, py::arg("points") = 4000);

  py::class_<CouplingMatrix>(m, "CouplingMatrix")
      .def_readonly("r", &CouplingMatrix::r)
      .def_readonly("channels", &CouplingMatrix::channels)
      .def_readonly("F", &CouplingMatrix::F)
      .def_readonly("G", &CouplingMatrix::G)
      .def_readonly("energies", &CouplingMatrix::energies)
      .def_readonly("labels", &CouplingMatrix::labels)
      .def("curves", &CouplingMatrix::curves)
      .def("csv", &CouplingMatrix::csv);

  m.def(
      "coupling_matrix",
      [](const MolecularSystem &s, const std::vector<double> &r, int channels, const std::string &p) {
        CouplingOptions o;
        o.manifold = parity(p);
        return coupling_matrix(s, r, channels, o);
      },
      py::arg("system"), py::arg("r_grid"), py::arg("channels") = 2, py::arg("parity") = "none");

  m.def(
      "solve_coupled",
      [](const CouplingMatrix &cm, double mu, int channels, int n_levels, bool couplings, double r_lo, double r_hi,
         int points) {
        RadialGrid g;
        g.r_lo = r_lo;
        g.r_hi = r_hi;
        g.points = points;
        return solve_coupled(cm.curves(), cm, mu, channels, n_levels, g, {couplings, false}).energies;
      },
      py::arg("couplings"), py::arg("mu"), py::arg("channels"), py::arg("n_levels") = 1, py::arg("with_couplings") = true,
      py::arg("r_lo"), py::arg("r_hi"), py::arg("points") = 1500);

  m.def(
      "solve_variational",
      [](const MolecularSystem &s, int terms, int candidates, int refine_sweeps, int states, std::uint64_t seed,
         int threads) {
        VariationalConfig c;
        c.terms = terms;
        c.candidates = candidates;
        c.refine_sweeps = refine_sweeps;
        c.states = states;
        c.seed = seed;
        c.threads = threads;
        py::gil_scoped_release release;
        return solve_variational(build_internal_hamiltonian(s).descriptor, c).json();
      },
      py::arg("system"), py::arg("terms") = 200, py::arg("candidates") = 64, py::arg("refine_sweeps") = 2,
      py::arg("states") = 1, py::arg("seed") = 42, py::arg("threads") = 1, "Result as JSON text.");

  m.def(
      "mass_scan",
      [](const MolecularSystem &s, const std::vector<double> &lambdas, const std::string &mode, int terms,
         int candidates, int refine_sweeps, std::uint64_t seed, int threads) {
        VariationalConfig c;
        c.terms = terms;
        c.candidates = candidates;
        c.refine_sweeps = refine_sweeps;
        c.seed = seed;
        c.threads = threads;
        py::gil_scoped_release release;
        const auto r = mass_scan(s, lambdas, scan_mode(mode), c);
        return std::make_pair(r.csv(), r.json());
      },
      py::arg("system"), py::arg("lambdas"), py::arg("mode") = "molecular", py::arg("terms") = 200,
      py::arg("candidates") = 64, py::arg("refine_sweeps") = 2, py::arg("seed") = 42, py::arg("threads") = 1,
      "(csv, json) texts.");

  m.def(
      "weyl_moments",
      [](const PotentialCurve &c, double b, int state, const std::vector<double> &sigmas) {
        const auto w = weyl_moments(c, b, state, sigmas);
        return std::make_pair(w.csv(), w.json());
      },
      py::arg("curve"), py::arg("b"), py::arg("state"), py::arg("sigmas"), "(csv, json) texts.");

  m.def(
      "collapse_probe",
      [](const MolecularSystem &s, const PotentialCurve &c, double b, const std::vector<double> &sigmas,
         const std::string &mode) {
        const auto t = collapse_probe(internal_hamiltonian(s).internal, c, b, sigmas, probe_mode(mode));
        return std::make_pair(t.csv(), t.json());
      },
      py::arg("system"), py::arg("curve"), py::arg("b"), py::arg("sigmas"), py::arg("mode"),
      "The system's masses decide the nuclear kinetic term; (csv, json) texts.");

  m.def("spectrum_cover", &spectrum_cover, py::arg("curve"), py::arg("E"));

  m.def(
      "kato_ratio_probe",
      [](const MolecularSystem &s, const Eigen::MatrixXd &centers, const Eigen::VectorXd &widths, int shrinking,
         const std::vector<double> &shrink_widths) {
        TrialFamily f{centers, widths, shrinking, shrink_widths};
        const auto t = kato_ratio_probe(internal_hamiltonian(s).internal, f);
        return std::make_pair(t.csv(), t.json());
      },
      py::arg("system"), py::arg("centers"), py::arg("widths"), py::arg("shrinking"), py::arg("shrink_widths"),
      "(csv, json) texts.");

  m.def("experiment_names", &experiment_names);
  m.def(
      "validate_config",
      [](const std::filesystem::path &p) { return validate_config_file(p); }, py::arg("path"));
  m.def(
      "run_config",
      [](const std::filesystem::path &p, const std::optional<std::filesystem::path> &out,
         std::optional<std::uint64_t> seed, std::optional<int> threads) {
        ExperimentConfig c;
        const auto diag = validate_config_file(p, &c);
        if (!diag.empty()) throw InvalidInput(diag.front());
        RunOverrides ov{seed, threads, out};
        if (seed) c.seed = *seed;
        if (threads) c.threads = *threads;
        const auto dir = resolve_output_dir(c, ov);
        py::gil_scoped_release release;
        const auto rep = run_experiment(c, dir);
        return std::make_tuple(rep.output_dir, rep.results_csv, rep.summary_json);
      },
      py::arg("path"), py::arg("out") = std::nullopt, py::arg("seed") = std::nullopt, py::arg("threads") = std::nullopt,
      "Runs a config or manifest; returns (output_dir, csv, summary json).");
}
