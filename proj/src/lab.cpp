#include "molab/lab.hpp"

#include "molab/born_huang.hpp"
#include "molab/clamped_nuclei.hpp"
#include "molab/error.hpp"
#include "molab/nonadiabatic.hpp"
#include "molab/nuclear_motion.hpp"
#include "molab/spectrum_probe.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <set>
#include <sstream>

namespace molab {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

enum class Kind { Real, Positive, Count, PositiveCount, Bool, Choice, List, Vec3, Text, Path, Nucleus };

struct KeySpec {
  std::string name;
  Kind kind;
  std::string fallback; // empty: no default
  std::vector<std::string> choices{};
  bool repeat = false;
};

const std::vector<std::string> kExperiments{"curve",  "levels",   "coupled", "nonadiabatic", "massscan",
                                            "weyl",   "collapse", "kato",    "cover"};

std::vector<KeySpec> common_keys() {
  return {{"experiment", Kind::Choice, "", kExperiments},
          {"system", Kind::Path, ""},
          {"nucleus", Kind::Nucleus, "", {}, true},
          {"electrons", Kind::Count, ""},
          {"reference_mass", Kind::Positive, ""},
          {"seed", Kind::Count, "42"},
          {"threads", Kind::PositiveCount, "1"},
          {"output", Kind::Text, ""},
          {"description", Kind::Text, ""}};
}

std::vector<KeySpec> curve_keys(const std::string &r_lo, const std::string &states) {
  return {{"r_lo", Kind::Positive, r_lo},
          {"r_hi", Kind::Positive, "10"},
          {"r_step", Kind::Positive, "0.1"},
          {"states", Kind::PositiveCount, states},
          {"basis_exponents", Kind::PositiveCount, "16"},
          {"d_shell", Kind::Bool, "false"}};
}

std::vector<KeySpec> variational_keys() {
  return {{"terms", Kind::PositiveCount, "200"},
          {"candidates", Kind::PositiveCount, "64"},
          {"refine_sweeps", Kind::Count, "2"}};
}

std::vector<KeySpec> experiment_keys(const std::string &e) {
  std::vector<KeySpec> k;
  auto add = [&k](std::vector<KeySpec> more) { k.insert(k.end(), more.begin(), more.end()); };
  if (e == "curve") add(curve_keys("0.5", "2"));
  if (e == "levels") {
    add(curve_keys("0.5", "1"));
    add({{"J", Kind::Count, "0"},
         {"levels", Kind::PositiveCount, "3"},
         {"radial_lo", Kind::Positive, "0.5"},
         {"radial_hi", Kind::Positive, "10"},
         {"radial_points", Kind::PositiveCount, "4000"}});
  }
  if (e == "coupled") {
    add(curve_keys("0.6", "3"));
    add({{"channels", Kind::PositiveCount, "2"},
         {"parity", Kind::Choice, "gerade", {"gerade", "ungerade", "none"}},
         {"levels", Kind::PositiveCount, "1"},
         {"radial_points", Kind::PositiveCount, "1500"}});
  }
  if (e == "nonadiabatic") {
    add(variational_keys());
    add({{"states", Kind::PositiveCount, "1"}, {"probe_mode", Kind::Bool, "false"}});
  }
  if (e == "massscan") {
    add(variational_keys());
    add({{"mode", Kind::Choice, "molecular", {"molecular", "atomic"}}, {"lambdas", Kind::List, "1,4,16,64,inf"}});
  }
  if (e == "weyl") {
    add(curve_keys("0.5", "1"));
    add({{"b", Kind::Text, "rmin"}, {"state", Kind::Count, "0"}, {"sigma_list", Kind::List, "0.1,0.05,0.025,0.0125,0.00625"}});
  }
  if (e == "collapse") {
    add(curve_keys("0.05", "1"));
    add({{"b", Kind::Text, "rmin"},
         {"sigma_grid", Kind::List, "log(0.001, 1, 31)"},
         {"mode", Kind::Choice, "h_elec", {"h_elec", "full_internal"}},
         {"diagonal_correction", Kind::Bool, "false"}});
  }
  if (e == "kato") {
    add({{"hamiltonian", Kind::Choice, "internal", {"internal", "h_elec"}},
         {"center", Kind::Vec3, "", {}, true},
         {"widths", Kind::List, ""},
         {"shrinking", Kind::Count, "0"},
         {"shrink_widths", Kind::List, "log(0.5, 0.005, 21)"}});
  }
  if (e == "cover") {
    add(curve_keys("0.5", "1"));
    add({{"energies", Kind::List, ""}, {"samples", Kind::Count, "20"}, {"span", Kind::Positive, "0.1"}});
  }
  return k;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(std::string s) {
  auto ns = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), ns));
  s.erase(std::find_if(s.rbegin(), s.rend(), ns).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

// "a, b, c" or "log(a, b, n)" with n points from a to b inclusive.
std::vector<double> parse_list(const std::string &value, const std::string &key) {
  const std::string v = trim(value);
  if (v.rfind("log(", 0) == 0 && v.back() == ')') {
    const auto parts = split(v.substr(4, v.size() - 5), ',');
    if (parts.size() != 3) throw InvalidInput(key + ": log(a, b, n) expects three arguments");
    const double a = parse_real(parts[0], key), b = parse_real(parts[1], key), n = parse_real(parts[2], key);
    if (!(a > 0 && b > 0) || n < 2 || n != std::floor(n)) throw InvalidInput(key + ": log(a, b, n) needs a, b > 0, n >= 2");
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(a * std::pow(b / a, i / (n - 1)));
    return out;
  }
  std::vector<double> out;
  for (const auto &p : split(v, ',')) out.push_back(parse_real(p, key));
  if (out.empty()) throw InvalidInput(key + ": empty list");
  return out;
}

bool parse_bool(const std::string &v, const std::string &key) {
  const auto l = lower(trim(v));
  if (l == "true" || l == "yes" || l == "1" || l == "on") return true;
  if (l == "false" || l == "no" || l == "0" || l == "off") return false;
  throw InvalidInput(key + ": expected true or false, got '" + v + "'");
}

long long parse_count(const std::string &v, const std::string &key) {
  const double x = parse_real(v, key);
  if (!(x >= 0) || x != std::floor(x) || x > 9.0e15) throw InvalidInput(key + " must be a non-negative integer");
  return static_cast<long long>(x);
}

void check_value(const KeySpec &spec, const std::string &value) {
  const std::string &key = spec.name;
  switch (spec.kind) {
  case Kind::Real:
    parse_real(value, key);
    break;
  case Kind::Positive:
    if (!(parse_real(value, key) > 0)) throw InvalidInput(key + " must be positive");
    break;
  case Kind::Count:
    parse_count(value, key);
    break;
  case Kind::PositiveCount:
    if (parse_count(value, key) < 1) throw InvalidInput(key + " must be at least 1");
    break;
  case Kind::Bool:
    parse_bool(value, key);
    break;
  case Kind::Choice:
    if (std::find(spec.choices.begin(), spec.choices.end(), lower(value)) == spec.choices.end()) {
      std::string allowed;
      for (const auto &c : spec.choices) allowed += (allowed.empty() ? "" : ", ") + c;
      throw InvalidInput("unknown " + key + " '" + value + "'; allowed: " + allowed);
    }
    break;
  case Kind::List:
    parse_list(value, key);
    break;
  case Kind::Vec3:
    if (parse_list(value, key).size() != 3) throw InvalidInput(key + " expects x,y,z");
    break;
  case Kind::Nucleus: {
    const auto p = split(value, ',');
    if (p.size() != 2) throw InvalidInput("nucleus expects mass,charge");
    parse_real(p[0], "nucleus mass");
    parse_real(p[1], "nucleus charge");
    break;
  }
  case Kind::Text:
  case Kind::Path:
    if (value.empty()) throw InvalidInput(key + " must not be empty");
    break;
  }
}

bool strictly_monotone(const std::vector<double> &v, bool descending) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (descending ? !(v[i] < v[i - 1]) : !(v[i] > v[i - 1])) return false;
  return true;
}

// Typed access with schema defaults.
class Params {
public:
  Params(const ExperimentConfig &c) : config_(c) {
    for (const auto &s : common_keys()) specs_[s.name] = s;
    for (const auto &s : experiment_keys(c.experiment)) specs_[s.name] = s;
  }
  std::string str(const std::string &key) const {
    if (auto v = config_.get(key)) return *v;
    return specs_.at(key).fallback;
  }
  double real(const std::string &key) const { return parse_real(str(key), key); }
  int count(const std::string &key) const { return static_cast<int>(parse_count(str(key), key)); }
  bool flag(const std::string &key) const { return parse_bool(str(key), key); }
  std::vector<double> list(const std::string &key) const { return parse_list(str(key), key); }
  bool has(const std::string &key) const { return config_.get(key).has_value() || !specs_.at(key).fallback.empty(); }

private:
  const ExperimentConfig &config_;
  std::map<std::string, KeySpec> specs_;
};

std::vector<double> radial_grid(const Params &p) {
  const double lo = p.real("r_lo"), hi = p.real("r_hi"), step = p.real("r_step");
  if (!(hi > lo)) throw InvalidInput("r_hi must exceed r_lo");
  const double n = std::floor((hi - lo) / step + 1e-9);
  if (n < 4 || n > 20000) throw InvalidInput("the r grid needs between 5 and 20001 points");
  std::vector<double> r;
  for (int i = 0; i <= n; ++i) r.push_back(lo + i * step);
  return r;
}

BasisConfig basis_config(const Params &p) {
  BasisConfig b;
  b.exponents = p.count("basis_exponents");
  b.d_shell = p.flag("d_shell");
  return b;
}

MolecularSystem clamped_copy(const MolecularSystem &s) {
  std::vector<std::pair<double, double>> nuclei;
  for (std::size_t g = 0; g < s.nuclear_count(); ++g) nuclei.emplace_back(kInfiniteMass, s.nucleus(g).charge);
  return build_system(nuclei, s.electron_count());
}

PotentialCurve compute_curve(const MolecularSystem &system, const Params &p) {
  return potential_curve(clamped_copy(system), radial_grid(p), p.count("states"), basis_config(p));
}

double packet_centre(const Params &p, const PotentialCurve &curve) {
  const std::string b = lower(trim(p.str("b")));
  if (b == "rmin") return refine_minimum(curve, 0).r_min;
  return parse_real(b, "b");
}

VariationalConfig variational_config(const Params &p, const ExperimentConfig &c) {
  VariationalConfig v;
  v.terms = p.count("terms");
  v.candidates = p.count("candidates");
  v.refine_sweeps = p.count("refine_sweeps");
  v.seed = c.seed;
  v.threads = c.threads;
  return v;
}

json parse_json(const std::string &s) { return json::parse(s); }

struct Outcome {
  std::string csv;
  json summary;
  std::map<std::string, std::string> extra;
};

Outcome run_curve(const ExperimentConfig &c, const Params &p) {
  const auto curve = compute_curve(c.system(), p);
  Outcome o{curve.csv(), parse_json(curve.sidecar_json()), {}};
  bool below = true;
  for (std::size_t k = 0; k < curve.energies.size(); ++k)
    for (std::size_t i = 0; i < curve.r.size(); ++i)
      below = below && !(curve.energies[k][i] >= curve.threshold[i]);
  o.summary["below_threshold"] = below;
  return o;
}

Outcome run_levels(const ExperimentConfig &c, const Params &p) {
  const auto system = c.system();
  const auto curve = compute_curve(system, p);
  const double mu = nuclear_reduced_mass(system);
  if (!std::isfinite(mu)) throw InvalidInput("levels need finite nuclear masses");
  RadialGrid g;
  g.r_lo = p.real("radial_lo");
  g.r_hi = p.real("radial_hi");
  g.points = p.count("radial_points");
  const auto sol = solve_radial(curve, mu, p.count("J"), p.count("levels"), g);
  Outcome o{levels_csv(sol.levels), json::object(), {{"curve.csv", curve.csv()}}};
  o.summary["mu"] = mu;
  o.summary["dissociation"] = sol.dissociation;
  o.summary["max_numerov_deviation"] = sol.max_numerov_deviation;
  o.summary["diagnostics"] = sol.diagnostics;
  if (curve.has_minimum) o.summary["kappa_expansion"] = parse_json(kappa_expansion(curve, system, g).json());
  return o;
}

Outcome run_coupled(const ExperimentConfig &c, const Params &p) {
  const auto system = c.system();
  const double mu = nuclear_reduced_mass(system);
  if (!std::isfinite(mu)) throw InvalidInput("coupled channels need finite nuclear masses");
  const auto grid = radial_grid(p);
  CouplingOptions opt;
  opt.basis = basis_config(p);
  const auto parity = lower(p.str("parity"));
  if (parity == "gerade") opt.manifold = Parity::Gerade;
  if (parity == "ungerade") opt.manifold = Parity::Ungerade;
  const int C = p.count("channels");
  const auto cm = coupling_matrix(system, grid, std::max(C, p.count("states")), opt);
  const auto curves = cm.curves();
  RadialGrid g;
  g.r_lo = grid.front();
  g.r_hi = grid.back();
  g.points = p.count("radial_points");
  const int levels = p.count("levels");
  CsvTable t({"channels", "couplings", "level", "energy"});
  json energies = json::object();
  auto record = [&](int n, bool coupled) {
    const auto s = solve_coupled(curves, cm, mu, n, levels, g, {coupled, false});
    for (int k = 0; k < levels && k < static_cast<int>(s.energies.size()); ++k)
      t.add_row(std::vector<std::string>{std::to_string(n), coupled ? "on" : "off", std::to_string(k),
                                         format_number(s.energies[k])});
    energies[std::to_string(n) + (coupled ? "" : "_uncoupled")] = s.energies;
  };
  record(1, false);
  for (int n = 1; n <= C; ++n) record(n, true);
  Outcome o{t.str(), json::object(), {{"couplings.csv", cm.csv()}}};
  o.summary["labels"] = cm.labels;
  o.summary["energies"] = energies;
  o.summary["min_neighbour_overlap"] = cm.min_neighbour_overlap;
  return o;
}

Outcome run_nonadiabatic(const ExperimentConfig &c, const Params &p) {
  const auto h = build_internal_hamiltonian(c.system());
  auto cfg = variational_config(p, c);
  cfg.states = p.count("states");
  cfg.probe_mode = p.flag("probe_mode");
  const auto r = solve_variational(h.descriptor, cfg);
  CsvTable t({"terms", "energy", "virial_ratio"});
  for (std::size_t i = 0; i < r.history.size(); ++i)
    t.add_row(std::vector<double>{double(i + 1), r.history[i], i < r.virial_history.size() ? r.virial_history[i] : NAN});
  return {t.str(), parse_json(r.json()), {{"basis.json", r.basis.json()}}};
}

Outcome run_massscan(const ExperimentConfig &c, const Params &p) {
  const auto mode = lower(p.str("mode")) == "atomic" ? ScanMode::Atomic : ScanMode::Molecular;
  const auto report = mass_scan(c.system(), p.list("lambdas"), mode, variational_config(p, c));
  return {report.csv(), parse_json(report.json()), {}};
}

Outcome run_weyl(const ExperimentConfig &c, const Params &p) {
  const auto curve = compute_curve(c.system(), p);
  const auto w = weyl_moments(curve, packet_centre(p, curve), p.count("state"), p.list("sigma_list"));
  return {w.csv(), parse_json(w.json()), {{"curve.csv", curve.csv()}}};
}

Outcome run_collapse(const ExperimentConfig &c, const Params &p) {
  const auto system = c.system();
  const auto curve = compute_curve(system, p);
  const bool full = lower(p.str("mode")) == "full_internal";
  const auto descriptor = internal_hamiltonian(full ? system : clamped_copy(system)).internal;
  std::optional<DiagonalCorrection> dc;
  if (full && p.flag("diagonal_correction")) dc = diagonal_correction(system, radial_grid(p), true);
  const auto t = collapse_probe(descriptor, curve, packet_centre(p, curve), p.list("sigma_grid"),
                                full ? ProbeMode::FullInternal : ProbeMode::HElec, dc ? &*dc : nullptr);
  return {t.csv(), parse_json(t.json()), {{"curve.csv", curve.csv()}}};
}

Outcome run_kato(const ExperimentConfig &c, const Params &p) {
  const auto system = c.system();
  const bool helec = lower(p.str("hamiltonian")) == "h_elec";
  const auto d = internal_hamiltonian(helec ? clamped_copy(system) : system).internal;
  TrialFamily f;
  std::vector<std::vector<double>> centers;
  for (const auto &e : c.entries)
    if (e.key == "center") centers.push_back(parse_list(e.value, "center"));
  const auto widths = p.list("widths");
  if (static_cast<int>(centers.size()) != d.coordinate_count || static_cast<int>(widths.size()) != d.coordinate_count)
    throw InvalidInput("kato needs one center line and one width per coordinate (" +
                       std::to_string(d.coordinate_count) + ")");
  f.centers.resize(d.coordinate_count, 3);
  f.widths.resize(d.coordinate_count);
  for (int i = 0; i < d.coordinate_count; ++i) {
    for (int k = 0; k < 3; ++k) f.centers(i, k) = centers[i][k];
    f.widths(i) = widths[i];
  }
  f.shrinking = p.count("shrinking");
  f.shrink_widths = p.list("shrink_widths");
  const auto table = kato_ratio_probe(d, f);
  auto summary = parse_json(table.json());
  summary["coordinate_labels"] = d.coordinate_labels;
  return {table.csv(), summary, {}};
}

Outcome run_cover(const ExperimentConfig &c, const Params &p) {
  const auto curve = compute_curve(c.system(), p);
  const auto m = refine_minimum(curve, 0);
  std::vector<std::pair<double, std::string>> energies;
  if (c.get("energies"))
    for (double e : p.list("energies")) energies.emplace_back(e, "given");
  std::mt19937_64 rng(c.seed);
  const double span = p.real("span");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int samples = p.count("samples");
  for (int i = 0; i < samples; ++i) energies.emplace_back(m.V0 + span * unit(rng), "above");
  // strictly below V0: the draw from [0, 1) is mapped onto (V0 - span, V0)
  for (int i = 0; i < samples; ++i) energies.emplace_back(m.V0 - span * (1.0 - unit(rng)), "below");
  CsvTable t({"E", "region", "root_count", "root_1", "root_2"});
  int above_hit = 0, below_empty = 0, n_above = 0, n_below = 0;
  for (const auto &[E, region] : energies) {
    const auto roots = spectrum_cover(curve, E);
    t.add_row(std::vector<std::string>{format_number(E), region, std::to_string(roots.size()),
                                       format_number(roots.size() > 0 ? roots[0] : NAN),
                                       format_number(roots.size() > 1 ? roots[1] : NAN)});
    if (region == "above") n_above++, above_hit += !roots.empty();
    if (region == "below") n_below++, below_empty += roots.empty();
  }
  json s;
  s["V0"] = m.V0;
  s["rMin"] = m.r_min;
  s["above_nonempty"] = above_hit;
  s["above_samples"] = n_above;
  s["below_empty"] = below_empty;
  s["below_samples"] = n_below;
  return {t.str(), s, {}};
}

Outcome dispatch(const ExperimentConfig &c) {
  const Params p(c);
  const auto &e = c.experiment;
  if (e == "curve") return run_curve(c, p);
  if (e == "levels") return run_levels(c, p);
  if (e == "coupled") return run_coupled(c, p);
  if (e == "nonadiabatic") return run_nonadiabatic(c, p);
  if (e == "massscan") return run_massscan(c, p);
  if (e == "weyl") return run_weyl(c, p);
  if (e == "collapse") return run_collapse(c, p);
  if (e == "kato") return run_kato(c, p);
  if (e == "cover") return run_cover(c, p);
  throw InvalidInput("unknown experiment '" + e + "'");
}

} // namespace

const std::vector<std::string> &experiment_names() { return kExperiments; }

std::optional<std::string> ExperimentConfig::get(const std::string &key) const {
  std::optional<std::string> v;
  for (const auto &e : entries)
    if (e.key == key) v = e.value;
  return v;
}

MolecularSystem ExperimentConfig::system() const {
  std::string text;
  for (const auto &e : entries)
    if (e.key == "nucleus" || e.key == "electrons" || e.key == "reference_mass") text += e.key + " = " + e.value + "\n";
  return parse_system(text);
}

std::string ExperimentConfig::text() const {
  std::string out = "experiment = " + experiment + "\n";
  for (const auto &e : entries)
    if (e.key != "experiment") out += e.key + " = " + e.value + "\n";
  out += "seed = " + std::to_string(seed) + "\n";
  out += "threads = " + std::to_string(threads) + "\n";
  if (output) out += "output = " + *output + "\n";
  return out;
}

std::vector<std::string> validate_config_text(const std::string &text, const fs::path &base_dir,
                                              ExperimentConfig *parsed) {
  std::vector<std::string> diag;
  std::vector<KeyValueLine> lines;
  try {
    lines = parse_key_values(text);
  } catch (const InvalidInput &e) {
    return {e.what()};
  }
  ExperimentConfig c;
  for (const auto &l : lines)
    if (l.key == "experiment") c.experiment = lower(l.value);
  if (c.experiment.empty()) return {"missing required key 'experiment'"};
  if (std::find(kExperiments.begin(), kExperiments.end(), c.experiment) == kExperiments.end()) {
    std::string allowed;
    for (const auto &e : kExperiments) allowed += (allowed.empty() ? "" : ", ") + e;
    return {"unknown experiment '" + c.experiment + "'; allowed: " + allowed};
  }

  std::map<std::string, KeySpec> specs;
  for (const auto &s : common_keys()) specs[s.name] = s;
  for (const auto &s : experiment_keys(c.experiment)) specs[s.name] = s;

  std::set<std::string> seen;
  std::vector<KeyValueLine> system_lines;
  for (const auto &l : lines) {
    const auto it = specs.find(l.key);
    const std::string where = "line " + std::to_string(l.line) + ": ";
    if (it == specs.end()) {
      diag.push_back(where + "unknown key '" + l.key + "' for experiment '" + c.experiment + "'");
      continue;
    }
    if (!it->second.repeat && !seen.insert(l.key).second) diag.push_back(where + "duplicate key '" + l.key + "'");
    try {
      check_value(it->second, l.value);
    } catch (const InvalidInput &e) {
      diag.push_back(where + e.what());
      continue;
    }
    if (l.key == "seed") c.seed = static_cast<std::uint64_t>(parse_count(l.value, "seed"));
    else if (l.key == "threads") c.threads = static_cast<int>(parse_count(l.value, "threads"));
    else if (l.key == "output") c.output = l.value;
    else if (l.key == "system") {
      fs::path path = l.value;
      if (path.is_relative()) path = base_dir / path;
      try {
        for (auto kv : parse_key_values(read_text_file(path)))
          if (kv.key == "nucleus" || kv.key == "electrons" || kv.key == "reference_mass") system_lines.push_back(kv);
      } catch (const Error &e) {
        diag.push_back(where + "system file: " + e.what());
      }
    } else if (l.key == "nucleus" || l.key == "electrons" || l.key == "reference_mass")
      system_lines.push_back(l);
    else if (l.key != "experiment")
      c.entries.push_back(l);
  }
  if (!seen.count("system")) {
    bool has_nucleus = false;
    for (const auto &l : lines) has_nucleus = has_nucleus || l.key == "nucleus";
    if (!seen.count("electrons")) diag.push_back("missing required key 'electrons'");
    if (!has_nucleus) diag.push_back("missing required key 'nucleus'");
  }
  c.entries.insert(c.entries.begin(), system_lines.begin(), system_lines.end());
  if (!diag.empty()) return diag;

  try {
    (void)c.system();
  } catch (const Error &e) {
    diag.push_back(std::string("system: ") + e.what());
    return diag;
  }

  // cross-key checks
  const Params p(c);
  try {
    if (specs.count("r_step")) radial_grid(p);
    if (c.experiment == "weyl" && !strictly_monotone(p.list("sigma_list"), true))
      diag.push_back("sigmaList must be descending");
    if (c.experiment == "collapse" && !strictly_monotone(p.list("sigma_grid"), false))
      diag.push_back("sigmaGrid must be ascending");
    if (c.experiment == "kato") {
      if (!strictly_monotone(p.list("shrink_widths"), true)) diag.push_back("shrink_widths must be descending");
      if (!c.get("widths")) diag.push_back("missing required key 'widths'");
    }
    if (c.experiment == "massscan" && !strictly_monotone(p.list("lambdas"), false))
      diag.push_back("lambdas must be ascending");
    if ((c.experiment == "weyl" || c.experiment == "collapse") && lower(p.str("b")) != "rmin" &&
        !(parse_real(p.str("b"), "b") > 0))
      diag.push_back("b must be positive or 'rmin'");
  } catch (const InvalidInput &e) {
    diag.push_back(e.what());
  }
  if (diag.empty() && parsed) *parsed = c;
  return diag;
}

std::vector<std::string> validate_config_file(const fs::path &path, ExperimentConfig *parsed) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError &e) {
    return {std::string("fatal: ") + e.what()};
  }
  if (path.extension() == ".json") {
    try {
      const auto j = json::parse(text);
      text = j.at("config_text").get<std::string>();
    } catch (const std::exception &e) {
      return {std::string("fatal: not a run manifest: ") + e.what()};
    }
  }
  auto diag = validate_config_text(text, path.parent_path(), parsed);
  if (diag.empty() && parsed) parsed->source = path;
  return diag;
}

fs::path resolve_output_dir(const ExperimentConfig &c, const RunOverrides &ov) {
  if (ov.out) return *ov.out;
  const char *env = std::getenv("LAB_OUT");
  const fs::path root = env && *env ? fs::path(env) : fs::path("lab_out");
  if (c.output) {
    const fs::path o = *c.output;
    return o.is_absolute() ? o : root / o;
  }
  std::string stem = c.source.empty() ? c.experiment : c.source.stem().string();
  if (stem == "manifest") stem = c.experiment;
  return root / stem;
}

ExperimentReport run_experiment(const ExperimentConfig &config, const fs::path &output_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o = dispatch(config);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ExperimentReport rep;
  rep.experiment = config.experiment;
  rep.results_csv = o.csv;
  rep.summary_json = o.summary.dump(2) + "\n";
  rep.extra_files = o.extra;
  rep.wall_time = wall;
  rep.output_dir = output_dir;

  write_text_file(output_dir / "results.csv", rep.results_csv);
  write_text_file(output_dir / "summary.json", rep.summary_json);
  for (const auto &[name, body] : rep.extra_files) write_text_file(output_dir / name, body);

  json m;
  m["artifact"] = "molab";
  m["version"] = kArtifactVersion;
  m["experiment"] = config.experiment;
  m["seed"] = config.seed;
  m["threads"] = config.threads;
  m["wall_time_s"] = wall;
  json cfg = json::array();
  for (const auto &e : config.entries) cfg.push_back({e.key, e.value});
  m["config"] = cfg;
  m["config_text"] = config.text();
  const auto sys = config.system();
  json nuclei = json::array();
  for (std::size_t g = 0; g < sys.nuclear_count(); ++g)
    nuclei.push_back({{"mass", format_number(sys.nucleus(g).mass)}, {"charge", sys.nucleus(g).charge}});
  m["system"] = {{"nuclei", nuclei}, {"electrons", sys.electron_count()}, {"reference_mass", format_number(sys.reference_mass())}};
  m["summary"] = o.summary;
  json files = json::array({"results.csv", "summary.json"});
  for (const auto &kv : rep.extra_files) files.push_back(kv.first);
  m["files"] = files;
  write_text_file(output_dir / "manifest.json", m.dump(2) + "\n");
  return rep;
}

} // namespace molab
