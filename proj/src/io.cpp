#include "molab/io.hpp"

#include "molab/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace molab {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw InvalidInput("CSV header must not be empty");
}

void CsvTable::add_row(const std::vector<double> &values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  add_row(cells);
}

void CsvTable::add_row(const std::vector<std::string> &cells) {
  if (cells.size() != header_.size()) throw InvalidInput("CSV row width does not match header");
  rows_.push_back(cells);
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto &r : rows_) line(r);
  return out;
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace {
std::string trim(std::string s) {
  auto ns = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), ns));
  s.erase(std::find_if(s.rbegin(), s.rend(), ns).base(), s.end());
  return s;
}
} // namespace

std::vector<KeyValueLine> parse_key_values(const std::string &text) {
  std::vector<KeyValueLine> out;
  std::istringstream in(text);
  std::string raw;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("line " + std::to_string(n) + ": expected key = value");
    KeyValueLine kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), n};
    if (kv.key.empty()) throw InvalidInput("line " + std::to_string(n) + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

double parse_real(const std::string &text, const std::string &what) {
  std::string t = trim(text);
  std::string lower = t;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "inf" || lower == "infinite" || lower == "infinity") return kInfiniteMass;
  try {
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception &) {
    throw InvalidInput(what + ": not a number: '" + t + "'");
  }
}

MolecularSystem parse_system(const std::string &text) {
  std::vector<std::pair<double, double>> nuclei;
  std::optional<int> electrons;
  std::optional<double> m0;
  for (const auto &kv : parse_key_values(text)) {
    if (kv.key == "nucleus") {
      const auto comma = kv.value.find(',');
      if (comma == std::string::npos) throw InvalidInput("nucleus expects mass,charge");
      nuclei.emplace_back(parse_real(kv.value.substr(0, comma), "nucleus mass"),
                          parse_real(kv.value.substr(comma + 1), "nucleus charge"));
    } else if (kv.key == "electrons") {
      const double v = parse_real(kv.value, "electrons");
      if (v < 0 || v != std::floor(v)) throw InvalidInput("electrons must be a non-negative integer");
      electrons = static_cast<int>(v);
    } else if (kv.key == "reference_mass") {
      m0 = parse_real(kv.value, "reference_mass");
    }
  }
  if (!electrons) throw InvalidInput("missing key 'electrons'");
  return build_system(nuclei, *electrons, m0);
}

MolecularSystem load_system(const std::filesystem::path &path) { return parse_system(read_text_file(path)); }

std::string descriptor_json(const OperatorDescriptor &d) {
  nlohmann::ordered_json j;
  j["coordinate_count"] = d.coordinate_count;
  j["coordinate_labels"] = d.coordinate_labels;
  auto K = nlohmann::ordered_json::array();
  for (int i = 0; i < d.kinetic.rows(); ++i) {
    std::vector<double> row(d.kinetic.cols());
    for (int k = 0; k < d.kinetic.cols(); ++k) row[k] = d.kinetic(i, k);
    K.push_back(row);
  }
  j["kinetic"] = K;
  auto terms = nlohmann::ordered_json::array();
  auto point = [](const CoulombPoint &p) {
    return nlohmann::ordered_json{{"row", std::vector<double>(p.row.data(), p.row.data() + p.row.size())},
                                  {"offset", {p.offset(0), p.offset(1), p.offset(2)}}};
  };
  for (const auto &t : d.coulomb)
    terms.push_back(nlohmann::ordered_json{{"label", t.label}, {"prefactor", t.prefactor}, {"a", point(t.a)}, {"b", point(t.b)}});
  j["coulomb"] = terms;
  j["constant_shift"] = d.constant_shift;
  j["non_self_adjoint_risk"] = d.flags.non_self_adjoint_risk;
  return j.dump(2);
}

} // namespace molab
