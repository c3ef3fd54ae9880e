#pragma once

// Text formats shared by the solvers and the lab runner.

#include "molab/system_model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace molab {

/// Round-trippable decimal text (17 significant digits); "nan"/"inf" otherwise.
std::string format_number(double x);

/// Comma-separated table with a mandatory header row.
class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(const std::vector<double> &values);
  /// Mixed row: numbers are formatted, strings emitted verbatim.
  void add_row(const std::vector<std::string> &cells);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string> &header() const { return header_; }

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text_file(const std::filesystem::path &path, const std::string &text);
std::string read_text_file(const std::filesystem::path &path);

/// `key = value` lines with '#' comments. Keys may repeat (e.g. nucleus).
struct KeyValueLine {
  std::string key;
  std::string value;
  int line = 0;
};
std::vector<KeyValueLine> parse_key_values(const std::string &text);

/// System file: `nucleus = mass,charge` lines (mass may be `inf`), `electrons = N`,
/// optional `reference_mass = M0`.
MolecularSystem parse_system(const std::string &text);
MolecularSystem load_system(const std::filesystem::path &path);

/// Parses a real number, accepting `inf`/`infinite` for the mass sentinel.
double parse_real(const std::string &text, const std::string &what);

/// Descriptor as JSON text for golden comparisons.
std::string descriptor_json(const OperatorDescriptor &d);

} // namespace molab
