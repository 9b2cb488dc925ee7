#include "drest/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace drest {

namespace {

std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(strip(cur));
  return out;
}

bool parse_cell(const std::string& cell, double& value) {
  if (cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan")
    return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, value);
  return res.ec == std::errc{} && res.ptr == end && std::isfinite(value);
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset ingest_csv(const std::string& path, const std::string& exposure_name,
                   const std::string& outcome_name) {
  std::ifstream file(path);
  if (!file) throw IngestError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(file, line)) throw IngestError("'" + path + "' is empty");
  const std::vector<std::string> header = split_line(line);
  if (header.empty() || (header.size() == 1 && header[0].empty()))
    throw IngestError("'" + path + "' has no header columns");

  long exposure_col = -1, outcome_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j].empty())
      throw IngestError("empty header name in column " + std::to_string(j + 1));
    for (std::size_t k = 0; k < j; ++k)
      if (header[k] == header[j])
        throw IngestError("duplicate column '" + header[j] + "'");
    if (header[j] == exposure_name) exposure_col = static_cast<long>(j);
    if (header[j] == outcome_name) outcome_col = static_cast<long>(j);
  }
  if (exposure_col < 0)
    throw IngestError("exposure column '" + exposure_name + "' not found in '" + path + "'");
  if (outcome_col < 0)
    throw IngestError("outcome column '" + outcome_name + "' not found in '" + path + "'");

  std::vector<std::vector<double>> columns(header.size());
  std::vector<std::string> problems;
  long row = 1;  // data rows are 1-based, header excluded
  while (std::getline(file, line)) {
    if (strip(line).empty()) {
      ++row;
      continue;
    }
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      problems.push_back("row " + std::to_string(row) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(cells.size()));
    } else {
      for (std::size_t j = 0; j < cells.size(); ++j) {
        double value = 0.0;
        if (!parse_cell(cells[j], value)) {
          problems.push_back("row " + std::to_string(row) + ", column '" + header[j] +
                             "': missing or non-numeric value '" + cells[j] + "'");
          continue;
        }
        if (static_cast<long>(j) == exposure_col && value != 0.0 && value != 1.0)
          problems.push_back("row " + std::to_string(row) + ": exposure value '" +
                             cells[j] + "' is not 0 or 1");
        columns[j].push_back(value);
      }
    }
    ++row;
    if (problems.size() >= 20) break;
  }
  if (!problems.empty()) {
    std::string msg = "'" + path + "' rejected:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw IngestError(msg);
  }
  if (columns[0].empty()) throw IngestError("'" + path + "' has no data rows");

  const auto n = static_cast<Eigen::Index>(columns[0].size());
  auto to_vec = [n](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), n).eval();
  };

  Dataset data;
  data.set_exposure(exposure_name, to_vec(columns[static_cast<std::size_t>(exposure_col)]));
  data.set_outcome(outcome_name, to_vec(columns[static_cast<std::size_t>(outcome_col)]));
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (static_cast<long>(j) == exposure_col || static_cast<long>(j) == outcome_col)
      continue;
    data.add_covariate(header[j], to_vec(columns[j]));
  }
  try {
    data.validate();
  } catch (const Error& e) {
    throw IngestError("'" + path + "': " + e.what());
  }
  return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ostringstream out;
  out << data.exposure_name() << ',' << data.outcome_name();
  for (const auto& [name, v] : data.covariates()) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << format_double(data.exposure()[i]) << ',' << format_double(data.outcome()[i]);
    for (const auto& [name, v] : data.covariates()) out << ',' << format_double(v[i]);
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IngestError("cannot open '" + path + "' for writing");
  file << out.str();
  if (!file) throw IngestError("failed writing '" + path + "'");
}

}  // namespace drest
