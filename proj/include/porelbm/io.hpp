#pragma once

/**
 * @file io.hpp
 * @brief CSV tables, legacy VTK field dumps and configuration hashing.
 */

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <porelbm/engine.hpp>

namespace porelbm {

/// 64-bit FNV-1a hash.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Shortest round-trip representation of a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/**
 * CSV file with two comment lines (units, config hash) and a header row.
 * Column names carry their units in brackets.
 */
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::vector<std::string> columns,
            const std::string& config_hash)
      : os_(path), columns_(std::move(columns)) {
    if (!os_) throw std::runtime_error("cannot write " + path);
    os_ << "# units: lattice units (dx = dt = 1, rho0 = 1)\n";
    os_ << "# config: " << config_hash << "\n";
    for (std::size_t i = 0; i < columns_.size(); ++i) os_ << (i ? "," : "") << columns_[i];
    os_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw std::logic_error("CSV row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row(cells);
  }

  void flush() { os_.flush(); }

 private:
  std::ofstream os_;
  std::vector<std::string> columns_;
};

/// Parsed CSV: comment lines dropped, first remaining line is the header.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::string config_hash;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
      // allow lookup without the unit suffix
      const auto br = columns[i].find('[');
      if (br != std::string::npos && columns[i].substr(0, br) == name) return i;
    }
    throw std::runtime_error("CSV has no column '" + name + "'");
  }
  double number(std::size_t row, const std::string& name) const {
    return std::stod(rows.at(row).at(column(name)));
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  CsvTable t;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string tag = "# config: ";
      if (line.rfind(tag, 0) == 0) t.config_hash = line.substr(tag.size());
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split_csv_line(line);
    } else {
      t.rows.push_back(split_csv_line(line));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Legacy VTK

/**
 * ASCII legacy VTK STRUCTURED_POINTS file with the solid flag, density and
 * velocity as cell-centred point data (one point per lattice cell).
 */
inline void write_vtk(const std::string& path, const Simulation& sim) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  const GridShape& sh = sim.shape();
  const std::size_t n = sh.cells();
  os << "# vtk DataFile Version 3.0\n";
  os << "porelbm step " << sim.time_step() << "\n";
  os << "ASCII\nDATASET STRUCTURED_POINTS\n";
  os << "DIMENSIONS " << sh.nx << ' ' << sh.ny << ' ' << sh.nz << "\n";
  os << "ORIGIN 0.5 0.5 0.5\nSPACING 1 1 1\n";
  os << "POINT_DATA " << n << "\n";
  os << "SCALARS solid int 1\nLOOKUP_TABLE default\n";
  for (std::size_t c = 0; c < n; ++c) os << (sim.flags().solid(c) ? 1 : 0) << '\n';
  os << std::setprecision(10);
  os << "SCALARS density double 1\nLOOKUP_TABLE default\n";
  std::vector<MacroState> m(n);
  for (std::size_t c = 0; c < n; ++c) {
    m[c] = sim.flags().fluid(c) ? sim.macro(c) : MacroState{kRho0, {0.0, 0.0, 0.0}};
    os << m[c].rho << '\n';
  }
  os << "VECTORS velocity double\n";
  for (std::size_t c = 0; c < n; ++c) os << m[c].u[0] << ' ' << m[c].u[1] << ' ' << m[c].u[2] << '\n';
  if (!os) throw std::runtime_error("failed writing " + path);
}

}  // namespace porelbm
