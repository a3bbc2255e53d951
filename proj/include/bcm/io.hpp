#ifndef BCM_IO_HPP
#define BCM_IO_HPP

// CSV readers and writers for the field tables.
//
//   traces:     t,boundary_node_id,value       (row-major by time)
//   interior:   node_id,x,y,value
//   grids:      kind,node_id,x,y,weight        (kind = interior | boundary)
//   speeds:     node_index,value
//   elements:   element_id,boundary_node_id,value

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bcm/errors.hpp"
#include "bcm/fields.hpp"
#include "bcm/geometry.hpp"

namespace bcm::io {

/// Shortest decimal that round-trips.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write " + path.string());
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

inline double parse_number(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigurationError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

/// Reads numeric rows after a header; `columns` is the expected column count.
inline std::vector<std::vector<double>> read_table(const std::filesystem::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (header) {
      header = false;
      const auto first = split(line);
      if (!first.empty() && !first[0].empty() && (std::isalpha(static_cast<unsigned char>(first[0][0])) != 0))
        continue;  // header row
    }
    const auto cells = split(line);
    if (cells.size() != columns)
      throw ConfigurationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(columns) + " columns, got " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c, path, lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline void write_trace_csv(const std::filesystem::path& path, const SpaceTimeField& f) {
  auto out = detail::open_out(path);
  out << "t,boundary_node_id,value\n";
  for (std::size_t k = 0; k < f.time_nodes(); ++k)
    for (std::size_t j = 0; j < f.boundary_nodes(); ++j)
      out << format_double(f.grid().time(k)) << ',' << j << ',' << format_double(f(k, j)) << '\n';
}

/// Reads a trace onto a known time grid. Every (time node, boundary node) pair must appear once.
inline SpaceTimeField read_trace_csv(const std::filesystem::path& path, TimeGrid grid, std::size_t boundary_nodes) {
  const auto rows = detail::read_table(path, 3);
  SpaceTimeField f(grid, boundary_nodes);
  std::vector<unsigned char> seen(f.size(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double t = rows[r][0];
    const double kf = t / grid.dt;
    const auto k = static_cast<long long>(std::llround(kf));
    const auto j = static_cast<long long>(std::llround(rows[r][1]));
    if (std::abs(kf - static_cast<double>(k)) > 1e-6 || k < 0 || static_cast<std::size_t>(k) >= grid.nodes())
      throw ConfigurationError(path.string() + ": row " + std::to_string(r + 2) + ": time " + format_double(t) +
                               " is not on the time grid");
    if (j < 0 || static_cast<std::size_t>(j) >= boundary_nodes)
      throw ConfigurationError(path.string() + ": row " + std::to_string(r + 2) + ": boundary node out of range");
    f(static_cast<std::size_t>(k), static_cast<std::size_t>(j)) = rows[r][2];
    seen[static_cast<std::size_t>(k) * boundary_nodes + static_cast<std::size_t>(j)] = 1;
  }
  for (unsigned char s : seen)
    if (!s) throw ConfigurationError(path.string() + ": trace does not cover the whole time-boundary grid");
  return f;
}

inline void write_interior_csv(const std::filesystem::path& path, const Grid& g, const InteriorField& v) {
  auto out = detail::open_out(path);
  out << "node_id,x,y,value\n";
  for (std::size_t i = 0; i < v.size(); ++i)
    out << i << ',' << format_double(g.nodes[i].x) << ',' << format_double(g.nodes[i].y) << ','
        << format_double(v[i]) << '\n';
}

inline void write_grid_csv(const std::filesystem::path& path, const Grid& g) {
  auto out = detail::open_out(path);
  out << "kind,node_id,x,y,weight\n";
  for (std::size_t i = 0; i < g.interior_size(); ++i)
    out << "interior," << i << ',' << format_double(g.nodes[i].x) << ',' << format_double(g.nodes[i].y) << ','
        << format_double(g.weights[i]) << '\n';
  for (std::size_t j = 0; j < g.boundary_size(); ++j)
    out << "boundary," << j << ',' << format_double(g.boundary_nodes[j].x) << ','
        << format_double(g.boundary_nodes[j].y) << ',' << format_double(g.boundary_weights[j]) << '\n';
}

/// (node index, value) pairs covering every interior node.
inline SampledSpeed read_speed_csv(const std::filesystem::path& path, std::size_t interior_nodes) {
  const auto rows = detail::read_table(path, 2);
  SampledSpeed s;
  s.values.assign(interior_nodes, 0.0);
  std::vector<unsigned char> seen(interior_nodes, 0);
  for (const auto& r : rows) {
    const auto i = static_cast<long long>(std::llround(r[0]));
    if (i < 0 || static_cast<std::size_t>(i) >= interior_nodes)
      throw ConfigurationError(path.string() + ": node index " + std::to_string(i) + " out of range");
    s.values[static_cast<std::size_t>(i)] = r[1];
    seen[static_cast<std::size_t>(i)] = 1;
  }
  for (std::size_t i = 0; i < interior_nodes; ++i)
    if (!seen[i]) throw ConfigurationError(path.string() + ": missing speed for node " + std::to_string(i));
  return s;
}

/// (boundary node index, value) pairs.
inline BoundaryProfile read_profile_csv(const std::filesystem::path& path, std::size_t boundary_nodes) {
  const auto rows = detail::read_table(path, 2);
  BoundaryProfile p(boundary_nodes, 0.0);
  std::vector<unsigned char> seen(boundary_nodes, 0);
  for (const auto& r : rows) {
    const auto j = static_cast<long long>(std::llround(r[0]));
    if (j < 0 || static_cast<std::size_t>(j) >= boundary_nodes)
      throw ConfigurationError(path.string() + ": boundary node " + std::to_string(j) + " out of range");
    p[static_cast<std::size_t>(j)] = r[1];
    seen[static_cast<std::size_t>(j)] = 1;
  }
  for (std::size_t j = 0; j < boundary_nodes; ++j)
    if (!seen[j]) throw ConfigurationError(path.string() + ": missing value for boundary node " + std::to_string(j));
  return p;
}

inline void write_elements_csv(const std::filesystem::path& path, const std::vector<BoundaryProfile>& elements) {
  auto out = detail::open_out(path);
  out << "element_id,boundary_node_id,value\n";
  for (std::size_t e = 0; e < elements.size(); ++e)
    for (std::size_t j = 0; j < elements[e].size(); ++j)
      out << e << ',' << j << ',' << format_double(elements[e][j]) << '\n';
}

/// Two-column series (plot data).
inline void write_series_csv(const std::filesystem::path& path, const std::string& x_name, const std::string& y_name,
                             const std::vector<double>& x, const std::vector<double>& y) {
  auto out = detail::open_out(path);
  out << x_name << ',' << y_name << '\n';
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    out << format_double(x[i]) << ',' << format_double(y[i]) << '\n';
}

}  // namespace bcm::io

#endif  // BCM_IO_HPP
