#pragma once

// CSV ingestion and export.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spwarp/error.hpp"
#include "spwarp/estimator.hpp"
#include "spwarp/proximity_basis.hpp"
#include "spwarp/transform.hpp"

namespace spwarp {

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t size() const noexcept { return rows.size(); }

  bool has(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw data_error("missing column '" + name + "' in " + source);
    return static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::string> text(const std::string& name) const {
    const auto c = column(name);
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }

  std::vector<double> numeric(const std::string& name) const {
    const auto c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double v = 0.0;
      if (!parse_number(rows[i][c], v))
        throw data_error("non-numeric cell '" + rows[i][c] + "' at row " + std::to_string(i + 1) +
                         ", column '" + name + "' in " + source);
      out.push_back(v);
    }
    return out;
  }

  static bool parse_number(std::string_view s, double& v) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      f.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  f.push_back(std::move(cur));
  return f;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source, bool has_header = true) {
  CsvTable t;
  t.source = source;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (first && has_header) {
      t.header = std::move(f);
      first = false;
      continue;
    }
    first = false;
    if (!t.header.empty() && f.size() != t.header.size())
      throw data_error(source + ": line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                       " fields, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(f));
  }
  return t;
}

inline CsvTable read_csv(const std::string& path, bool has_header = true) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  return parse_csv(in, path, has_header);
}

/// Shortest decimal text that round-trips a double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("NA");
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path + "'");
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      const bool quote = cells[i].find_first_of(",\"") != std::string::npos;
      if (quote) {
        out << '"';
        for (char c : cells[i]) out << (c == '"' ? "\"\"" : std::string(1, c));
        out << '"';
      } else {
        out << cells[i];
      }
    }
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

// ------------------------------------------------------------------ config

struct RunConfig {
  std::string data;
  std::string response;
  std::vector<std::string> x, xconst;
  std::string group, offset;
  std::string coord_x, coord_y;
  std::string zone, adjacency, adjacency_format = "auto";
  TransformSpec transform;
  double count_delta = kDefaultCountDelta;
  double threshold = kDefaultBasisThreshold;
  bool varying = false, nvc = false, select = true;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string model, predict_data;
  bool compute_quantile = true, include_noise = true, geojson = false;
  std::string column;  // transform-check input column
  int max_iter = 500;
  double rel_tol = 1e-8;

  bool uses_coordinates() const { return !coord_x.empty() || !coord_y.empty(); }
  bool uses_adjacency() const { return !adjacency.empty() || !zone.empty(); }

  void validate_geometry() const {
    if (uses_coordinates() && uses_adjacency())
      throw config_error("choose either coordinates (coord_x, coord_y) or adjacency (adjacency, zone), not both");
    if (!uses_coordinates() && !uses_adjacency())
      throw config_error("no spatial geometry: set coord_x/coord_y or adjacency/zone");
    if (uses_coordinates() && (coord_x.empty() || coord_y.empty()))
      throw config_error("both coord_x and coord_y are required");
    if (uses_adjacency() && (adjacency.empty() || zone.empty()))
      throw config_error("adjacency and zone must be given together");
  }

  void validate_fit() const {
    if (data.empty()) throw config_error("missing 'data' path");
    if (response.empty()) throw config_error("missing 'response' column");
    transform.validate();
    if (!(count_delta > 0.0)) throw config_error("count_delta must be positive");
    if (nvc && !varying) throw config_error("x_nvc requires svc = true");
    validate_geometry();
  }
};

// ----------------------------------------------------------------- ingest

struct Adjacency {
  Eigen::MatrixXd matrix;
  std::vector<std::string> ids;
};

/// Dense 0/1 matrix (optionally with a header of zone ids) or an edge list of zone pairs.
inline Adjacency read_adjacency(const std::string& path, const std::string& format = "auto") {
  const CsvTable raw = read_csv(path, false);
  if (raw.rows.empty()) throw data_error("no data rows in " + path);
  std::string fmt = format;
  bool header = false;
  {
    double v;
    for (const auto& cell : raw.rows.front())
      if (!CsvTable::parse_number(cell, v)) header = true;
  }
  const std::size_t body = raw.rows.size() - (header ? 1 : 0);
  if (fmt == "auto") fmt = (raw.rows.front().size() == body && body > 2) ? "dense" : "edges";

  Adjacency a;
  if (fmt == "dense") {
    const std::size_t n = raw.rows.front().size();
    if (body != n) throw data_error("dense adjacency in " + path + " is not square");
    a.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = raw.rows[i + (header ? 1 : 0)];
      if (r.size() != n) throw data_error("row " + std::to_string(i + 1) + " of " + path + " has the wrong length");
      for (std::size_t j = 0; j < n; ++j) {
        double v;
        if (!CsvTable::parse_number(r[j], v))
          throw data_error("non-numeric cell at row " + std::to_string(i + 1) + ", column " +
                           std::to_string(j + 1) + " in " + path);
        a.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      }
    }
    for (std::size_t j = 0; j < n; ++j) a.ids.push_back(header ? raw.rows.front()[j] : std::to_string(j + 1));
  } else if (fmt == "edges") {
    std::unordered_map<std::string, Eigen::Index> index;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
    auto id_of = [&](const std::string& s) {
      auto [it, fresh] = index.emplace(s, static_cast<Eigen::Index>(a.ids.size()));
      if (fresh) a.ids.push_back(s);
      return it->second;
    };
    for (std::size_t r = header ? 1 : 0; r < raw.rows.size(); ++r) {
      const auto& row = raw.rows[r];
      if (row.size() != 2) throw data_error("edge list line " + std::to_string(r + 1) + " of " + path + " needs 2 fields");
      const auto i = id_of(row[0]), j = id_of(row[1]);
      if (i == j) throw data_error("self-neighbour at edge list line " + std::to_string(r + 1) + " of " + path);
      edges.emplace_back(i, j);
    }
    const auto n = static_cast<Eigen::Index>(a.ids.size());
    a.matrix = Eigen::MatrixXd::Zero(n, n);
    for (auto [i, j] : edges) a.matrix(i, j) = a.matrix(j, i) = 1.0;
  } else {
    throw config_error("unknown adjacency_format '" + format + "'");
  }
  return a;
}

struct Ingested {
  Dataset data;
  CoordinateSet coords;  // coordinate geometry
  Adjacency adjacency;   // zone geometry
};

/// Typed, validated model input from a CSV table.
inline Ingested ingest(const CsvTable& t, const RunConfig& cfg) {
  if (t.rows.empty()) throw data_error("no data rows in " + t.source);
  Ingested in;
  Dataset& d = in.data;
  const auto n = static_cast<Eigen::Index>(t.size());
  d.y = t.numeric(cfg.response);
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    const double v = d.y[i];
    const std::string where = " at row " + std::to_string(i + 1) + ", column '" + cfg.response + "'";
    if (cfg.transform.is_count()) {
      if (v < 0.0) throw data_error("negative count" + where);
      if (v != std::floor(v)) throw data_error("non-integer count" + where);
    } else if (cfg.transform.y_nonneg && v < 0.0) {
      throw data_error("negative response" + where);
    }
  }
  auto matrix = [&](const std::vector<std::string>& cols) {
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto v = t.numeric(cols[k]);
      m.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
    }
    return m;
  };
  d.x = matrix(cfg.x);
  d.x_names = cfg.x;
  d.xconst = matrix(cfg.xconst);
  d.xconst_names = cfg.xconst;
  if (!cfg.group.empty()) {
    d.group = t.text(cfg.group);
    d.group_name = cfg.group;
  }
  if (!cfg.offset.empty()) {
    d.offset = t.numeric(cfg.offset);
    for (std::size_t i = 0; i < d.offset.size(); ++i)
      if (!(d.offset[i] > 0.0))
        throw data_error("non-positive offset at row " + std::to_string(i + 1) + ", column '" + cfg.offset + "'");
  }

  if (cfg.uses_coordinates()) {
    const auto xs = t.numeric(cfg.coord_x), ys = t.numeric(cfg.coord_y);
    std::vector<Point> pts;
    for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back({xs[i], ys[i]});
    in.coords = CoordinateSet(std::move(pts));
  } else if (cfg.uses_adjacency()) {
    in.adjacency = read_adjacency(cfg.adjacency, cfg.adjacency_format);
    std::unordered_map<std::string, Eigen::Index> index;
    for (std::size_t k = 0; k < in.adjacency.ids.size(); ++k)
      index.emplace(in.adjacency.ids[k], static_cast<Eigen::Index>(k));
    const auto zones = t.text(cfg.zone);
    for (std::size_t i = 0; i < zones.size(); ++i) {
      const auto it = index.find(zones[i]);
      if (it == index.end())
        throw data_error("zone '" + zones[i] + "' at row " + std::to_string(i + 1) + " is not in the adjacency");
      d.site.push_back(it->second);
    }
    d.row_ids = zones;
  }
  return in;
}

// ----------------------------------------------------------------- exports

inline void write_basis(const std::string& dir, const EigenBasis& b) {
  std::vector<std::string> header;
  for (Eigen::Index l = 0; l < b.rank(); ++l) header.push_back("ev_" + std::to_string(l + 1));
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index i = 0; i < b.sites(); ++i) {
    std::vector<std::string> r;
    for (Eigen::Index l = 0; l < b.rank(); ++l) r.push_back(format_number(b.vectors(i, l)));
    rows.push_back(std::move(r));
  }
  write_csv(dir + "/basis.csv", header, rows);
  rows.clear();
  for (Eigen::Index l = 0; l < b.rank(); ++l) rows.push_back({format_number(b.values(l))});
  write_csv(dir + "/eigenvalues.csv", {"eigenvalue"}, rows);
}

/// Point features; properties are the given columns.
inline void write_geojson(const std::string& path, const CoordinateSet& coords,
                          const std::vector<std::string>& names, const Eigen::MatrixXd& values) {
  nlohmann::ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "Point"}, {"coordinates", {coords[i].x, coords[i].y}}};
    nlohmann::ordered_json props = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < names.size(); ++k) {
      const double v = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      if (std::isfinite(v)) props[names[k]] = v;
      else props[names[k]] = nullptr;
    }
    f["properties"] = std::move(props);
    fc["features"].push_back(std::move(f));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << fc.dump(1) << '\n';
}

/// 64-bit FNV-1a of a file's bytes (training-data fingerprint).
inline std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace spwarp
