#include "rover_gnc/dem_io.hpp"

#include "rover_gnc/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace rover_gnc {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && token.front() == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw IoError("malformed number '" + token + "' in ESRI grid");
  }
  return v;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

}  // namespace

void write_esri_ascii(std::ostream& out, const ElevationGrid& grid) {
  const double cs = grid.resolution();
  out << "ncols " << grid.cols() << '\n'
      << "nrows " << grid.rows() << '\n'
      << "xllcorner " << format_double(grid.origin().x() - 0.5 * cs) << '\n'
      << "yllcorner " << format_double(grid.origin().y() - 0.5 * cs) << '\n'
      << "cellsize " << format_double(cs) << '\n'
      << "NODATA_value " << format_double(kEsriNoData) << '\n';
  for (int r = grid.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < grid.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_double(grid.is_valid(r, c) ? grid.height(r, c) : kEsriNoData);
    }
    out << '\n';
  }
}

void write_esri_ascii(const std::filesystem::path& path, const ElevationGrid& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_esri_ascii(out, grid);
  if (!out) throw IoError("failed writing " + path.string());
}

ElevationGrid read_esri_ascii(std::istream& in) {
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(std::move(t));

  std::map<std::string, double> header;
  std::size_t pos = 0;
  while (pos + 1 < tokens.size() &&
         std::isalpha(static_cast<unsigned char>(tokens[pos].front()))) {
    header[lower(tokens[pos])] = parse_double(tokens[pos + 1]);
    pos += 2;
  }

  auto need = [&](const char* name) {
    auto it = header.find(name);
    if (it == header.end()) throw IoError(std::string("ESRI header missing ") + name);
    return it->second;
  };
  const double ncols = need("ncols");
  const double nrows = need("nrows");
  const double cs = need("cellsize");
  if (ncols < 1 || nrows < 1 || !(cs > 0.0)) throw IoError("invalid ESRI grid dimensions");

  GridGeometry geom;
  geom.cols = static_cast<int>(ncols);
  geom.rows = static_cast<int>(nrows);
  geom.resolution = cs;
  if (header.count("xllcorner")) {
    geom.origin.x() = header["xllcorner"] + 0.5 * cs;
  } else {
    geom.origin.x() = need("xllcenter");
  }
  if (header.count("yllcorner")) {
    geom.origin.y() = header["yllcorner"] + 0.5 * cs;
  } else {
    geom.origin.y() = need("yllcenter");
  }
  const bool has_nodata = header.count("nodata_value") > 0;
  const double nodata = has_nodata ? header["nodata_value"] : 0.0;

  ElevationGrid grid(geom, 0.0, false);
  if (tokens.size() - pos != geom.size()) {
    throw IoError("ESRI grid body has " + std::to_string(tokens.size() - pos) +
                  " values, expected " + std::to_string(geom.size()));
  }
  for (int r = geom.rows - 1; r >= 0; --r) {
    for (int c = 0; c < geom.cols; ++c) {
      const double h = parse_double(tokens[pos++]);
      if (has_nodata && h == nodata) continue;
      if (!std::isfinite(h)) throw IoError("non-finite height in ESRI grid");
      grid.set_height(r, c, h);
    }
  }
  return grid;
}

ElevationGrid read_esri_ascii(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_esri_ascii(in);
}

}  // namespace rover_gnc
