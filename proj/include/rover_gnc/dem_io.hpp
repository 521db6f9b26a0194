#pragma once

#include "rover_gnc/terrain.hpp"

#include <filesystem>
#include <iosfwd>

namespace rover_gnc {

inline constexpr double kEsriNoData = -9999.0;

/// ESRI ASCII grid. Rows are written north-first, heights in shortest
/// round-trip form so finite values survive a write/read cycle bit-exact.
void write_esri_ascii(std::ostream& out, const ElevationGrid& grid);
void write_esri_ascii(const std::filesystem::path& path, const ElevationGrid& grid);

/// Accepts xllcorner/yllcorner or xllcenter/yllcenter; NODATA cells load as
/// invalid. Throws IoError on malformed input.
ElevationGrid read_esri_ascii(std::istream& in);
ElevationGrid read_esri_ascii(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace rover_gnc
