#pragma once

// CODG on-disk format for COD rasters and flow fields.
//
//   CODG 1
//   kind scalar|flow
//   nx <int>
//   ny <int>
//   timestamp <int-minutes>            (flow: timestamp <t_prev> <t_next>)
//   frame <r> <lon_min> <lat_min> <dlon> <dlat>
//   units <tag>
//   end
//   <little-endian float64 payload, row-major, y-outer; flow stores u then v>
//
// Header lines end in LF. Floats in the header use the shortest round-trip
// decimal form so a read followed by a write reproduces the file byte for byte.

#include "codcast/raster.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace codcast::codio {

inline constexpr int kFormatVersion = 1;

ScalarGrid read_grid(const std::filesystem::path& path);
void write_grid(const ScalarGrid& grid, const std::filesystem::path& path);

FlowField read_flow(const std::filesystem::path& path);
void write_flow(const FlowField& flow, const std::filesystem::path& path);

/// In-memory variants used by the file functions and by tests.
std::string encode_grid(const ScalarGrid& grid);
ScalarGrid decode_grid(std::string_view bytes);
std::string encode_flow(const FlowField& flow);
FlowField decode_flow(std::string_view bytes);

/// Hand-made fixtures: first line `nx,ny`, then ny rows of nx comma-separated
/// values (row 0 is j = 0). Empty cells and `nan` become NaN. The frame's nx/ny
/// are overwritten from the header.
ScalarGrid read_grid_csv(const std::filesystem::path& path,
                         geo::GeoFrame frame = {});
ScalarGrid parse_grid_csv(std::string_view text, geo::GeoFrame frame = {});

/// 16-bit binary PGM snapshot, scaled so that `vmax` maps to 65535.
/// Row 0 of the image is the northernmost raster row. NaN renders as 0.
void write_pgm16(const ScalarGrid& grid, const std::filesystem::path& path,
                 double vmax);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(std::string_view s);

/// Little-endian float64 helpers shared with other binary blocks.
void append_f64_le(std::string& out, double v);
double load_f64_le(const char* p);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

} // namespace codcast::codio
