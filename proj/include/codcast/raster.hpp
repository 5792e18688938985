#pragma once

// Raster data model shared by every module: COD images and flow fields.

#include "codcast/geo.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace codcast {

/// One COD image. Row-major, y-outer: values[j*nx + i]. NaN marks a missing pixel.
struct ScalarGrid {
    int nx = 0;
    int ny = 0;
    std::vector<double> values;
    std::int64_t timestamp = 0; // minutes since epoch
    geo::GeoFrame frame;

    ScalarGrid() = default;
    ScalarGrid(int nx_, int ny_, double fill = 0.0)
        : nx(nx_), ny(ny_), values(static_cast<std::size_t>(nx_) * ny_, fill) {
        frame.nx = nx_;
        frame.ny = ny_;
    }

    std::size_t size() const { return values.size(); }
    double& at(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
    bool same_shape(const ScalarGrid& o) const { return nx == o.nx && ny == o.ny; }
};

enum class FlowUnits { pixels_per_frame, km_per_hour };

std::string to_string(FlowUnits u);
FlowUnits flow_units_from_string(const std::string& tag);

/// One flow snapshot F_k = (u_k, v_k) on a raster. u is along i (east), v along j (north).
struct FlowField {
    int nx = 0;
    int ny = 0;
    std::vector<double> u;
    std::vector<double> v;
    FlowUnits units = FlowUnits::pixels_per_frame;
    std::int64_t t_prev = 0; // minutes since epoch
    std::int64_t t_next = 0;
    geo::GeoFrame frame;

    FlowField() = default;
    FlowField(int nx_, int ny_)
        : nx(nx_), ny(ny_),
          u(static_cast<std::size_t>(nx_) * ny_, 0.0),
          v(static_cast<std::size_t>(nx_) * ny_, 0.0) {
        frame.nx = nx_;
        frame.ny = ny_;
    }

    std::size_t size() const { return u.size(); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    bool same_shape(const ScalarGrid& g) const { return nx == g.nx && ny == g.ny; }
    bool same_shape(const FlowField& f) const { return nx == f.nx && ny == f.ny; }
};

} // namespace codcast
