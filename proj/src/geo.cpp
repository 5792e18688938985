#include "codcast/geo.hpp"

#include "codcast/errors.hpp"
#include "codcast/raster.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace codcast::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_latitude(double lat_deg) {
    if (!(std::abs(lat_deg) < kPoleLimitDeg)) {
        throw PoleError("latitude " + std::to_string(lat_deg) +
                        " is too close to a pole for the planar transform");
    }
}

} // namespace

void GeoFrame::validate() const {
    if (!(r > 0.0) || !(dlon > 0.0) || !(dlat > 0.0)) {
        throw InvalidConfig("GeoFrame requires r, dlon, dlat > 0");
    }
    if (nx < 1 || ny < 1) {
        throw InvalidConfig("GeoFrame requires nx, ny >= 1");
    }
    check_latitude(lat_min);
    check_latitude(lat_max());
}

GeoFrame GeoFrame::from_bounds(double lon_min, double lon_max, double lat_min,
                               double lat_max, int nx, int ny, double r) {
    GeoFrame f;
    f.r = r;
    f.lon_min = lon_min;
    f.lat_min = lat_min;
    f.nx = nx;
    f.ny = ny;
    f.dlon = nx > 1 ? (lon_max - lon_min) / (nx - 1) : 1.0;
    f.dlat = ny > 1 ? (lat_max - lat_min) / (ny - 1) : 1.0;
    return f;
}

PlanarPoint lonlat_to_xy(const GeoFrame& frame, double lon_deg, double lat_deg) {
    check_latitude(lat_deg);
    return {frame.r * lon_deg * kDegToRad, frame.r * std::sin(lat_deg * kDegToRad)};
}

std::pair<double, double> xy_to_lonlat(const GeoFrame& frame, double x, double y) {
    const double s = y / frame.r;
    if (!(std::abs(s) < 1.0)) {
        throw PoleError("planar y maps onto a pole");
    }
    const double lat = std::asin(s) / kDegToRad;
    check_latitude(lat);
    return {x / frame.r / kDegToRad, lat};
}

PixelSpacing pixel_spacing_km(const GeoFrame& frame, double lat_deg) {
    check_latitude(lat_deg);
    return {frame.dlon * kDegToRad * frame.r * std::cos(lat_deg * kDegToRad),
            frame.r * frame.dlat * kDegToRad};
}

Velocity transform_velocity(double U, double V, double lat_deg) {
    check_latitude(lat_deg);
    const double c = std::cos(lat_deg * kDegToRad);
    return {U / c, V * c};
}

Velocity inverse_transform_velocity(double u, double v, double lat_deg) {
    check_latitude(lat_deg);
    const double c = std::cos(lat_deg * kDegToRad);
    return {u * c, v / c};
}

PlanarBox planar_bounds(const GeoFrame& frame) {
    const auto lo = lonlat_to_xy(frame, frame.lon_min, frame.lat_min);
    const auto hi = lonlat_to_xy(frame, frame.lon_max(), frame.lat_max());
    return {lo.x, hi.x, lo.y, hi.y};
}

std::pair<double, double> xy_to_pixel(const GeoFrame& frame, double x, double y) {
    const auto [lon, lat] = xy_to_lonlat(frame, x, y);
    return {(lon - frame.lon_min) / frame.dlon, (lat - frame.lat_min) / frame.dlat};
}

FlowField flow_pixels_to_kmh(const FlowField& flow, const GeoFrame& frame,
                             double dt_minutes) {
    if (flow.nx != frame.nx || flow.ny != frame.ny) {
        throw ShapeMismatch("flow raster does not match the frame");
    }
    if (!(dt_minutes > 0.0)) {
        throw InvalidConfig("dt must be positive");
    }
    if (flow.units == FlowUnits::km_per_hour) {
        return flow;
    }
    const double dt_hours = dt_minutes / 60.0;
    FlowField out = flow;
    out.units = FlowUnits::km_per_hour;
    out.frame = frame;
    for (int j = 0; j < flow.ny; ++j) {
        const double lat = frame.lat_at(j);
        const PixelSpacing px = pixel_spacing_km(frame, lat);
        for (int i = 0; i < flow.nx; ++i) {
            const std::size_t k = flow.index(i, j);
            const double U = flow.u[k] * px.dx_long / dt_hours;
            const double V = flow.v[k] * px.dx_lat / dt_hours;
            const Velocity w = transform_velocity(U, V, lat);
            out.u[k] = w.u;
            out.v[k] = w.v;
        }
    }
    return out;
}

} // namespace codcast::geo
