#pragma once

// Longitude-latitude raster <-> planar (x, y) km frame.
//
// The planar frame is x = r*lon, y = r*sin(lat) with angles in radians.
// Every public function takes degrees; radians never leave this module.

#include <utility>

namespace codcast {
struct FlowField;
}

namespace codcast::geo {

inline constexpr double kEarthRadiusKm = 6371.0;
/// Latitudes at or beyond this magnitude are rejected.
inline constexpr double kPoleLimitDeg = 89.9;

/// Uniform lon-lat raster description. Pixel (i, j) sits at
/// (lon_min + i*dlon, lat_min + j*dlat); the last pixel lands on lon_max/lat_max.
struct GeoFrame {
    double r = kEarthRadiusKm;
    double lon_min = 0.0;
    double lat_min = 0.0;
    double dlon = 1.0;
    double dlat = 1.0;
    int nx = 1;
    int ny = 1;

    double lon_max() const { return lon_min + (nx - 1) * dlon; }
    double lat_max() const { return lat_min + (ny - 1) * dlat; }
    double lon_at(double i) const { return lon_min + i * dlon; }
    double lat_at(double j) const { return lat_min + j * dlat; }

    /// Throws InvalidConfig / PoleError when the frame is unusable.
    void validate() const;

    /// Frame spanning [lon_min, lon_max] x [lat_min, lat_max] with nx x ny pixels.
    static GeoFrame from_bounds(double lon_min, double lon_max, double lat_min,
                                double lat_max, int nx, int ny,
                                double r = kEarthRadiusKm);

    friend bool operator==(const GeoFrame&, const GeoFrame&) = default;
};

struct PlanarPoint {
    double x; // km
    double y; // km
};

struct PixelSpacing {
    double dx_long; // km along a parallel
    double dx_lat;  // km along a meridian
};

struct Velocity {
    double u; // km/h
    double v; // km/h
};

PlanarPoint lonlat_to_xy(const GeoFrame& frame, double lon_deg, double lat_deg);

/// Inverse of lonlat_to_xy; returns (lon, lat) in degrees.
std::pair<double, double> xy_to_lonlat(const GeoFrame& frame, double x, double y);

PixelSpacing pixel_spacing_km(const GeoFrame& frame, double lat_deg);

/// Eastward/northward (U, V) at latitude lat -> planar-frame (u, v).
Velocity transform_velocity(double U, double V, double lat_deg);

/// Planar (u, v) -> eastward/northward (U, V).
Velocity inverse_transform_velocity(double u, double v, double lat_deg);

/// Axis-aligned planar bounding box of a raster.
struct PlanarBox {
    double x_min, x_max, y_min, y_max;
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
};

PlanarBox planar_bounds(const GeoFrame& frame);

/// Fractional pixel coordinates (i, j) of a planar point, for resampling.
std::pair<double, double> xy_to_pixel(const GeoFrame& frame, double x, double y);

/// Converts a px/frame flow to planar km/h: scale by the local pixel size,
/// divide by dt, then apply transform_velocity at each pixel's latitude.
FlowField flow_pixels_to_kmh(const FlowField& flow, const GeoFrame& frame,
                             double dt_minutes);

} // namespace codcast::geo
