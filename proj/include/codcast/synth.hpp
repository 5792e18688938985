#pragma once

// Synthetic COD sequences transported exactly by analytic velocity fields.
// Every scenario is defined in the planar frame of the raster; times are hours
// after the first frame.

#include "codcast/geo.hpp"
#include "codcast/raster.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace codcast::synth {

enum class Scenario { translate, rotate, taylor_green_transport, shear };

Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario s);

/// The desk-scale raster: 128 x 128 pixels over 140W-124W, 39N-51N.
geo::GeoFrame desk_frame();

struct ScenarioParams {
    Scenario scenario = Scenario::taylor_green_transport;
    geo::GeoFrame frame = desk_frame();
    int frames = 4;           // observed frames
    int cadence_minutes = 15;
    int horizon_minutes = 75; // truth frames after the last observed one
    std::int64_t start_minutes = 22967850; // 2013-09-01 21:30 UTC

    /// Uniform drift (translate) and mean flow (taylor_green_transport), km/h.
    double speed = 40.0;
    double direction_deg = 20.0;
    /// Angular velocity of the rigid rotation about the box center, rad/h.
    double omega = 0.5;
    /// du/dy of the shear flow about the box center, 1/h.
    double shear = 0.05;
    /// Peak speed of the Taylor-Green cells, km/h, and their mode numbers.
    double tg_amplitude = 40.0;
    int tg_n = 2;
    int tg_m = 1;
    /// Viscosity (km^2/h) setting the cell decay rate nu * lambda.
    double nu = 5000.0;

    int blobs = 40;
    double blob_scale_km = 80.0;
    double peak_cod = 20.0;
    std::uint64_t seed = 7;

    void validate() const;
};

struct Blob {
    double x, y, sigma, amplitude;
};

/// Cloud blobs of the initial field, absolute planar coordinates.
std::vector<Blob> make_blobs(const ScenarioParams& p);

/// Analytic planar velocity (km/h) at (x, y) and t hours.
geo::Velocity velocity(const ScenarioParams& p, double x, double y, double t);

/// Foot of the characteristic through (x, y) at time t, traced back to t = 0.
geo::PlanarPoint trace_back(const ScenarioParams& p, double x, double y, double t);

/// Exact concentration C(x, y, t) = C0(trace_back(x, y, t)).
double concentration(const ScenarioParams& p, const std::vector<Blob>& blobs, double x,
                     double y, double t);

/// Raster of the exact concentration at t hours.
ScalarGrid render(const ScenarioParams& p, const std::vector<Blob>& blobs, double t);

/// Analytic velocity on the raster at t hours, as a km/h flow field.
FlowField velocity_field(const ScenarioParams& p, double t);

struct Dataset {
    std::vector<ScalarGrid> observed;    // frames 0 .. frames-1
    std::vector<ScalarGrid> truth;       // one per cadence tick after the last frame
    std::vector<FlowField> true_flows;   // analytic velocity at each observed frame time
};

Dataset generate(const ScenarioParams& p);

} // namespace codcast::synth
