#pragma once

// Three-phase forecast: flows from consecutive frames, a spectral fit of the
// flows, and transport of the latest frame by the fitted model's velocity.
// Baselines (persistence, frozen last flow) and rMAPE evaluation live here too.

#include "codcast/assimilate.hpp"
#include "codcast/raster.hpp"
#include "codcast/run_config.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace codcast::pipeline {

/// 100 * sum|truth - pred| / sum|truth| over pixels outside `excluded` whose
/// truth value is finite.
double rmape(const ScalarGrid& truth, const ScalarGrid& pred,
             std::span<const std::size_t> excluded);

/// One px/frame flow per consecutive frame pair, after the preprocessing chain.
std::vector<FlowField> estimate_flows(const std::vector<ScalarGrid>& frames,
                                      const RunConfig& cfg);

/// Geometry tying a raster to the periodic spectral box.
struct SpectralSetup {
    spectral::SpectralConfig cfg;
    double x0 = 0.0; // planar box origin, km
    double y0 = 0.0;
    int rnx = 0;
    int rny = 0;
    std::int64_t epoch = 0; // minutes; model time is hours after it
};

SpectralSetup spectral_setup(const geo::GeoFrame& frame, const RunConfig& cfg,
                             std::int64_t epoch);

/// Flows (any units) resampled bilinearly onto the uniform spectral raster in
/// km/h. Each flow is timed at the midpoint of its frame pair.
assimilate::FlowObservations to_observations(const std::vector<FlowField>& flows,
                                             const SpectralSetup& setup);

/// Fitted model plus what is needed to run it again.
struct ModelParams {
    assimilate::FitParams fit;
    SpectralSetup setup;
};

struct FitOutput {
    ModelParams model;
    assimilate::FitReport report;
};

/// Initial guess from the first flow, then L-BFGS.
FitOutput fit_flows(const std::vector<FlowField>& flows, const RunConfig& cfg);

/// Text header `SPEC 1` with the model geometry, then interleaved re/im
/// little-endian float64 coefficients.
std::string encode_params(const ModelParams& m);
ModelParams decode_params(std::string_view bytes);
void write_params(const ModelParams& m, const std::filesystem::path& path);
ModelParams read_params(const std::filesystem::path& path);

/// Forecast grids at every cadence tick after `latest` (the input itself
/// when the horizon is zero).
std::vector<ScalarGrid> forecast_nse(const ScalarGrid& latest, const ModelParams& model,
                                     const RunConfig& cfg);
std::vector<ScalarGrid> forecast_persistence(const ScalarGrid& latest, const RunConfig& cfg);
std::vector<ScalarGrid> forecast_frozen_flow(const ScalarGrid& latest, const FlowField& flow,
                                             const RunConfig& cfg);

/// Advection of `latest` under any sampler, emitting one grid per tick.
std::vector<ScalarGrid> advect_ticks(const ScalarGrid& latest, const dg::VelocitySampler& sampler,
                                     double t_latest_hours, const RunConfig& cfg);

struct MethodSeries {
    std::string name; // nse | persistence | optical_flow
    std::vector<ScalarGrid> grids;
};

struct ForecastReport {
    std::int64_t issue_time = 0; // minutes
    std::vector<std::int64_t> timestamps;
    std::vector<std::string> methods;
    std::vector<std::vector<double>> rmape; // [method][tick]
    std::vector<std::size_t> mask_sizes;    // excluded pixels per tick

    /// Aligned table: a `Date: YYYY-MM-DD` corner, one column per method,
    /// one HH:MM row per tick, whole percents.
    std::string table() const;
    /// `horizon_minutes method rmape` lines.
    std::string records() const;
};

/// Outlier mask from each truth frame, shared by every method.
ForecastReport evaluate(const std::vector<ScalarGrid>& truth,
                        const std::vector<MethodSeries>& methods, std::int64_t issue_time,
                        double percentile);

std::string format_table(std::string_view date, const std::vector<std::string>& rows,
                         const std::vector<std::string>& methods,
                         const std::vector<std::vector<double>>& values);

/// Calendar helpers for minute timestamps (UTC).
std::string format_date(std::int64_t minutes);
std::string format_clock(std::int64_t minutes);

struct PipelineResult {
    std::vector<ScalarGrid> frames;
    std::vector<ScalarGrid> truth;
    std::vector<FlowField> flows;
    FitOutput fit;
    std::vector<MethodSeries> forecasts;
    ForecastReport report;
    bool evaluated = false;
};

/// Full chain; synthesizes the scenario when io.input is empty. Writes every
/// artifact under `out` when it is non-empty.
PipelineResult run_pipeline(const RunConfig& cfg, const std::filesystem::path& out);

/// Reads frames matching a glob, sorted by timestamp.
std::vector<ScalarGrid> read_frames(const std::string& pattern);

} // namespace codcast::pipeline
