#pragma once

// Run configuration: `section.key = value` lines with `#` comments, plus
// command-line overrides of the same keys.

#include "codcast/dgadvect.hpp"
#include "codcast/optflow.hpp"
#include "codcast/preprocess.hpp"
#include "codcast/spectral.hpp"
#include "codcast/synth.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace codcast {

struct RunConfig {
    /// spectral.Nx/Ny/nu/dt; nu in km^2/h, dt in hours. Lx/Ly come from the raster.
    spectral::SpectralConfig spectral{16, 16, 1.0, 1.0, 5000.0, 0.125};
    /// Side of the uniform raster the flows are resampled onto for fitting.
    int spectral_raster = 64;

    int dg_Kx = 32;
    int dg_Ky = 32;
    int dg_N = 3;
    dg::AdvectOptions dg;

    optflow::FlowConfig flow;
    preprocess::PreprocessConfig preprocess;

    int fit_max_iterations = 200;
    double fit_grad_tol = 1e-6;
    bool fit_precondition = true;

    std::string io_input;          // glob of input frames; empty -> synthesize
    std::string io_truth;          // glob of truth frames for evaluation (optional)
    std::string io_output = "out";

    int forecast_horizon = 75; // minutes
    int forecast_cadence = 15; // minutes

    synth::ScenarioParams synth;

    /// Applies one `key = value` assignment; throws InvalidConfig on unknown keys.
    void set(std::string_view key, std::string_view value);
    void apply_text(std::string_view text);
    void load(const std::filesystem::path& path);
    void validate() const;

    /// Every key with its current value, one `key = value` line each.
    std::string dump() const;
    static std::vector<std::string> keys();
};

/// Files in the directory of `pattern` whose names match its last component
/// (`*` and `?` wildcards), sorted by name.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

} // namespace codcast
