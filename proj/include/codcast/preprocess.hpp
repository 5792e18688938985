#pragma once

// Intensity conditioning of COD images ahead of flow estimation.

#include "codcast/raster.hpp"

#include <cstddef>
#include <vector>

namespace codcast::preprocess {

struct PreprocessConfig {
    double percentile = 0.90;
    bool mask_outliers = true;

    void validate() const;
};

/// C -> sigma * sqrt(log(1 + (C/sigma)^2) / log 2). NaN passes through.
ScalarGrid log_transform(const ScalarGrid& grid, double sigma);

/// Nearest-rank percentile of the finite pixels: the ceil(p*n)-th smallest value.
double select_sigma(const ScalarGrid& grid, double percentile);

/// Scales `prev` so that its median over nonzero finite pixels matches `next`'s.
ScalarGrid equalize_median(const ScalarGrid& prev, const ScalarGrid& next);

/// Indices of finite pixels strictly above the nearest-rank percentile.
std::vector<std::size_t> outlier_mask(const ScalarGrid& grid, double percentile);

/// Nearest-rank percentile of an arbitrary sample (the sample is copied).
double nearest_rank(std::vector<double> values, double percentile);

/// Median over finite values > 0; averages the two middle values for even counts.
/// Returns NaN when no such value exists.
double nonzero_median(const ScalarGrid& grid);

/// The pair chain used before flow estimation: equalize `prev` against `next`,
/// pick sigma on `next`, log-transform both with that sigma.
struct PreparedPair {
    ScalarGrid prev;
    ScalarGrid next;
    double sigma = 0.0;
};

PreparedPair prepare_pair(const ScalarGrid& prev, const ScalarGrid& next,
                          const PreprocessConfig& cfg);

} // namespace codcast::preprocess
