#include "codcast/preprocess.hpp"

#include "codcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace codcast::preprocess {

namespace {

std::vector<double> finite_values(const ScalarGrid& grid) {
    std::vector<double> out;
    out.reserve(grid.values.size());
    for (double v : grid.values) {
        if (std::isfinite(v)) out.push_back(v);
    }
    return out;
}

void check_percentile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidConfig("percentile must lie in (0, 1)");
    }
}

} // namespace

void PreprocessConfig::validate() const { check_percentile(percentile); }

ScalarGrid log_transform(const ScalarGrid& grid, double sigma) {
    if (!(sigma > 0.0)) {
        throw NonPositiveSigma("log_transform requires sigma > 0");
    }
    const double inv_log2 = 1.0 / std::log(2.0);
    ScalarGrid out = grid;
    for (double& c : out.values) {
        if (std::isnan(c)) continue;
        const double z = c / sigma;
        c = sigma * std::sqrt(std::log1p(z * z) * inv_log2);
    }
    return out;
}

double nearest_rank(std::vector<double> values, double percentile) {
    check_percentile(percentile);
    if (values.empty()) throw EmptyGrid("percentile of an empty sample");
    const auto n = values.size();
    // Guard against p*n landing a hair above an integer.
    auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                     values.end());
    return values[rank - 1];
}

double select_sigma(const ScalarGrid& grid, double percentile) {
    auto vals = finite_values(grid);
    if (std::none_of(vals.begin(), vals.end(), [](double v) { return v != 0.0; })) {
        throw EmptyGrid("select_sigma needs at least one finite nonzero pixel");
    }
    return nearest_rank(std::move(vals), percentile);
}

double nonzero_median(const ScalarGrid& grid) {
    std::vector<double> vals;
    for (double v : grid.values) {
        if (std::isfinite(v) && v > 0.0) vals.push_back(v);
    }
    if (vals.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(vals.begin(), vals.end());
    const auto n = vals.size();
    return n % 2 == 1 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

ScalarGrid equalize_median(const ScalarGrid& prev, const ScalarGrid& next) {
    if (!prev.same_shape(next)) throw ShapeMismatch("equalize_median: shapes differ");
    const double m_next = nonzero_median(next);
    if (std::isnan(m_next)) throw EmptyGrid("equalize_median: next has no nonzero pixel");
    const double m_prev = nonzero_median(prev);
    if (std::isnan(m_prev) || m_prev == 0.0) {
        throw ZeroMedian("equalize_median: prev has no nonzero median");
    }
    const double scale = m_next / m_prev;
    ScalarGrid out = prev;
    if (scale == 1.0) return out;
    for (double& v : out.values) {
        if (!std::isnan(v)) v *= scale;
    }
    return out;
}

std::vector<std::size_t> outlier_mask(const ScalarGrid& grid, double percentile) {
    auto vals = finite_values(grid);
    if (vals.empty()) throw EmptyGrid("outlier_mask on a grid without finite pixels");
    const double threshold = nearest_rank(std::move(vals), percentile);
    std::vector<std::size_t> mask;
    for (std::size_t k = 0; k < grid.values.size(); ++k) {
        if (std::isfinite(grid.values[k]) && grid.values[k] > threshold) mask.push_back(k);
    }
    return mask;
}

PreparedPair prepare_pair(const ScalarGrid& prev, const ScalarGrid& next,
                          const PreprocessConfig& cfg) {
    cfg.validate();
    PreparedPair out;
    out.prev = equalize_median(prev, next);
    out.next = next;
    out.sigma = select_sigma(next, cfg.percentile);
    if (out.sigma == 0.0) {
        // Mostly clear-sky frame: take the percentile over the cloudy pixels instead.
        std::vector<double> nz;
        for (double v : next.values) {
            if (std::isfinite(v) && v > 0.0) nz.push_back(v);
        }
        out.sigma = nearest_rank(std::move(nz), cfg.percentile);
    }
    out.prev = log_transform(out.prev, out.sigma);
    out.next = log_transform(out.next, out.sigma);
    return out;
}

} // namespace codcast::preprocess
