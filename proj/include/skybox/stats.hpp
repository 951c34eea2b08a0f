#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "skybox/errors.hpp"

namespace skybox {

inline double mean(std::span<const double> series) {
    double sum = 0;
    for (double v : series) sum += v;
    return series.empty() ? 0.0 : sum / static_cast<double>(series.size());
}

/// Population standard deviation (the series is the whole population, not a sample).
inline double population_stddev(std::span<const double> series, double mu) {
    double acc = 0;
    for (double v : series) {
        const double d = v - mu;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(series.size()));
}

/// Coefficient of variation: population standard deviation divided by the mean.
/// Throws UndefinedCovError when the mean is not strictly positive.
inline double cov(std::span<const double> series) {
    if (series.empty()) throw UndefinedCovError("cov: empty series");
    const double mu = mean(series);
    if (!(mu > 0.0)) throw UndefinedCovError("cov: series mean is not positive");
    return population_stddev(series, mu) / mu;
}

/// Minimum production over the trailing window of the series.
inline double stable_power(std::span<const double> series, std::size_t window_steps) {
    if (window_steps == 0 || window_steps > series.size())
        throw DataError("stable_power: window must be in [1, series length]");
    double lo = series[series.size() - window_steps];
    for (std::size_t i = series.size() - window_steps; i < series.size(); ++i)
        lo = std::min(lo, series[i]);
    return lo;
}

}  // namespace skybox
