#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "skybox/errors.hpp"

namespace skybox {

struct Location {
    double latitude = 0.0;   // degrees, [-90, 90]
    double longitude = 0.0;  // degrees, [-180, 180]

    void validate() const {
        if (!(latitude >= -90.0 && latitude <= 90.0))
            throw DataError("latitude out of [-90, 90]");
        if (!(longitude >= -180.0 && longitude <= 180.0))
            throw DataError("longitude out of [-180, 180]");
    }
};

inline constexpr double kEarthRadiusMiles = 3958.8;

/// Great-circle distance (haversine) in miles.
inline double distance_miles(const Location& a, const Location& b) {
    constexpr double rad = std::numbers::pi / 180.0;
    const double phi1 = a.latitude * rad;
    const double phi2 = b.latitude * rad;
    const double dphi = (b.latitude - a.latitude) * rad;
    const double dlam = (b.longitude - a.longitude) * rad;
    const double s1 = std::sin(dphi / 2);
    const double s2 = std::sin(dlam / 2);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusMiles * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Coordinate-wise mean of the given locations. Adequate for continental-scale
/// cost accounting of transmission lines.
inline Location geometric_center(std::span<const Location> points) {
    if (points.empty()) throw DataError("geometric_center: no points");
    Location c;
    for (const auto& p : points) {
        c.latitude += p.latitude;
        c.longitude += p.longitude;
    }
    c.latitude /= static_cast<double>(points.size());
    c.longitude /= static_cast<double>(points.size());
    return c;
}

}  // namespace skybox
