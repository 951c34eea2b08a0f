#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "skybox/geo.hpp"
#include "skybox/stats.hpp"
#include "skybox/trace.hpp"

namespace skybox {

enum class EnergyKind { solar, wind };

inline const char* to_string(EnergyKind k) { return k == EnergyKind::solar ? "solar" : "wind"; }

/// A renewable farm: location plus production history and forecast.
struct Site {
    std::string site_id;
    Location location;
    EnergyKind energy_kind = EnergyKind::solar;
    PowerTrace trace;
    Forecast forecast;
};

struct SiteRank {
    std::string site_id;
    double cov = std::numeric_limits<double>::quiet_NaN();
    double stable_power_watts = 0.0;
    bool cov_defined = true;  // degenerate (all-zero) traces rank last, flagged
};

/// Ranks farms by power stability: ascending CoV over the trailing window,
/// ties broken by descending stable power, then by site id. Sites with an
/// undefined CoV are kept, flagged, and placed last.
inline std::vector<SiteRank> rank_sites(std::span<const Site> sites, std::size_t window_steps) {
    std::vector<SiteRank> out;
    out.reserve(sites.size());
    for (const Site& s : sites) {
        if (window_steps > s.trace.samples.size())
            throw DataError("rank_sites: window exceeds trace length for '" + s.site_id + "'");
        const std::size_t w = window_steps == 0 ? s.trace.samples.size() : window_steps;
        std::span<const double> tail{s.trace.samples.data() + (s.trace.samples.size() - w), w};
        SiteRank r;
        r.site_id = s.site_id;
        r.stable_power_watts = stable_power(s.trace.samples, w);
        try {
            r.cov = cov(tail);
        } catch (const UndefinedCovError&) {
            r.cov_defined = false;
        }
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [](const SiteRank& a, const SiteRank& b) {
        if (a.cov_defined != b.cov_defined) return a.cov_defined;
        if (a.cov_defined && a.cov != b.cov) return a.cov < b.cov;
        if (a.stable_power_watts != b.stable_power_watts)
            return a.stable_power_watts > b.stable_power_watts;
        return a.site_id < b.site_id;
    });
    return out;
}

struct TopSelection {
    std::vector<std::string> site_ids;
    bool shortfall = false;  // fewer ranked sites than requested
};

inline TopSelection select_top(std::span<const SiteRank> ranked, std::size_t n) {
    TopSelection sel;
    const std::size_t take = std::min(n, ranked.size());
    sel.site_ids.reserve(take);
    for (std::size_t i = 0; i < take; ++i) sel.site_ids.push_back(ranked[i].site_id);
    sel.shortfall = n > ranked.size();
    return sel;
}

inline std::string ranking_to_csv(std::span<const SiteRank> ranked) {
    std::ostringstream out;
    out << "site_id,cov,stable_power\n";
    for (const auto& r : ranked) {
        out << r.site_id << ',' << (r.cov_defined ? csv::format_double(r.cov) : "undefined") << ','
            << csv::format_double(r.stable_power_watts) << '\n';
    }
    return out.str();
}

}  // namespace skybox
