#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "skybox/geo.hpp"
#include "skybox/site.hpp"
#include "skybox/stats.hpp"

namespace skybox {

/// A size-K group of sites scored on its aggregated (summed) production.
struct Subgraph {
    std::vector<std::string> member_ids;  // sorted
    double agg_cov = std::numeric_limits<double>::infinity();  // infinity = undefined, ranks last
    double min_agg_power_watts = 0.0;
    double max_pairwise_miles = 0.0;
    bool cov_defined = false;
};

namespace detail {

inline Subgraph score_combination(std::span<const Site> sites, std::span<const std::size_t> idx) {
    Subgraph g;
    g.member_ids.reserve(idx.size());
    for (std::size_t i : idx) g.member_ids.push_back(sites[i].site_id);

    const std::size_t len = sites[idx.front()].trace.samples.size();
    std::vector<double> agg(len, 0.0);
    for (std::size_t i : idx) {
        const auto& s = sites[i].trace.samples;
        if (s.size() != len) throw DataError("subgraph scoring: traces differ in length");
        for (std::size_t t = 0; t < len; ++t) agg[t] += s[t];
    }
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b)
            g.max_pairwise_miles =
                std::max(g.max_pairwise_miles,
                         distance_miles(sites[idx[a]].location, sites[idx[b]].location));
    g.min_agg_power_watts = stable_power(agg, agg.size());
    try {
        g.agg_cov = cov(agg);
        g.cov_defined = true;
    } catch (const UndefinedCovError&) {
    }
    return g;
}

}  // namespace detail

/// Enumerates every k-combination of sites whose maximum pairwise distance is
/// within the bound, scoring each. Combinations come out in lexicographic
/// order of member ids. An empty result is valid.
inline std::vector<Subgraph> enumerate_candidates(std::span<const Site> sites, std::size_t k,
                                                  double max_miles) {
    if (k < 2) throw DataError("enumerate_candidates: k must be >= 2");
    if (sites.size() < k) throw DataError("enumerate_candidates: fewer sites than k");

    std::vector<std::size_t> order(sites.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sites[a].site_id < sites[b].site_id; });

    std::vector<Subgraph> out;
    std::vector<std::size_t> pick(k);
    // pick holds positions into `order`
    std::vector<std::size_t> pos(k);
    std::size_t depth = 0;
    pos[0] = 0;
    while (true) {
        if (pos[depth] > sites.size() - (k - depth)) {
            if (depth == 0) break;
            --depth;
            ++pos[depth];
            continue;
        }
        pick[depth] = order[pos[depth]];
        bool ok = true;
        for (std::size_t j = 0; j < depth && ok; ++j)
            ok = distance_miles(sites[pick[j]].location, sites[pick[depth]].location) <= max_miles;
        if (!ok) {
            ++pos[depth];
            continue;
        }
        if (depth + 1 == k) {
            out.push_back(detail::score_combination(sites, pick));
            ++pos[depth];
        } else {
            ++depth;
            pos[depth] = pos[depth - 1] + 1;
        }
    }
    return out;
}

/// Ascending aggregated CoV; ties by descending stable aggregated power, then
/// lexicographic member ids. Undefined CoV sorts last.
inline std::vector<Subgraph> rank_candidates(std::vector<Subgraph> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(), [](const Subgraph& a,
                                                              const Subgraph& b) {
        if (a.cov_defined != b.cov_defined) return a.cov_defined;
        if (a.cov_defined && a.agg_cov != b.agg_cov) return a.agg_cov < b.agg_cov;
        if (a.min_agg_power_watts != b.min_agg_power_watts)
            return a.min_agg_power_watts > b.min_agg_power_watts;
        return a.member_ids < b.member_ids;
    });
    return candidates;
}

/// Greedy scan in rank order; a candidate is taken iff it shares no site with
/// any already-taken subgraph.
inline std::vector<Subgraph> select_disjoint(std::span<const Subgraph> ranked) {
    std::vector<Subgraph> out;
    std::set<std::string> used;
    for (const Subgraph& g : ranked) {
        bool disjoint = true;
        for (const auto& id : g.member_ids)
            if (used.count(id)) {
                disjoint = false;
                break;
            }
        if (!disjoint) continue;
        for (const auto& id : g.member_ids) used.insert(id);
        out.push_back(g);
    }
    return out;
}

struct ReidentifyResult {
    std::vector<Subgraph> subgraphs;
    std::vector<std::string> changed_site_ids;  // membership differs from the previous selection
};

/// Full re-run of enumerate -> rank -> select over the given sites (callers
/// pass traces windowed to the most recent period). Sites whose subgraph
/// membership changed are listed so only the affected rMDCs get re-solved.
inline ReidentifyResult reidentify(std::span<const Site> sites, std::span<const Subgraph> current,
                                   std::size_t k, double max_miles) {
    ReidentifyResult r;
    r.subgraphs = select_disjoint(rank_candidates(enumerate_candidates(sites, k, max_miles)));

    auto membership = [](std::span<const Subgraph> gs) {
        std::map<std::string, std::vector<std::string>> m;
        for (const auto& g : gs)
            for (const auto& id : g.member_ids) m[id] = g.member_ids;
        return m;
    };
    const auto before = membership(current);
    const auto after = membership(r.subgraphs);
    std::set<std::string> changed;
    for (const Site& s : sites) {
        const auto b = before.find(s.site_id);
        const auto a = after.find(s.site_id);
        const bool was = b != before.end();
        const bool is = a != after.end();
        if (was != is || (was && is && b->second != a->second)) changed.insert(s.site_id);
    }
    r.changed_site_ids.assign(changed.begin(), changed.end());
    return r;
}

/// Maximal spans where every rolling window of min_steps has CoV below the
/// threshold. Windows with an undefined CoV (zero mean) never qualify.
inline std::vector<std::pair<std::size_t, std::size_t>> complementary_window(
    std::span<const double> agg_series, double cov_threshold, std::size_t min_steps) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (min_steps == 0 || min_steps > agg_series.size()) return out;
    const std::size_t n_windows = agg_series.size() - min_steps + 1;
    std::size_t run_start = 0;
    bool in_run = false;
    for (std::size_t i = 0; i <= n_windows; ++i) {
        bool stable = false;
        if (i < n_windows) {
            try {
                stable = cov(agg_series.subspan(i, min_steps)) < cov_threshold;
            } catch (const UndefinedCovError&) {
            }
        }
        if (stable && !in_run) {
            run_start = i;
            in_run = true;
        } else if (!stable && in_run) {
            out.emplace_back(run_start, (i - 1) - run_start + min_steps);
            in_run = false;
        }
    }
    return out;
}

}  // namespace skybox
