#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "skybox/csv.hpp"
#include "skybox/errors.hpp"
#include "skybox/rng.hpp"
#include "skybox/stats.hpp"

namespace skybox {

/// Per-site time series of renewable production in watts.
struct PowerTrace {
    std::string site_id;
    double step_seconds = 3600.0;
    std::vector<double> samples;  // watts, each in [0, capacity_watts]
    double capacity_watts = 1.0;  // nameplate maximum
    std::int64_t start_epoch_seconds = 0;

    void validate() const {
        if (samples.empty()) throw DataError("power trace '" + site_id + "': empty");
        if (!(step_seconds > 0)) throw DataError("power trace '" + site_id + "': step must be > 0");
        if (!(capacity_watts > 0))
            throw DataError("power trace '" + site_id + "': capacity must be > 0");
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (!(samples[i] >= 0.0 && samples[i] <= capacity_watts))
                throw DataError("power trace '" + site_id + "': sample " + std::to_string(i) +
                                " outside [0, capacity]");
    }
};

/// Horizon-limited prediction of a site's production.
struct Forecast {
    std::string site_id;
    std::size_t horizon_steps = 0;
    std::vector<double> predicted;   // watts, >= 0
    double error_ratio_bound = 0.0;  // symmetric fraction in [0, 1]
};

struct TraceCsvSchema {
    double capacity_watts = 1.0;
    std::string site_id;  // defaults to the file stem when empty
};

/// Loads a (timestamp, normalized_production) CSV. Timestamps must be strictly
/// increasing and uniformly spaced; normalized values must lie in [0, 1].
/// Samples are normalized values times the schema's capacity.
inline PowerTrace load_power_trace(const std::string& path, const TraceCsvSchema& schema) {
    const csv::Table t = csv::read(path);
    if (t.header.empty()) throw ParseError(path, 0, "missing header row");
    const std::size_t c_ts = t.column("timestamp");
    const std::size_t c_np = t.column("normalized_production");
    if (t.rows.empty()) throw ParseError(path, 1, "power trace has no data rows");
    if (!(schema.capacity_watts > 0)) throw DataError("trace schema capacity must be > 0");

    PowerTrace out;
    out.site_id =
        schema.site_id.empty() ? std::filesystem::path(path).stem().string() : schema.site_id;
    out.capacity_watts = schema.capacity_watts;
    out.samples.reserve(t.rows.size());

    std::int64_t prev_ts = 0;
    std::int64_t step = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t lineno = i + 2;  // header is line 1
        const std::int64_t ts = csv::parse_iso8601(t.rows[i][c_ts], path, lineno);
        if (i == 0) {
            out.start_epoch_seconds = ts;
        } else if (ts <= prev_ts) {
            throw ParseError(path, lineno, "timestamps not strictly increasing");
        } else if (i == 1) {
            step = ts - prev_ts;
        } else if (ts - prev_ts != step) {
            throw ParseError(path, lineno, "non-uniform timestamp spacing");
        }
        prev_ts = ts;
        const double v = csv::parse_double(t, i, c_np);
        if (!(v >= 0.0 && v <= 1.0))
            throw ParseError(path, lineno, "normalized production outside [0, 1]");
        out.samples.push_back(v * schema.capacity_watts);
    }
    out.step_seconds = t.rows.size() >= 2 ? static_cast<double>(step) : 3600.0;
    out.validate();
    return out;
}

/// Writes the trace in the load_power_trace schema. The normalized value is
/// nudged by ulps so that reloading (normalized x capacity) reproduces each
/// sample bit-exactly whenever such a representation exists.
inline void save_power_trace(const PowerTrace& trace, const std::string& path) {
    trace.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "timestamp,normalized_production\n";
    const std::int64_t step = static_cast<std::int64_t>(trace.step_seconds);
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const double x = trace.samples[i];
        // Nudge the normalized value by ulps until multiplying by the capacity
        // reproduces the sample bit-exactly (possible whenever the sample was
        // itself built as normalized x capacity, e.g. any loaded trace).
        double n = x / trace.capacity_watts;
        for (int j = 1; j <= 4 && n * trace.capacity_watts != x; ++j) {
            double cand = x / trace.capacity_watts;
            for (int s = 0; s < j; ++s) cand = std::nextafter(cand, 2.0);
            if (cand * trace.capacity_watts == x) {
                n = cand;
                break;
            }
            cand = x / trace.capacity_watts;
            for (int s = 0; s < j; ++s) cand = std::nextafter(cand, -1.0);
            if (cand * trace.capacity_watts == x) n = cand;
        }
        out << csv::format_iso8601(trace.start_epoch_seconds + static_cast<std::int64_t>(i) * step)
            << ',' << csv::format_double(n) << '\n';
    }
}

/// Rescales the trace so its nameplate capacity matches the rMDC peak power.
inline PowerTrace scale_to_rmdc(const PowerTrace& trace, double rmdc_peak_watts) {
    trace.validate();
    if (!(rmdc_peak_watts > 0)) throw DataError("rmdc peak must be > 0");
    PowerTrace out = trace;
    const double f = rmdc_peak_watts / trace.capacity_watts;
    for (double& v : out.samples) v *= f;
    out.capacity_watts = rmdc_peak_watts;
    return out;
}

/// Synthesizes a forecast by perturbing each sample with independent uniform
/// multiplicative noise in [-ratio, +ratio]. Deterministic for a fixed seed.
inline Forecast inject_error(const PowerTrace& trace, double ratio, std::uint64_t seed) {
    trace.validate();
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw DataError("error ratio must be in [0, 1]");
    std::mt19937_64 gen(seed);
    Forecast f;
    f.site_id = trace.site_id;
    f.error_ratio_bound = ratio;
    f.horizon_steps = trace.samples.size();
    f.predicted.reserve(trace.samples.size());
    for (double actual : trace.samples) {
        const double u = uniform_in(gen, -ratio, ratio);
        f.predicted.push_back(std::max(0.0, actual * (1.0 + u)));
    }
    return f;
}

enum class PhasePattern {
    anti_phase,  // one-hot rotation: site i produces peak when t % n == i
    in_phase,    // all sites identical square waves (for negative fixtures)
};

/// Generates n individually-variable traces whose sum is constant under the
/// anti_phase pattern. For n == 3 the rotation is the "third offsets" case.
inline std::vector<PowerTrace> synth_complementary(std::size_t n_sites, std::size_t steps,
                                                   double peak_watts, PhasePattern phase,
                                                   double step_seconds = 3600.0) {
    if (n_sites == 0) throw DataError("synth_complementary: need at least one site");
    if (steps == 0) throw DataError("synth_complementary: steps must be > 0");
    if (!(peak_watts > 0)) throw DataError("synth_complementary: peak must be > 0");
    std::vector<PowerTrace> out;
    out.reserve(n_sites);
    for (std::size_t i = 0; i < n_sites; ++i) {
        PowerTrace t;
        t.site_id = "synth-" + std::to_string(i);
        t.step_seconds = step_seconds;
        t.capacity_watts = peak_watts;
        t.samples.resize(steps, 0.0);
        for (std::size_t s = 0; s < steps; ++s) {
            const bool on = phase == PhasePattern::anti_phase ? (s % n_sites == i)
                                                              : (s % 2 == 0);
            t.samples[s] = on ? peak_watts : 0.0;
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace skybox
