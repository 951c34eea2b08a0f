#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "skybox/accounting.hpp"
#include "skybox/errors.hpp"
#include "skybox/policies.hpp"

#include "json.hpp"

namespace skybox {

struct SiteConfig {
    std::string site_id;
    double latitude = 0.0;
    double longitude = 0.0;
    EnergyKind energy_kind = EnergyKind::solar;
    std::string trace_path;
    double capacity_watts = 0.0;  // 0 = nameplate equals the rMDC peak
};

struct WorkloadConfig {
    std::string kind = "synthetic";  // "file" | "synthetic"
    std::string vm_trace_path;
    // Synthetic generator: closed-loop admission against rMDC capacity.
    double target_utilization = 0.9;
    double evictable_fraction = 0.1;
    double power_min_watts = 100.0;
    double power_max_watts = 300.0;
    double mem_min_gb = 1.0;
    double mem_max_gb = 32.0;
    int lifetime_min_steps = 2;
    int lifetime_max_steps = 24;
    double lifetime_error_ratio = 0.0;  // +/- on the predicted lifetime
    int max_vms = 64;
};

struct BatteryConfig {
    bool enabled = true;
    double rate_c = 4.0;  // max power as a multiple of capacity
    double round_trip_efficiency = 1.0;
    double extra_hours_distr_battery = 1.0;
};

struct SolverConfig {
    std::int64_t max_nodes = 2'000'000;
    double max_seconds = 10.0;
    bool grid_only_objective = false;
};

/// One self-contained experiment manifest. Every command is reproducible from
/// this file alone.
struct RunConfig {
    std::vector<SiteConfig> sites;
    WorkloadConfig workload;
    RmdcConfig rmdc;
    CarbonParams carbon;
    CostParams cost;
    PolicyKind policy = PolicyKind::skybox_mip;
    int subgraph_size = 3;
    double max_miles = 500.0;
    int horizon_steps = 3;
    int resolve_interval_steps = 1;
    int reidentify_interval_steps = 336;  // 14 days at one-hour steps
    double avail_target = 0.9;
    double evictable_floor = 0.9;
    double forecast_error_ratio = 0.0;
    double power_migr_wh_per_gb = 0.1;
    double rmdc_peak_watts = 0.0;  // 0 = racks x rack power from the rMDC config
    BatteryConfig battery;
    SolverConfig solver;
    std::uint64_t seed = 42;
    int top_sites = 0;      // 0 = keep all sites
    std::int64_t steps_limit = 0;  // 0 = full trace length
    std::string out_dir = "out";

    double effective_rmdc_peak_watts() const {
        return rmdc_peak_watts > 0 ? rmdc_peak_watts : rmdc.peak_server_watts();
    }

    void validate() const {
        if (sites.empty()) throw ConfigError("config: 'sites' must not be empty");
        std::set<std::string> ids;
        for (const auto& s : sites) {
            if (s.site_id.empty()) throw ConfigError("config: site with empty id");
            if (!ids.insert(s.site_id).second)
                throw ConfigError("config: duplicate site id '" + s.site_id + "'");
            if (s.trace_path.empty())
                throw ConfigError("config: site '" + s.site_id + "' has no trace_path");
            Location{s.latitude, s.longitude}.validate();
        }
        if (workload.kind != "file" && workload.kind != "synthetic")
            throw ConfigError("config: workload.kind must be 'file' or 'synthetic'");
        if (workload.kind == "file" && workload.vm_trace_path.empty())
            throw ConfigError("config: workload.kind 'file' requires vm_trace_path");
        if (subgraph_size < 2) throw ConfigError("config: subgraph_size must be >= 2");
        if (horizon_steps < 1) throw ConfigError("config: horizon_steps must be >= 1");
        if (resolve_interval_steps < 1)
            throw ConfigError("config: resolve_interval_steps must be >= 1");
        if (reidentify_interval_steps < 1)
            throw ConfigError("config: reidentify_interval_steps must be >= 1");
        if (!(avail_target >= 0 && avail_target <= 1))
            throw ConfigError("config: avail_target must be in [0, 1]");
        if (!(evictable_floor >= 0 && evictable_floor <= 1))
            throw ConfigError("config: evictable_floor must be in [0, 1]");
        if (!(forecast_error_ratio >= 0 && forecast_error_ratio <= 1))
            throw ConfigError("config: forecast_error_ratio must be in [0, 1]");
        if (power_migr_wh_per_gb < 0)
            throw ConfigError("config: power_migr_wh_per_gb must be >= 0");
        if (max_miles < 0) throw ConfigError("config: max_miles must be >= 0");
        if (!(battery.round_trip_efficiency > 0 && battery.round_trip_efficiency <= 1))
            throw ConfigError("config: battery.round_trip_efficiency must be in (0, 1]");
        if (!(battery.rate_c > 0)) throw ConfigError("config: battery.rate_c must be > 0");
        if (steps_limit < 0) throw ConfigError("config: steps_limit must be >= 0");
        if (top_sites < 0) throw ConfigError("config: top_sites must be >= 0");
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void opt(const nlohmann::json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        try {
            out = obj.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("config: bad value type for '") + key + "'");
        }
    }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::opt;
    using detail::reject_unknown_keys;
    if (!j.is_object()) throw ConfigError("config: root must be an object");
    reject_unknown_keys(
        j,
        {"sites", "workload", "rmdc", "carbon", "cost", "policy", "subgraph_size", "max_miles",
         "horizon_steps", "resolve_interval_steps", "reidentify_interval_steps", "avail_target",
         "evictable_floor", "forecast_error_ratio", "power_migr_wh_per_gb", "rmdc_peak_watts",
         "battery", "solver", "seed", "top_sites", "steps_limit", "out_dir"},
        "root");

    RunConfig c;
    if (j.contains("sites")) {
        for (const auto& js : j.at("sites")) {
            reject_unknown_keys(
                js, {"site_id", "latitude", "longitude", "energy_kind", "trace_path",
                     "capacity_watts"},
                "sites[]");
            SiteConfig s;
            opt(js, "site_id", s.site_id);
            opt(js, "latitude", s.latitude);
            opt(js, "longitude", s.longitude);
            std::string kind = "solar";
            opt(js, "energy_kind", kind);
            if (kind == "solar")
                s.energy_kind = EnergyKind::solar;
            else if (kind == "wind")
                s.energy_kind = EnergyKind::wind;
            else
                throw ConfigError("config: energy_kind must be 'solar' or 'wind'");
            opt(js, "trace_path", s.trace_path);
            opt(js, "capacity_watts", s.capacity_watts);
            c.sites.push_back(std::move(s));
        }
    }
    if (j.contains("workload")) {
        const auto& jw = j.at("workload");
        reject_unknown_keys(jw,
                            {"kind", "vm_trace_path", "target_utilization", "evictable_fraction",
                             "power_min_watts", "power_max_watts", "mem_min_gb", "mem_max_gb",
                             "lifetime_min_steps", "lifetime_max_steps", "lifetime_error_ratio",
                             "max_vms"},
                            "workload");
        opt(jw, "kind", c.workload.kind);
        opt(jw, "vm_trace_path", c.workload.vm_trace_path);
        opt(jw, "target_utilization", c.workload.target_utilization);
        opt(jw, "evictable_fraction", c.workload.evictable_fraction);
        opt(jw, "power_min_watts", c.workload.power_min_watts);
        opt(jw, "power_max_watts", c.workload.power_max_watts);
        opt(jw, "mem_min_gb", c.workload.mem_min_gb);
        opt(jw, "mem_max_gb", c.workload.mem_max_gb);
        opt(jw, "lifetime_min_steps", c.workload.lifetime_min_steps);
        opt(jw, "lifetime_max_steps", c.workload.lifetime_max_steps);
        opt(jw, "lifetime_error_ratio", c.workload.lifetime_error_ratio);
        opt(jw, "max_vms", c.workload.max_vms);
    }
    if (j.contains("rmdc")) {
        const auto& jr = j.at("rmdc");
        reject_unknown_keys(jr,
                            {"racks", "servers_per_rack", "cores_per_server", "per_core_watts",
                             "rack_power_kw", "cooling_kw", "battery_backup_minutes",
                             "footprint_rack_m2", "footprint_cooling_m2", "footprint_battery_m2"},
                            "rmdc");
        opt(jr, "racks", c.rmdc.racks);
        opt(jr, "servers_per_rack", c.rmdc.servers_per_rack);
        opt(jr, "cores_per_server", c.rmdc.cores_per_server);
        opt(jr, "per_core_watts", c.rmdc.per_core_watts);
        opt(jr, "rack_power_kw", c.rmdc.rack_power_kw);
        opt(jr, "cooling_kw", c.rmdc.cooling_kw);
        opt(jr, "battery_backup_minutes", c.rmdc.battery_backup_minutes);
        opt(jr, "footprint_rack_m2", c.rmdc.footprint_rack_m2);
        opt(jr, "footprint_cooling_m2", c.rmdc.footprint_cooling_m2);
        opt(jr, "footprint_battery_m2", c.rmdc.footprint_battery_m2);
    }
    if (j.contains("carbon")) {
        const auto& jc = j.at("carbon");
        reject_unknown_keys(jc,
                            {"intensity_solar_g_per_kwh", "intensity_wind_g_per_kwh",
                             "intensity_brown_g_per_kwh", "embodied_server_kg",
                             "server_lifetime_years", "embodied_battery_kg_per_kwh",
                             "battery_lifetime_years", "embodied_cooling_kg_per_m2",
                             "cooling_lifetime_years"},
                            "carbon");
        opt(jc, "intensity_solar_g_per_kwh", c.carbon.intensity_solar_g_per_kwh);
        opt(jc, "intensity_wind_g_per_kwh", c.carbon.intensity_wind_g_per_kwh);
        opt(jc, "intensity_brown_g_per_kwh", c.carbon.intensity_brown_g_per_kwh);
        opt(jc, "embodied_server_kg", c.carbon.embodied_server_kg);
        opt(jc, "server_lifetime_years", c.carbon.server_lifetime_years);
        opt(jc, "embodied_battery_kg_per_kwh", c.carbon.embodied_battery_kg_per_kwh);
        opt(jc, "battery_lifetime_years", c.carbon.battery_lifetime_years);
        opt(jc, "embodied_cooling_kg_per_m2", c.carbon.embodied_cooling_kg_per_m2);
        opt(jc, "cooling_lifetime_years", c.carbon.cooling_lifetime_years);
    }
    if (j.contains("cost")) {
        const auto& jc = j.at("cost");
        reject_unknown_keys(jc,
                            {"server_usd", "server_lifetime_years", "battery_usd_per_kwh",
                             "battery_lifetime_years", "transmission_usd_per_km",
                             "transmission_lifetime_years", "construction_usd_per_watt",
                             "construction_lifetime_years"},
                            "cost");
        opt(jc, "server_usd", c.cost.server_usd);
        opt(jc, "server_lifetime_years", c.cost.server_lifetime_years);
        opt(jc, "battery_usd_per_kwh", c.cost.battery_usd_per_kwh);
        opt(jc, "battery_lifetime_years", c.cost.battery_lifetime_years);
        opt(jc, "transmission_usd_per_km", c.cost.transmission_usd_per_km);
        opt(jc, "transmission_lifetime_years", c.cost.transmission_lifetime_years);
        opt(jc, "construction_usd_per_watt", c.cost.construction_usd_per_watt);
        opt(jc, "construction_lifetime_years", c.cost.construction_lifetime_years);
    }
    if (j.contains("battery")) {
        const auto& jb = j.at("battery");
        reject_unknown_keys(
            jb, {"enabled", "rate_c", "round_trip_efficiency", "extra_hours_distr_battery"},
            "battery");
        opt(jb, "enabled", c.battery.enabled);
        opt(jb, "rate_c", c.battery.rate_c);
        opt(jb, "round_trip_efficiency", c.battery.round_trip_efficiency);
        opt(jb, "extra_hours_distr_battery", c.battery.extra_hours_distr_battery);
    }
    if (j.contains("solver")) {
        const auto& js = j.at("solver");
        reject_unknown_keys(js, {"max_nodes", "max_seconds", "grid_only_objective"}, "solver");
        opt(js, "max_nodes", c.solver.max_nodes);
        opt(js, "max_seconds", c.solver.max_seconds);
        opt(js, "grid_only_objective", c.solver.grid_only_objective);
    }
    if (j.contains("policy")) c.policy = parse_policy(j.at("policy").get<std::string>());
    opt(j, "subgraph_size", c.subgraph_size);
    opt(j, "max_miles", c.max_miles);
    opt(j, "horizon_steps", c.horizon_steps);
    opt(j, "resolve_interval_steps", c.resolve_interval_steps);
    opt(j, "reidentify_interval_steps", c.reidentify_interval_steps);
    opt(j, "avail_target", c.avail_target);
    opt(j, "evictable_floor", c.evictable_floor);
    opt(j, "forecast_error_ratio", c.forecast_error_ratio);
    opt(j, "power_migr_wh_per_gb", c.power_migr_wh_per_gb);
    opt(j, "rmdc_peak_watts", c.rmdc_peak_watts);
    opt(j, "seed", c.seed);
    opt(j, "top_sites", c.top_sites);
    opt(j, "steps_limit", c.steps_limit);
    opt(j, "out_dir", c.out_dir);
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: invalid JSON in '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["sites"] = nlohmann::json::array();
    for (const auto& s : c.sites)
        j["sites"].push_back({{"site_id", s.site_id},
                              {"latitude", s.latitude},
                              {"longitude", s.longitude},
                              {"energy_kind", to_string(s.energy_kind)},
                              {"trace_path", s.trace_path},
                              {"capacity_watts", s.capacity_watts}});
    j["workload"] = {{"kind", c.workload.kind},
                     {"vm_trace_path", c.workload.vm_trace_path},
                     {"target_utilization", c.workload.target_utilization},
                     {"evictable_fraction", c.workload.evictable_fraction},
                     {"power_min_watts", c.workload.power_min_watts},
                     {"power_max_watts", c.workload.power_max_watts},
                     {"mem_min_gb", c.workload.mem_min_gb},
                     {"mem_max_gb", c.workload.mem_max_gb},
                     {"lifetime_min_steps", c.workload.lifetime_min_steps},
                     {"lifetime_max_steps", c.workload.lifetime_max_steps},
                     {"lifetime_error_ratio", c.workload.lifetime_error_ratio},
                     {"max_vms", c.workload.max_vms}};
    j["rmdc"] = {{"racks", c.rmdc.racks},
                 {"servers_per_rack", c.rmdc.servers_per_rack},
                 {"cores_per_server", c.rmdc.cores_per_server},
                 {"per_core_watts", c.rmdc.per_core_watts},
                 {"rack_power_kw", c.rmdc.rack_power_kw},
                 {"cooling_kw", c.rmdc.cooling_kw},
                 {"battery_backup_minutes", c.rmdc.battery_backup_minutes},
                 {"footprint_rack_m2", c.rmdc.footprint_rack_m2},
                 {"footprint_cooling_m2", c.rmdc.footprint_cooling_m2},
                 {"footprint_battery_m2", c.rmdc.footprint_battery_m2}};
    j["carbon"] = {{"intensity_solar_g_per_kwh", c.carbon.intensity_solar_g_per_kwh},
                   {"intensity_wind_g_per_kwh", c.carbon.intensity_wind_g_per_kwh},
                   {"intensity_brown_g_per_kwh", c.carbon.intensity_brown_g_per_kwh},
                   {"embodied_server_kg", c.carbon.embodied_server_kg},
                   {"server_lifetime_years", c.carbon.server_lifetime_years},
                   {"embodied_battery_kg_per_kwh", c.carbon.embodied_battery_kg_per_kwh},
                   {"battery_lifetime_years", c.carbon.battery_lifetime_years},
                   {"embodied_cooling_kg_per_m2", c.carbon.embodied_cooling_kg_per_m2},
                   {"cooling_lifetime_years", c.carbon.cooling_lifetime_years}};
    j["cost"] = {{"server_usd", c.cost.server_usd},
                 {"server_lifetime_years", c.cost.server_lifetime_years},
                 {"battery_usd_per_kwh", c.cost.battery_usd_per_kwh},
                 {"battery_lifetime_years", c.cost.battery_lifetime_years},
                 {"transmission_usd_per_km", c.cost.transmission_usd_per_km},
                 {"transmission_lifetime_years", c.cost.transmission_lifetime_years},
                 {"construction_usd_per_watt", c.cost.construction_usd_per_watt},
                 {"construction_lifetime_years", c.cost.construction_lifetime_years}};
    j["policy"] = to_string(c.policy);
    j["subgraph_size"] = c.subgraph_size;
    j["max_miles"] = c.max_miles;
    j["horizon_steps"] = c.horizon_steps;
    j["resolve_interval_steps"] = c.resolve_interval_steps;
    j["reidentify_interval_steps"] = c.reidentify_interval_steps;
    j["avail_target"] = c.avail_target;
    j["evictable_floor"] = c.evictable_floor;
    j["forecast_error_ratio"] = c.forecast_error_ratio;
    j["power_migr_wh_per_gb"] = c.power_migr_wh_per_gb;
    j["rmdc_peak_watts"] = c.rmdc_peak_watts;
    j["battery"] = {{"enabled", c.battery.enabled},
                    {"rate_c", c.battery.rate_c},
                    {"round_trip_efficiency", c.battery.round_trip_efficiency},
                    {"extra_hours_distr_battery", c.battery.extra_hours_distr_battery}};
    j["solver"] = {{"max_nodes", c.solver.max_nodes},
                   {"max_seconds", c.solver.max_seconds},
                   {"grid_only_objective", c.solver.grid_only_objective}};
    j["seed"] = c.seed;
    j["top_sites"] = c.top_sites;
    j["steps_limit"] = c.steps_limit;
    j["out_dir"] = c.out_dir;
    return j;
}

}  // namespace skybox
