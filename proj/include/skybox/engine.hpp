#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skybox/accounting.hpp"
#include "skybox/battery.hpp"
#include "skybox/config.hpp"
#include "skybox/errors.hpp"
#include "skybox/misprediction.hpp"
#include "skybox/model.hpp"
#include "skybox/policies.hpp"
#include "skybox/rng.hpp"
#include "skybox/site.hpp"
#include "skybox/solver.hpp"
#include "skybox/subgraph.hpp"
#include "skybox/trace.hpp"
#include "skybox/vm.hpp"

#include "json.hpp"

namespace skybox {

// ---------------------------------------------------------------------------
// Runtime records

/// Evolving ledger of one VM across the run.
struct VmRecord {
    VmSpec spec;
    int subgraph = -1;
    int rmdc = -1;  // global rMDC index; survives suspensions so resume lands in place
    std::int64_t uptime_steps = 0;
    std::int64_t downtime_steps = 0;
    std::int64_t completion_step = -1;
    int migration_count = 0;
    bool admitted = false;

    bool completed() const { return completion_step >= 0; }

    /// Realized uptime fraction; equals lifetime / (lifetime + downtime) once
    /// the VM completes. Fresh VMs with no history count as fully available.
    double avail() const {
        const std::int64_t denom = uptime_steps + downtime_steps;
        return denom == 0 ? 1.0 : static_cast<double>(uptime_steps) / static_cast<double>(denom);
    }
};

struct EventLog {
    std::vector<nlohmann::json> events;

    void add(std::int64_t step, const std::string& entity, const std::string& event,
             nlohmann::json payload = nlohmann::json::object()) {
        events.push_back({{"step", step},
                          {"entity", entity},
                          {"event", event},
                          {"payload", std::move(payload)}});
    }

    std::string to_jsonl() const {
        std::ostringstream out;
        for (const auto& e : events) out << e.dump() << '\n';
        return out.str();
    }
};

struct StepLedger {
    double consumption_wh = 0;
    double renewable_used_wh = 0;  // direct use plus battery charging
    double grid_wh = 0;
    double battery_charge_wh = 0;
    double battery_discharge_wh = 0;
    double op_renewable_g = 0;
    double op_grid_g = 0;
    double emb_server_g = 0;
    double emb_battery_g = 0;
    double emb_cooling_g = 0;
    double carbon_g = 0;
    double cumulative_carbon_g = 0;
};

struct WeeklyCarbon {
    int week = 0;
    double emb_server_g = 0;
    double emb_battery_g = 0;
    double emb_cooling_g = 0;
    double op_renewable_g = 0;
    double op_grid_g = 0;
    double total_g = 0;
};

struct SimReport {
    std::string policy;
    std::int64_t steps = 0;
    double step_seconds = 3600;
    std::vector<StepLedger> series;
    std::vector<WeeklyCarbon> weekly;
    double total_carbon_g = 0;
    double op_grid_g = 0;
    double op_renewable_g = 0;
    double emb_server_g = 0;
    double emb_battery_g = 0;
    double emb_cooling_g = 0;
    double grid_kwh = 0;
    CostBreakdown cost;
    double evictable_uptime_mean = 1.0;
    int evictable_count = 0;    // 0 means the mean is vacuous (flagged)
    std::int64_t migration_events = 0;
    double vm_runtime_hours = 0;
    double migration_frequency = 0;  // events per VM-hour of runtime
    int vms_total = 0;
    int vms_completed = 0;
    bool truncated = false;  // trace ended before every VM completed
};

/// Folds the per-step ledgers and VM records into the final report. Migration
/// frequency is total events over total VM runtime hours.
inline SimReport metrics_finalize(std::vector<StepLedger> series,
                                  std::span<const VmRecord> vms, double step_seconds,
                                  std::int64_t migration_events, const CostBreakdown& cost,
                                  const std::string& policy_name) {
    SimReport r;
    r.policy = policy_name;
    r.step_seconds = step_seconds;
    r.steps = static_cast<std::int64_t>(series.size());
    r.cost = cost;
    r.migration_events = migration_events;

    double cum = 0;
    const double steps_per_week = 7.0 * 24.0 * 3600.0 / step_seconds;
    for (std::size_t t = 0; t < series.size(); ++t) {
        StepLedger& l = series[t];
        l.carbon_g = l.op_renewable_g + l.op_grid_g + l.emb_server_g + l.emb_battery_g +
                     l.emb_cooling_g;
        cum += l.carbon_g;
        l.cumulative_carbon_g = cum;
        r.op_grid_g += l.op_grid_g;
        r.op_renewable_g += l.op_renewable_g;
        r.emb_server_g += l.emb_server_g;
        r.emb_battery_g += l.emb_battery_g;
        r.emb_cooling_g += l.emb_cooling_g;
        r.grid_kwh += l.grid_wh / 1000.0;
        const int week = static_cast<int>(static_cast<double>(t) / steps_per_week);
        if (static_cast<int>(r.weekly.size()) <= week) r.weekly.push_back({week});
        WeeklyCarbon& w = r.weekly.back();
        w.emb_server_g += l.emb_server_g;
        w.emb_battery_g += l.emb_battery_g;
        w.emb_cooling_g += l.emb_cooling_g;
        w.op_renewable_g += l.op_renewable_g;
        w.op_grid_g += l.op_grid_g;
        w.total_g += l.carbon_g;
    }
    r.total_carbon_g = cum;
    r.series = std::move(series);

    double evict_sum = 0;
    for (const VmRecord& vm : vms) {
        ++r.vms_total;
        if (vm.completed()) ++r.vms_completed;
        r.vm_runtime_hours += static_cast<double>(vm.uptime_steps) * step_seconds / 3600.0;
        if (vm.spec.category == VmCategory::evictable && vm.admitted) {
            evict_sum += vm.avail();
            ++r.evictable_count;
        }
    }
    r.evictable_uptime_mean = r.evictable_count == 0 ? 1.0 : evict_sum / r.evictable_count;
    r.migration_frequency =
        r.vm_runtime_hours > 0 ? static_cast<double>(migration_events) / r.vm_runtime_hours : 0.0;
    r.truncated = r.vms_completed < r.vms_total;
    return r;
}

inline nlohmann::json report_to_json(const SimReport& r) {
    nlohmann::json j;
    j["policy"] = r.policy;
    j["steps"] = r.steps;
    j["step_seconds"] = r.step_seconds;
    j["carbon"] = {{"total_g", r.total_carbon_g},
                   {"op_grid_g", r.op_grid_g},
                   {"op_renewable_g", r.op_renewable_g},
                   {"emb_server_g", r.emb_server_g},
                   {"emb_battery_g", r.emb_battery_g},
                   {"emb_cooling_g", r.emb_cooling_g}};
    j["weekly"] = nlohmann::json::array();
    for (const auto& w : r.weekly)
        j["weekly"].push_back({{"week", w.week},
                               {"Emb-Server", w.emb_server_g},
                               {"Emb-Battery", w.emb_battery_g},
                               {"Emb-Cooling", w.emb_cooling_g},
                               {"Op-Renewable", w.op_renewable_g},
                               {"Op-Grid", w.op_grid_g},
                               {"total_g", w.total_g}});
    j["cost"] = {{"servers_usd", r.cost.servers_usd},
                 {"battery_usd", r.cost.battery_usd},
                 {"transmission_usd", r.cost.transmission_usd},
                 {"construction_usd", r.cost.construction_usd},
                 {"total_usd", r.cost.total_usd}};
    j["grid_kwh"] = r.grid_kwh;
    j["evictable_uptime"] = {{"mean", r.evictable_uptime_mean},
                             {"n", r.evictable_count},
                             {"vacuous", r.evictable_count == 0}};
    j["migration"] = {{"events", r.migration_events},
                      {"vm_runtime_hours", r.vm_runtime_hours},
                      {"frequency_per_vm_hour", r.migration_frequency}};
    j["vms"] = {{"total", r.vms_total}, {"completed", r.vms_completed}};
    j["truncated"] = r.truncated;
    return j;
}

inline std::string series_to_csv(const SimReport& r) {
    std::ostringstream out;
    out << "step,consumption_wh,renewable_used_wh,grid_wh,battery_charge_wh,"
           "battery_discharge_wh,carbon_g,cumulative_carbon_g\n";
    for (std::size_t t = 0; t < r.series.size(); ++t) {
        const StepLedger& l = r.series[t];
        out << t << ',' << csv::format_double(l.consumption_wh) << ','
            << csv::format_double(l.renewable_used_wh) << ',' << csv::format_double(l.grid_wh)
            << ',' << csv::format_double(l.battery_charge_wh) << ','
            << csv::format_double(l.battery_discharge_wh) << ','
            << csv::format_double(l.carbon_g) << ','
            << csv::format_double(l.cumulative_carbon_g) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Synthetic workload

/// Pre-generates a VM arrival trace that keeps running power near the target
/// utilization of the fleet capacity, assuming uninterrupted progress. The
/// result depends only on the config and seed, so every policy in a
/// comparison replays the identical workload.
inline std::vector<VmSpec> synth_vm_workload(const WorkloadConfig& w, std::int64_t steps,
                                             double capacity_watts, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<VmSpec> out;
    std::vector<double> load(steps, 0.0);
    int spawned = 0;
    for (std::int64_t t = 0; t < steps && spawned < w.max_vms; ++t) {
        while (spawned < w.max_vms && load[t] < w.target_utilization * capacity_watts) {
            VmSpec vm;
            vm.vm_id = "vm-" + std::to_string(spawned);
            vm.arrival_step = t;
            vm.power_watts = uniform_in(gen, w.power_min_watts, w.power_max_watts);
            vm.mem_gb = uniform_in(gen, w.mem_min_gb, w.mem_max_gb);
            vm.vcpus = 1 + static_cast<int>(uniform_below(gen, 16));
            const std::int64_t span = w.lifetime_max_steps - w.lifetime_min_steps + 1;
            vm.actual_lifetime_steps =
                w.lifetime_min_steps + static_cast<std::int64_t>(uniform_below(gen, span));
            const double err = uniform_in(gen, -w.lifetime_error_ratio, w.lifetime_error_ratio);
            vm.predicted_lifetime_steps = std::max<std::int64_t>(
                1, std::llround(static_cast<double>(vm.actual_lifetime_steps) * (1.0 + err)));
            vm.category = uniform01(gen) < w.evictable_fraction ? VmCategory::evictable
                                                                : VmCategory::regular;
            for (std::int64_t u = t; u < std::min(steps, t + vm.actual_lifetime_steps); ++u)
                load[u] += vm.power_watts;
            out.push_back(std::move(vm));
            ++spawned;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// World

struct EngineRmdc {
    std::string id;
    std::vector<double> actual_watts;
    std::vector<double> predicted_watts;
    std::vector<double> ci_renewable_g_per_kwh;  // per step (aggregates mix sources)
    EnergyKind kind = EnergyKind::solar;
    bool aggregate = false;
    double provisioned_peak_watts = 0;
    BatteryState battery;
};

struct EngineSubgraph {
    std::string id;
    std::vector<int> rmdcs;  // global indices
};

struct World {
    RunConfig config;
    std::vector<Site> sites;  // scaled traces + forecasts
    std::vector<Subgraph> selected;  // multi-site subgraphs (skybox/centr_graph)
    std::vector<EngineRmdc> rmdcs;
    std::vector<EngineSubgraph> subgraphs;
    PolicyTopology topology;
    std::int64_t steps = 0;
    double step_seconds = 3600;
    std::vector<VmSpec> arrivals;  // sorted by (arrival_step, vm_id)
};

namespace detail {

inline double provisioned_peak(double peak_watts, const RmdcConfig& config) {
    return std::ceil(peak_watts / config.per_server_watts()) * config.per_server_watts();
}

inline BatteryState make_battery(double peak_watts, const RunConfig& c, double extra_hours) {
    BatteryState b;
    if (!c.battery.enabled) return b;
    const double peak_kw = provisioned_peak(peak_watts, c.rmdc) / 1000.0;
    b.capacity_kwh = peak_kw * (c.rmdc.battery_backup_minutes / 60.0 + extra_hours);
    b.max_rate_kw = c.battery.rate_c * b.capacity_kwh;
    b.charge_kwh = 0.0;
    return b;
}

inline EngineRmdc make_site_rmdc(const Site& s, const RunConfig& c, double extra_hours) {
    EngineRmdc r;
    r.id = s.site_id;
    r.kind = s.energy_kind;
    r.actual_watts = s.trace.samples;
    r.predicted_watts = s.forecast.predicted;
    const double ci = s.energy_kind == EnergyKind::solar ? c.carbon.intensity_solar_g_per_kwh
                                                         : c.carbon.intensity_wind_g_per_kwh;
    r.ci_renewable_g_per_kwh.assign(s.trace.samples.size(), ci);
    r.provisioned_peak_watts = provisioned_peak(s.trace.capacity_watts, c.rmdc);
    r.battery = make_battery(s.trace.capacity_watts, c, extra_hours);
    return r;
}

inline EngineRmdc make_aggregate_rmdc(const std::string& id, std::span<const Site> members,
                                      const RunConfig& c) {
    EngineRmdc r;
    r.id = id;
    r.aggregate = true;
    const std::size_t len = members.front().trace.samples.size();
    r.actual_watts.assign(len, 0.0);
    r.predicted_watts.assign(len, 0.0);
    r.ci_renewable_g_per_kwh.assign(len, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
        double weighted = 0.0;
        for (const Site& s : members) {
            const double w = s.trace.samples[t];
            r.actual_watts[t] += w;
            r.predicted_watts[t] += s.forecast.predicted[t];
            weighted += w * (s.energy_kind == EnergyKind::solar
                                 ? c.carbon.intensity_solar_g_per_kwh
                                 : c.carbon.intensity_wind_g_per_kwh);
        }
        r.ci_renewable_g_per_kwh[t] =
            r.actual_watts[t] > 0 ? weighted / r.actual_watts[t] : 0.0;
    }
    double peak = 0.0;
    for (double v : r.actual_watts) peak = std::max(peak, v);
    r.provisioned_peak_watts = provisioned_peak(peak, c.rmdc);
    r.battery = make_battery(peak, c, 0.0);
    return r;
}

}  // namespace detail

/// Loads traces, scales them to the rMDC peak, builds forecasts, selects
/// subgraphs, and lays out the rMDC fleet the active policy requires.
inline World build_world(const RunConfig& config) {
    config.validate();
    World w;
    w.config = config;
    const double peak = config.effective_rmdc_peak_watts();

    for (std::size_t i = 0; i < config.sites.size(); ++i) {
        const SiteConfig& sc = config.sites[i];
        TraceCsvSchema schema;
        schema.capacity_watts = sc.capacity_watts > 0 ? sc.capacity_watts : peak;
        schema.site_id = sc.site_id;
        PowerTrace raw = load_power_trace(sc.trace_path, schema);
        Site s;
        s.site_id = sc.site_id;
        s.location = {sc.latitude, sc.longitude};
        s.energy_kind = sc.energy_kind;
        s.trace = scale_to_rmdc(raw, peak);
        s.forecast = inject_error(s.trace, config.forecast_error_ratio,
                                  config.seed + 0x9e3779b97f4a7c15ULL * (i + 1));
        w.sites.push_back(std::move(s));
    }

    w.step_seconds = w.sites.front().trace.step_seconds;
    w.steps = static_cast<std::int64_t>(w.sites.front().trace.samples.size());
    for (const Site& s : w.sites) {
        if (s.trace.step_seconds != w.step_seconds)
            throw DataError("traces disagree on step length");
        if (static_cast<std::int64_t>(s.trace.samples.size()) != w.steps)
            throw DataError("traces disagree on length");
    }
    if (config.steps_limit > 0) w.steps = std::min(w.steps, config.steps_limit);

    if (config.top_sites > 0) {
        const auto ranked = rank_sites(w.sites, 0);
        const auto top = select_top(ranked, static_cast<std::size_t>(config.top_sites));
        std::set<std::string> keep(top.site_ids.begin(), top.site_ids.end());
        std::vector<Site> filtered;
        for (Site& s : w.sites)
            if (keep.count(s.site_id)) filtered.push_back(std::move(s));
        w.sites = std::move(filtered);
    }

    const bool needs_groups = config.policy == PolicyKind::skybox_mip ||
                              config.policy == PolicyKind::skybox_best_effort ||
                              config.policy == PolicyKind::centr_graph;
    if (needs_groups && w.sites.size() >= static_cast<std::size_t>(config.subgraph_size)) {
        w.selected = select_disjoint(rank_candidates(
            enumerate_candidates(w.sites, config.subgraph_size, config.max_miles)));
    }

    auto site_index = [&](const std::string& id) {
        for (std::size_t i = 0; i < w.sites.size(); ++i)
            if (w.sites[i].site_id == id) return static_cast<int>(i);
        throw DataError("unknown site '" + id + "'");
    };

    const double extra_hours =
        config.policy == PolicyKind::distr_battery ? config.battery.extra_hours_distr_battery
                                                   : 0.0;
    switch (config.policy) {
        case PolicyKind::skybox_mip:
        case PolicyKind::skybox_best_effort: {
            for (const Site& s : w.sites)
                w.rmdcs.push_back(detail::make_site_rmdc(s, config, 0.0));
            std::set<int> covered;
            for (const Subgraph& g : w.selected) {
                EngineSubgraph sg;
                sg.id = "sg-" + std::to_string(w.subgraphs.size());
                for (const auto& id : g.member_ids) {
                    sg.rmdcs.push_back(site_index(id));
                    covered.insert(site_index(id));
                }
                w.subgraphs.push_back(std::move(sg));
            }
            for (std::size_t i = 0; i < w.sites.size(); ++i)
                if (!covered.count(static_cast<int>(i)))
                    w.subgraphs.push_back(
                        {"solo-" + w.sites[i].site_id, {static_cast<int>(i)}});
            break;
        }
        case PolicyKind::distr_grid:
        case PolicyKind::distr_battery:
            for (const Site& s : w.sites) {
                w.rmdcs.push_back(detail::make_site_rmdc(s, config, extra_hours));
                w.subgraphs.push_back(
                    {"solo-" + s.site_id, {static_cast<int>(w.rmdcs.size()) - 1}});
            }
            break;
        case PolicyKind::centr_global:
            w.rmdcs.push_back(detail::make_aggregate_rmdc("central", w.sites, config));
            w.subgraphs.push_back({"central", {0}});
            break;
        case PolicyKind::centr_graph: {
            if (w.selected.empty()) throw ConfigError("centr_graph requires enough sites for subgraphs");
            std::set<std::string> covered;
            for (const Subgraph& g : w.selected) {
                std::vector<Site> members;
                for (const auto& id : g.member_ids) {
                    members.push_back(w.sites[site_index(id)]);
                    covered.insert(id);
                }
                const std::string id = "central-" + std::to_string(w.subgraphs.size());
                w.rmdcs.push_back(detail::make_aggregate_rmdc(id, members, config));
                w.subgraphs.push_back({id, {static_cast<int>(w.rmdcs.size()) - 1}});
            }
            for (const Site& s : w.sites)
                if (!covered.count(s.site_id)) {
                    w.rmdcs.push_back(detail::make_site_rmdc(s, config, 0.0));
                    w.subgraphs.push_back(
                        {"solo-" + s.site_id, {static_cast<int>(w.rmdcs.size()) - 1}});
                }
            break;
        }
    }

    w.topology = apply_policy(config.policy, w.sites, w.selected, config.rmdc);

    if (config.workload.kind == "file") {
        w.arrivals = load_vm_trace(config.workload.vm_trace_path);
    } else {
        const double capacity = static_cast<double>(w.sites.size()) * peak;
        w.arrivals = synth_vm_workload(config.workload, w.steps, capacity, config.seed);
    }
    std::stable_sort(w.arrivals.begin(), w.arrivals.end(), [](const VmSpec& a, const VmSpec& b) {
        return a.arrival_step != b.arrival_step ? a.arrival_step < b.arrival_step
                                                : a.vm_id < b.vm_id;
    });
    for (const VmSpec& vm : w.arrivals) vm.validate();
    return w;
}

// ---------------------------------------------------------------------------
// Simulation

struct RunResult {
    SimReport report;
    EventLog events;
};

namespace detail {

struct Plan {
    mip::Schedule schedule;
    std::int64_t solved_at_step = 0;
    std::map<std::string, std::size_t> vm_row;  // vm_id -> model row
    std::vector<int> global_rmdc;               // model-local k -> world rmdc index
    std::string members_key;
};

inline std::string members_key(const World& w, const EngineSubgraph& sg) {
    std::string key;
    for (int r : sg.rmdcs) key += w.rmdcs[r].id + "|";
    return key;
}

}  // namespace detail

/// Replays the power traces and VM events under the configured policy.
/// Deterministic for a fixed config and seed.
inline RunResult run(const World& world) {
    const RunConfig& cfg = world.config;
    RunResult result;
    EventLog& log = result.events;

    std::vector<EngineRmdc> rmdcs = world.rmdcs;
    std::vector<EngineSubgraph> subgraphs = world.subgraphs;
    std::vector<Site> sites = world.sites;
    std::vector<VmRecord> records;
    records.reserve(world.arrivals.size());
    for (const VmSpec& vm : world.arrivals) records.push_back({vm});

    LifetimeCorrector corrector;
    std::vector<Subgraph> selected = world.selected;
    std::map<std::string, detail::Plan> plans;  // keyed by subgraph member set
    std::vector<StepLedger> series;
    std::int64_t migration_events = 0;
    std::size_t next_arrival = 0;

    const double step_h = world.step_seconds / 3600.0;
    const bool is_mip = cfg.policy == PolicyKind::skybox_mip;
    const bool multi_site = cfg.policy == PolicyKind::skybox_mip ||
                            cfg.policy == PolicyKind::skybox_best_effort;

    EmbodiedBreakdown emb_rate =
        embodied_carbon_amortized_g(world.topology.inventory, cfg.carbon, step_h);

    auto subgraph_of_rmdc = [&](int rmdc) {
        for (std::size_t n = 0; n < subgraphs.size(); ++n)
            for (int r : subgraphs[n].rmdcs)
                if (r == rmdc) return static_cast<int>(n);
        throw DataError("rmdc not in any subgraph");
    };

    auto effective_predicted = [&](const VmRecord& rec) {
        double pred = static_cast<double>(rec.spec.predicted_lifetime_steps);
        if (rec.uptime_steps >= rec.spec.predicted_lifetime_steps)
            pred = static_cast<double>(rec.uptime_steps) + std::max(1.0, corrector.offset_steps());
        return static_cast<std::int64_t>(std::llround(pred));
    };

    // Per-step scratch.
    std::vector<double> consum(rmdcs.size());
    std::vector<double> assigned_grid(rmdcs.size());
    std::vector<bool> on(records.size());

    auto resolve_subgraph = [&](std::size_t n, std::int64_t t) {
        const EngineSubgraph& sg = subgraphs[n];
        mip::ClusterSnapshot snap;
        mip::SnapshotSubgraph ssg;
        ssg.subgraph_id = sg.id;
        std::map<std::string, Forecast> forecasts;
        detail::Plan plan;
        for (std::size_t k = 0; k < sg.rmdcs.size(); ++k) {
            const EngineRmdc& r = rmdcs[sg.rmdcs[k]];
            ssg.rmdcs.push_back({r.id, r.kind});
            Forecast f;
            f.site_id = r.id;
            f.predicted = r.predicted_watts;
            f.horizon_steps = r.predicted_watts.size();
            forecasts[r.id] = std::move(f);
            plan.global_rmdc.push_back(sg.rmdcs[k]);
        }
        snap.subgraphs.push_back(std::move(ssg));
        for (std::size_t i = 0; i < records.size(); ++i) {
            const VmRecord& rec = records[i];
            if (!rec.admitted || rec.completed() || rec.subgraph != static_cast<int>(n)) continue;
            mip::SnapshotVm sv;
            sv.spec = rec.spec;
            sv.subgraph = 0;
            sv.rmdc = -1;
            for (std::size_t k = 0; k < sg.rmdcs.size(); ++k)
                if (sg.rmdcs[k] == rec.rmdc) sv.rmdc = static_cast<int>(k);
            sv.effective_lifetime_steps = effective_predicted(rec);
            sv.remaining_lifetime_steps =
                std::max<std::int64_t>(1, sv.effective_lifetime_steps - rec.uptime_steps);
            sv.downtime_so_far_steps = rec.downtime_steps;
            snap.vms.push_back(std::move(sv));
        }
        const int horizon =
            static_cast<int>(std::min<std::int64_t>(cfg.horizon_steps, world.steps - t));
        mip::MipParams params;
        params.step_seconds = world.step_seconds;
        params.carbon = cfg.carbon;
        params.power_migr_wh_per_gb = cfg.power_migr_wh_per_gb;
        params.avail_target = cfg.avail_target;
        params.grid_only_objective = cfg.solver.grid_only_objective;
        mip::MipModel model =
            mip::build_model(snap, forecasts, static_cast<std::size_t>(t), horizon, params);
        mip::SolveLimits limits{cfg.solver.max_nodes, cfg.solver.max_seconds};
        plan.schedule = mip::solve(model, limits);
        plan.solved_at_step = t;
        for (std::size_t m = 0; m < model.vms.size(); ++m) plan.vm_row[model.vms[m].vm_id] = m;
        plan.members_key = detail::members_key(world, sg);
        log.add(t, sg.id, "solve",
                {{"objective_carbon_g", plan.schedule.objective_carbon_g},
                 {"optimal", plan.schedule.optimal},
                 {"vms", model.vms.size()}});
        plans[plan.members_key] = std::move(plan);
    };

    for (std::int64_t t = 0; t < world.steps; ++t) {
        // (1) Actual supply is revealed; classify mispredictions per rMDC.
        for (std::size_t r = 0; r < rmdcs.size(); ++r) {
            std::vector<VmLifetimeObs> obs;
            for (const VmRecord& rec : records)
                if (rec.admitted && rec.rmdc == static_cast<int>(r))
                    obs.push_back({rec.spec.predicted_lifetime_steps, rec.uptime_steps,
                                   !rec.completed()});
            const MisCase mc = classify(rmdcs[r].predicted_watts[t], rmdcs[r].actual_watts[t], obs);
            if (!mc.benign())
                log.add(t, rmdcs[r].id, "misprediction", {{"case", mc.case_id}});
        }

        // (2) Admit arrivals: best-fit subgraph by headroom, then the rMDC with
        // the most headroom inside it.
        std::fill(consum.begin(), consum.end(), 0.0);
        for (std::size_t i = 0; i < records.size(); ++i) {
            const VmRecord& rec = records[i];
            if (rec.admitted && !rec.completed() && rec.rmdc >= 0)
                consum[rec.rmdc] += rec.spec.power_watts;
        }
        while (next_arrival < records.size() &&
               records[next_arrival].spec.arrival_step <= t) {
            VmRecord& rec = records[next_arrival];
            std::vector<SubgraphHeadroom> headrooms;
            for (const EngineSubgraph& sg : subgraphs) {
                double head = 0;
                for (int r : sg.rmdcs) head += rmdcs[r].actual_watts[t] - consum[r];
                headrooms.push_back({sg.id, head});
            }
            const SubgraphChoice choice = place_on_subgraph(rec.spec, headrooms);
            for (std::size_t n = 0; n < subgraphs.size(); ++n)
                if (subgraphs[n].id == choice.subgraph_id) rec.subgraph = static_cast<int>(n);
            int best_rmdc = subgraphs[rec.subgraph].rmdcs.front();
            double best_head = -std::numeric_limits<double>::infinity();
            for (int r : subgraphs[rec.subgraph].rmdcs) {
                const double head = rmdcs[r].actual_watts[t] - consum[r];
                if (head > best_head) {
                    best_head = head;
                    best_rmdc = r;
                }
            }
            rec.rmdc = best_rmdc;
            rec.admitted = true;
            consum[best_rmdc] += rec.spec.power_watts;
            log.add(t, rec.spec.vm_id, "admit",
                    {{"subgraph", choice.subgraph_id},
                     {"rmdc", rmdcs[best_rmdc].id},
                     {"overcommitted", choice.overcommitted}});
            ++next_arrival;
        }

        // (3) Re-solve the placement plan on the configured cadence.
        if (is_mip && t % cfg.resolve_interval_steps == 0)
            for (std::size_t n = 0; n < subgraphs.size(); ++n) resolve_subgraph(n, t);

        // (4) Apply the plan step: placements, suspensions, plan migrations.
        std::fill(consum.begin(), consum.end(), 0.0);
        std::fill(assigned_grid.begin(), assigned_grid.end(), 0.0);
        for (std::size_t i = 0; i < records.size(); ++i)
            on[i] = records[i].admitted && !records[i].completed();

        if (is_mip) {
            for (std::size_t n = 0; n < subgraphs.size(); ++n) {
                const auto it = plans.find(detail::members_key(world, subgraphs[n]));
                if (it == plans.end()) continue;
                const detail::Plan& plan = it->second;
                const std::int64_t offset = t - plan.solved_at_step;
                if (offset < 0 ||
                    offset >= static_cast<std::int64_t>(plan.schedule.placements.empty()
                                                            ? 0
                                                            : plan.schedule.placements[0].size()))
                    continue;
                for (std::size_t i = 0; i < records.size(); ++i) {
                    VmRecord& rec = records[i];
                    if (!on[i] || rec.subgraph != static_cast<int>(n)) continue;
                    const auto row = plan.vm_row.find(rec.spec.vm_id);
                    if (row == plan.vm_row.end()) continue;  // arrived after the solve
                    const int local = plan.schedule.placements[row->second][offset];
                    if (local < 0) {
                        // The plan powers the VM down. For an evictable VM that
                        // is a suspension; a regular VM only goes off in the
                        // plan because its predicted lifetime ran out, and it
                        // keeps running until it actually completes.
                        if (rec.spec.category == VmCategory::evictable) {
                            on[i] = false;
                            log.add(t, rec.spec.vm_id, "suspend", {{"reason", "plan"}});
                        }
                    } else {
                        const int target = plan.global_rmdc[local];
                        if (target != rec.rmdc) {
                            const double w =
                                migration_energy_wh(rec.spec.mem_gb, cfg.power_migr_wh_per_gb) /
                                step_h;
                            consum[rec.rmdc] += w;
                            consum[target] += w;
                            ++migration_events;
                            ++rec.migration_count;
                            log.add(t, rec.spec.vm_id, "migration",
                                    {{"from", rmdcs[rec.rmdc].id},
                                     {"to", rmdcs[target].id},
                                     {"reason", "plan"}});
                            rec.rmdc = target;
                        }
                    }
                }
                // Grid the plan already intends to draw this step (from
                // predicted supply); the handler tops it up against actuals.
                for (std::size_t k = 0; k < plan.global_rmdc.size(); ++k)
                    assigned_grid[plan.global_rmdc[k]] =
                        plan.schedule.grid_watts[0][k][offset];
            }
        }
        for (std::size_t i = 0; i < records.size(); ++i)
            if (on[i]) consum[records[i].rmdc] += records[i].spec.power_watts;

        // (5) Heuristic policy step against the actual supply.
        if (!is_mip) {
            for (std::size_t n = 0; n < subgraphs.size(); ++n) {
                const EngineSubgraph& sg = subgraphs[n];
                PolicyStepState st;
                st.supply_watts.reserve(sg.rmdcs.size());
                st.consum_watts.reserve(sg.rmdcs.size());
                for (int r : sg.rmdcs) {
                    st.supply_watts.push_back(rmdcs[r].actual_watts[t]);
                    st.consum_watts.push_back(consum[r]);
                }
                st.migr_wh_per_gb = cfg.power_migr_wh_per_gb;
                st.step_hours = step_h;
                int evictables_in_scope = 0;
                for (std::size_t i = 0; i < records.size(); ++i) {
                    const VmRecord& rec = records[i];
                    if (rec.spec.category == VmCategory::evictable && rec.admitted) {
                        ++evictables_in_scope;
                        st.scope_avail_sum += rec.avail();
                    }
                    if (!on[i] || rec.subgraph != static_cast<int>(n)) continue;
                    int local = -1;
                    for (std::size_t k = 0; k < sg.rmdcs.size(); ++k)
                        if (sg.rmdcs[k] == rec.rmdc) local = static_cast<int>(k);
                    st.vms.push_back({static_cast<int>(i), rec.spec.power_watts, rec.spec.mem_gb,
                                      rec.spec.category == VmCategory::evictable, local});
                    if (rec.spec.category == VmCategory::evictable) {
                        st.avail_now[static_cast<int>(i)] = rec.avail();
                        st.avail_if_suspended[static_cast<int>(i)] =
                            static_cast<double>(rec.uptime_steps) /
                            static_cast<double>(rec.uptime_steps + rec.downtime_steps + 1);
                    }
                }
                st.scope_avail_requirement = cfg.evictable_floor * evictables_in_scope;
                const bool allow_migration = cfg.policy == PolicyKind::skybox_best_effort;
                const PolicyActions actions = best_effort_step(st, allow_migration);
                for (const PolicyMigration& mig : actions.migrations) {
                    VmRecord& rec = records[mig.vm_key];
                    const int target = sg.rmdcs[mig.to_rmdc];
                    const double w =
                        migration_energy_wh(rec.spec.mem_gb, cfg.power_migr_wh_per_gb) / step_h;
                    consum[rec.rmdc] += w - rec.spec.power_watts;
                    consum[target] += rec.spec.power_watts + w;
                    ++migration_events;
                    ++rec.migration_count;
                    log.add(t, rec.spec.vm_id, "migration",
                            {{"from", rmdcs[rec.rmdc].id},
                             {"to", rmdcs[target].id},
                             {"reason", "policy"}});
                    rec.rmdc = target;
                }
                for (int key : actions.suspensions) {
                    on[key] = false;
                    consum[records[key].rmdc] -= records[key].spec.power_watts;
                    log.add(t, records[key].spec.vm_id, "suspend", {{"reason", "policy"}});
                }
                for (std::size_t k = 0; k < sg.rmdcs.size(); ++k)
                    assigned_grid[sg.rmdcs[k]] += actions.grid_watts[k];
            }
        }

        // (6) Misprediction handler: close any gap between the plan and the
        // revealed actuals, in strict order migrate -> evict -> grid.
        for (std::size_t n = 0; n < subgraphs.size(); ++n) {
            const EngineSubgraph& sg = subgraphs[n];
            HandlerInput in;
            for (int r : sg.rmdcs)
                in.rmdcs.push_back({rmdcs[r].actual_watts[t], assigned_grid[r], consum[r]});
            in.migr_wh_per_gb = cfg.power_migr_wh_per_gb;
            in.step_hours = step_h;
            int evictables_in_scope = 0;
            for (std::size_t i = 0; i < records.size(); ++i) {
                const VmRecord& rec = records[i];
                if (rec.spec.category == VmCategory::evictable && rec.admitted) {
                    ++evictables_in_scope;
                    in.scope_avail_sum += rec.avail();
                }
                if (!on[i] || rec.subgraph != static_cast<int>(n)) continue;
                int local = -1;
                for (std::size_t k = 0; k < sg.rmdcs.size(); ++k)
                    if (sg.rmdcs[k] == rec.rmdc) local = static_cast<int>(k);
                in.vms.push_back({static_cast<int>(i), rec.spec.power_watts, rec.spec.mem_gb,
                                  rec.spec.category == VmCategory::evictable, local});
                if (rec.spec.category == VmCategory::evictable) {
                    in.avail_now[static_cast<int>(i)] = rec.avail();
                    in.avail_if_suspended[static_cast<int>(i)] =
                        static_cast<double>(rec.uptime_steps) /
                        static_cast<double>(rec.uptime_steps + rec.downtime_steps + 1);
                }
            }
            in.scope_avail_requirement = cfg.evictable_floor * evictables_in_scope;
            const HandlerActions actions = handle(in);
            for (const PolicyMigration& mig : actions.migrations) {
                VmRecord& rec = records[mig.vm_key];
                const int target = sg.rmdcs[mig.to_rmdc];
                const double w =
                    migration_energy_wh(rec.spec.mem_gb, cfg.power_migr_wh_per_gb) / step_h;
                consum[rec.rmdc] += w - rec.spec.power_watts;
                consum[target] += rec.spec.power_watts + w;
                ++migration_events;
                ++rec.migration_count;
                log.add(t, rec.spec.vm_id, "migration",
                        {{"from", rmdcs[rec.rmdc].id},
                         {"to", rmdcs[target].id},
                         {"reason", "handler"}});
                rec.rmdc = target;
            }
            for (int key : actions.evictions) {
                on[key] = false;
                consum[records[key].rmdc] -= records[key].spec.power_watts;
                log.add(t, records[key].spec.vm_id, "evict", {{"reason", "handler"}});
            }
            for (std::size_t k = 0; k < sg.rmdcs.size(); ++k)
                if (actions.extra_grid_watts[k] > 0) {
                    assigned_grid[sg.rmdcs[k]] += actions.extra_grid_watts[k];
                    log.add(t, rmdcs[sg.rmdcs[k]].id, "grid",
                            {{"watts", actions.extra_grid_watts[k]}, {"reason", "handler"}});
                }
            for (int r : sg.rmdcs)
                if (consum[r] > rmdcs[r].actual_watts[t] + assigned_grid[r] + 1e-6)
                    throw DataError("post-handler power balance violated at rMDC '" +
                                    rmdcs[r].id + "'");
        }

        // (7) Batteries, then the energy and carbon ledger for this step.
        StepLedger ledger;
        ledger.emb_server_g = emb_rate.server_g;
        ledger.emb_battery_g = emb_rate.battery_g;
        ledger.emb_cooling_g = emb_rate.cooling_g;
        for (std::size_t r = 0; r < rmdcs.size(); ++r) {
            const double actual = rmdcs[r].actual_watts[t];
            const double direct = std::min(consum[r], actual);
            double residual = consum[r] - direct;
            double discharged = 0.0;
            double absorbed = 0.0;
            if (cfg.battery.enabled && rmdcs[r].battery.capacity_kwh > 0) {
                if (residual > 0) {
                    const BatteryFlow flow =
                        step_battery(rmdcs[r].battery, -residual, world.step_seconds);
                    rmdcs[r].battery = flow.state;
                    discharged = flow.discharged_watts;
                    residual -= discharged;
                } else {
                    const double surplus = actual - direct;
                    BatteryFlow flow = step_battery(rmdcs[r].battery, surplus, world.step_seconds);
                    absorbed = flow.absorbed_watts;
                    // Round-trip losses shrink what lands in the store.
                    flow.state.charge_kwh -=
                        absorbed * step_h / 1000.0 * (1.0 - cfg.battery.round_trip_efficiency);
                    rmdcs[r].battery = flow.state;
                }
            }
            const double grid = residual;
            const double renewable_used = direct + absorbed;
            ledger.consumption_wh += wh_from_watts(consum[r], world.step_seconds);
            ledger.renewable_used_wh += wh_from_watts(renewable_used, world.step_seconds);
            ledger.grid_wh += wh_from_watts(grid, world.step_seconds);
            ledger.battery_charge_wh += wh_from_watts(absorbed, world.step_seconds);
            ledger.battery_discharge_wh += wh_from_watts(discharged, world.step_seconds);
            ledger.op_renewable_g += kwh_from_watts(renewable_used, world.step_seconds) *
                                     rmdcs[r].ci_renewable_g_per_kwh[t];
            ledger.op_grid_g += kwh_from_watts(grid, world.step_seconds) *
                                cfg.carbon.intensity_brown_g_per_kwh;
        }
        series.push_back(ledger);

        // (8) Advance uptime and downtime; completions update the corrector.
        for (std::size_t i = 0; i < records.size(); ++i) {
            VmRecord& rec = records[i];
            if (!rec.admitted || rec.completed()) continue;
            if (on[i]) {
                ++rec.uptime_steps;
                if (rec.uptime_steps >= rec.spec.actual_lifetime_steps) {
                    rec.completion_step = t;
                    corrector.update(rec.spec.predicted_lifetime_steps,
                                     rec.spec.actual_lifetime_steps);
                    log.add(t, rec.spec.vm_id, "complete",
                            {{"uptime_steps", rec.uptime_steps},
                             {"downtime_steps", rec.downtime_steps}});
                }
            } else {
                if (rec.spec.category == VmCategory::regular && multi_site)
                    throw DataError("regular VM powered down under a skybox policy");
                ++rec.downtime_steps;
            }
        }

        // (9) Periodic subgraph re-identification over the trailing window.
        if (multi_site && !selected.empty() && t > 0 &&
            (t + 1) % cfg.reidentify_interval_steps == 0) {
            const std::int64_t win = std::min<std::int64_t>(t + 1, cfg.reidentify_interval_steps);
            std::vector<Site> windowed = sites;
            for (Site& s : windowed)
                s.trace.samples.assign(s.trace.samples.begin() + (t + 1 - win),
                                       s.trace.samples.begin() + (t + 1));
            const ReidentifyResult rr =
                reidentify(windowed, selected, cfg.subgraph_size, cfg.max_miles);
            selected = rr.subgraphs;
            if (!rr.changed_site_ids.empty()) {
                log.add(t, "cluster", "reidentify",
                        {{"changed", rr.changed_site_ids}});
                std::set<int> covered;
                std::vector<EngineSubgraph> regrouped;
                auto site_index = [&](const std::string& id) {
                    for (std::size_t i = 0; i < sites.size(); ++i)
                        if (sites[i].site_id == id) return static_cast<int>(i);
                    throw DataError("unknown site '" + id + "'");
                };
                for (const Subgraph& g : rr.subgraphs) {
                    EngineSubgraph sg;
                    sg.id = "sg-" + std::to_string(regrouped.size());
                    for (const auto& id : g.member_ids) {
                        sg.rmdcs.push_back(site_index(id));
                        covered.insert(site_index(id));
                    }
                    regrouped.push_back(std::move(sg));
                }
                for (std::size_t i = 0; i < sites.size(); ++i)
                    if (!covered.count(static_cast<int>(i)))
                        regrouped.push_back({"solo-" + sites[i].site_id, {static_cast<int>(i)}});
                subgraphs = std::move(regrouped);
                for (VmRecord& rec : records)
                    if (rec.admitted && !rec.completed()) rec.subgraph = subgraph_of_rmdc(rec.rmdc);
                if (is_mip && t + 1 < world.steps) {
                    // Partial re-solve: only subgraphs whose membership changed.
                    const std::set<std::string> changed(rr.changed_site_ids.begin(),
                                                        rr.changed_site_ids.end());
                    for (std::size_t n = 0; n < subgraphs.size(); ++n) {
                        bool affected = false;
                        for (int r : subgraphs[n].rmdcs)
                            affected = affected || changed.count(rmdcs[r].id) > 0;
                        if (affected) resolve_subgraph(n, t + 1);
                    }
                }
            }
        }
    }

    const double duration_years = static_cast<double>(world.steps) * step_h / kHoursPerYear;
    const CostBreakdown cost =
        amortized_cost(world.topology.inventory, cfg.cost, duration_years);
    result.report = metrics_finalize(std::move(series), records, world.step_seconds,
                                     migration_events, cost, to_string(cfg.policy));
    return result;
}

inline RunResult run(const RunConfig& config) { return run(build_world(config)); }

}  // namespace skybox
