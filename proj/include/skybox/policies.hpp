#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "skybox/accounting.hpp"
#include "skybox/errors.hpp"
#include "skybox/geo.hpp"
#include "skybox/model.hpp"
#include "skybox/subgraph.hpp"

namespace skybox {

enum class PolicyKind {
    skybox_mip,
    skybox_best_effort,
    distr_grid,
    distr_battery,
    centr_global,
    centr_graph,
};

inline const char* to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::skybox_mip: return "skybox_mip";
        case PolicyKind::skybox_best_effort: return "skybox_best_effort";
        case PolicyKind::distr_grid: return "distr_grid";
        case PolicyKind::distr_battery: return "distr_battery";
        case PolicyKind::centr_global: return "centr_global";
        case PolicyKind::centr_graph: return "centr_graph";
    }
    return "?";
}

inline PolicyKind parse_policy(const std::string& name) {
    for (PolicyKind k : {PolicyKind::skybox_mip, PolicyKind::skybox_best_effort,
                         PolicyKind::distr_grid, PolicyKind::distr_battery,
                         PolicyKind::centr_global, PolicyKind::centr_graph})
        if (name == to_string(k)) return k;
    throw ConfigError("unknown policy '" + name + "'");
}

// ---------------------------------------------------------------------------
// Subgraph-level best-fit admission

struct SubgraphHeadroom {
    std::string subgraph_id;
    double headroom_watts = 0.0;  // aggregated supply minus consumption
};

struct SubgraphChoice {
    std::string subgraph_id;
    bool overcommitted = false;  // no subgraph had headroom for the VM; grid covers the gap
};

/// Best-fit: the subgraph with the most free power wins; ties go to the lowest
/// subgraph id. When no headroom fits the VM it is still admitted to the
/// least-loaded subgraph, flagged.
inline SubgraphChoice place_on_subgraph(const VmSpec& vm,
                                        std::span<const SubgraphHeadroom> subgraphs) {
    if (subgraphs.empty()) throw DataError("place_on_subgraph: no subgraphs registered");
    const SubgraphHeadroom* best = &subgraphs[0];
    for (const auto& sg : subgraphs) {
        if (sg.headroom_watts > best->headroom_watts ||
            (sg.headroom_watts == best->headroom_watts && sg.subgraph_id < best->subgraph_id))
            best = &sg;
    }
    return {best->subgraph_id, best->headroom_watts < vm.power_watts};
}

// ---------------------------------------------------------------------------
// Per-step heuristic over one subgraph

struct PolicyVm {
    int key = 0;  // caller-side handle
    double power_watts = 0.0;
    double mem_gb = 0.0;
    bool evictable = false;
    int rmdc = 0;
};

struct PolicyStepState {
    std::vector<double> supply_watts;  // per rMDC of this subgraph
    std::vector<double> consum_watts;  // running VM power per rMDC (pre-action)
    std::vector<PolicyVm> vms;         // running VMs in this subgraph
    double migr_wh_per_gb = 0.1;
    double step_hours = 1.0;
    // Floor bookkeeping spans every evictable VM in scope, not only this
    // subgraph: suspension stops once the summed availability would fall
    // below the requirement (floor x evictable count, possibly clamped).
    double scope_avail_sum = 0.0;
    double scope_avail_requirement = 0.0;
    std::map<int, double> avail_now;           // per evictable vm key
    std::map<int, double> avail_if_suspended;  // after one extra off-step
};

struct PolicyMigration {
    int vm_key;
    int from_rmdc;
    int to_rmdc;
};

struct PolicyActions {
    std::vector<PolicyMigration> migrations;
    std::vector<int> suspensions;     // vm keys, in suspension order
    std::vector<double> grid_watts;   // per rMDC
};

/// One heuristic step: per deficit rMDC, (1) migrate VMs, smallest memory
/// first, to the max-surplus sibling until the deficit closes or no surplus
/// absorbs another VM; (2) suspend evictable VMs, largest power first, while
/// the mean evictable uptime stays at or above the floor; (3) draw the rest
/// from the grid. With allow_migration = false stage (1) is skipped, which is
/// the independent-rMDC rule of the distributed and centralized baselines.
inline PolicyActions best_effort_step(PolicyStepState state, bool allow_migration = true) {
    PolicyActions actions;
    const std::size_t K = state.supply_watts.size();
    actions.grid_watts.assign(K, 0.0);
    auto migr_watts = [&](const PolicyVm& vm) {
        return migration_energy_wh(vm.mem_gb, state.migr_wh_per_gb) / state.step_hours;
    };

    for (std::size_t k = 0; k < K; ++k) {
        auto deficit = [&]() { return state.consum_watts[k] - state.supply_watts[k]; };
        if (deficit() <= 0) continue;

        if (allow_migration && K > 1) {
            std::vector<std::size_t> order;
            for (std::size_t i = 0; i < state.vms.size(); ++i)
                if (state.vms[i].rmdc == static_cast<int>(k)) order.push_back(i);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return state.vms[a].mem_gb < state.vms[b].mem_gb;
            });
            for (std::size_t i : order) {
                if (deficit() <= 0) break;
                PolicyVm& vm = state.vms[i];
                // Max-surplus sibling; ties to the lowest index.
                int target = -1;
                double best_surplus = 0.0;
                for (std::size_t j = 0; j < K; ++j) {
                    if (j == k) continue;
                    const double surplus = state.supply_watts[j] - state.consum_watts[j];
                    if (surplus > best_surplus) {
                        best_surplus = surplus;
                        target = static_cast<int>(j);
                    }
                }
                const double w = migr_watts(vm);
                if (target < 0 || best_surplus < vm.power_watts + w) continue;
                state.consum_watts[k] += w - vm.power_watts;
                state.consum_watts[target] += vm.power_watts + w;
                actions.migrations.push_back({vm.key, static_cast<int>(k), target});
                vm.rmdc = target;
            }
        }

        if (deficit() > 0) {
            std::vector<std::size_t> order;
            for (std::size_t i = 0; i < state.vms.size(); ++i)
                if (state.vms[i].rmdc == static_cast<int>(k) && state.vms[i].evictable)
                    order.push_back(i);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return state.vms[a].power_watts > state.vms[b].power_watts;
            });
            for (std::size_t i : order) {
                if (deficit() <= 0) break;
                const PolicyVm& vm = state.vms[i];
                const double sum_after = state.scope_avail_sum - state.avail_now.at(vm.key) +
                                         state.avail_if_suspended.at(vm.key);
                if (sum_after < state.scope_avail_requirement - 1e-9)
                    break;  // the floor binds: stop suspending
                state.scope_avail_sum = sum_after;
                state.consum_watts[k] -= vm.power_watts;
                actions.suspensions.push_back(vm.key);
            }
        }

        if (deficit() > 0) actions.grid_watts[k] = deficit();
    }
    return actions;
}

// ---------------------------------------------------------------------------
// Heuristic policies evaluated on a solver instance (shared-instance
// comparisons against the exact optimum)

/// Replays the best-effort or the no-migration rule over a model instance,
/// producing a feasible schedule under the model's own availability floor.
/// VMs without a snapshot placement start on rMDC 0 of their subgraph.
inline mip::Schedule policy_schedule(const mip::MipModel& model, PolicyKind kind) {
    const bool allow_migration = kind != PolicyKind::distr_grid &&
                                 kind != PolicyKind::distr_battery;
    const int T = model.horizon_steps;
    const std::size_t M = model.vms.size();

    mip::Placement place(M, std::vector<int>(T, -1));
    std::vector<int> where(M);
    std::vector<int> prog(M, 0);
    std::vector<int> down(M, 0);
    for (std::size_t m = 0; m < M; ++m)
        where[m] = std::max(0, model.vms[m].initial_rmdc);

    double scope_sum = 0.0;
    const double scope_required = model.evictable_avail_requirement();
    auto avail_of = [&](std::size_t m, int extra_down) {
        return model.vms[m].avail_with(down[m] + extra_down);
    };
    for (std::size_t m = 0; m < M; ++m)
        if (model.vms[m].evictable) scope_sum += avail_of(m, 0);

    for (int t = 0; t < T; ++t) {
        for (std::size_t n = 0; n < model.subgraphs.size(); ++n) {
            PolicyStepState st;
            const std::size_t K = model.subgraphs[n].rmdcs.size();
            st.supply_watts.resize(K);
            for (std::size_t k = 0; k < K; ++k)
                st.supply_watts[k] = model.subgraphs[n].rmdcs[k].supply_watts[t];
            st.consum_watts.assign(K, 0.0);
            st.migr_wh_per_gb = model.power_migr_wh_per_gb;
            st.step_hours = model.step_hours();
            st.scope_avail_sum = scope_sum;
            st.scope_avail_requirement = scope_required;
            for (std::size_t m = 0; m < M; ++m) {
                const auto& vm = model.vms[m];
                if (vm.subgraph != static_cast<int>(n) || prog[m] >= vm.lifetime_steps) continue;
                st.vms.push_back({static_cast<int>(m), vm.power_watts, vm.mem_gb, vm.evictable,
                                  where[m]});
                st.consum_watts[where[m]] += vm.power_watts;
                if (vm.evictable) {
                    st.avail_now[static_cast<int>(m)] = avail_of(m, 0);
                    st.avail_if_suspended[static_cast<int>(m)] = avail_of(m, 1);
                }
            }
            const PolicyActions actions = best_effort_step(st, allow_migration);
            for (const auto& mig : actions.migrations) where[mig.vm_key] = mig.to_rmdc;
            std::vector<bool> suspended(M, false);
            for (int key : actions.suspensions) suspended[key] = true;
            for (const auto& vm : st.vms) {
                const std::size_t m = vm.key;
                if (suspended[m]) {
                    ++down[m];
                    if (model.vms[m].evictable)
                        scope_sum += avail_of(m, 0) - avail_of(m, -1);
                } else {
                    place[m][t] = where[m];
                    ++prog[m];
                }
            }
        }
    }
    mip::Schedule s = mip::evaluate_schedule(model, std::move(place));
    s.optimal = false;
    return s;
}

// ---------------------------------------------------------------------------
// Accounting topology per policy

struct TransmissionLine {
    std::string site_id;
    double miles = 0.0;
};

struct PolicyTopology {
    PolicyKind kind = PolicyKind::skybox_mip;
    Inventory inventory;
    std::vector<TransmissionLine> lines;
    double extra_battery_hours = 0.0;
};

inline constexpr double kKmPerMile = 1.609344;

namespace detail {

/// Servers and the battery/cooling/construction that scale with them, sized to
/// harvest the given peak supply.
inline void provision(Inventory& inv, double peak_watts, const RmdcConfig& config,
                      double extra_battery_hours) {
    const double servers = std::ceil(peak_watts / config.per_server_watts());
    const double peak_kw = servers * config.per_server_watts() / 1000.0;
    inv.servers += servers;
    inv.battery_kwh += peak_kw * (config.battery_backup_minutes / 60.0 + extra_battery_hours);
    inv.cooling_m2 += config.total_footprint_m2() * servers / config.servers();
    inv.construction_watts += servers * config.per_server_watts();
}

}  // namespace detail

/// Derives the accounting topology: how many rMDCs exist, how they are
/// provisioned against their (aggregated) peak supply, and which transmission
/// lines the centralized variants must build. Every policy keeps the default
/// backup battery; distr_battery adds one hour of server operation on top.
inline PolicyTopology apply_policy(PolicyKind kind, std::span<const Site> sites,
                                   std::span<const Subgraph> subgraphs,
                                   const RmdcConfig& config) {
    if (sites.empty()) throw DataError("apply_policy: no sites");
    PolicyTopology topo;
    topo.kind = kind;
    topo.extra_battery_hours = kind == PolicyKind::distr_battery ? 1.0 : 0.0;

    auto site_by_id = [&](const std::string& id) -> const Site& {
        for (const Site& s : sites)
            if (s.site_id == id) return s;
        throw DataError("apply_policy: unknown site '" + id + "'");
    };
    auto aggregated_peak = [&](std::span<const std::string> ids) {
        const std::size_t len = site_by_id(ids.front()).trace.samples.size();
        double peak = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            double sum = 0.0;
            for (const auto& id : ids) sum += site_by_id(id).trace.samples[t];
            peak = std::max(peak, sum);
        }
        return peak;
    };

    switch (kind) {
        case PolicyKind::skybox_mip:
        case PolicyKind::skybox_best_effort:
        case PolicyKind::distr_grid:
        case PolicyKind::distr_battery:
            for (const Site& s : sites)
                detail::provision(topo.inventory, s.trace.capacity_watts, config,
                                  topo.extra_battery_hours);
            break;
        case PolicyKind::centr_global: {
            std::vector<Location> locs;
            std::vector<std::string> ids;
            for (const Site& s : sites) {
                locs.push_back(s.location);
                ids.push_back(s.site_id);
            }
            const Location center = geometric_center(locs);
            for (const Site& s : sites) {
                const double miles = distance_miles(s.location, center);
                topo.lines.push_back({s.site_id, miles});
                topo.inventory.transmission_km += miles * kKmPerMile;
            }
            detail::provision(topo.inventory, aggregated_peak(ids), config, 0.0);
            break;
        }
        case PolicyKind::centr_graph: {
            if (subgraphs.empty()) throw DataError("apply_policy: centr_graph needs subgraphs");
            for (const Subgraph& g : subgraphs) {
                std::vector<Location> locs;
                for (const auto& id : g.member_ids) locs.push_back(site_by_id(id).location);
                const Location center = geometric_center(locs);
                for (const auto& id : g.member_ids) {
                    const double miles = distance_miles(site_by_id(id).location, center);
                    topo.lines.push_back({id, miles});
                    topo.inventory.transmission_km += miles * kKmPerMile;
                }
                detail::provision(topo.inventory, aggregated_peak(g.member_ids), config, 0.0);
            }
            break;
        }
    }
    return topo;
}

}  // namespace skybox
