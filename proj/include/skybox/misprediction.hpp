#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "skybox/accounting.hpp"
#include "skybox/errors.hpp"
#include "skybox/policies.hpp"

namespace skybox {

enum class MisDirection { under, exact, over };

/// Misprediction quadrant of one rMDC at one step. Exact predictions fold
/// into the benign direction of their axis, so fully exact lands in case 1.
struct MisCase {
    MisDirection lifetime = MisDirection::exact;
    MisDirection power = MisDirection::exact;
    int case_id = 1;  // 1: benign, 2: power deficiency, 3/4: extra lifetime (+ deficiency)

    bool benign() const { return case_id == 1; }
};

struct VmLifetimeObs {
    std::int64_t predicted_steps = 1;
    std::int64_t progress_steps = 0;
    bool running = true;
};

inline MisCase classify(double predicted_supply_watts, double actual_supply_watts,
                        std::span<const VmLifetimeObs> vms) {
    MisCase c;
    if (predicted_supply_watts > actual_supply_watts)
        c.power = MisDirection::over;
    else if (predicted_supply_watts < actual_supply_watts)
        c.power = MisDirection::under;

    bool lifetime_under = false;
    bool lifetime_over = false;
    for (const auto& vm : vms) {
        if (vm.progress_steps > vm.predicted_steps ||
            (vm.running && vm.progress_steps >= vm.predicted_steps))
            lifetime_under = true;
        else if (!vm.running && vm.progress_steps < vm.predicted_steps)
            lifetime_over = true;
    }
    c.lifetime = lifetime_under ? MisDirection::under
                                : (lifetime_over ? MisDirection::over : MisDirection::exact);

    const bool power_deficient = c.power == MisDirection::over;
    if (c.lifetime == MisDirection::under)
        c.case_id = power_deficient ? 4 : 3;
    else
        c.case_id = power_deficient ? 2 : 1;
    return c;
}

// ---------------------------------------------------------------------------
// Per-step handler

struct HandlerRmdc {
    double renewable_watts = 0.0;     // actual supply, revealed this step
    double planned_grid_watts = 0.0;  // transmission already decided by the plan
    double consum_watts = 0.0;        // running VM power plus planned migration charges
};

struct HandlerInput {
    std::vector<HandlerRmdc> rmdcs;  // one subgraph
    std::vector<PolicyVm> vms;       // running VMs in this subgraph
    double migr_wh_per_gb = 0.1;
    double step_hours = 1.0;
    // Shutdown halts once the summed evictable uptime would undershoot the
    // requirement (target uptime x evictable count in scope).
    double scope_avail_sum = 0.0;
    double scope_avail_requirement = 0.0;
    std::map<int, double> avail_now;
    std::map<int, double> avail_if_suspended;
};

struct HandlerActions {
    std::vector<PolicyMigration> migrations;
    std::vector<int> evictions;             // vm keys, in eviction order
    std::vector<double> extra_grid_watts;   // per rMDC, beyond the planned draw

    bool empty() const {
        if (!migrations.empty() || !evictions.empty()) return false;
        for (double g : extra_grid_watts)
            if (g > 0) return false;
        return true;
    }
};

/// Runs after the actual supply is revealed. If total supply (renewable plus
/// planned grid) covers consumption the misprediction is tolerable. Otherwise,
/// in strict order: (1) migrate VMs, descending average power, to same-subgraph
/// rMDCs with remaining energy; (2) shut down evictable VMs until the uptime
/// floor binds; (3) transmit more power from the grid to fill the gap.
inline HandlerActions handle(HandlerInput in) {
    HandlerActions actions;
    const std::size_t K = in.rmdcs.size();
    actions.extra_grid_watts.assign(K, 0.0);
    auto total_supply = [&](std::size_t k) {
        return in.rmdcs[k].renewable_watts + in.rmdcs[k].planned_grid_watts;
    };
    auto migr_watts = [&](const PolicyVm& vm) {
        return migration_energy_wh(vm.mem_gb, in.migr_wh_per_gb) / in.step_hours;
    };

    for (std::size_t k = 0; k < K; ++k) {
        auto deficit = [&]() { return in.rmdcs[k].consum_watts - total_supply(k); };
        if (deficit() <= 0) continue;

        if (K > 1) {
            std::vector<std::size_t> order;
            for (std::size_t i = 0; i < in.vms.size(); ++i)
                if (in.vms[i].rmdc == static_cast<int>(k)) order.push_back(i);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return in.vms[a].power_watts > in.vms[b].power_watts;
            });
            for (std::size_t i : order) {
                if (deficit() <= 0) break;
                PolicyVm& vm = in.vms[i];
                int target = -1;
                double best_remaining = 0.0;
                for (std::size_t j = 0; j < K; ++j) {
                    if (j == k) continue;
                    const double remaining = total_supply(j) - in.rmdcs[j].consum_watts;
                    if (remaining > best_remaining) {
                        best_remaining = remaining;
                        target = static_cast<int>(j);
                    }
                }
                const double w = migr_watts(vm);
                if (target < 0 || best_remaining < vm.power_watts + w) continue;
                in.rmdcs[k].consum_watts += w - vm.power_watts;
                in.rmdcs[target].consum_watts += vm.power_watts + w;
                actions.migrations.push_back({vm.key, static_cast<int>(k), target});
                vm.rmdc = target;
            }
        }

        if (deficit() > 0) {
            std::vector<std::size_t> order;
            for (std::size_t i = 0; i < in.vms.size(); ++i)
                if (in.vms[i].rmdc == static_cast<int>(k) && in.vms[i].evictable)
                    order.push_back(i);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return in.vms[a].power_watts > in.vms[b].power_watts;
            });
            for (std::size_t i : order) {
                if (deficit() <= 0) break;
                const PolicyVm& vm = in.vms[i];
                const double sum_after = in.scope_avail_sum - in.avail_now.at(vm.key) +
                                         in.avail_if_suspended.at(vm.key);
                if (sum_after < in.scope_avail_requirement - 1e-9) break;
                in.scope_avail_sum = sum_after;
                in.rmdcs[k].consum_watts -= vm.power_watts;
                actions.evictions.push_back(vm.key);
            }
        }

        if (deficit() > 0) actions.extra_grid_watts[k] = deficit();
    }
    return actions;
}

/// Running mean of (actual - predicted) over completed VMs whose lifetime was
/// under-predicted; added to later predictions.
struct LifetimeCorrector {
    double sum_steps = 0.0;
    std::int64_t completions = 0;

    double offset_steps() const {
        return completions == 0 ? 0.0 : sum_steps / static_cast<double>(completions);
    }

    void update(std::int64_t predicted_steps, std::int64_t actual_steps) {
        if (actual_steps > predicted_steps) {
            sum_steps += static_cast<double>(actual_steps - predicted_steps);
            ++completions;
        }
    }
};

}  // namespace skybox
