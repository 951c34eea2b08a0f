#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skybox/accounting.hpp"
#include "skybox/errors.hpp"
#include "skybox/site.hpp"
#include "skybox/vm.hpp"

#include "json.hpp"

namespace skybox::mip {

// ---------------------------------------------------------------------------
// Model
//
// Time-indexed placement/migration instance over one or more subgraphs. Every
// VM is pinned to a subgraph (that assignment is the heuristic's job); the
// model decides, per step, which rMDC of that subgraph runs the VM, or none.
// Grid draw and renewable use per (subgraph, rmdc, step) cell follow
// analytically from the placements, so binaries are the whole search space.

struct ModelRmdc {
    std::string rmdc_id;
    double ci_renewable_g_per_kwh = 41.0;
    std::vector<double> supply_watts;  // predicted renewable supply over the horizon
};

struct ModelSubgraph {
    std::string subgraph_id;
    std::vector<ModelRmdc> rmdcs;
};

struct ModelVm {
    std::string vm_id;
    int subgraph = 0;
    double power_watts = 1.0;
    double mem_gb = 1.0;
    int lifetime_steps = 1;  // remaining predicted lifetime, in steps
    bool evictable = false;
    int initial_rmdc = -1;  // placement in the step before the horizon; -1 = not placed
    // Availability memory for rolling-horizon use: the full predicted lifetime
    // and the downtime already accrued before this horizon. Zero means "the
    // horizon is the whole story" (lifetime_steps, no history).
    int avail_lifetime_steps = 0;
    int past_downtime_steps = 0;

    int avail_lifetime() const {
        return avail_lifetime_steps > 0 ? avail_lifetime_steps : lifetime_steps;
    }
    double avail_with(int horizon_downtime) const {
        const double L = avail_lifetime();
        return L / (L + past_downtime_steps + horizon_downtime);
    }
    double max_avail() const { return avail_with(0); }
};

struct MipModel {
    double step_seconds = 3600.0;
    int horizon_steps = 0;
    double ci_grid_g_per_kwh = 700.0;
    double power_migr_wh_per_gb = 0.1;
    double avail_target = 0.9;
    // Count only grid energy in the objective instead of weighting both grid
    // and renewable energy by carbon intensity.
    bool grid_only_objective = false;
    std::vector<ModelSubgraph> subgraphs;
    std::vector<ModelVm> vms;

    double step_hours() const { return step_seconds / 3600.0; }

    /// Migration energy charged as average power over the step, applied to
    /// both the source and the target cell of the event.
    double migration_watts(const ModelVm& vm) const {
        return migration_energy_wh(vm.mem_gb, power_migr_wh_per_gb) / step_hours();
    }

    int rmdc_count(int subgraph) const {
        return static_cast<int>(subgraphs[subgraph].rmdcs.size());
    }

    std::int64_t x_var_count() const {
        std::int64_t n = 0;
        for (const auto& vm : vms) n += static_cast<std::int64_t>(rmdc_count(vm.subgraph)) * horizon_steps;
        return n;
    }

    std::int64_t m_var_count() const {
        std::int64_t n = 0;
        for (const auto& vm : vms) {
            const std::int64_t k = rmdc_count(vm.subgraph);
            n += k * (k - 1) * horizon_steps;
        }
        return n;
    }

    void validate() const {
        if (horizon_steps <= 0) throw DataError("model: horizon must be > 0");
        if (!(step_seconds > 0)) throw DataError("model: step must be > 0");
        if (subgraphs.empty()) throw DataError("model: empty cluster");
        for (const auto& sg : subgraphs) {
            if (sg.rmdcs.empty()) throw DataError("model: subgraph '" + sg.subgraph_id + "' has no rMDCs");
            for (const auto& r : sg.rmdcs)
                if (r.supply_watts.size() < static_cast<std::size_t>(horizon_steps))
                    throw DataError("model: rMDC '" + r.rmdc_id + "' supply shorter than horizon");
        }
        for (const auto& vm : vms) {
            if (vm.subgraph < 0 || vm.subgraph >= static_cast<int>(subgraphs.size()))
                throw DataError("model: vm '" + vm.vm_id + "' references unknown subgraph");
            if (vm.initial_rmdc >= rmdc_count(vm.subgraph))
                throw DataError("model: vm '" + vm.vm_id + "' initial rMDC out of range");
            if (vm.lifetime_steps < 1) throw DataError("model: vm '" + vm.vm_id + "' lifetime < 1");
            if (!(vm.power_watts > 0)) throw DataError("model: vm '" + vm.vm_id + "' power <= 0");
            if (vm.past_downtime_steps < 0 || vm.avail_lifetime_steps < 0)
                throw DataError("model: vm '" + vm.vm_id + "' negative availability history");
        }
        if (!(avail_target >= 0.0 && avail_target <= 1.0))
            throw DataError("model: availability target must be in [0, 1]");
    }

    /// The mean-availability floor actually enforced: the target, clamped to
    /// what the evictable set can still reach (accrued downtime may have
    /// already put the plain target out of reach; the constraint then demands
    /// the best achievable mean instead of going infeasible).
    double evictable_avail_requirement() const {
        double achievable = 0.0;
        int count = 0;
        for (const auto& vm : vms)
            if (vm.evictable) {
                achievable += vm.max_avail();
                ++count;
            }
        return std::min(avail_target * count, achievable);
    }
};

// ---------------------------------------------------------------------------
// Schedule

/// placements[vm][t]: rMDC index within the VM's subgraph, or -1 when off.
using Placement = std::vector<std::vector<int>>;

struct Migration {
    int vm = 0;
    int subgraph = 0;
    int from_rmdc = 0;
    int to_rmdc = 0;
    int step = 0;
};

struct VmOutcome {
    int uptime_steps = 0;
    int downtime_steps = 0;   // off-steps before completion (or horizon end)
    int completion_step = -1;  // -1: not completed within the horizon
    double avail = 1.0;        // lifetime / (lifetime + downtime)
};

struct Schedule {
    Placement placements;
    std::vector<Migration> migrations;
    // Cell series indexed [subgraph][rmdc][step], all in watts.
    std::vector<std::vector<std::vector<double>>> consum_watts;
    std::vector<std::vector<std::vector<double>>> renewable_used_watts;
    std::vector<std::vector<std::vector<double>>> grid_watts;
    std::vector<VmOutcome> vm_outcomes;
    double objective_carbon_g = 0.0;
    double evictable_avail_sum = 0.0;
    int evictable_count = 0;
    double evictable_uptime_mean = 1.0;  // 1.0 when there are no evictable VMs
    int migration_count = 0;
    bool optimal = true;
};

/// Objective order: carbon, then evictable uptime, then migration count, then
/// the placement matrix itself so replays always pick the same winner.
inline bool schedule_better(const Schedule& a, const Schedule& b) {
    if (a.objective_carbon_g != b.objective_carbon_g)
        return a.objective_carbon_g < b.objective_carbon_g;
    if (a.evictable_avail_sum != b.evictable_avail_sum)
        return a.evictable_avail_sum > b.evictable_avail_sum;
    if (a.migration_count != b.migration_count) return a.migration_count < b.migration_count;
    return a.placements < b.placements;
}

inline bool meets_avail_requirement(double avail_sum, double required_sum) {
    return avail_sum >= required_sum - 1e-9;
}

/// Derives migrations from consecutive placements: an event needs the VM on in
/// both steps on different rMDCs. Off-then-on elsewhere is a restart, not a
/// migration. The step-0 reference placement is the VM's snapshot placement.
inline std::vector<Migration> derive_migrations(const MipModel& model, const Placement& place) {
    std::vector<Migration> out;
    for (int t = 0; t < model.horizon_steps; ++t) {
        for (std::size_t m = 0; m < model.vms.size(); ++m) {
            const int prev = t == 0 ? model.vms[m].initial_rmdc : place[m][t - 1];
            const int cur = place[m][t];
            if (prev >= 0 && cur >= 0 && prev != cur)
                out.push_back({static_cast<int>(m), model.vms[m].subgraph, prev, cur, t});
        }
    }
    return out;
}

/// Computes the full schedule implied by a placement matrix: cell loads with
/// migration charges, the analytic renewable/grid split, per-VM progress, and
/// the carbon objective. This is the single evaluation path shared by the
/// solver, the oracle, and the feasibility checker.
inline Schedule evaluate_schedule(const MipModel& model, Placement place) {
    const int T = model.horizon_steps;
    Schedule s;
    s.consum_watts.resize(model.subgraphs.size());
    s.renewable_used_watts.resize(model.subgraphs.size());
    s.grid_watts.resize(model.subgraphs.size());
    for (std::size_t n = 0; n < model.subgraphs.size(); ++n) {
        const std::size_t K = model.subgraphs[n].rmdcs.size();
        s.consum_watts[n].assign(K, std::vector<double>(T, 0.0));
        s.renewable_used_watts[n].assign(K, std::vector<double>(T, 0.0));
        s.grid_watts[n].assign(K, std::vector<double>(T, 0.0));
    }

    for (std::size_t m = 0; m < model.vms.size(); ++m) {
        const auto& vm = model.vms[m];
        for (int t = 0; t < T; ++t) {
            const int k = place[m][t];
            if (k >= 0) s.consum_watts[vm.subgraph][k][t] += vm.power_watts;
        }
    }

    s.migrations = derive_migrations(model, place);
    for (const Migration& mig : s.migrations) {
        const double w = model.migration_watts(model.vms[mig.vm]);
        s.consum_watts[mig.subgraph][mig.from_rmdc][mig.step] += w;
        s.consum_watts[mig.subgraph][mig.to_rmdc][mig.step] += w;
    }
    s.migration_count = static_cast<int>(s.migrations.size());

    s.vm_outcomes.resize(model.vms.size());
    for (std::size_t m = 0; m < model.vms.size(); ++m) {
        const auto& vm = model.vms[m];
        VmOutcome& o = s.vm_outcomes[m];
        int prog = 0;
        for (int t = 0; t < T; ++t) {
            if (place[m][t] >= 0) {
                ++prog;
                if (prog == vm.lifetime_steps && o.completion_step < 0) o.completion_step = t;
            } else if (o.completion_step < 0) {
                ++o.downtime_steps;
            }
            if (o.completion_step >= 0 && t >= o.completion_step) break;
        }
        o.uptime_steps = prog;
        o.avail = vm.avail_with(o.downtime_steps);
        if (vm.evictable) {
            ++s.evictable_count;
            s.evictable_avail_sum += o.avail;
        }
    }
    s.evictable_uptime_mean =
        s.evictable_count == 0 ? 1.0 : s.evictable_avail_sum / s.evictable_count;

    double carbon = 0.0;
    for (std::size_t n = 0; n < model.subgraphs.size(); ++n) {
        for (std::size_t k = 0; k < model.subgraphs[n].rmdcs.size(); ++k) {
            const auto& rmdc = model.subgraphs[n].rmdcs[k];
            for (int t = 0; t < T; ++t) {
                const double consum = s.consum_watts[n][k][t];
                const double ru = std::min(consum, rmdc.supply_watts[t]);
                const double nr = consum - ru;
                s.renewable_used_watts[n][k][t] = ru;
                s.grid_watts[n][k][t] = nr;
                carbon += kwh_from_watts(nr, model.step_seconds) * model.ci_grid_g_per_kwh;
                if (!model.grid_only_objective)
                    carbon += kwh_from_watts(ru, model.step_seconds) * rmdc.ci_renewable_g_per_kwh;
            }
        }
    }
    s.objective_carbon_g = carbon;
    s.placements = std::move(place);
    return s;
}

// ---------------------------------------------------------------------------
// Snapshot -> model

struct SnapshotRmdc {
    std::string site_id;
    EnergyKind kind = EnergyKind::solar;
};

struct SnapshotSubgraph {
    std::string subgraph_id;
    std::vector<SnapshotRmdc> rmdcs;
};

struct SnapshotVm {
    VmSpec spec;
    int subgraph = 0;
    int rmdc = -1;  // current placement, -1 when not running
    std::int64_t remaining_lifetime_steps = 1;  // predicted, corrector applied by the caller
    std::int64_t effective_lifetime_steps = 0;  // full predicted lifetime (0: remaining)
    std::int64_t downtime_so_far_steps = 0;     // accrued before this horizon
};

struct ClusterSnapshot {
    std::vector<SnapshotSubgraph> subgraphs;
    std::vector<SnapshotVm> vms;
};

struct MipParams {
    double step_seconds = 3600.0;
    CarbonParams carbon;
    double power_migr_wh_per_gb = 0.1;
    double avail_target = 0.9;
    bool grid_only_objective = false;
};

/// Builds the time-indexed instance from the cluster snapshot and per-site
/// forecasts, taking supply for steps [start_step, start_step + horizon).
/// VMs are ordered by id so identical snapshots build identical models.
inline MipModel build_model(const ClusterSnapshot& state,
                            const std::map<std::string, Forecast>& forecasts,
                            std::size_t start_step, int horizon_steps, const MipParams& params) {
    if (horizon_steps <= 0) throw DataError("build_model: horizon must be > 0");
    bool any_rmdc = false;
    for (const auto& sg : state.subgraphs) any_rmdc = any_rmdc || !sg.rmdcs.empty();
    if (!any_rmdc) throw DataError("build_model: empty cluster");

    MipModel model;
    model.step_seconds = params.step_seconds;
    model.horizon_steps = horizon_steps;
    model.ci_grid_g_per_kwh = params.carbon.intensity_brown_g_per_kwh;
    model.power_migr_wh_per_gb = params.power_migr_wh_per_gb;
    model.avail_target = params.avail_target;
    model.grid_only_objective = params.grid_only_objective;

    for (const auto& sg : state.subgraphs) {
        ModelSubgraph msg;
        msg.subgraph_id = sg.subgraph_id;
        for (const auto& r : sg.rmdcs) {
            const auto it = forecasts.find(r.site_id);
            if (it == forecasts.end())
                throw DataError("build_model: no forecast for site '" + r.site_id + "'");
            const Forecast& f = it->second;
            if (f.predicted.size() < start_step + static_cast<std::size_t>(horizon_steps))
                throw DataError("build_model: forecast for '" + r.site_id +
                                "' does not cover the horizon");
            ModelRmdc mr;
            mr.rmdc_id = r.site_id;
            mr.ci_renewable_g_per_kwh = r.kind == EnergyKind::solar
                                            ? params.carbon.intensity_solar_g_per_kwh
                                            : params.carbon.intensity_wind_g_per_kwh;
            mr.supply_watts.assign(f.predicted.begin() + start_step,
                                   f.predicted.begin() + start_step + horizon_steps);
            msg.rmdcs.push_back(std::move(mr));
        }
        model.subgraphs.push_back(std::move(msg));
    }

    std::vector<const SnapshotVm*> order;
    order.reserve(state.vms.size());
    for (const auto& v : state.vms) order.push_back(&v);
    std::sort(order.begin(), order.end(),
              [](const SnapshotVm* a, const SnapshotVm* b) { return a->spec.vm_id < b->spec.vm_id; });
    for (const SnapshotVm* v : order) {
        ModelVm mv;
        mv.vm_id = v->spec.vm_id;
        mv.subgraph = v->subgraph;
        mv.power_watts = v->spec.power_watts;
        mv.mem_gb = v->spec.mem_gb;
        mv.lifetime_steps = static_cast<int>(std::max<std::int64_t>(1, v->remaining_lifetime_steps));
        mv.evictable = v->spec.category == VmCategory::evictable;
        mv.initial_rmdc = v->rmdc;
        mv.avail_lifetime_steps = static_cast<int>(std::max<std::int64_t>(
            mv.lifetime_steps, v->effective_lifetime_steps));
        mv.past_downtime_steps = static_cast<int>(std::max<std::int64_t>(0, v->downtime_so_far_steps));
        model.vms.push_back(std::move(mv));
    }
    model.validate();
    return model;
}

// ---------------------------------------------------------------------------
// Step-level migration extraction

/// Placement of one step: vm id -> (subgraph, rmdc). Absent means off.
using StepPlacement = std::map<std::string, std::pair<int, int>>;

struct StepMigration {
    std::string vm_id;
    std::pair<int, int> from;
    std::pair<int, int> to;
};

/// One entry per VM that is on in both steps with a different rMDC. A VM that
/// was powered off and later restarted elsewhere is an eviction plus restart,
/// not a migration.
inline std::vector<StepMigration> extract_migrations(const StepPlacement& prev,
                                                     const StepPlacement& next) {
    std::vector<StepMigration> out;
    for (const auto& [vm_id, to] : next) {
        const auto it = prev.find(vm_id);
        if (it != prev.end() && it->second != to) out.push_back({vm_id, it->second, to});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feasibility checking

enum class Constraint { none, structure, c1_power, c1p_consumption, c2_progress, c3_completion, c4_availability, c5_migration };

inline const char* to_string(Constraint c) {
    switch (c) {
        case Constraint::none: return "ok";
        case Constraint::structure: return "structure";
        case Constraint::c1_power: return "C1";
        case Constraint::c1p_consumption: return "C1'";
        case Constraint::c2_progress: return "C2";
        case Constraint::c3_completion: return "C3";
        case Constraint::c4_availability: return "C4";
        case Constraint::c5_migration: return "C5";
    }
    return "?";
}

struct FeasibilityReport {
    bool ok = true;
    Constraint violated = Constraint::none;
    std::string detail;
};

inline constexpr double kPowerTolWatts = 1e-6;

/// Verifies every constraint numerically and reports the first violation with
/// its indices. Checks run in order C1, C1', C2, C3, C4, C5.
inline FeasibilityReport check_feasible(const MipModel& model, const Schedule& s) {
    const int T = model.horizon_steps;
    auto fail = [](Constraint c, std::string detail) {
        return FeasibilityReport{false, c, std::move(detail)};
    };

    // Structure: dimensions and placement ranges.
    if (s.placements.size() != model.vms.size())
        return fail(Constraint::structure, "placement row count != VM count");
    for (std::size_t m = 0; m < model.vms.size(); ++m) {
        if (s.placements[m].size() != static_cast<std::size_t>(T))
            return fail(Constraint::structure, "vm " + std::to_string(m) + ": placement length != horizon");
        for (int t = 0; t < T; ++t) {
            const int k = s.placements[m][t];
            if (k < -1 || k >= model.rmdc_count(model.vms[m].subgraph))
                return fail(Constraint::structure,
                            "vm " + std::to_string(m) + " step " + std::to_string(t) +
                                ": rMDC index out of range");
        }
    }
    auto cell_dims_ok = [&](const auto& cells) {
        if (cells.size() != model.subgraphs.size()) return false;
        for (std::size_t n = 0; n < cells.size(); ++n) {
            if (cells[n].size() != model.subgraphs[n].rmdcs.size()) return false;
            for (const auto& row : cells[n])
                if (row.size() != static_cast<std::size_t>(T)) return false;
        }
        return true;
    };
    if (!cell_dims_ok(s.consum_watts) || !cell_dims_ok(s.renewable_used_watts) ||
        !cell_dims_ok(s.grid_watts))
        return fail(Constraint::structure, "cell series dimensions do not match the model");
    if (s.vm_outcomes.size() != model.vms.size())
        return fail(Constraint::structure, "outcome count != VM count");

    // C1: power balance per cell; renewable use within supply.
    for (std::size_t n = 0; n < model.subgraphs.size(); ++n)
        for (std::size_t k = 0; k < model.subgraphs[n].rmdcs.size(); ++k)
            for (int t = 0; t < T; ++t) {
                const double consum = s.consum_watts[n][k][t];
                const double ru = s.renewable_used_watts[n][k][t];
                const double nr = s.grid_watts[n][k][t];
                const std::string at = "(n=" + std::to_string(n) + ",k=" + std::to_string(k) +
                                       ",t=" + std::to_string(t) + ")";
                if (nr < -kPowerTolWatts || ru < -kPowerTolWatts)
                    return fail(Constraint::c1_power, "negative power at " + at);
                if (ru > model.subgraphs[n].rmdcs[k].supply_watts[t] + kPowerTolWatts)
                    return fail(Constraint::c1_power, "renewable use exceeds supply at " + at);
                if (std::abs(consum - (nr + ru)) > kPowerTolWatts)
                    return fail(Constraint::c1_power,
                                "consumption not covered by grid + renewable at " + at);
            }

    // C1': recorded consumption must equal VM power plus migration charges
    // derived from the placements.
    {
        const Schedule ref = evaluate_schedule(model, s.placements);
        for (std::size_t n = 0; n < model.subgraphs.size(); ++n)
            for (std::size_t k = 0; k < model.subgraphs[n].rmdcs.size(); ++k)
                for (int t = 0; t < T; ++t)
                    if (std::abs(s.consum_watts[n][k][t] - ref.consum_watts[n][k][t]) >
                        kPowerTolWatts)
                        return fail(Constraint::c1p_consumption,
                                    "consumption accounting mismatch at (n=" + std::to_string(n) +
                                        ",k=" + std::to_string(k) + ",t=" + std::to_string(t) +
                                        ")");
    }

    // C2: uptime ledger matches placements; regular VMs stay on until done.
    // Progress is capped at the lifetime; running past it is C3's business.
    for (std::size_t m = 0; m < model.vms.size(); ++m) {
        const auto& vm = model.vms[m];
        int prog = 0;
        for (int t = 0; t < T; ++t) {
            const bool on = s.placements[m][t] >= 0;
            if (!on && !vm.evictable && prog < vm.lifetime_steps)
                return fail(Constraint::c2_progress,
                            "regular vm '" + vm.vm_id + "' off at step " + std::to_string(t) +
                                " before completion");
            if (on && prog < vm.lifetime_steps) ++prog;
        }
        if (s.vm_outcomes[m].uptime_steps != prog)
            return fail(Constraint::c2_progress,
                        "vm '" + vm.vm_id + "' uptime ledger does not match placements");
    }

    // C3: completion marking and the lifetime cap.
    for (std::size_t m = 0; m < model.vms.size(); ++m) {
        const auto& vm = model.vms[m];
        int prog = 0;
        int completion = -1;
        for (int t = 0; t < T; ++t)
            if (s.placements[m][t] >= 0) {
                ++prog;
                if (prog == vm.lifetime_steps && completion < 0) completion = t;
            }
        if (prog > vm.lifetime_steps)
            return fail(Constraint::c3_completion,
                        "vm '" + vm.vm_id + "' runs past its lifetime");
        if (s.vm_outcomes[m].completion_step != completion)
            return fail(Constraint::c3_completion,
                        "vm '" + vm.vm_id + "' completion marking inconsistent");
    }

    // C4: recorded availability and the mean floor over evictable VMs.
    {
        double sum = 0.0;
        for (std::size_t m = 0; m < model.vms.size(); ++m) {
            const auto& vm = model.vms[m];
            int down = 0;
            int prog = 0;
            for (int t = 0; t < T; ++t) {
                if (s.placements[m][t] >= 0) {
                    ++prog;
                    if (prog == vm.lifetime_steps) break;
                } else {
                    ++down;
                }
            }
            const double avail = vm.avail_with(down);
            if (std::abs(s.vm_outcomes[m].avail - avail) > 1e-9)
                return fail(Constraint::c4_availability,
                            "vm '" + vm.vm_id + "' availability ledger mismatch");
            if (vm.evictable) sum += avail;
        }
        if (!meets_avail_requirement(sum, model.evictable_avail_requirement()))
            return fail(Constraint::c4_availability,
                        "mean evictable availability below target");
    }

    // C5: migration list must match the placement-derived events exactly.
    {
        auto key = [](const Migration& m) {
            return std::tuple(m.step, m.vm, m.subgraph, m.from_rmdc, m.to_rmdc);
        };
        std::vector<Migration> recorded = s.migrations;
        std::vector<Migration> derived = derive_migrations(model, s.placements);
        auto lt = [&](const Migration& a, const Migration& b) { return key(a) < key(b); };
        std::sort(recorded.begin(), recorded.end(), lt);
        std::sort(derived.begin(), derived.end(), lt);
        for (std::size_t i = 1; i < recorded.size(); ++i)
            if (recorded[i].vm == recorded[i - 1].vm && recorded[i].step == recorded[i - 1].step)
                return fail(Constraint::c5_migration,
                            "vm migrates more than once in step " + std::to_string(recorded[i].step));
        if (recorded.size() != derived.size())
            return fail(Constraint::c5_migration, "migration list does not match placements");
        for (std::size_t i = 0; i < recorded.size(); ++i)
            if (key(recorded[i]) != key(derived[i]))
                return fail(Constraint::c5_migration,
                            "migration entry " + std::to_string(i) + " not linked to placements");
    }

    return {};
}

// ---------------------------------------------------------------------------
// JSON (model dump/load and the external-solver solution contract)

inline nlohmann::json model_to_json(const MipModel& m) {
    nlohmann::json j;
    j["step_seconds"] = m.step_seconds;
    j["horizon_steps"] = m.horizon_steps;
    j["ci_grid_g_per_kwh"] = m.ci_grid_g_per_kwh;
    j["power_migr_wh_per_gb"] = m.power_migr_wh_per_gb;
    j["avail_target"] = m.avail_target;
    j["grid_only_objective"] = m.grid_only_objective;
    j["subgraphs"] = nlohmann::json::array();
    for (const auto& sg : m.subgraphs) {
        nlohmann::json js;
        js["subgraph_id"] = sg.subgraph_id;
        js["rmdcs"] = nlohmann::json::array();
        for (const auto& r : sg.rmdcs)
            js["rmdcs"].push_back({{"rmdc_id", r.rmdc_id},
                                   {"ci_renewable_g_per_kwh", r.ci_renewable_g_per_kwh},
                                   {"supply_watts", r.supply_watts}});
        j["subgraphs"].push_back(std::move(js));
    }
    j["vms"] = nlohmann::json::array();
    for (const auto& vm : m.vms)
        j["vms"].push_back({{"vm_id", vm.vm_id},
                            {"subgraph", vm.subgraph},
                            {"power_watts", vm.power_watts},
                            {"mem_gb", vm.mem_gb},
                            {"lifetime_steps", vm.lifetime_steps},
                            {"evictable", vm.evictable},
                            {"initial_rmdc", vm.initial_rmdc},
                            {"avail_lifetime_steps", vm.avail_lifetime_steps},
                            {"past_downtime_steps", vm.past_downtime_steps}});
    return j;
}

inline MipModel model_from_json(const nlohmann::json& j) {
    MipModel m;
    try {
        m.step_seconds = j.at("step_seconds").get<double>();
        m.horizon_steps = j.at("horizon_steps").get<int>();
        m.ci_grid_g_per_kwh = j.at("ci_grid_g_per_kwh").get<double>();
        m.power_migr_wh_per_gb = j.at("power_migr_wh_per_gb").get<double>();
        m.avail_target = j.at("avail_target").get<double>();
        m.grid_only_objective = j.at("grid_only_objective").get<bool>();
        for (const auto& js : j.at("subgraphs")) {
            ModelSubgraph sg;
            sg.subgraph_id = js.at("subgraph_id").get<std::string>();
            for (const auto& jr : js.at("rmdcs")) {
                ModelRmdc r;
                r.rmdc_id = jr.at("rmdc_id").get<std::string>();
                r.ci_renewable_g_per_kwh = jr.at("ci_renewable_g_per_kwh").get<double>();
                r.supply_watts = jr.at("supply_watts").get<std::vector<double>>();
                sg.rmdcs.push_back(std::move(r));
            }
            m.subgraphs.push_back(std::move(sg));
        }
        for (const auto& jv : j.at("vms")) {
            ModelVm vm;
            vm.vm_id = jv.at("vm_id").get<std::string>();
            vm.subgraph = jv.at("subgraph").get<int>();
            vm.power_watts = jv.at("power_watts").get<double>();
            vm.mem_gb = jv.at("mem_gb").get<double>();
            vm.lifetime_steps = jv.at("lifetime_steps").get<int>();
            vm.evictable = jv.at("evictable").get<bool>();
            vm.initial_rmdc = jv.at("initial_rmdc").get<int>();
            if (jv.contains("avail_lifetime_steps"))
                vm.avail_lifetime_steps = jv.at("avail_lifetime_steps").get<int>();
            if (jv.contains("past_downtime_steps"))
                vm.past_downtime_steps = jv.at("past_downtime_steps").get<int>();
            m.vms.push_back(std::move(vm));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model json: ") + e.what());
    }
    m.validate();
    return m;
}

inline nlohmann::json schedule_to_json(const MipModel& model, const Schedule& s) {
    nlohmann::json j;
    nlohmann::json places;
    for (std::size_t m = 0; m < model.vms.size(); ++m)
        places[model.vms[m].vm_id] = s.placements[m];
    j["placements"] = std::move(places);
    j["migrations"] = nlohmann::json::array();
    for (const auto& mig : s.migrations)
        j["migrations"].push_back({{"vm_id", model.vms[mig.vm].vm_id},
                                   {"subgraph", mig.subgraph},
                                   {"from", mig.from_rmdc},
                                   {"to", mig.to_rmdc},
                                   {"step", mig.step}});
    j["grid_watts"] = s.grid_watts;
    j["renewable_used_watts"] = s.renewable_used_watts;
    j["consum_watts"] = s.consum_watts;
    j["objective_carbon_g"] = s.objective_carbon_g;
    j["evictable_uptime_mean"] = s.evictable_uptime_mean;
    j["migration_count"] = s.migration_count;
    j["optimal"] = s.optimal;
    return j;
}

/// Parses an external solver's solution: placements are authoritative and the
/// schedule is re-derived from them; a claimed objective, when present, must
/// agree with the re-derived one.
inline Schedule schedule_from_json(const MipModel& model, const nlohmann::json& j) {
    Placement place(model.vms.size(), std::vector<int>(model.horizon_steps, -1));
    try {
        const auto& places = j.at("placements");
        for (std::size_t m = 0; m < model.vms.size(); ++m) {
            const auto it = places.find(model.vms[m].vm_id);
            if (it == places.end())
                throw ParseError("solution json: missing placements for vm '" +
                                 model.vms[m].vm_id + "'");
            place[m] = it->get<std::vector<int>>();
            if (place[m].size() != static_cast<std::size_t>(model.horizon_steps))
                throw ParseError("solution json: placement length mismatch for vm '" +
                                 model.vms[m].vm_id + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("solution json: ") + e.what());
    }
    Schedule s = evaluate_schedule(model, std::move(place));
    if (j.contains("optimal")) s.optimal = j.at("optimal").get<bool>();
    if (j.contains("objective_carbon_g")) {
        const double claimed = j.at("objective_carbon_g").get<double>();
        const double tol = 1e-6 * std::max(1.0, std::abs(s.objective_carbon_g));
        if (std::abs(claimed - s.objective_carbon_g) > tol)
            throw DataError("solution json: claimed objective disagrees with placements");
    }
    return s;
}

}  // namespace skybox::mip
