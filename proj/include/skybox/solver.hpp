#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <tuple>
#include <vector>

#include "skybox/errors.hpp"
#include "skybox/model.hpp"

namespace skybox::mip {

struct SolveLimits {
    std::int64_t max_nodes = 20'000'000;
    double max_seconds = 60.0;
};

struct SolveStats {
    std::int64_t nodes = 0;
    bool budget_exhausted = false;
};

namespace detail {

/// One admissible whole-horizon schedule for a single VM, with its cell load
/// deltas precomputed (VM power on its on-steps plus migration charges at the
/// source and target cells of each transition).
struct VmRow {
    std::vector<int> place;
    std::vector<std::tuple<int, int, double>> cell_add;  // (rmdc, step, watts)
    int migrations = 0;
    double avail = 1.0;
    double sort_key = 0.0;
};

inline VmRow make_row(const MipModel& model, std::size_t m, std::vector<int> place) {
    const ModelVm& vm = model.vms[m];
    VmRow row;
    const double w_migr = model.migration_watts(vm);
    int prev = vm.initial_rmdc;
    int prog = 0;
    int down = 0;
    bool done = false;
    for (int t = 0; t < model.horizon_steps; ++t) {
        const int cur = place[t];
        if (cur >= 0) {
            row.cell_add.emplace_back(cur, t, vm.power_watts);
            if (prev >= 0 && prev != cur) {
                row.cell_add.emplace_back(prev, t, w_migr);
                row.cell_add.emplace_back(cur, t, w_migr);
                ++row.migrations;
            }
            ++prog;
            if (prog == vm.lifetime_steps) done = true;
        } else if (!done) {
            ++down;
        }
        prev = place[t];
    }
    row.avail = vm.avail_with(down);
    double energy_w = 0.0;
    for (const auto& [k, t, w] : row.cell_add) energy_w += w;
    row.sort_key = energy_w;
    row.place = std::move(place);
    return row;
}

/// All admissible schedules of VM m. Regular VMs run every step until their
/// lifetime is fulfilled or the horizon ends; evictable VMs may hold any
/// on/off pattern as long as they never run past completion.
inline std::vector<VmRow> vm_rows(const MipModel& model, std::size_t m) {
    const ModelVm& vm = model.vms[m];
    const int T = model.horizon_steps;
    const int K = model.rmdc_count(vm.subgraph);
    std::vector<VmRow> rows;
    std::vector<int> place(T, -1);
    auto rec = [&](auto&& self, int t, int prog) -> void {
        if (t == T) {
            rows.push_back(make_row(model, m, place));
            return;
        }
        const bool may_run = prog < vm.lifetime_steps;
        const bool may_idle = vm.evictable || !may_run;
        if (may_idle) {
            place[t] = -1;
            self(self, t + 1, prog);
        }
        if (may_run)
            for (int k = 0; k < K; ++k) {
                place[t] = k;
                self(self, t + 1, prog + 1);
            }
        place[t] = -1;
    };
    rec(rec, 0, 0);
    return rows;
}

inline std::int64_t row_count(const MipModel& model, std::size_t m) {
    const ModelVm& vm = model.vms[m];
    const int T = model.horizon_steps;
    const std::int64_t K = model.rmdc_count(vm.subgraph);
    if (!vm.evictable) {
        std::int64_t n = 1;
        for (int t = 0; t < std::min<int>(T, vm.lifetime_steps); ++t) n *= K;
        return n;
    }
    // Sum over the number of on-steps j <= lifetime of C(T, j) * K^j.
    std::vector<std::int64_t> binom(T + 1, 0);
    binom[0] = 1;
    for (int t = 1; t <= T; ++t)
        for (int j = t; j >= 1; --j) binom[j] += binom[j - 1];
    std::int64_t n = 0;
    std::int64_t kpow = 1;
    for (int j = 0; j <= std::min<int>(T, vm.lifetime_steps); ++j) {
        n += binom[j] * kpow;
        kpow *= K;
    }
    return n;
}

struct CellLoads {
    // loads[n][k][t] in watts; summation order fixed for reproducible carbon.
    std::vector<std::vector<std::vector<double>>> w;

    explicit CellLoads(const MipModel& model) {
        w.resize(model.subgraphs.size());
        for (std::size_t n = 0; n < model.subgraphs.size(); ++n)
            w[n].assign(model.subgraphs[n].rmdcs.size(),
                        std::vector<double>(model.horizon_steps, 0.0));
    }

    void apply(int subgraph, const VmRow& row, double sign) {
        for (const auto& [k, t, watts] : row.cell_add) w[subgraph][k][t] += sign * watts;
    }

    double carbon_g(const MipModel& model) const {
        double g = 0.0;
        for (std::size_t n = 0; n < w.size(); ++n)
            for (std::size_t k = 0; k < w[n].size(); ++k) {
                const auto& rmdc = model.subgraphs[n].rmdcs[k];
                for (int t = 0; t < model.horizon_steps; ++t) {
                    const double consum = std::max(0.0, w[n][k][t]);
                    const double ru = std::min(consum, rmdc.supply_watts[t]);
                    const double nr = consum - ru;
                    g += kwh_from_watts(nr, model.step_seconds) * model.ci_grid_g_per_kwh;
                    if (!model.grid_only_objective)
                        g += kwh_from_watts(ru, model.step_seconds) * rmdc.ci_renewable_g_per_kwh;
                }
            }
        return g;
    }
};

/// Cheapest possible marginal carbon of one VM: its minimum forced energy at
/// the cheapest slope reachable anywhere in its subgraph.
inline double min_marginal_carbon_g(const MipModel& model, const ModelVm& vm) {
    if (vm.evictable || model.grid_only_objective) return 0.0;
    double min_ci = model.ci_grid_g_per_kwh;
    for (const auto& r : model.subgraphs[vm.subgraph].rmdcs)
        min_ci = std::min(min_ci, r.ci_renewable_g_per_kwh);
    const int forced_steps = std::min<int>(model.horizon_steps, vm.lifetime_steps);
    return kwh_from_watts(vm.power_watts, model.step_seconds) * forced_steps * min_ci;
}

}  // namespace detail

/// Exact branch-and-bound over per-VM schedules. Binaries are the only search
/// dimensions: for fixed placements the optimal split is RU = min(Consum, RS)
/// and NR = Consum - RU, so the bound needs no LP. Returns the lexicographic
/// optimum (carbon, evictable uptime, migrations, canonical placements) within
/// the budget; otherwise the best incumbent with optimal = false.
inline Schedule solve(const MipModel& model, const SolveLimits& limits = {},
                      SolveStats* stats_out = nullptr) {
    model.validate();
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(limits.max_seconds);

    const std::size_t M = model.vms.size();
    std::vector<std::vector<detail::VmRow>> rows(M);
    for (std::size_t m = 0; m < M; ++m) {
        rows[m] = detail::vm_rows(model, m);
        std::stable_sort(rows[m].begin(), rows[m].end(),
                         [](const detail::VmRow& a, const detail::VmRow& b) {
                             return a.sort_key < b.sort_key;
                         });
    }

    std::vector<double> tail_min_carbon(M + 1, 0.0);
    std::vector<double> tail_max_avail(M + 1, 0.0);
    for (std::size_t m = M; m-- > 0;) {
        tail_min_carbon[m] =
            tail_min_carbon[m + 1] + detail::min_marginal_carbon_g(model, model.vms[m]);
        tail_max_avail[m] =
            tail_max_avail[m + 1] + (model.vms[m].evictable ? model.vms[m].max_avail() : 0.0);
    }
    const double avail_required = model.evictable_avail_requirement();

    detail::CellLoads loads(model);
    std::vector<const detail::VmRow*> chosen(M, nullptr);
    std::optional<Schedule> incumbent;
    SolveStats stats;
    bool stop = false;

    auto leaf = [&]() {
        Placement place(M);
        for (std::size_t m = 0; m < M; ++m) place[m] = chosen[m]->place;
        Schedule cand = evaluate_schedule(model, std::move(place));
        if (!meets_avail_requirement(cand.evictable_avail_sum, avail_required)) return;
        if (!incumbent || schedule_better(cand, *incumbent)) incumbent = std::move(cand);
    };

    auto rec = [&](auto&& self, std::size_t depth, double avail_sum) -> void {
        if (stop) return;
        if (depth == M) {
            leaf();
            return;
        }
        for (const detail::VmRow& row : rows[depth]) {
            if (stop) return;
            ++stats.nodes;
            if (stats.nodes > limits.max_nodes) {
                stats.budget_exhausted = true;
                stop = true;
                return;
            }
            if ((stats.nodes & 1023) == 0 && std::chrono::steady_clock::now() > deadline) {
                stats.budget_exhausted = true;
                stop = true;
                return;
            }
            const double row_avail = model.vms[depth].evictable ? row.avail : 0.0;
            // Even the best availability from the remaining VMs cannot reach
            // the floor: infeasible subtree.
            if (avail_sum + row_avail + tail_max_avail[depth + 1] < avail_required - 1e-9)
                continue;
            chosen[depth] = &row;
            loads.apply(model.vms[depth].subgraph, row, +1.0);
            if (incumbent) {
                const double bound = loads.carbon_g(model) + tail_min_carbon[depth + 1];
                const double guard = 1e-9 * (1.0 + std::abs(incumbent->objective_carbon_g));
                if (bound > incumbent->objective_carbon_g + guard) {
                    loads.apply(model.vms[depth].subgraph, row, -1.0);
                    continue;
                }
            }
            self(self, depth + 1, avail_sum + row_avail);
            loads.apply(model.vms[depth].subgraph, row, -1.0);
        }
    };
    rec(rec, 0, 0.0);

    if (stats_out) *stats_out = stats;
    if (!incumbent)
        throw SolveError("solve: budget exhausted with no incumbent (nodes=" +
                         std::to_string(stats.nodes) + ")");
    incumbent->optimal = !stats.budget_exhausted;
    return *std::move(incumbent);
}

inline constexpr std::int64_t kOracleMaxLeaves = 4'000'000;

/// Ground truth for desk-scale instances: plain exhaustive enumeration of all
/// placement matrices that satisfy the linking rules, keeping the best under
/// the same lexicographic objective. Independent of the solver's search; only
/// the shared schedule evaluation is reused.
inline Schedule brute_force_oracle(const MipModel& model,
                                   std::int64_t max_leaves = kOracleMaxLeaves) {
    model.validate();
    if (model.vms.size() > 4) throw DataError("oracle: more than 4 VMs");
    if (model.horizon_steps > 5) throw DataError("oracle: horizon longer than 5 steps");
    for (const auto& sg : model.subgraphs)
        if (sg.rmdcs.size() > 3) throw DataError("oracle: more than 3 rMDCs in a subgraph");

    const std::size_t M = model.vms.size();
    const int T = model.horizon_steps;
    std::int64_t leaves = 1;
    for (std::size_t m = 0; m < M; ++m) {
        leaves *= detail::row_count(model, m);
        if (leaves > max_leaves)
            throw DataError("oracle: joint schedule space exceeds the enumeration cap");
    }

    const double avail_required = model.evictable_avail_requirement();

    Placement place(M, std::vector<int>(T, -1));
    std::optional<Schedule> best;

    // enumerate_vm walks every admissible pattern of VM m in canonical order
    // (off before rMDC 0, 1, ...), recursing into the next VM at each full row.
    auto enumerate_vm = [&](auto&& self, std::size_t m, int t, int prog) -> void {
        if (m == M) {
            Schedule cand = evaluate_schedule(model, place);
            if (!meets_avail_requirement(cand.evictable_avail_sum, avail_required)) return;
            if (!best || schedule_better(cand, *best)) best = std::move(cand);
            return;
        }
        if (t == T) {
            self(self, m + 1, 0, 0);
            return;
        }
        const ModelVm& vm = model.vms[m];
        const bool may_run = prog < vm.lifetime_steps;
        if (vm.evictable || !may_run) {
            place[m][t] = -1;
            self(self, m, t + 1, prog);
        }
        if (may_run)
            for (int k = 0; k < model.rmdc_count(vm.subgraph); ++k) {
                place[m][t] = k;
                self(self, m, t + 1, prog + 1);
            }
        place[m][t] = -1;
    };
    enumerate_vm(enumerate_vm, 0, 0, 0);

    if (!best) throw SolveError("oracle: no feasible assignment");
    best->optimal = true;
    return *std::move(best);
}

}  // namespace skybox::mip
