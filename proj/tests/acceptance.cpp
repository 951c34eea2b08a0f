// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "instance_gen.hpp"
#include "skybox/accounting.hpp"
#include "skybox/config.hpp"
#include "skybox/engine.hpp"
#include "skybox/misprediction.hpp"
#include "skybox/model.hpp"
#include "skybox/policies.hpp"
#include "skybox/solver.hpp"
#include "skybox/stats.hpp"
#include "skybox/subgraph.hpp"
#include "skybox/trace.hpp"

namespace fs = std::filesystem;
using namespace skybox;

namespace {

const std::string kFixtures = SKYBOX_FIXTURES_DIR;
const std::string kCli = SKYBOX_CLI_PATH;

int g_failures = 0;

struct Check {
    bool ok = true;
    std::ostringstream why;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            if (!ok) why << "; ";
            ok = false;
            why << what;
        }
    }
};

void criterion(int number, const std::string& name, const std::function<void(Check&)>& body,
               double budget_seconds = 0.0) {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_seconds > 0 && elapsed > budget_seconds)
        c.expect(false, "runtime " + std::to_string(elapsed) + "s exceeds " +
                            std::to_string(budget_seconds) + "s");
    if (c.ok) {
        std::cout << "[PASS] criterion " << number << ": " << name << " ("
                  << static_cast<int>(elapsed * 1000) << " ms)\n";
    } else {
        std::cout << "[FAIL] criterion " << number << ": " << name << " -- " << c.why.str()
                  << "\n";
        ++g_failures;
    }
}

SiteConfig fixture_site(const std::string& id, const std::string& file, double lon) {
    return {id, 45.0, lon, EnergyKind::wind, kFixtures + "/" + file, 0.0};
}

RunConfig directional_config(PolicyKind policy) {
    RunConfig cfg;
    cfg.sites.push_back(fixture_site("rot0", "power_rot3_0.csv", 8.0));
    cfg.sites.push_back(fixture_site("rot1", "power_rot3_1.csv", 8.2));
    cfg.sites.push_back(fixture_site("rot2", "power_rot3_2.csv", 8.4));
    cfg.rmdc_peak_watts = 1000.0;
    cfg.subgraph_size = 3;
    cfg.policy = policy;
    cfg.workload.kind = "file";
    cfg.workload.vm_trace_path = kFixtures + "/vms_directional.csv";
    cfg.battery.enabled = false;
    cfg.power_migr_wh_per_gb = 0.01;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    // 1. Oracle equivalence on randomized desk-scale instances.
    criterion(
        1, "oracle equivalence over 200 randomized instances",
        [](Check& c) {
            std::mt19937_64 gen(424242);
            for (int rep = 0; rep < 200; ++rep) {
                const mip::MipModel m = testgen::random_instance(gen, false);
                const mip::Schedule truth = mip::brute_force_oracle(m);
                const mip::Schedule got = mip::solve(m);
                c.expect(got.objective_carbon_g == truth.objective_carbon_g,
                         "objective mismatch at instance " + std::to_string(rep));
                c.expect(got.optimal, "solver not optimal at instance " + std::to_string(rep));
                c.expect(mip::check_feasible(m, got).ok,
                         "solver schedule infeasible at instance " + std::to_string(rep));
                c.expect(mip::check_feasible(m, truth).ok,
                         "oracle schedule infeasible at instance " + std::to_string(rep));
                if (!c.ok) return;
            }
        },
        300.0);

    // 2. Dominance: exact optimum <= best-effort <= no-migration baseline.
    criterion(2, "carbon dominance of the exact optimum over the heuristics", [](Check& c) {
        std::mt19937_64 gen(171717);
        for (int rep = 0; rep < 200; ++rep) {
            const mip::MipModel m = testgen::random_instance(gen, true);
            const mip::Schedule exact = mip::solve(m);
            const mip::Schedule be = policy_schedule(m, PolicyKind::skybox_best_effort);
            const mip::Schedule dg = policy_schedule(m, PolicyKind::distr_grid);
            c.expect(mip::check_feasible(m, be).ok,
                     "best-effort infeasible at instance " + std::to_string(rep));
            c.expect(mip::check_feasible(m, dg).ok,
                     "distr-grid infeasible at instance " + std::to_string(rep));
            c.expect(exact.objective_carbon_g <= be.objective_carbon_g,
                     "optimum above best-effort at instance " + std::to_string(rep));
            c.expect(be.objective_carbon_g <= dg.objective_carbon_g,
                     "best-effort above distr-grid at instance " + std::to_string(rep));
            if (!c.ok) return;
        }
    });

    // 3. Complementarity: anti-phase triples mask variability; the rotation
    // fixture splits the migrating policy from the pinned one.
    criterion(
        3, "complementary subgroups mask variability and avoid the grid",
        [](Check& c) {
            const auto traces = synth_complementary(3, 48, 1000.0, PhasePattern::anti_phase);
            std::vector<double> agg(48, 0.0);
            for (const auto& t : traces) {
                for (std::size_t i = 0; i < agg.size(); ++i) agg[i] += t.samples[i];
                c.expect(cov(t.samples) >= 0.5, "individual CoV below 0.5");
            }
            c.expect(std::abs(cov(agg)) <= 1e-9, "aggregated CoV not zero");

            const RunResult mip_run = run(directional_config(PolicyKind::skybox_mip));
            const RunResult grid_run = run(directional_config(PolicyKind::distr_grid));
            c.expect(mip_run.report.grid_kwh == 0.0,
                     "skybox_mip drew " + std::to_string(mip_run.report.grid_kwh) + " kWh");
            c.expect(grid_run.report.grid_kwh > 0.0, "distr_grid drew no grid energy");
        },
        30.0);

    // 4. Carbon arithmetic against the reference intensities.
    criterion(4, "carbon arithmetic reproduces the reference products", [](Check& c) {
        const CarbonParams p;
        c.expect(operational_carbon_g(1000, EnergySource::solar, p) == 41000.0, "solar");
        c.expect(operational_carbon_g(1000, EnergySource::wind, p) == 11000.0, "wind");
        c.expect(operational_carbon_g(1000, EnergySource::brown, p) == 700000.0, "brown");
        Inventory inv;
        inv.servers = 150;
        inv.battery_kwh = 375;
        inv.cooling_m2 = 32.2;
        const auto got = embodied_carbon_amortized_g(inv, p, 24.0);
        const double server = 150.0 * 591.0 * 1000.0 / (4.0 * 8760.0) * 24.0;
        const double battery = 375.0 * 146.0 * 1000.0 / (10.0 * 8760.0) * 24.0;
        const double cooling = 32.2 * 50.0 * 1000.0 / (20.0 * 8760.0) * 24.0;
        auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
        c.expect(rel(got.server_g, server) <= 1e-9, "server amortization");
        c.expect(rel(got.battery_g, battery) <= 1e-9, "battery amortization");
        c.expect(rel(got.cooling_g, cooling) <= 1e-9, "cooling amortization");
        c.expect(rel(got.total_g, server + battery + cooling) <= 1e-9, "total");
    });

    // 5. Misprediction safety under error ratios up to +/-50%.
    criterion(5, "misprediction handler keeps every step power-balanced", [](Check& c) {
        std::mt19937_64 gen(99);
        for (int step = 0; step < 1000; ++step) {
            HandlerInput in;
            const int K = 1 + static_cast<int>(uniform_below(gen, 3));
            in.migr_wh_per_gb = uniform_in(gen, 0.0, 0.2);
            in.step_hours = 1.0;
            int evictables = 0;
            for (int k = 0; k < K; ++k) {
                const double predicted = uniform_in(gen, 0.0, 500.0);
                const double err = uniform_in(gen, -0.5, 0.5);
                const double actual = std::max(0.0, predicted * (1.0 + err));
                in.rmdcs.push_back({actual, uniform_in(gen, 0.0, 100.0), 0.0});
            }
            const int V = static_cast<int>(uniform_below(gen, 7));
            for (int v = 0; v < V; ++v) {
                const int k = static_cast<int>(uniform_below(gen, K));
                const bool evict = uniform01(gen) < 0.3;
                in.vms.push_back({v, uniform_in(gen, 40, 250), uniform_in(gen, 1, 32), evict, k});
                in.rmdcs[k].consum_watts += in.vms.back().power_watts;
                if (evict) {
                    ++evictables;
                    const double avail = uniform_in(gen, 0.85, 1.0);
                    in.scope_avail_sum += avail;
                    in.avail_now[v] = avail;
                    in.avail_if_suspended[v] = avail * 0.95;
                }
            }
            in.scope_avail_requirement = 0.9 * evictables;
            const HandlerInput before = in;
            const HandlerActions actions = handle(std::move(in));
            std::vector<double> consum;
            std::vector<int> where;
            for (const auto& r : before.rmdcs) consum.push_back(r.consum_watts);
            for (const auto& vm : before.vms) where.push_back(vm.rmdc);
            for (const auto& mig : actions.migrations) {
                const auto& vm = before.vms[mig.vm_key];
                const double w =
                    migration_energy_wh(vm.mem_gb, before.migr_wh_per_gb) / before.step_hours;
                consum[mig.from_rmdc] += w - vm.power_watts;
                consum[mig.to_rmdc] += w + vm.power_watts;
                where[mig.vm_key] = mig.to_rmdc;
            }
            for (int key : actions.evictions) consum[where[key]] -= before.vms[key].power_watts;
            for (std::size_t k = 0; k < consum.size(); ++k)
                c.expect(consum[k] <= before.rmdcs[k].renewable_watts +
                                          before.rmdcs[k].planned_grid_watts +
                                          actions.extra_grid_watts[k] + 1e-9,
                         "balance violated at step " + std::to_string(step));
            if (!c.ok) return;
        }

        // Event-log audit of the stage ordering inside a mispredicted run.
        RunConfig cfg = directional_config(PolicyKind::skybox_mip);
        cfg.forecast_error_ratio = 0.5;
        cfg.seed = 2027;
        const RunResult result = run(cfg);
        std::map<std::int64_t, int> last_stage;
        for (const auto& e : result.events.events) {
            const auto& payload = e.at("payload");
            if (!payload.contains("reason") || payload.at("reason") != "handler") continue;
            const std::string ev = e.at("event").get<std::string>();
            const std::int64_t step = e.at("step").get<std::int64_t>();
            const int stage = ev == "migration" ? 1 : ev == "evict" ? 2 : 3;
            auto [it, inserted] = last_stage.try_emplace(step, stage);
            if (!inserted) {
                c.expect(stage >= it->second, "stage order regressed at step " +
                                                  std::to_string(step));
                it->second = stage;
            }
        }
    });

    // 6. Subgraph combinatorics.
    criterion(
        6, "candidate counts match the closed-form combinations",
        [](Check& c) {
            auto co_located = [](int n) {
                std::vector<Site> sites;
                for (int i = 0; i < n; ++i) {
                    Site s;
                    s.site_id = (i < 10 ? "s0" : "s") + std::to_string(i);
                    s.trace.capacity_watts = 100;
                    s.trace.samples.assign(24, 50.0 + i % 7);
                    sites.push_back(std::move(s));
                }
                return sites;
            };
            c.expect(enumerate_candidates(co_located(6), 3, 1e18).size() == 20,
                     "C(6,3) != 20");
            c.expect(enumerate_candidates(co_located(54), 3, 1e18).size() == 24804,
                     "C(54,3) != 24804");
        },
        10.0);

    // 7. Migration frequency formula.
    criterion(7, "migration frequency equals events over VM runtime hours", [](Check& c) {
        std::vector<VmRecord> records(2);
        for (auto& r : records) {
            r.spec.vm_id = "vm";
            r.admitted = true;
            r.uptime_steps = 100;
            r.completion_step = 99;
        }
        const SimReport rep = metrics_finalize({}, records, 3600.0, 3, CostBreakdown{}, "x");
        c.expect(rep.vm_runtime_hours == 200.0, "runtime hours");
        c.expect(rep.migration_frequency == 0.015, "frequency not exactly 0.015");
    });

    // 8. Determinism of the command-line simulate path.
    criterion(8, "simulate is byte-identical across reruns", [](Check& c) {
        const fs::path dir = fs::temp_directory_path() / "skybox_acceptance_det";
        fs::remove_all(dir);
        fs::create_directories(dir);
        RunConfig cfg = directional_config(PolicyKind::skybox_mip);
        cfg.forecast_error_ratio = 0.2;
        cfg.out_dir = (dir / "a").string();
        {
            std::ofstream out(dir / "config.json");
            out << config_to_json(cfg).dump(2);
        }
        auto invoke = [&](const std::string& out_dir) {
            const std::string cmd = kCli + " simulate --config " + (dir / "config.json").string() +
                                    " --out " + out_dir + " > /dev/null 2>&1";
            return std::system(cmd.c_str());
        };
        c.expect(invoke((dir / "a").string()) == 0, "first run failed");
        c.expect(invoke((dir / "b").string()) == 0, "second run failed");
        c.expect(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"),
                 "reports differ");
        c.expect(slurp(dir / "a" / "events.jsonl") == slurp(dir / "b" / "events.jsonl"),
                 "event logs differ");
        c.expect(slurp(dir / "a" / "timeseries.csv") == slurp(dir / "b" / "timeseries.csv"),
                 "time series differ");
        c.expect(!slurp(dir / "a" / "report.json").empty(), "empty report");
    });

    // 9. The feasibility checker rejects one hand-built violation per constraint.
    criterion(9, "constraint checker names each violated constraint", [](Check& c) {
        mip::MipModel m;
        m.horizon_steps = 3;
        mip::ModelSubgraph sg;
        sg.subgraph_id = "sg-0";
        sg.rmdcs.push_back({"r0", 41.0, {400, 400, 400}});
        sg.rmdcs.push_back({"r1", 41.0, {400, 400, 400}});
        m.subgraphs.push_back(std::move(sg));
        m.power_migr_wh_per_gb = 0.5;
        m.vms.push_back({"vm-0", 0, 100, 10, 2, false, -1});
        m.vms.push_back({"vm-1", 0, 50, 4, 3, true, 1});
        const mip::Schedule good = mip::brute_force_oracle(m);
        c.expect(mip::check_feasible(m, good).ok, "baseline schedule infeasible");

        auto expects = [&](const mip::Schedule& bad, mip::Constraint want,
                           const std::string& label) {
            const auto rep = mip::check_feasible(m, bad);
            c.expect(!rep.ok && rep.violated == want,
                     label + " not reported as " + mip::to_string(want) +
                         (rep.ok ? " (accepted)" : std::string(" (got ") +
                                                       mip::to_string(rep.violated) + ")"));
        };

        {  // C1: a cell no longer covered by grid + renewable.
            mip::Schedule bad = good;
            bad.grid_watts[0][0][0] -= 1.0;
            bad.renewable_used_watts[0][0][0] -= 1.0;
            expects(bad, mip::Constraint::c1_power, "power balance");
        }
        {  // C1': consumption cell omits the migration charge.
            mip::Schedule bad = mip::evaluate_schedule(m, {{0, 1, -1}, {1, 1, 1}});
            const mip::Migration mig = bad.migrations.front();
            const double w = m.migration_watts(m.vms[mig.vm]);
            bad.consum_watts[0][mig.from_rmdc][mig.step] -= w;
            bad.grid_watts[0][mig.from_rmdc][mig.step] = 0;
            bad.renewable_used_watts[0][mig.from_rmdc][mig.step] =
                bad.consum_watts[0][mig.from_rmdc][mig.step];
            expects(bad, mip::Constraint::c1p_consumption, "consumption accounting");
        }
        {  // C2: a regular VM with a gap before completion.
            const mip::Schedule bad = mip::evaluate_schedule(m, {{0, -1, 0}, {1, 1, 1}});
            expects(bad, mip::Constraint::c2_progress, "regular always-on");
        }
        {  // C3: running past the lifetime.
            const mip::Schedule bad = mip::evaluate_schedule(m, {{0, 0, 0}, {1, 1, 1}});
            expects(bad, mip::Constraint::c3_completion, "completion");
        }
        {  // C4: evictable availability below the target.
            mip::MipModel strict = m;
            strict.avail_target = 1.0;
            const mip::Schedule bad =
                mip::evaluate_schedule(strict, {{0, 0, -1}, {-1, -1, 1}});
            const auto rep = mip::check_feasible(strict, bad);
            c.expect(!rep.ok && rep.violated == mip::Constraint::c4_availability,
                     "availability floor not reported as C4");
        }
        {  // C5: a migration entry not linked to the placements.
            mip::Schedule bad = good;
            bad.migrations.push_back({0, 0, 0, 1, 1});
            expects(bad, mip::Constraint::c5_migration, "migration linking");
        }
    });

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all acceptance criteria passed\n";
    return 0;
}
