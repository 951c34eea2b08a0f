#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "skybox/model.hpp"
#include "skybox/solver.hpp"

using namespace skybox;
using namespace skybox::mip;

namespace {

MipModel tiny_model(int rmdcs, int horizon, std::vector<ModelVm> vms,
                    std::vector<std::vector<double>> supplies = {}) {
    MipModel m;
    m.horizon_steps = horizon;
    ModelSubgraph sg;
    sg.subgraph_id = "sg-0";
    for (int k = 0; k < rmdcs; ++k) {
        ModelRmdc r;
        r.rmdc_id = "r" + std::to_string(k);
        r.ci_renewable_g_per_kwh = 41.0;
        r.supply_watts = supplies.empty() ? std::vector<double>(horizon, 1000.0)
                                          : supplies[static_cast<std::size_t>(k)];
        sg.rmdcs.push_back(std::move(r));
    }
    m.subgraphs.push_back(std::move(sg));
    m.vms = std::move(vms);
    m.validate();
    return m;
}

}  // namespace

TEST_CASE("variable counts for one VM, one rMDC, two steps") {
    const MipModel m = tiny_model(1, 2, {{"vm-0", 0, 100, 8, 2, false, -1}});
    CHECK(m.x_var_count() == 2);
    CHECK(m.m_var_count() == 0);  // no second rMDC to migrate to
}

TEST_CASE("migration variables span both directions across every step") {
    const MipModel m = tiny_model(2, 3, {{"vm-0", 0, 100, 8, 3, false, -1}});
    CHECK(m.m_var_count() == 6);  // 2 directions x 3 steps
    CHECK(m.x_var_count() == 6);
}

TEST_CASE("zero availability target leaves the model well-formed") {
    MipModel m = tiny_model(1, 2, {{"vm-0", 0, 100, 8, 2, true, -1}});
    m.avail_target = 0.0;
    CHECK_NOTHROW(m.validate());
    CHECK_NOTHROW(brute_force_oracle(m));
}

TEST_CASE("build_model rejects an empty horizon and an empty cluster") {
    ClusterSnapshot snap;
    SnapshotSubgraph sg;
    sg.subgraph_id = "sg-0";
    sg.rmdcs.push_back({"site-a", EnergyKind::solar});
    snap.subgraphs.push_back(sg);
    std::map<std::string, Forecast> forecasts;
    Forecast f;
    f.site_id = "site-a";
    f.predicted = {100, 100, 100};
    forecasts["site-a"] = f;
    CHECK_THROWS_AS(build_model(snap, forecasts, 0, 0, {}), DataError);

    ClusterSnapshot empty;
    CHECK_THROWS_AS(build_model(empty, forecasts, 0, 2, {}), DataError);
}

TEST_CASE("build_model slices forecasts and orders VMs by id") {
    ClusterSnapshot snap;
    SnapshotSubgraph sg;
    sg.subgraph_id = "sg-0";
    sg.rmdcs.push_back({"site-a", EnergyKind::wind});
    snap.subgraphs.push_back(sg);
    VmSpec v1;
    v1.vm_id = "vm-b";
    v1.power_watts = 50;
    v1.mem_gb = 4;
    VmSpec v2 = v1;
    v2.vm_id = "vm-a";
    snap.vms.push_back({v1, 0, -1, 3});
    snap.vms.push_back({v2, 0, 0, 2});
    std::map<std::string, Forecast> forecasts;
    Forecast f;
    f.site_id = "site-a";
    f.predicted = {10, 20, 30, 40};
    forecasts["site-a"] = f;
    MipParams params;
    const MipModel m = build_model(snap, forecasts, 1, 2, params);
    CHECK(m.vms[0].vm_id == "vm-a");
    CHECK(m.vms[1].vm_id == "vm-b");
    CHECK(m.subgraphs[0].rmdcs[0].supply_watts == std::vector<double>{20, 30});
    CHECK(m.subgraphs[0].rmdcs[0].ci_renewable_g_per_kwh == 11.0);
    CHECK(m.vms[0].initial_rmdc == 0);
    CHECK(m.vms[1].initial_rmdc == -1);

    CHECK_THROWS_AS(build_model(snap, forecasts, 3, 2, params), DataError);
}

TEST_CASE("extract_migrations distinguishes moves from restarts") {
    StepPlacement prev{{"vm-a", {0, 0}}, {"vm-b", {0, 1}}};
    StepPlacement same = prev;
    CHECK(extract_migrations(prev, same).empty());

    StepPlacement moved{{"vm-a", {0, 1}}, {"vm-b", {0, 1}}};
    const auto migs = extract_migrations(prev, moved);
    REQUIRE(migs.size() == 1);
    CHECK(migs[0].vm_id == "vm-a");
    CHECK(migs[0].from == std::pair<int, int>(0, 0));
    CHECK(migs[0].to == std::pair<int, int>(0, 1));

    // Powered off at the intermediate step, then on elsewhere: a restart.
    StepPlacement off{{"vm-b", {0, 1}}};
    StepPlacement elsewhere{{"vm-a", {0, 1}}, {"vm-b", {0, 1}}};
    CHECK(extract_migrations(off, elsewhere).empty());
}

TEST_CASE("evaluate splits renewable and grid analytically") {
    MipModel m = tiny_model(1, 2, {{"vm-0", 0, 150, 8, 2, false, -1}},
                            {{{100.0, 200.0}}});
    const Schedule s = evaluate_schedule(m, {{0, 0}});
    CHECK(s.consum_watts[0][0][0] == 150.0);
    CHECK(s.renewable_used_watts[0][0][0] == 100.0);
    CHECK(s.grid_watts[0][0][0] == 50.0);
    CHECK(s.renewable_used_watts[0][0][1] == 150.0);
    CHECK(s.grid_watts[0][0][1] == 0.0);
    const double expected = kwh_from_watts(50, 3600) * 700.0 +
                            kwh_from_watts(250, 3600) * 41.0;
    CHECK(s.objective_carbon_g == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("migration energy lands in exactly two cells") {
    MipModel m = tiny_model(2, 2, {{"vm-0", 0, 100, 10, 2, false, -1}});
    m.power_migr_wh_per_gb = 0.5;  // 5 Wh per event => 5 W over an hour step
    const Schedule s = evaluate_schedule(m, {{0, 1}});
    REQUIRE(s.migrations.size() == 1);
    CHECK(s.migrations[0].step == 1);
    CHECK(s.consum_watts[0][0][1] == 5.0);
    CHECK(s.consum_watts[0][1][1] == 105.0);
    CHECK(s.consum_watts[0][0][0] == 100.0);
}

TEST_CASE("feasibility accepts oracle output") {
    MipModel m = tiny_model(2, 3,
                            {{"vm-0", 0, 100, 8, 2, false, -1},
                             {"vm-1", 0, 60, 4, 3, true, 1}});
    const Schedule s = brute_force_oracle(m);
    const FeasibilityReport rep = check_feasible(m, s);
    CHECK(rep.ok);
}

TEST_CASE("each constraint violation is reported under its own name") {
    MipModel m = tiny_model(2, 3,
                            {{"vm-0", 0, 100, 10, 2, false, -1},
                             {"vm-1", 0, 50, 4, 3, true, 1}});
    m.power_migr_wh_per_gb = 0.5;
    const Schedule good = brute_force_oracle(m);
    REQUIRE(check_feasible(m, good).ok);

    SECTION("C1: consumption not covered at one cell") {
        Schedule bad = good;
        bad.grid_watts[0][0][1] -= 1.0;
        bad.renewable_used_watts[0][0][1] -= 1.0;
        const auto rep = check_feasible(m, bad);
        CHECK_FALSE(rep.ok);
        CHECK(rep.violated == Constraint::c1_power);
        CHECK(rep.detail.find("(n=0,k=0,t=1)") != std::string::npos);
    }
    SECTION("C1': consumption accounting omits the migration charge") {
        Schedule bad = evaluate_schedule(m, {{0, 1, -1}, {1, 1, 1}});
        REQUIRE_FALSE(bad.migrations.empty());
        const Migration mig = bad.migrations.front();
        // Claim cells without the charge, with grid/renewable rebalanced so C1
        // still holds.
        const double w = m.migration_watts(m.vms[mig.vm]);
        bad.consum_watts[mig.subgraph][mig.from_rmdc][mig.step] -= w;
        bad.grid_watts[mig.subgraph][mig.from_rmdc][mig.step] = 0;
        bad.renewable_used_watts[mig.subgraph][mig.from_rmdc][mig.step] =
            bad.consum_watts[mig.subgraph][mig.from_rmdc][mig.step];
        const auto rep = check_feasible(m, bad);
        CHECK_FALSE(rep.ok);
        CHECK(rep.violated == Constraint::c1p_consumption);
    }
    SECTION("C2: regular VM with a gap before completion") {
        Schedule bad = evaluate_schedule(m, {{0, -1, 0}, {1, 1, 1}});
        const auto rep = check_feasible(m, bad);
        CHECK_FALSE(rep.ok);
        CHECK(rep.violated == Constraint::c2_progress);
    }
    SECTION("C2: uptime ledger mismatch") {
        Schedule bad = good;
        bad.vm_outcomes[0].uptime_steps += 1;
        const auto rep = check_feasible(m, bad);
        CHECK_FALSE(rep.ok);
        CHECK(rep.violated == Constraint::c2_progress);
    }
    SECTION("C3: running past completion") {
        Schedule bad = evaluate_schedule(m, {{0, 0, 0}, {1, 1, 1}});  // lifetime 2, on 3 steps
        const auto rep = check_feasible(m, bad);
        CHECK_FALSE(rep.ok);
        CHECK(rep.violated == Constraint::c3_completion);
    }
    SECTION("C4: mean evictable availability below target") {
        MipModel strict = m;
        strict.avail_target = 1.0;
        Schedule bad = evaluate_schedule(strict, {{0, 0, -1}, {-1, -1, 1}});
        const auto rep = check_feasible(strict, bad);
        CHECK_FALSE(rep.ok);
        CHECK(rep.violated == Constraint::c4_availability);
    }
    SECTION("C5: phantom migration entry") {
        Schedule bad = good;
        bad.migrations.push_back({0, 0, 0, 1, 1});
        const auto rep = check_feasible(m, bad);
        CHECK_FALSE(rep.ok);
        CHECK(rep.violated == Constraint::c5_migration);
    }
}

TEST_CASE("model json round-trips") {
    MipModel m = tiny_model(2, 3,
                            {{"vm-0", 0, 100, 8, 2, false, 0},
                             {"vm-1", 0, 60, 4, 3, true, -1}});
    m.avail_target = 0.75;
    m.grid_only_objective = true;
    const nlohmann::json j = model_to_json(m);
    const MipModel back = model_from_json(j);
    CHECK(model_to_json(back) == j);
    CHECK(back.vms[1].evictable);
    CHECK(back.avail_target == 0.75);
}

TEST_CASE("model dump matches the golden file byte for byte") {
    MipModel m;
    m.step_seconds = 3600;
    m.horizon_steps = 3;
    m.ci_grid_g_per_kwh = 700;
    m.power_migr_wh_per_gb = 0.1;
    m.avail_target = 0.9;
    ModelSubgraph sg;
    sg.subgraph_id = "sg-0";
    sg.rmdcs.push_back({"farm-a", 41.0, {850.5, 120.25, 0.0}});
    sg.rmdcs.push_back({"farm-b", 11.0, {60.0, 930.125, 415.75}});
    m.subgraphs.push_back(sg);
    m.vms.push_back({"vm-0", 0, 180.5, 16.0, 2, false, 0});
    m.vms.push_back({"vm-1", 0, 95.25, 4.5, 3, true, -1});

    std::ifstream in(std::string(SKYBOX_FIXTURES_DIR) + "/golden_model.json",
                     std::ios::binary);
    REQUIRE(in.good());
    std::stringstream golden;
    golden << in.rdbuf();
    CHECK(model_to_json(m).dump(2) + "\n" == golden.str());
    CHECK(model_to_json(model_from_json(nlohmann::json::parse(golden.str()))) ==
          model_to_json(m));
}

TEST_CASE("solution json rebuilds a schedule from placements") {
    MipModel m = tiny_model(2, 2, {{"vm-0", 0, 100, 8, 2, false, -1}});
    const Schedule solved = brute_force_oracle(m);
    const nlohmann::json j = schedule_to_json(m, solved);
    const Schedule back = schedule_from_json(m, j);
    CHECK(back.objective_carbon_g == solved.objective_carbon_g);
    CHECK(back.placements == solved.placements);
    CHECK(check_feasible(m, back).ok);

    nlohmann::json lying = j;
    lying["objective_carbon_g"] = solved.objective_carbon_g + 123.0;
    CHECK_THROWS_AS(schedule_from_json(m, lying), DataError);

    nlohmann::json missing = j;
    missing["placements"].erase("vm-0");
    CHECK_THROWS_AS(schedule_from_json(m, missing), ParseError);
}
