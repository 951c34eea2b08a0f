#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skybox/config.hpp"
#include "skybox/engine.hpp"
#include "skybox/errors.hpp"
#include "skybox/model.hpp"
#include "skybox/site.hpp"
#include "skybox/subgraph.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;  // overrides the config when set
    std::string policy;
    std::int64_t seed = -1;
    std::int64_t steps = -1;
};

skybox::RunConfig load_config(const CommonOpts& opts) {
    skybox::RunConfig cfg = skybox::load_run_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (!opts.policy.empty()) cfg.policy = skybox::parse_policy(opts.policy);
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.steps >= 0) cfg.steps_limit = opts.steps;
    return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw skybox::Error("cannot write '" + path.string() + "'");
    out << content;
}

void write_manifest(const skybox::RunConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["outputs"] = outputs;
    j["config"] = skybox::config_to_json(cfg);
    write_file(fs::path(cfg.out_dir) / "manifest.json", j.dump(2) + "\n");
}

/// Loads, scales and forecasts the configured sites (what build_world does
/// before any policy-specific layout).
std::vector<skybox::Site> load_sites(const skybox::RunConfig& cfg) {
    const double peak = cfg.effective_rmdc_peak_watts();
    std::vector<skybox::Site> sites;
    for (std::size_t i = 0; i < cfg.sites.size(); ++i) {
        const auto& sc = cfg.sites[i];
        skybox::TraceCsvSchema schema;
        schema.capacity_watts = sc.capacity_watts > 0 ? sc.capacity_watts : peak;
        schema.site_id = sc.site_id;
        skybox::Site s;
        s.site_id = sc.site_id;
        s.location = {sc.latitude, sc.longitude};
        s.energy_kind = sc.energy_kind;
        s.trace = skybox::scale_to_rmdc(skybox::load_power_trace(sc.trace_path, schema), peak);
        s.forecast = skybox::inject_error(s.trace, cfg.forecast_error_ratio,
                                          cfg.seed + 0x9e3779b97f4a7c15ULL * (i + 1));
        sites.push_back(std::move(s));
    }
    return sites;
}

int cmd_select_sites(const CommonOpts& opts, int top) {
    const skybox::RunConfig cfg = load_config(opts);
    const auto sites = load_sites(cfg);
    const auto ranked = skybox::rank_sites(sites, 0);
    std::string body;
    if (top > 0) {
        const auto sel = skybox::select_top(ranked, static_cast<std::size_t>(top));
        if (sel.shortfall)
            std::cerr << "warning: requested " << top << " sites, only " << ranked.size()
                      << " available\n";
        std::vector<skybox::SiteRank> taken(ranked.begin(),
                                            ranked.begin() + sel.site_ids.size());
        body = skybox::ranking_to_csv(taken);
    } else {
        body = skybox::ranking_to_csv(ranked);
    }
    write_file(fs::path(cfg.out_dir) / "ranking.csv", body);
    write_manifest(cfg, "select-sites", {"ranking.csv"});
    std::cout << body;
    return skybox::kExitOk;
}

nlohmann::json subgraphs_json(std::span<const skybox::Subgraph> selected) {
    nlohmann::json j;
    j["subgraphs"] = nlohmann::json::array();
    for (const auto& g : selected)
        j["subgraphs"].push_back({{"members", g.member_ids},
                                  {"agg_cov", g.cov_defined ? nlohmann::json(g.agg_cov)
                                                            : nlohmann::json()},
                                  {"min_agg_power_watts", g.min_agg_power_watts},
                                  {"max_pairwise_miles", g.max_pairwise_miles}});
    return j;
}

int cmd_subgraphs(const CommonOpts& opts) {
    const skybox::RunConfig cfg = load_config(opts);
    const auto sites = load_sites(cfg);
    const auto selected = skybox::select_disjoint(skybox::rank_candidates(
        skybox::enumerate_candidates(sites, cfg.subgraph_size, cfg.max_miles)));
    if (selected.empty()) std::cerr << "warning: no subgraph satisfies the distance bound\n";
    const std::string body = subgraphs_json(selected).dump(2) + "\n";
    write_file(fs::path(cfg.out_dir) / "subgraphs.json", body);
    write_manifest(cfg, "subgraphs", {"subgraphs.json"});
    std::cout << body;
    return skybox::kExitOk;
}

void write_run_outputs(const skybox::RunConfig& cfg, const skybox::RunResult& result,
                       const fs::path& dir) {
    write_file(dir / "report.json", skybox::report_to_json(result.report).dump(2) + "\n");
    write_file(dir / "timeseries.csv", skybox::series_to_csv(result.report));
    write_file(dir / "events.jsonl", result.events.to_jsonl());
}

int cmd_simulate(const CommonOpts& opts) {
    const skybox::RunConfig cfg = load_config(opts);
    const skybox::RunResult result = skybox::run(cfg);
    write_run_outputs(cfg, result, cfg.out_dir);
    write_manifest(cfg, "simulate", {"report.json", "timeseries.csv", "events.jsonl"});
    std::cout << "policy " << result.report.policy << ": total carbon "
              << result.report.total_carbon_g / 1000.0 << " kgCO2eq, grid "
              << result.report.grid_kwh << " kWh, migrations "
              << result.report.migration_events << "\n";
    return skybox::kExitOk;
}

int cmd_compare(const CommonOpts& opts, const std::vector<std::string>& policy_names) {
    const skybox::RunConfig base = load_config(opts);
    if (policy_names.empty()) throw skybox::ConfigError("compare: no policies given");
    std::set<std::string> seen;
    for (const auto& p : policy_names) {
        skybox::parse_policy(p);
        if (!seen.insert(p).second)
            throw skybox::ConfigError("compare: duplicate policy '" + p + "'");
    }

    std::vector<std::future<skybox::RunResult>> futures;
    for (const auto& p : policy_names) {
        skybox::RunConfig cfg = base;
        cfg.policy = skybox::parse_policy(p);
        futures.push_back(
            std::async(std::launch::async, [cfg]() { return skybox::run(cfg); }));
    }

    std::ostringstream matrix;
    matrix << "policy,total_carbon_g,op_grid_g,op_renewable_g,embodied_g,grid_kwh,"
              "evictable_uptime_mean,migration_events,migration_frequency,total_cost_usd\n";
    std::vector<std::string> outputs = {"matrix.csv"};
    for (std::size_t i = 0; i < policy_names.size(); ++i) {
        const skybox::RunResult result = futures[i].get();
        const skybox::SimReport& r = result.report;
        skybox::RunConfig cfg = base;
        cfg.policy = skybox::parse_policy(policy_names[i]);
        const fs::path dir = fs::path(base.out_dir) / policy_names[i];
        write_run_outputs(cfg, result, dir);
        outputs.push_back(policy_names[i] + "/report.json");
        matrix << r.policy << ',' << skybox::csv::format_double(r.total_carbon_g) << ','
               << skybox::csv::format_double(r.op_grid_g) << ','
               << skybox::csv::format_double(r.op_renewable_g) << ','
               << skybox::csv::format_double(r.emb_server_g + r.emb_battery_g + r.emb_cooling_g)
               << ',' << skybox::csv::format_double(r.grid_kwh) << ','
               << skybox::csv::format_double(r.evictable_uptime_mean) << ','
               << r.migration_events << ','
               << skybox::csv::format_double(r.migration_frequency) << ','
               << skybox::csv::format_double(r.cost.total_usd) << '\n';
    }
    write_file(fs::path(base.out_dir) / "matrix.csv", matrix.str());
    write_manifest(base, "compare", outputs);
    std::cout << matrix.str();
    return skybox::kExitOk;
}

int cmd_dump_model(const CommonOpts& opts, std::int64_t at_step) {
    skybox::RunConfig cfg = load_config(opts);
    cfg.policy = skybox::PolicyKind::skybox_mip;
    const skybox::World world = skybox::build_world(cfg);
    if (at_step < 0 || at_step >= world.steps)
        throw skybox::ConfigError("dump-model: step outside the trace");

    nlohmann::json out;
    out["models"] = nlohmann::json::array();
    for (const auto& sg : world.subgraphs) {
        skybox::mip::ClusterSnapshot snap;
        skybox::mip::SnapshotSubgraph ssg;
        ssg.subgraph_id = sg.id;
        std::map<std::string, skybox::Forecast> forecasts;
        for (int r : sg.rmdcs) {
            ssg.rmdcs.push_back({world.rmdcs[r].id, world.rmdcs[r].kind});
            skybox::Forecast f;
            f.site_id = world.rmdcs[r].id;
            f.predicted = world.rmdcs[r].predicted_watts;
            f.horizon_steps = f.predicted.size();
            forecasts[f.site_id] = std::move(f);
        }
        snap.subgraphs.push_back(std::move(ssg));
        // VMs already arrived by this step, assumed still running.
        for (const auto& vm : world.arrivals)
            if (vm.arrival_step <= at_step)
                snap.vms.push_back({vm, 0, -1, vm.predicted_lifetime_steps});
        skybox::mip::MipParams params;
        params.step_seconds = world.step_seconds;
        params.carbon = cfg.carbon;
        params.power_migr_wh_per_gb = cfg.power_migr_wh_per_gb;
        params.avail_target = cfg.avail_target;
        params.grid_only_objective = cfg.solver.grid_only_objective;
        const int horizon =
            static_cast<int>(std::min<std::int64_t>(cfg.horizon_steps, world.steps - at_step));
        out["models"].push_back(skybox::mip::model_to_json(skybox::mip::build_model(
            snap, forecasts, static_cast<std::size_t>(at_step), horizon, params)));
    }
    const std::string body = out.dump(2) + "\n";
    write_file(fs::path(cfg.out_dir) / "model.json", body);
    write_manifest(cfg, "dump-model", {"model.json"});
    std::cout << body;
    return skybox::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Renewable-powered modular data center deployment toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    int top = 0;
    std::int64_t at_step = 0;
    std::string policies_csv;

    auto add_common = [&](CLI::App* cmd, bool needs_policy = true) {
        cmd->add_option("--config", opts.config_path, "Run config JSON")->required();
        cmd->add_option("--out", opts.out_dir, "Output directory (overrides config)");
        if (needs_policy) cmd->add_option("--policy", opts.policy, "Placement policy");
        cmd->add_option("--seed", opts.seed, "Seed override");
        cmd->add_option("--steps", opts.steps, "Limit the number of simulated steps");
    };

    CLI::App* select = app.add_subcommand("select-sites", "Rank farms by power stability");
    add_common(select, false);
    select->add_option("--top", top, "Keep only the top N sites");

    CLI::App* subg = app.add_subcommand("subgraphs", "Identify complementary subgraphs");
    add_common(subg, false);

    CLI::App* sim = app.add_subcommand("simulate", "Run one policy over the traces");
    add_common(sim);

    CLI::App* cmp = app.add_subcommand("compare", "Run several policies and emit a matrix");
    add_common(cmp, false);
    cmp->add_option("--policies", policies_csv, "Comma-separated policy list")->required();

    CLI::App* dump = app.add_subcommand("dump-model", "Emit the optimizer instance as JSON");
    add_common(dump, false);
    dump->add_option("--step", at_step, "Build the model as of this step");

    CLI11_PARSE(app, argc, argv);

    try {
        if (select->parsed()) return cmd_select_sites(opts, top);
        if (subg->parsed()) return cmd_subgraphs(opts);
        if (sim->parsed()) return cmd_simulate(opts);
        if (cmp->parsed()) {
            std::vector<std::string> policies;
            std::stringstream ss(policies_csv);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!skybox::csv::trim(item).empty()) policies.push_back(skybox::csv::trim(item));
            return cmd_compare(opts, policies);
        }
        if (dump->parsed()) return cmd_dump_model(opts, at_step);
    } catch (const skybox::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return skybox::kExitConfigError;
    } catch (const skybox::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return skybox::kExitDataError;
    } catch (const skybox::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return skybox::kExitDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return skybox::kExitRuntimeError;
    }
    return skybox::kExitOk;
}
