// nespm: experiment driver for the INS/DVL sigma-point filters.
//
//   nespm run      --config FILE [--seed N] [--mode nespm|linearized] [--out-dir DIR]
//   nespm simulate --config FILE [--out-dir DIR]
//   nespm metrics  --trace FILE [--trace FILE ...]
//   nespm compare  (--baseline REPORT --ours REPORT | --vrmse B O --mrmse B O)
//
// Exit codes: 0 success, 1 usage or data error, 2 filter divergence.

#include "nespm/harness/config.hpp"
#include "nespm/harness/experiment.hpp"
#include "nespm/harness/metrics.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <tuple>
#include <vector>

namespace fs = std::filesystem;
using namespace nespm;
using namespace nespm::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;

ExperimentConfig load_or_default(const std::string& path)
{
    return path.empty() ? ExperimentConfig{} : load_config(path);
}

int cmd_run(const std::string& config_path, const std::string& seed, const std::string& mode, const fs::path& out_dir)
{
    ExperimentConfig config = load_or_default(config_path);
    if (!seed.empty())
    {
        apply_setting(config, "seed", seed);
    }
    if (!mode.empty())
    {
        apply_setting(config, "mode", mode);
    }
    const RunReport report = run_experiment(config);
    write_outputs(report, out_dir);

    std::printf("%-14s %8s %10s %10s %12s %8s\n", "track", "samples", "VRMSE", "MRMSE", "free VRMSE", "status");
    for (const auto& t : report.tracks)
    {
        std::printf("%-14s %8zu %10.5f %10.6f %12.5f %8s\n", t.name.c_str(), t.samples, t.vrmse, t.mrmse,
                    t.free_inertial_vrmse, t.diverged ? "DIVERGED" : "ok");
    }
    std::printf("%-14s %8s %10.5f %10.6f %12.5f\n", "average", "", report.vrmse_avg, report.mrmse_avg,
                report.free_inertial_vrmse_avg);
    std::printf("mode %s, seed %llu, report written to %s\n", report.mode.c_str(),
                static_cast<unsigned long long>(report.seed), (out_dir / "report.json").string().c_str());
    return report.diverged ? kExitDiverged : kExitOk;
}

int cmd_simulate(const std::string& config_path, const fs::path& out_dir)
{
    const ExperimentConfig config = load_or_default(config_path);
    fs::create_directories(out_dir);
    std::ofstream cfg(out_dir / "dataset.cfg");
    cfg << "source = dataset\n";
    std::string names;
    for (const auto& profile : config.sim.tracks)
    {
        names += (names.empty() ? "" : ",") + profile;
    }
    cfg << "dataset.tracks = " << names << "\n";
    for (const auto& profile : config.sim.tracks)
    {
        const TrackData track = simulate_track(profile, config.sim);
        write_imu_csv((out_dir / (profile + "_imu.csv")).string(), track.imu);
        write_dvl_csv((out_dir / (profile + "_dvl.csv")).string(), track.dvl);
        write_gt_csv((out_dir / (profile + "_gt.csv")).string(), track.gt);
        cfg << "dataset." << profile << ".imu = " << profile << "_imu.csv\n"
            << "dataset." << profile << ".dvl = " << profile << "_dvl.csv\n"
            << "dataset." << profile << ".gt = " << profile << "_gt.csv\n";
        std::printf("%s: %zu imu, %zu dvl, %zu gt rows\n", profile.c_str(), track.imu.size(), track.dvl.size(),
                    track.gt.size());
    }
    std::printf("dataset config written to %s\n", (out_dir / "dataset.cfg").string().c_str());
    return kExitOk;
}

int cmd_metrics(const std::vector<std::string>& traces)
{
    std::vector<double> v;
    std::vector<double> m;
    std::printf("%-40s %8s %10s %10s %10s\n", "trace", "rows", "VRMSE", "MRMSE", "geodesic");
    for (const auto& path : traces)
    {
        const TraceMetrics t = metrics_from_trace(path);
        std::printf("%-40s %8zu %10.5f %10.6f %10.6f\n", path.c_str(), t.rows, t.vrmse, t.mrmse.value,
                    t.mrmse.geodesic);
        if (t.mrmse.excluded > 0)
        {
            std::printf("  %zu gimbal-lock epochs excluded\n", t.mrmse.excluded);
        }
        v.push_back(t.vrmse);
        m.push_back(t.mrmse.value);
    }
    std::printf("%-40s %8s %10.5f %10.6f\n", "average", "", vrmse_avg(v), rms_average(m));
    return kExitOk;
}

std::pair<double, double> report_metrics(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw DataError("cannot open report " + path);
    }
    const auto j = nlohmann::json::parse(in);
    return {j.at("vrmse_avg").get<double>(), j.at("mrmse_avg").get<double>()};
}

int cmd_compare(const std::string& baseline, const std::string& ours, const std::vector<double>& vr,
                const std::vector<double>& mr)
{
    double vb, vo, mb, mo;
    if (!baseline.empty() || !ours.empty())
    {
        if (baseline.empty() || ours.empty())
        {
            throw ConfigError("compare: --baseline and --ours go together");
        }
        std::tie(vb, mb) = report_metrics(baseline);
        std::tie(vo, mo) = report_metrics(ours);
    }
    else if (vr.size() == 2 && mr.size() == 2)
    {
        vb = vr[0];
        vo = vr[1];
        mb = mr[0];
        mo = mr[1];
    }
    else
    {
        throw ConfigError("compare: give --baseline/--ours reports or --vrmse B O --mrmse B O");
    }
    std::printf("%-8s %12s %12s %12s\n", "metric", "baseline", "ours", "improvement");
    std::printf("%-8s %12.6g %12.6g %12s\n", "VRMSE", vb, vo, format_percent(improvement(vb, vo)).c_str());
    std::printf("%-8s %12.6g %12.6g %12s\n", "MRMSE", mb, mo, format_percent(improvement(mb, mo)).c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"INS/DVL unscented Kalman filter experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string seed;
    std::string mode;
    std::string out_dir = ".";
    auto* run = app.add_subcommand("run", "run an experiment and write report and traces");
    run->add_option("--config", config_path, "experiment config file");
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--mode", mode, "propagation mode")->check(CLI::IsMember({"nespm", "linearized"}));
    run->add_option("--out-dir", out_dir, "output directory");

    auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset as CSV files");
    simulate->add_option("--config", config_path, "experiment config file (sim.* keys)");
    simulate->add_option("--seed", seed, "accepted for symmetry; simulated data is error-free");
    simulate->add_option("--out-dir", out_dir, "output directory");

    std::vector<std::string> traces;
    auto* metrics = app.add_subcommand("metrics", "recompute VRMSE/MRMSE from trace files");
    metrics->add_option("--trace", traces, "trace CSV written by run")->required();

    std::string baseline;
    std::string ours;
    std::vector<double> vr;
    std::vector<double> mr;
    auto* compare = app.add_subcommand("compare", "improvement of one result over a baseline");
    compare->add_option("--baseline", baseline, "baseline report.json");
    compare->add_option("--ours", ours, "report.json to compare");
    compare->add_option("--vrmse", vr, "baseline and ours VRMSE")->expected(2);
    compare->add_option("--mrmse", mr, "baseline and ours MRMSE")->expected(2);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kExitError;
    }

    try
    {
        if (run->parsed())
            return cmd_run(config_path, seed, mode, out_dir);
        if (simulate->parsed())
            return cmd_simulate(config_path, out_dir);
        if (metrics->parsed())
            return cmd_metrics(traces);
        if (compare->parsed())
            return cmd_compare(baseline, ours, vr, mr);
    }
    catch (const std::exception& e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitError;
}
