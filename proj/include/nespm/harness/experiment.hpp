#pragma once

// Experiment orchestration: builds tracks (simulated or loaded), injects
// sensor errors, runs the filter and a free-inertial solution, and collects
// metrics, per-sample traces and per-update epoch records.

#include "nespm/harness/config.hpp"
#include "nespm/harness/corruption.hpp"
#include "nespm/harness/dataset.hpp"
#include "nespm/harness/metrics.hpp"
#include "nespm/harness/simulator.hpp"
#include "nespm/nespm_filter.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nespm::harness {

struct TrackData
{
    std::string name;
    std::vector<GroundTruthRecord> gt;
    std::vector<ImuSample> imu;
    std::vector<DvlMeasurement> dvl;
};

struct TraceRow
{
    double t = 0.0;
    NavSolution estimate;
    NavSolution truth;
};

struct EpochRow
{
    double t = 0.0;
    Eigen::Vector3d innovation = Eigen::Vector3d::Zero();
    double nees = 0.0;
    double cov_trace = 0.0;
};

struct TrackResult
{
    std::string name;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::size_t updates = 0;
    double vrmse = 0.0;
    double mrmse = 0.0;
    double mrmse_geodesic = 0.0;
    std::size_t gimbal_excluded = 0;
    double free_inertial_vrmse = 0.0;
    double mean_nees = 0.0;
    int repairs = 0;
    bool diverged = false;
    std::string divergence;
    std::vector<TraceRow> trace;
    std::vector<EpochRow> epochs;
};

struct RunReport
{
    std::vector<TrackResult> tracks;
    double vrmse_avg = 0.0;
    double mrmse_avg = 0.0;
    double free_inertial_vrmse_avg = 0.0;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::string mode;
    bool diverged = false;
    double wall_seconds = 0.0;
};

/// Independent seed for replication `index` of a run seeded with `seed` (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline TrajectorySpec trajectory_for(const std::string& profile, const SimulationSettings& sim)
{
    TrajectorySpec spec;
    if (profile == "maneuvering")
        spec = TrajectorySpec::maneuvering(sim.duration, sim.speed);
    else if (profile == "straight")
        spec = TrajectorySpec::straight(sim.duration, sim.speed, 0.5);
    else if (profile == "stationary")
        spec = TrajectorySpec::stationary(sim.duration);
    else
        throw ConfigError("unknown simulation profile '" + profile + "'");
    constexpr double deg = std::numbers::pi / 180.0;
    spec.start = {sim.latitude_deg * deg, wrap_longitude(sim.longitude_deg * deg), sim.altitude};
    return spec;
}

inline TrackData simulate_track(const std::string& profile, const SimulationSettings& sim)
{
    SimulatedData data = simulate_trajectory(trajectory_for(profile, sim));
    return {profile, std::move(data.gt), std::move(data.imu), std::move(data.dvl)};
}

inline std::vector<TrackData> build_tracks(const ExperimentConfig& config)
{
    std::vector<TrackData> tracks;
    if (config.source == Source::simulation)
    {
        for (const auto& profile : config.sim.tracks)
        {
            tracks.push_back(simulate_track(profile, config.sim));
        }
    }
    else
    {
        for (const auto& source : config.tracks)
        {
            if (source.paths.imu.empty() || source.paths.gt.empty())
            {
                throw ConfigError("dataset track '" + source.name + "' needs imu and gt paths");
            }
            Dataset ds = load_dataset(source.paths, config.load);
            tracks.push_back({source.name, std::move(ds.gt), std::move(ds.imu), std::move(ds.dvl)});
        }
    }
    if (tracks.empty())
    {
        throw ConfigError("experiment has no tracks");
    }
    return tracks;
}

namespace detail {

/// Index of the ground-truth record at time t, or nullopt. `cursor` advances monotonically.
inline std::optional<std::size_t> match_time(const std::vector<GroundTruthRecord>& gt, double t, double tol,
                                             std::size_t& cursor)
{
    while (cursor < gt.size() && gt[cursor].t < t - tol)
    {
        ++cursor;
    }
    if (cursor < gt.size() && std::abs(gt[cursor].t - t) <= tol)
    {
        return cursor;
    }
    return std::nullopt;
}

} // namespace detail

struct TrackOptions
{
    bool keep_trace = true;
};

/// Runs the filter and the free-inertial solution over one track.
inline TrackResult run_track(const TrackData& track, const ExperimentConfig& config, std::uint64_t seed,
                             const EarthParams& earth = EarthParams::wgs84(), const TrackOptions& options = {})
{
    if (track.imu.empty() || track.gt.empty())
    {
        throw DataError("track '" + track.name + "' has no imu or ground truth");
    }
    TrackResult result;
    result.name = track.name;
    result.seed = seed;

    CorruptionSpec spec = config.corruption;
    spec.seed = seed;
    const NavSolution truth0 = to_nav(track.gt.front());
    const CorruptedData data = corrupt(truth0, track.imu, track.dvl, spec);

    const double imu_dt = track.imu.front().dt;
    const double tol = 0.5 * imu_dt;

    // Free-inertial solution on the corrupted data, evaluated at ground-truth epochs.
    {
        std::vector<Eigen::Vector3d> est;
        std::vector<Eigen::Vector3d> truth;
        std::size_t cursor = 0;
        NavSolution nav = data.initial;
        for (const auto& s : data.imu)
        {
            nav = na_cycle(nav, s, earth);
            if (!nav.vel.allFinite())
            {
                break;
            }
            if (const auto i = detail::match_time(track.gt, s.t, tol, cursor))
            {
                est.push_back(nav.vel);
                truth.push_back(track.gt[*i].vel);
            }
        }
        if (!est.empty())
        {
            result.free_inertial_vrmse = vrmse(est, truth);
        }
    }

    const FilterConfig filter_config = make_filter_config(config, imu_dt);
    NespmFilter filter(filter_config, data.initial, track.gt.front().t, earth);

    std::size_t chunk = 100;
    if (data.dvl.size() >= 2)
    {
        chunk = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround((data.dvl[1].t - data.dvl[0].t) / imu_dt)));
    }

    std::size_t cursor = 0;
    std::size_t epoch_cursor = 0;
    double nees_sum = 0.0;
    auto record_path = [&](std::span<const ImuSample> window, const std::vector<NavSolution>& path) {
        for (std::size_t i = 0; i < path.size() && i < window.size(); ++i)
        {
            if (const auto g = detail::match_time(track.gt, window[i].t, tol, cursor))
            {
                result.trace.push_back({window[i].t, path[i], to_nav(track.gt[*g])});
            }
        }
    };

    std::size_t next = 0;
    try
    {
        for (const auto& m : data.dvl)
        {
            const std::size_t begin = next;
            while (next < data.imu.size() && data.imu[next].t <= m.t + tol)
            {
                ++next;
            }
            const std::span<const ImuSample> window(data.imu.data() + begin, next - begin);
            const StepResult step = filter.step(window, m);
            record_path(window, step.path);
            ++result.updates;

            std::size_t c = epoch_cursor;
            if (const auto g = detail::match_time(track.gt, filter.state().t, tol, c))
            {
                epoch_cursor = c;
                const ErrorState truth_err = true_error(filter.state().nav, to_nav(track.gt[*g]), data.accel_bias,
                                                        data.gyro_bias);
                const double value = nees(filter.state().error, truth_err);
                nees_sum += value;
                result.epochs.push_back({filter.state().t, step.innovation, value, filter.state().error.cov.trace()});
            }
        }
        while (next < data.imu.size())
        {
            const std::size_t begin = next;
            next = std::min(data.imu.size(), next + chunk);
            const std::span<const ImuSample> window(data.imu.data() + begin, next - begin);
            const StepResult step = filter.step(window, std::nullopt);
            record_path(window, step.path);
        }
    }
    catch (const DivergenceError& e)
    {
        result.diverged = true;
        result.divergence = e.what();
    }
    result.repairs = filter.repairs();
    result.samples = result.trace.size();
    if (!result.epochs.empty())
    {
        result.mean_nees = nees_sum / static_cast<double>(result.epochs.size());
    }

    if (!result.trace.empty())
    {
        std::vector<Eigen::Vector3d> ev;
        std::vector<Eigen::Vector3d> tv;
        std::vector<Dcm> ec;
        std::vector<Dcm> tc;
        for (const auto& row : result.trace)
        {
            ev.push_back(row.estimate.vel);
            tv.push_back(row.truth.vel);
            ec.push_back(row.estimate.attitude);
            tc.push_back(row.truth.attitude);
        }
        result.vrmse = vrmse(ev, tv);
        const MrmseResult m = mrmse(ec, tc);
        result.mrmse = m.value;
        result.mrmse_geodesic = m.geodesic;
        result.gimbal_excluded = m.excluded;
    }
    if (!options.keep_trace)
    {
        result.trace.clear();
        result.trace.shrink_to_fit();
    }
    return result;
}

inline RunReport run_experiment(const ExperimentConfig& config, const EarthParams& earth = EarthParams::wgs84())
{
    const auto started = std::chrono::steady_clock::now();
    const std::vector<TrackData> tracks = build_tracks(config);

    std::vector<std::future<TrackResult>> jobs;
    for (std::size_t i = 0; i < tracks.size(); ++i)
    {
        jobs.push_back(std::async(std::launch::async, [&, i] {
            return run_track(tracks[i], config, derive_seed(config.seed, i), earth);
        }));
    }
    RunReport report;
    for (auto& job : jobs)
    {
        report.tracks.push_back(job.get());
    }

    std::vector<double> v;
    std::vector<double> m;
    std::vector<double> f;
    for (const auto& t : report.tracks)
    {
        v.push_back(t.vrmse);
        m.push_back(t.mrmse);
        f.push_back(t.free_inertial_vrmse);
        report.diverged = report.diverged || t.diverged;
    }
    report.vrmse_avg = vrmse_avg(v);
    report.mrmse_avg = rms_average(m);
    report.free_inertial_vrmse_avg = rms_average(f);
    report.config = config.snapshot();
    report.seed = config.seed;
    report.mode = to_string(config.mode);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

inline nlohmann::ordered_json to_json(const RunReport& report, bool include_timing = true)
{
    nlohmann::ordered_json j;
    j["mode"] = report.mode;
    j["seed"] = report.seed;
    j["diverged"] = report.diverged;
    j["vrmse_avg"] = report.vrmse_avg;
    j["mrmse_avg"] = report.mrmse_avg;
    j["free_inertial_vrmse_avg"] = report.free_inertial_vrmse_avg;
    auto& tracks = j["tracks"] = nlohmann::ordered_json::array();
    for (const auto& t : report.tracks)
    {
        nlohmann::ordered_json tj;
        tj["name"] = t.name;
        tj["seed"] = t.seed;
        tj["samples"] = t.samples;
        tj["updates"] = t.updates;
        tj["vrmse"] = t.vrmse;
        tj["mrmse"] = t.mrmse;
        tj["mrmse_geodesic"] = t.mrmse_geodesic;
        tj["gimbal_excluded"] = t.gimbal_excluded;
        tj["free_inertial_vrmse"] = t.free_inertial_vrmse;
        tj["mean_nees"] = t.mean_nees;
        tj["covariance_repairs"] = t.repairs;
        tj["diverged"] = t.diverged;
        if (t.diverged)
        {
            tj["divergence"] = t.divergence;
        }
        tracks.push_back(std::move(tj));
    }
    j["config"] = report.config;
    if (include_timing)
    {
        j["timing"] = {{"wall_seconds", report.wall_seconds}};
    }
    return j;
}

inline std::string trace_csv(const TrackResult& t)
{
    std::ostringstream out;
    out << "t,lat,lon,h,vn,ve,vd,roll,pitch,yaw,gt_vn,gt_ve,gt_vd,gt_roll,gt_pitch,gt_yaw\n";
    using detail::format_double;
    for (const auto& row : t.trace)
    {
        const EulerAngles e = dcm_to_euler(row.estimate.attitude);
        const EulerAngles g = dcm_to_euler(row.truth.attitude);
        out << format_double(row.t) << ',' << format_double(row.estimate.pos.latitude) << ','
            << format_double(row.estimate.pos.longitude) << ',' << format_double(row.estimate.pos.altitude) << ','
            << format_double(row.estimate.vel.x()) << ',' << format_double(row.estimate.vel.y()) << ','
            << format_double(row.estimate.vel.z()) << ',' << format_double(e.roll) << ','
            << format_double(e.pitch) << ',' << format_double(e.yaw) << ',' << format_double(row.truth.vel.x())
            << ',' << format_double(row.truth.vel.y()) << ',' << format_double(row.truth.vel.z()) << ','
            << format_double(g.roll) << ',' << format_double(g.pitch) << ',' << format_double(g.yaw) << '\n';
    }
    return out.str();
}

inline std::string epochs_csv(const TrackResult& t)
{
    std::ostringstream out;
    out << "t,innov_n,innov_e,innov_d,nees,cov_trace\n";
    using detail::format_double;
    for (const auto& e : t.epochs)
    {
        out << format_double(e.t) << ',' << format_double(e.innovation.x()) << ','
            << format_double(e.innovation.y()) << ',' << format_double(e.innovation.z()) << ','
            << format_double(e.nees) << ',' << format_double(e.cov_trace) << '\n';
    }
    return out.str();
}

/// Writes report.json, trace_<track>.csv and epochs_<track>.csv into `dir`.
inline void write_outputs(const RunReport& report, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out)
        {
            throw DataError("cannot write " + p.string());
        }
        out << text;
    };
    write(dir / "report.json", to_json(report).dump(2) + "\n");
    for (const auto& t : report.tracks)
    {
        write(dir / ("trace_" + t.name + ".csv"), trace_csv(t));
        write(dir / ("epochs_" + t.name + ".csv"), epochs_csv(t));
    }
}

struct TraceMetrics
{
    std::size_t rows = 0;
    double vrmse = 0.0;
    MrmseResult mrmse;
};

/// Recomputes VRMSE and MRMSE from a trace file written by write_outputs.
inline TraceMetrics metrics_from_trace(const std::string& path)
{
    const auto rows = detail::read_csv(
        path, "t,lat,lon,h,vn,ve,vd,roll,pitch,yaw,gt_vn,gt_ve,gt_vd,gt_roll,gt_pitch,gt_yaw", 16);
    if (rows.empty())
    {
        throw DataError(path + ": empty trace");
    }
    std::vector<Eigen::Vector3d> ev;
    std::vector<Eigen::Vector3d> tv;
    std::vector<Dcm> ec;
    std::vector<Dcm> tc;
    for (const auto& r : rows)
    {
        ev.emplace_back(r[4], r[5], r[6]);
        tv.emplace_back(r[10], r[11], r[12]);
        ec.push_back(euler_to_dcm({r[7], r[8], r[9]}));
        tc.push_back(euler_to_dcm({r[13], r[14], r[15]}));
    }
    return {rows.size(), vrmse(ev, tv), mrmse(ec, tc)};
}

} // namespace nespm::harness
