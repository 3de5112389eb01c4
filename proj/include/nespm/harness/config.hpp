#pragma once

// Flat `key = value` experiment configuration. Lines starting with '#' are
// comments. Every key has a default; filter noise keys default to `auto`,
// which derives them from the corruption statistics.
//
// Dataset tracks are declared with `dataset.tracks = a,b` plus
// `dataset.a.imu`, `dataset.a.dvl` and `dataset.a.gt` paths, resolved
// relative to the config file.

#include "nespm/errors.hpp"
#include "nespm/harness/corruption.hpp"
#include "nespm/harness/dataset.hpp"
#include "nespm/nespm_filter.hpp"
#include "nespm/ukf.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nespm::harness {

enum class Source
{
    simulation,
    dataset,
};

struct TrackSource
{
    std::string name;
    DatasetPaths paths;
};

struct SimulationSettings
{
    std::vector<std::string> tracks{"maneuvering"};
    double duration = 60.0;
    double speed = 2.0;
    double latitude_deg = 32.8;
    double longitude_deg = 34.95;
    double altitude = -20.0;
};

/// Per-field overrides of the derived filter tuning.
struct FilterTuning
{
    std::optional<double> q_vel;         // (m/s)^2 per s
    std::optional<double> q_att;         // rad^2 per s
    std::optional<double> q_accel_bias;  // (m/s^2)^2 per s
    std::optional<double> q_gyro_bias;   // (rad/s)^2 per s
    std::optional<double> r_dvl_std;     // m/s
    std::optional<double> p0_vel_h_std;  // m/s
    std::optional<double> p0_vel_v_std;  // m/s
    std::optional<double> p0_att_std_deg;
    std::optional<double> p0_accel_bias_std;
    std::optional<double> p0_gyro_bias_std;
};

struct ExperimentConfig
{
    Source source = Source::simulation;
    PropagationMode mode = PropagationMode::nespm;
    TimeUpdateSchedule schedule = TimeUpdateSchedule::per_epoch;
    bool closed_loop = true;
    ukf::UtParams ut;
    std::uint64_t seed = 1;
    double divergence_trace = 1e6;
    CorruptionSpec corruption;
    FilterTuning tuning;
    SimulationSettings sim;
    std::vector<TrackSource> tracks;
    LoadOptions load;

    /// Effective settings as key/value text, sorted by key.
    std::map<std::string, std::string> snapshot() const;
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
    {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (!item.empty())
        {
            out.push_back(item);
        }
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& value)
{
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE || !std::isfinite(v))
    {
        throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
    }
    return v;
}

inline double to_non_negative(const std::string& key, const std::string& value)
{
    const double v = to_double(key, value);
    if (v < 0.0)
    {
        throw ConfigError("config: '" + key + "' must be non-negative");
    }
    return v;
}

inline std::optional<double> to_auto_double(const std::string& key, const std::string& value)
{
    if (value == "auto")
    {
        return std::nullopt;
    }
    return to_non_negative(key, value);
}

inline bool to_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes")
    {
        return true;
    }
    if (value == "false" || value == "0" || value == "no")
    {
        return false;
    }
    throw ConfigError("config: '" + key + "' expects true/false, got '" + value + "'");
}

inline std::string num(double v) { return format_double(v); }

inline std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string("auto"); }

} // namespace detail

inline PropagationMode parse_mode(const std::string& s)
{
    if (s == "nespm")
    {
        return PropagationMode::nespm;
    }
    if (s == "linearized")
    {
        return PropagationMode::linearized;
    }
    throw ConfigError("unknown propagation mode '" + s + "' (expected nespm or linearized)");
}

inline std::string to_string(PropagationMode m) { return m == PropagationMode::nespm ? "nespm" : "linearized"; }

/// Applies one setting. `base_dir` resolves relative dataset paths.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value,
                          const std::filesystem::path& base_dir = {})
{
    using namespace detail;
    auto& t = c.tuning;
    auto& k = c.corruption;
    if (key == "source")
    {
        if (value == "simulation")
            c.source = Source::simulation;
        else if (value == "dataset")
            c.source = Source::dataset;
        else
            throw ConfigError("config: source must be simulation or dataset");
    }
    else if (key == "mode")
        c.mode = parse_mode(value);
    else if (key == "schedule")
    {
        if (value == "per_epoch")
            c.schedule = TimeUpdateSchedule::per_epoch;
        else if (value == "per_sample")
            c.schedule = TimeUpdateSchedule::per_sample;
        else
            throw ConfigError("config: schedule must be per_epoch or per_sample");
    }
    else if (key == "closed_loop")
        c.closed_loop = to_bool(key, value);
    else if (key == "seed")
    {
        const double s = to_non_negative(key, value);
        if (s != std::floor(s) || s > 9.007199254740992e15)
        {
            throw ConfigError("config: seed must be a non-negative integer");
        }
        c.seed = static_cast<std::uint64_t>(s);
    }
    else if (key == "divergence_trace")
        c.divergence_trace = to_non_negative(key, value);
    else if (key == "ut.alpha")
        c.ut.alpha = to_double(key, value);
    else if (key == "ut.beta")
        c.ut.beta = to_double(key, value);
    else if (key == "ut.kappa")
        c.ut.kappa = to_double(key, value);
    else if (key == "ut.weight_form")
    {
        if (value == "standard")
            c.ut.weight_form = ukf::CovarianceWeightForm::standard;
        else if (value == "printed")
            c.ut.weight_form = ukf::CovarianceWeightForm::printed;
        else
            throw ConfigError("config: ut.weight_form must be standard or printed");
    }
    else if (key == "corrupt.init_vel_std_h")
        k.init_vel_std_h = to_non_negative(key, value);
    else if (key == "corrupt.init_vel_std_v")
        k.init_vel_std_v = to_non_negative(key, value);
    else if (key == "corrupt.misalignment_std_deg")
        k.misalignment_std_deg = to_non_negative(key, value);
    else if (key == "corrupt.accel_noise_std")
        k.accel_noise_std = to_non_negative(key, value);
    else if (key == "corrupt.gyro_noise_std")
        k.gyro_noise_std = to_non_negative(key, value);
    else if (key == "corrupt.accel_bias_std")
        k.accel_bias_std = to_non_negative(key, value);
    else if (key == "corrupt.gyro_bias_std")
        k.gyro_bias_std = to_non_negative(key, value);
    else if (key == "corrupt.dvl_noise_std")
        k.dvl_noise_std = to_non_negative(key, value);
    else if (key == "filter.q_vel")
        t.q_vel = to_auto_double(key, value);
    else if (key == "filter.q_att")
        t.q_att = to_auto_double(key, value);
    else if (key == "filter.q_accel_bias")
        t.q_accel_bias = to_auto_double(key, value);
    else if (key == "filter.q_gyro_bias")
        t.q_gyro_bias = to_auto_double(key, value);
    else if (key == "filter.r_dvl_std")
        t.r_dvl_std = to_auto_double(key, value);
    else if (key == "filter.p0_vel_h_std")
        t.p0_vel_h_std = to_auto_double(key, value);
    else if (key == "filter.p0_vel_v_std")
        t.p0_vel_v_std = to_auto_double(key, value);
    else if (key == "filter.p0_att_std_deg")
        t.p0_att_std_deg = to_auto_double(key, value);
    else if (key == "filter.p0_accel_bias_std")
        t.p0_accel_bias_std = to_auto_double(key, value);
    else if (key == "filter.p0_gyro_bias_std")
        t.p0_gyro_bias_std = to_auto_double(key, value);
    else if (key == "sim.tracks")
        c.sim.tracks = split_list(value);
    else if (key == "sim.duration")
        c.sim.duration = to_non_negative(key, value);
    else if (key == "sim.speed")
        c.sim.speed = to_non_negative(key, value);
    else if (key == "sim.latitude_deg")
        c.sim.latitude_deg = to_double(key, value);
    else if (key == "sim.longitude_deg")
        c.sim.longitude_deg = to_double(key, value);
    else if (key == "sim.altitude")
        c.sim.altitude = to_double(key, value);
    else if (key == "dataset.rate_ratio")
        c.load.expected_rate_ratio = to_non_negative(key, value);
    else if (key == "dataset.tracks")
    {
        std::vector<TrackSource> tracks;
        for (const auto& name : split_list(value))
        {
            auto it = std::find_if(c.tracks.begin(), c.tracks.end(), [&](const auto& tr) { return tr.name == name; });
            tracks.push_back(it != c.tracks.end() ? *it : TrackSource{name, {}});
        }
        c.tracks = std::move(tracks);
    }
    else if (key.rfind("dataset.", 0) == 0)
    {
        const auto dot = key.rfind('.');
        const std::string name = key.substr(8, dot - 8);
        const std::string field = key.substr(dot + 1);
        auto it = std::find_if(c.tracks.begin(), c.tracks.end(), [&](const auto& tr) { return tr.name == name; });
        if (name.empty() || dot <= 8 || it == c.tracks.end())
        {
            throw ConfigError("config: '" + key + "' names a track missing from dataset.tracks");
        }
        const std::string path = value.empty() ? value : (base_dir / value).lexically_normal().string();
        if (field == "imu")
            it->paths.imu = path;
        else if (field == "dvl")
            it->paths.dvl = path;
        else if (field == "gt")
            it->paths.gt = path;
        else
            throw ConfigError("config: unknown dataset field in '" + key + "'");
    }
    else
    {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {})
{
    ExperimentConfig c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        // trailing comments need whitespace before '#'
        for (std::size_t i = 1; i < line.size(); ++i)
        {
            if (line[i] == '#' && (line[i - 1] == ' ' || line[i - 1] == '\t'))
            {
                line.resize(i);
                break;
            }
        }
        line = detail::trim(line);
        if (line.empty() || line[0] == '#')
        {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
        {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        apply_setting(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), base_dir);
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("cannot open config " + path.string());
    }
    return parse_config(in, path.parent_path());
}

inline std::map<std::string, std::string> ExperimentConfig::snapshot() const
{
    using detail::num;
    using detail::opt;
    std::map<std::string, std::string> m;
    m["source"] = source == Source::simulation ? "simulation" : "dataset";
    m["mode"] = to_string(mode);
    m["schedule"] = schedule == TimeUpdateSchedule::per_epoch ? "per_epoch" : "per_sample";
    m["closed_loop"] = closed_loop ? "true" : "false";
    m["seed"] = std::to_string(seed);
    m["divergence_trace"] = num(divergence_trace);
    m["ut.alpha"] = num(ut.alpha);
    m["ut.beta"] = num(ut.beta);
    m["ut.kappa"] = num(ut.kappa);
    m["ut.weight_form"] = ut.weight_form == ukf::CovarianceWeightForm::standard ? "standard" : "printed";
    m["corrupt.init_vel_std_h"] = num(corruption.init_vel_std_h);
    m["corrupt.init_vel_std_v"] = num(corruption.init_vel_std_v);
    m["corrupt.misalignment_std_deg"] = num(corruption.misalignment_std_deg);
    m["corrupt.accel_noise_std"] = num(corruption.accel_noise_std);
    m["corrupt.gyro_noise_std"] = num(corruption.gyro_noise_std);
    m["corrupt.accel_bias_std"] = num(corruption.accel_bias_std);
    m["corrupt.gyro_bias_std"] = num(corruption.gyro_bias_std);
    m["corrupt.dvl_noise_std"] = num(corruption.dvl_noise_std);
    m["filter.q_vel"] = opt(tuning.q_vel);
    m["filter.q_att"] = opt(tuning.q_att);
    m["filter.q_accel_bias"] = opt(tuning.q_accel_bias);
    m["filter.q_gyro_bias"] = opt(tuning.q_gyro_bias);
    m["filter.r_dvl_std"] = opt(tuning.r_dvl_std);
    m["filter.p0_vel_h_std"] = opt(tuning.p0_vel_h_std);
    m["filter.p0_vel_v_std"] = opt(tuning.p0_vel_v_std);
    m["filter.p0_att_std_deg"] = opt(tuning.p0_att_std_deg);
    m["filter.p0_accel_bias_std"] = opt(tuning.p0_accel_bias_std);
    m["filter.p0_gyro_bias_std"] = opt(tuning.p0_gyro_bias_std);
    if (source == Source::simulation)
    {
        std::string names;
        for (const auto& n : sim.tracks)
        {
            names += (names.empty() ? "" : ",") + n;
        }
        m["sim.tracks"] = names;
        m["sim.duration"] = num(sim.duration);
        m["sim.speed"] = num(sim.speed);
        m["sim.latitude_deg"] = num(sim.latitude_deg);
        m["sim.longitude_deg"] = num(sim.longitude_deg);
        m["sim.altitude"] = num(sim.altitude);
    }
    else
    {
        std::string names;
        for (const auto& tr : tracks)
        {
            names += (names.empty() ? "" : ",") + tr.name;
            m["dataset." + tr.name + ".imu"] = tr.paths.imu;
            m["dataset." + tr.name + ".dvl"] = tr.paths.dvl;
            m["dataset." + tr.name + ".gt"] = tr.paths.gt;
        }
        m["dataset.tracks"] = names;
        m["dataset.rate_ratio"] = num(load.expected_rate_ratio);
    }
    return m;
}

/// Filter tuning matched to the corruption statistics unless overridden.
/// Variances are floored at 1e-18 so that P0 stays positive definite for
/// error-free runs.
inline FilterConfig make_filter_config(const ExperimentConfig& c, double imu_dt)
{
    static constexpr double kFloor = 1e-18;
    const CorruptionSpec& k = c.corruption;
    const FilterTuning& t = c.tuning;
    auto var = [](double stddev) { return std::max(stddev * stddev, kFloor); };
    constexpr double deg = std::numbers::pi / 180.0;

    FilterConfig f;
    f.ut = c.ut;
    f.mode = c.mode;
    f.schedule = c.schedule;
    f.closed_loop = c.closed_loop;
    f.divergence_trace = c.divergence_trace;

    const double q_vel = t.q_vel.value_or(k.accel_noise_std * k.accel_noise_std * imu_dt);
    const double q_att = t.q_att.value_or(k.gyro_noise_std * k.gyro_noise_std * imu_dt);
    f.q_rate.setZero();
    f.q_rate.diagonal() << Eigen::Vector3d::Constant(q_vel), Eigen::Vector3d::Constant(q_att),
        Eigen::Vector3d::Constant(t.q_accel_bias.value_or(0.0)), Eigen::Vector3d::Constant(t.q_gyro_bias.value_or(0.0));

    f.r = Eigen::Matrix3d::Identity() * std::max(var(t.r_dvl_std.value_or(k.dvl_noise_std)), 1e-8);

    const double vh = var(t.p0_vel_h_std.value_or(k.init_vel_std_h));
    const double vv = var(t.p0_vel_v_std.value_or(k.init_vel_std_v));
    const double att = var(t.p0_att_std_deg.value_or(k.misalignment_std_deg) * deg);
    const double ba = var(t.p0_accel_bias_std.value_or(k.accel_bias_std));
    const double bg = var(t.p0_gyro_bias_std.value_or(k.gyro_bias_std));
    f.p0.setZero();
    f.p0.diagonal() << vh, vh, vv, att, att, att, ba, ba, ba, bg, bg, bg;
    return f;
}

} // namespace nespm::harness
