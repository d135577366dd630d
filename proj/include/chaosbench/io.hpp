#pragma once

#include "chaosbench/experiments.hpp"
#include "chaosbench/records.hpp"
#include "chaosbench/systems.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace chaosbench {

// ---------------------------------------------------------------------------
// Experiment configuration documents (JSON, keys mirror ExperimentConfig).

ExperimentConfig experiment_config_from_text(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
// Hash of the canonical form; execution-only settings (threads) are excluded.
std::string config_hash(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Trajectory CSV: header `t_lyap,x0,x1,...` plus `<path>.meta.json`.

struct TrajectoryMeta {
    std::string system;
    Seed seed = 0;
    int ic_index = 0;
    int granularity = 30;
    double dt_lyap = 1.0 / 30.0;
    std::string harness_version;
    nlohmann::json extra = nlohmann::json::object();
};

void write_trajectory_csv(const Trajectory& traj, const TrajectoryMeta& meta, const std::string& path);
// Reads the CSV (and the sidecar when present); dt_lyap comes from the time column.
Trajectory read_trajectory_csv(const std::string& path, TrajectoryMeta* meta = nullptr);

// ---------------------------------------------------------------------------
// Double pendulum

/// Per-frame pixel centroids of pivot, hinge and tip (image y grows downward).
struct PendulumRaw {
    Matrix pivot;  // F×2
    Matrix hinge;  // F×2
    Matrix tip;    // F×2
    double fps = 400.0;
};

/// Angles from the downward vertical (counterclockwise on screen positive),
/// unwrapped; angular velocity by central differences; then every third
/// sample. Output channels (θ1, θ2, θ̇1, θ̇2) in radians and radians/second.
/// Length ⌊F/3⌋: the two boundary frames are trimmed before decimation.
Trajectory ingest_pendulum(const PendulumRaw& raw);

// CSV with columns pivot_x,pivot_y,hinge_x,hinge_y,tip_x,tip_y (header required).
PendulumRaw read_pendulum_csv(const std::string& path, double fps = 400.0);

// ---------------------------------------------------------------------------
// Reports

std::string format_table(const SummaryTable& table, const std::string& format);  // "csv" or "md"
// Long-form CSV: group keys..., horizon, t_lyap, median_smape.
std::string format_curves(const SummaryTable& table, double dt_lyap);

}  // namespace chaosbench
