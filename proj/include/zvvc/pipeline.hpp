#pragma once

#include "zvvc/critical_nodes.hpp"
#include "zvvc/simulator.hpp"

#include <cstdint>
#include <string>
#include <vector>

// File-level pipeline stages behind the command-line front door. Each stage
// reads the previous stage's artifacts, verifies their provenance hashes
// (refusing stale mixtures), and writes its own artifacts with a manifest
// block {tool_version, inputs, params} so the chain is auditable. Stages are
// pure functions of their input files: same inputs, byte-identical outputs.
namespace zvvc::pipeline {

struct SensitivityParams {
    int scenarios = 1000;
    double delta_q_kvar = 10.0;
    std::uint64_t seed = 1;
    ScenarioWindow window{};
    CorrelationMode mode = CorrelationMode::stacked;
    int workers = 1;
};

struct CriticalParams {
    int runs = 10000;
    double th_percent = 5.0;
    double delta_v_th = 0.001;
    std::uint64_t seed = 2;
    int workers = 1;
};

// Load + cross-check the feeder and profile documents; returns a printable
// summary (bus/line/device/load/pv counts, profile table shape).
std::string validate_stage(const std::string& feeder_path, const std::string& profiles_path);

// One power-flow solve at the given profile minute (model taps, no inverter
// reactive output); writes per-(bus, phase) voltages to a CSV.
void powerflow_stage(const std::string& feeder_path, const std::string& profiles_path, int minute,
                     double source_pu, const std::string& out_csv);

// Scenario sampling + sensitivity matrices. Writes into out_dir:
//   sensitivity.json           manifest, node lists, output hashes, warnings
//   vlsm_{a,b,c}.csv           element-wise mean sensitivity across scenarios
//   corr_{a,b,c}.csv           Pearson correlation between sensitivity columns
void sensitivity_stage(const std::string& feeder_path, const std::string& profiles_path,
                       const SensitivityParams& p, const std::string& out_dir);

// Offline partition at the given threshold; writes partition.json (zone
// member bus ids per phase plus per-regulator zones).
void partition_stage(const std::string& feeder_path, const std::string& sensitivity_dir,
                     double alpha, const std::string& out_path);

// Monte-Carlo extreme-voltage identification over the partition's zones;
// writes critical.json (per-group occurrence counts and the accepted set).
void critical_stage(const std::string& feeder_path, const std::string& profiles_path,
                    const std::string& partition_path, const CriticalParams& p,
                    const std::string& out_path);

// Closed-loop day run. Writes into out_dir: metrics.json, actions.csv,
// vr_events.csv, trace.csv.
void simulate_stage(const std::string& feeder_path, const std::string& profiles_path,
                    const std::string& sensitivity_dir, const std::string& partition_path,
                    const std::string& critical_path, const SimulationConfig& cfg,
                    const std::string& out_dir);

// Aggregates simulate runs (one directory each) into a summary table plus
// plot-ready CSVs (voltage envelope, tap timeline, per-zone kvarh per run).
// Returns the printable summary. All runs must share the feeder hash.
std::string report_stage(const std::vector<std::string>& run_dirs, const std::string& out_dir);

// --- artifact loaders (shared with the simulate stage and the tests) -------

struct SensitivityArtifacts {
    VlsmQ mean_vlsm;        // element-wise mean across the sampled scenarios
    CorrelationMatrix corr;
    int scenario_count = 0;
};

// Each loader re-verifies the stored hashes before trusting the content and
// throws DataError when an artifact was produced from different inputs than
// the ones on disk now.
SensitivityArtifacts load_sensitivity(const std::string& dir, const FeederModel& m);
ZonePartition load_partition(const std::string& path, const FeederModel& m);
CriticalNodeSet load_critical(const std::string& path, const FeederModel& m,
                              const ZonePartition& part);

} // namespace zvvc::pipeline
