#pragma once

#include "zvvc/critical_nodes.hpp"
#include "zvvc/csv.hpp"
#include "zvvc/feeder.hpp"
#include "zvvc/ibr_control.hpp"
#include "zvvc/powerflow.hpp"
#include "zvvc/profiles.hpp"
#include "zvvc/sensitivity.hpp"
#include "zvvc/vr_control.hpp"
#include "zvvc/zoning.hpp"

#include <optional>
#include <string>
#include <vector>

namespace zvvc {

// Per-device tweaks applied on top of the feeder file (the coordinated-delay
// study changes only these).
struct DeviceOverride {
    std::string id;
    std::optional<double> v_set;
    std::optional<double> deadband;
    std::optional<double> time_delay;
};

struct SimulationConfig {
    int tick_seconds = 15;       // engine resolution
    int ibr_cadence_minutes = 1; // first stage
    int vr_cadence_minutes = 2;  // second stage
    int start_minute = 0;
    int horizon_minutes = 0;

    double v2_max = 1.049;
    double v2_min = 0.96;
    double eps_u = 0.001;
    double eps_d = 0.001;
    double margin = 0.0;       // pu carved off the band for the first stage
    double alpha_scale = 0.96; // reactive-ask scaling

    double ansi_lo = 0.95; // violation-counting band, independent of control
    double ansi_hi = 1.05;

    bool ibr_enabled = true;
    bool vr_tuning_enabled = true;
    double source_pu = 1.0;
    std::vector<DeviceOverride> device_overrides;

    // Checks cadence/tick divisibility (tick must divide both cadences and
    // every post-override device delay), band sanity, and override targets.
    void validate(const FeederModel& m) const;
};

// Table III-shaped totals plus enough breakdown for the per-zone plots.
struct MetricsReport {
    long long violations = 0;  // (node, phase, minute) outside the ANSI band
    long long tap_changes = 0; // total over all devices
    double q_ibr_kvarh = 0.0;  // signed; absorption accrues negative
    std::vector<long long> taps_per_device;                 // model order
    std::vector<std::pair<std::string, double>> q_per_zone; // zone label -> kvarh
    long long solves = 0;
    int minutes = 0;
    std::vector<std::string> warnings;
};

// One inverter setpoint change. seq is a global ordinal shared with
// VrEventRow so cross-log ordering is reconstructible.
struct ActionLogRow {
    long long seq = 0;
    int t_seconds = 0;
    std::string zone;  // "a:0" style
    std::string node;  // inverter bus id
    double delta_kvar = 0.0;
    double setpoint_kvar = 0.0;
    std::string mode;  // dispatch / release / clamp
};

struct VrEventRow {
    long long seq = 0;
    int t_seconds = 0;
    std::string device;
    Phase phase = Phase::A;
    std::string kind; // "tap" or "setpoint"
    int tap = 0;
    double v_set = 0.0; // volts
};

struct SimulationResult {
    MetricsReport metrics;
    std::vector<ActionLogRow> actions;
    std::vector<VrEventRow> vr_events;
    csv::Table trace; // minute rows: critical-node vm_pu and VR secondaries
};

// Quasi-static time-series run: per minute the profiles advance and the
// network re-solves; the first stage acts on its cadence, the setpoint tuner
// on its (slower) cadence, and every regulator's local automaton ticks at
// engine resolution against the latest solved voltages, with a re-solve
// after each stage that actuated. Violations, tap counts, and reactive
// energy accumulate on the minute grid. Fully deterministic: equal inputs
// give byte-identical results. Power-flow divergence mid-run aborts with a
// NumericalError carrying the timestamp and a state dump.
SimulationResult run_simulation(const FeederModel& m, const ZonePartition& part,
                                const CriticalNodeSet& critical, const VlsmQ& vlsm,
                                const CorrelationMatrix& corr, const ProfileSet& profiles,
                                const SimulationConfig& cfg);

} // namespace zvvc
