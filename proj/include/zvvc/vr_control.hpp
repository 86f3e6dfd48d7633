#pragma once

#include "zvvc/feeder.hpp"

#include <optional>
#include <span>

namespace zvvc {

// Running state of one regulator's local tap automaton. The band test and
// setpoint are on the 120 V base (1 pu = 120 V); the timer accumulates only
// while the secondary voltage stays out of band in one direction.
struct VrAutomatonState {
    int tap = 0;
    double timer_s = 0.0;
    int pending_dir = 0;       // +1 raising, -1 lowering, 0 in band
    double v_set = 0.0;        // volts
    double deadband = 0.0;     // volts, full width
    double time_delay = 0.0;   // seconds
    bool saturated_flag = false;
};

struct TapEvent {
    int direction = 0; // +1 or -1
    int new_tap = 0;
};

// One dt-second observation of the secondary voltage (volts, 120 V base).
// Inside [v_set - DB/2, v_set + DB/2] the timer clears; outside it, the
// timer runs from the first out-of-band observation (a direction flip
// restarts it) and the tap steps one notch in the correcting direction once
// the delay is served, re-arming the timer for the next step. At a tap rail
// the change is suppressed and the saturation flag raised.
std::optional<TapEvent> automaton_tick(VrAutomatonState& st, double v_secondary_volts,
                                       double dt_seconds);

// Second-stage tuning knobs for one device.
struct VrTunerConfig {
    double v2_max = 1.049;     // pu
    double v2_min = 0.96;      // pu
    double deadband = 0.0;     // volts, the device's own band width
    int cadence_minutes = 2;   // T
    double margin = 0.0;       // pu head start given to the first stage

    void validate(int ibr_cadence_minutes) const; // throws ConfigError
};

// Setpoint clamp: ANSI +-5% around 120 V keeps the tuner from commanding an
// absurd band.
inline constexpr double kVsetMinVolts = 113.0;
inline constexpr double kVsetMaxVolts = 127.0;

struct ExtremeChange {
    bool over = false;
    double delta_v = 0.0; // pu, relative to the device's secondary voltage
};

// Violation test against the second-stage limits: over when the largest
// critical voltage reaches v2_max (delta = max - V_g2), under when the
// smallest reaches v2_min (delta = V_g2 - min); the larger excursion wins if
// both trip at once.
std::optional<ExtremeChange> extreme_change(std::span<const double> v_hat, double v_g2_pu,
                                            const VrTunerConfig& cfg);

// New setpoint (volts): with no violation, the mean of the critical voltages
// (so the band recenters on observed conditions and spares a needless tap);
// on a violation, the secondary voltage shifted against the excursion by at
// least half the deadband. Clamped to [113, 127] V.
double tune_setpoint(std::span<const double> v_hat, double v_g2_pu, const VrTunerConfig& cfg);

// First-stage limits carved out of the second-stage band by the coordination
// margin: v1_max = v2_max - margin, v1_min = v2_min + margin. An empty
// result band is a configuration error.
std::pair<double, double> first_stage_limits(const VrTunerConfig& cfg); // {v1_max, v1_min}

} // namespace zvvc
