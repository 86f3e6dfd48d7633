#pragma once

#include "zvvc/feeder.hpp"
#include "zvvc/sensitivity.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zvvc {

// First-stage (inverter) controller limits and knobs. The limits are the
// second-stage band pulled in by the coordination margin, so inverters react
// before any regulator tap is provoked.
struct IbrControllerConfig {
    double v1_max = 0.0;
    double v1_min = 0.0;
    double eps_u = 0.001;      // pu margin below v1_max closing the return band
    double eps_d = 0.001;      // pu margin above v1_min
    double alpha_scale = 0.96; // denominator scaling of the reactive-power ask
    int cadence_minutes = 1;

    void validate() const; // throws ConfigError on an inconsistent band
};

enum class ZoneMode { idle, correcting_over, correcting_under, resetting };
const char* zone_mode_name(ZoneMode mode);

struct Violation {
    bool over = false; // false: under-voltage
    int index = 0;     // position of the extreme measurement
    double delta_v = 0.0;
};

// Extreme-voltage test over the critical measurements: over when the maximum
// reaches v1_max, under when the minimum reaches v1_min (both inclusive);
// when both trip at once the larger excursion wins (ties go to over). Empty
// measurements are a caller error (ConfigError).
std::optional<Violation> detect_violation(std::span<const double> v_hat,
                                          const IbrControllerConfig& cfg);

// Reactive power needed to move the extreme node by delta_v given its own
// diagonal sensitivity q_rr (pu/kvar), conservatively inflated by 1/alpha.
// Magnitude only; the caller signs it. q_rr <= 0 means the sensitivity table
// is unusable (DataError).
double required_reactive(double delta_v, double q_rr, double alpha);

// Sequential fill along a priority order: each inverter moves its setpoint
// toward the signed request (positive = inject more) until its capability is
// hit, then the walk moves on. Later entries receive allocation only once
// every earlier one is saturated.
struct DispatchOutcome {
    std::vector<double> delta; // per inverter slot, signed kvar
    double allocated = 0.0;    // |kvar| actually placed
    bool depleted = false;     // request outlived the available headroom
};
DispatchOutcome dispatch(double request_kvar, const std::vector<int>& priority,
                         std::span<const double> setpoints, std::span<const double> cap_kvar);

struct IbrAction {
    int pv_index = 0;          // index into FeederModel::pvs
    double delta_kvar = 0.0;
    double setpoint_kvar = 0.0; // value after the change
    std::string kind;           // "dispatch", "release", or "clamp"
};

struct IbrStepResult {
    ZoneMode mode = ZoneMode::idle;
    std::vector<IbrAction> actions;
    bool depleted = false;       // ran out of inverter headroom
    bool telemetry_flag = false; // measurements missing; held last setpoints
    int extreme_bus = -1;        // bus index driving the action, if any
    double requested_kvar = 0.0; // signed ask (dispatch) or release size
};

// One controller per (phase, zone). Owns the zone's inverter setpoints and
// the mode/hysteresis state; step() is called once per control cadence with
// fresh critical-node voltages and the inverters' current active outputs.
class ZoneController {
  public:
    // critical_buses and pv_indices address the shared FeederModel; every
    // critical bus and every inverter bus must appear in the phase's
    // sensitivity node list (ConfigError otherwise).
    ZoneController(const FeederModel& m, Phase phase, int zone_index,
                   std::vector<int> critical_buses, std::vector<int> pv_indices,
                   const VlsmQ& vlsm, const CorrelationMatrix& corr, IbrControllerConfig cfg);

    // critical_v: vm_pu per critical bus (order of critical()); pv_p_kw:
    // active output per zone inverter (order of pv_indices()).
    IbrStepResult step(std::span<const double> critical_v, std::span<const double> pv_p_kw);

    // Re-clamp setpoints to the capability at the given active outputs
    // (called when profiles move under the controller between steps);
    // returns one "clamp" action per changed inverter.
    std::vector<IbrAction> apply_capability(std::span<const double> pv_p_kw);

    Phase phase() const { return phase_; }
    int zone_index() const { return zone_index_; }
    ZoneMode mode() const { return mode_; }
    const std::vector<int>& critical() const { return critical_; }
    const std::vector<int>& pv_indices() const { return pv_indices_; }
    std::span<const double> setpoints() const { return setpoints_; }

  private:
    std::vector<double> capabilities(std::span<const double> pv_p_kw) const;
    void rebuild_priority(int r_node_pos);

    Phase phase_;
    int zone_index_;
    std::vector<int> critical_;
    std::vector<int> pv_indices_;
    std::vector<int> critical_node_pos_; // positions in the phase node list
    std::vector<int> pv_node_pos_;
    std::vector<double> pv_kva_;
    std::vector<double> diag_q_;  // q_rr per phase-node position
    std::vector<double> corr_;    // phase correlation matrix (row-major copy)
    std::size_t n_nodes_;
    IbrControllerConfig cfg_;

    ZoneMode mode_ = ZoneMode::idle;
    std::vector<double> setpoints_;
    int priority_for_ = -1;        // node position the cached order was built for
    std::vector<int> priority_;    // inverter slots, best first
};

} // namespace zvvc
