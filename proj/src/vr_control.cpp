#include "zvvc/vr_control.hpp"

#include "zvvc/errors.hpp"
#include "zvvc/kernels.hpp"

#include <algorithm>

namespace zvvc {

std::optional<TapEvent> automaton_tick(VrAutomatonState& st, double v_secondary_volts,
                                       double dt_seconds) {
    if (!(dt_seconds > 0)) throw ConfigError("automaton tick needs dt > 0");
    const double lo = st.v_set - st.deadband / 2.0;
    const double hi = st.v_set + st.deadband / 2.0;

    if (v_secondary_volts >= lo && v_secondary_volts <= hi) {
        st.timer_s = 0.0;
        st.pending_dir = 0;
        return std::nullopt;
    }

    const int dir = v_secondary_volts < lo ? +1 : -1; // raise when low
    if (dir != st.pending_dir) {
        // Fresh excursion (or direction flip): the delay starts counting from
        // this observation, so a t_d-second disturbance taps at exactly t_d.
        st.pending_dir = dir;
        st.timer_s = 0.0;
        return std::nullopt;
    }
    st.timer_s += dt_seconds;
    if (st.timer_s < st.time_delay) return std::nullopt;

    st.timer_s = 0.0; // re-serve the full delay before any further step
    const int next = st.tap + dir;
    if (next < kTapMin || next > kTapMax) {
        st.saturated_flag = true;
        return std::nullopt;
    }
    st.tap = next;
    return TapEvent{dir, st.tap};
}

void VrTunerConfig::validate(int ibr_cadence_minutes) const {
    if (!(v2_min < v2_max))
        throw ConfigError("second-stage limits: v2_min must be below v2_max");
    if (!(deadband > 0)) throw ConfigError("regulator deadband must be > 0");
    if (cadence_minutes <= ibr_cadence_minutes)
        throw ConfigError("second-stage cadence must exceed the first-stage cadence");
    if (margin < 0) throw ConfigError("coordination margin must be >= 0");
}

std::optional<ExtremeChange> extreme_change(std::span<const double> v_hat, double v_g2_pu,
                                            const VrTunerConfig& cfg) {
    if (v_hat.empty()) throw ConfigError("extreme-change test without measurements");
    const auto mm = kernels::minmax(v_hat);
    const bool over = mm.max_value >= cfg.v2_max;
    const bool under = mm.min_value <= cfg.v2_min;
    if (!over && !under) return std::nullopt;
    const double dv_over = mm.max_value - v_g2_pu;
    const double dv_under = v_g2_pu - mm.min_value;
    if (over && (!under || mm.max_value - cfg.v2_max >= cfg.v2_min - mm.min_value))
        return ExtremeChange{true, dv_over};
    return ExtremeChange{false, dv_under};
}

double tune_setpoint(std::span<const double> v_hat, double v_g2_pu, const VrTunerConfig& cfg) {
    const auto change = extreme_change(v_hat, v_g2_pu, cfg);
    double v_set;
    if (!change) {
        v_set = kernels::sum(v_hat) / static_cast<double>(v_hat.size()) * 120.0;
    } else {
        const double shift = std::max(change->delta_v * 120.0, cfg.deadband / 2.0);
        v_set = change->over ? v_g2_pu * 120.0 - shift : v_g2_pu * 120.0 + shift;
    }
    return std::clamp(v_set, kVsetMinVolts, kVsetMaxVolts);
}

std::pair<double, double> first_stage_limits(const VrTunerConfig& cfg) {
    const double v1_max = cfg.v2_max - cfg.margin;
    const double v1_min = cfg.v2_min + cfg.margin;
    if (!(v1_min < v1_max))
        throw ConfigError("coordination margin leaves no first-stage band");
    return {v1_max, v1_min};
}

} // namespace zvvc
