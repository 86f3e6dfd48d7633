#include "zvvc/simulator.hpp"

#include "zvvc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace zvvc {

namespace {

struct ResolvedDevice {
    double v_set;
    double deadband;
    double time_delay;
};

ResolvedDevice resolve_device(const VoltageRegulatorDevice& d, const SimulationConfig& cfg) {
    ResolvedDevice r{d.v_set, d.deadband, d.time_delay};
    for (const DeviceOverride& o : cfg.device_overrides) {
        if (o.id != d.id) continue;
        if (o.v_set) r.v_set = *o.v_set;
        if (o.deadband) r.deadband = *o.deadband;
        if (o.time_delay) r.time_delay = *o.time_delay;
    }
    return r;
}

std::vector<int> bus_depths(const FeederModel& m) {
    std::vector<int> depth(m.buses.size(), 0);
    for (int b : m.sweep_order) {
        const int pl = m.parent_line[static_cast<std::size_t>(b)];
        if (pl >= 0)
            depth[static_cast<std::size_t>(b)] =
                depth[static_cast<std::size_t>(m.lines[static_cast<std::size_t>(pl)].from_index)] +
                1;
    }
    return depth;
}

} // namespace

void SimulationConfig::validate(const FeederModel& m) const {
    if (tick_seconds < 1) throw ConfigError("engine tick must be >= 1 second");
    if (60 % tick_seconds != 0)
        throw ConfigError("engine tick must divide one minute (got " +
                          std::to_string(tick_seconds) + " s)");
    if (ibr_cadence_minutes < 1) throw ConfigError("first-stage cadence must be >= 1 minute");
    if (vr_cadence_minutes <= ibr_cadence_minutes)
        throw ConfigError("second-stage cadence must exceed the first-stage cadence");
    if (horizon_minutes < 1) throw ConfigError("simulation horizon must be >= 1 minute");
    if (start_minute < 0) throw ConfigError("start minute must be >= 0");
    if (!(ansi_lo < ansi_hi)) throw ConfigError("violation band is empty");
    if (!(v2_min < v2_max)) throw ConfigError("second-stage limits: v2_min must be below v2_max");
    if (margin < 0) throw ConfigError("coordination margin must be >= 0");
    if (!(source_pu > 0)) throw ConfigError("source voltage must be > 0 pu");

    for (const DeviceOverride& o : device_overrides) {
        bool found = false;
        for (const VoltageRegulatorDevice& d : m.regulators)
            if (d.id == o.id) found = true;
        if (!found) throw ConfigError("device override targets unknown regulator '" + o.id + "'");
    }
    for (const VoltageRegulatorDevice& d : m.regulators) {
        const ResolvedDevice r = resolve_device(d, *this);
        if (!(r.deadband > 0)) throw ConfigError("regulator '" + d.id + "': deadband must be > 0");
        if (!(r.time_delay > 0))
            throw ConfigError("regulator '" + d.id + "': time delay must be > 0");
        const double ticks = r.time_delay / tick_seconds;
        if (std::abs(ticks - std::round(ticks)) > 1e-9)
            throw ConfigError("regulator '" + d.id + "': time delay " +
                              csv::format_double(r.time_delay) +
                              " s is not a multiple of the engine tick");
    }
    if (ibr_enabled) {
        const VrTunerConfig probe{v2_max, v2_min, 1.0, vr_cadence_minutes, margin};
        const auto [v1_max, v1_min] = first_stage_limits(probe);
        const IbrControllerConfig icfg{v1_max, v1_min, eps_u, eps_d, alpha_scale,
                                       ibr_cadence_minutes};
        icfg.validate();
    }
}

SimulationResult run_simulation(const FeederModel& m, const ZonePartition& part,
                                const CriticalNodeSet& critical, const VlsmQ& vlsm,
                                const CorrelationMatrix& corr, const ProfileSet& profiles,
                                const SimulationConfig& cfg) {
    cfg.validate(m);
    check_profiles(m, profiles);
    if (cfg.start_minute + cfg.horizon_minutes > profiles.minutes())
        throw DataError("simulation window [" + std::to_string(cfg.start_minute) + ", " +
                        std::to_string(cfg.start_minute + cfg.horizon_minutes) +
                        ") exceeds the profile table (" + std::to_string(profiles.minutes()) +
                        " minutes)");

    const std::vector<MonitorGroup> groups = monitor_groups(part);
    if (critical.groups.size() != groups.size())
        throw ConfigError("critical-node set does not match the partition's zones");
    // Accepted critical buses per group, translated from member positions.
    std::vector<std::vector<int>> final_buses(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (int pos : critical.groups[g].final_set)
            final_buses[g].push_back(groups[g].members[static_cast<std::size_t>(pos)]);
    auto group_of = [&](const std::string& label) -> int {
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (groups[g].label == label) return static_cast<int>(g);
        return -1;
    };

    SimulationResult out;
    MetricsReport& metrics = out.metrics;
    metrics.taps_per_device.assign(m.regulators.size(), 0);

    // --- first-stage controllers -------------------------------------------
    struct CtrlSlot {
        std::string label; // "a:0" style
        ZoneController ctrl;
    };
    std::vector<CtrlSlot> ctrls;
    std::vector<bool> pv_managed(m.pvs.size(), false);
    if (cfg.ibr_enabled) {
        const VrTunerConfig probe{cfg.v2_max, cfg.v2_min, 1.0, cfg.vr_cadence_minutes, cfg.margin};
        const auto [v1_max, v1_min] = first_stage_limits(probe);
        const IbrControllerConfig icfg{v1_max,    v1_min,          cfg.eps_u,
                                       cfg.eps_d, cfg.alpha_scale, cfg.ibr_cadence_minutes};
        for (int p = 0; p < 3; ++p) {
            for (const IbrZone& z : part.ibr[static_cast<std::size_t>(p)]) {
                if (z.members.empty()) continue;
                const std::string glabel =
                    "ibr:" + std::string(1, phase_char(z.phase)) + ":" + std::to_string(z.index);
                const int g = group_of(glabel);
                if (g < 0 || final_buses[static_cast<std::size_t>(g)].empty()) {
                    metrics.warnings.push_back("zone " + glabel +
                                               " has no critical nodes; first stage idle there");
                    continue;
                }
                std::vector<int> pvs;
                for (std::size_t i = 0; i < m.pvs.size(); ++i) {
                    if (m.pvs[i].phase != z.phase) continue;
                    if (std::binary_search(z.members.begin(), z.members.end(), m.pvs[i].bus_index))
                        pvs.push_back(static_cast<int>(i));
                }
                if (pvs.empty()) {
                    metrics.warnings.push_back("zone " + glabel +
                                               " has no inverters; first stage idle there");
                    continue;
                }
                for (int pvi : pvs) pv_managed[static_cast<std::size_t>(pvi)] = true;
                const std::string label =
                    std::string(1, phase_char(z.phase)) + ":" + std::to_string(z.index);
                ctrls.push_back({label,
                                 ZoneController(m, z.phase, z.index,
                                                final_buses[static_cast<std::size_t>(g)], pvs,
                                                vlsm, corr, icfg)});
            }
        }
        for (std::size_t i = 0; i < m.pvs.size(); ++i)
            if (!pv_managed[i])
                metrics.warnings.push_back("pv at " + m.pvs[i].bus + " phase " +
                                           std::string(1, phase_char(m.pvs[i].phase)) +
                                           " is outside every inverter zone; unmanaged");
    }
    for (const CtrlSlot& c : ctrls) metrics.q_per_zone.emplace_back(c.label, 0.0);

    // --- regulators ----------------------------------------------------------
    struct DeviceRuntime {
        int model_index;
        Phase phase;
        int secondary_bus;
        VrAutomatonState st;
        VrTunerConfig tuner;
        std::vector<int> critical; // bus indices; empty disables the tuner
    };
    const std::vector<int> depth = bus_depths(m);
    std::vector<DeviceRuntime> devices;
    for (std::size_t i = 0; i < m.regulators.size(); ++i) {
        const VoltageRegulatorDevice& d = m.regulators[i];
        const ResolvedDevice r = resolve_device(d, cfg);
        DeviceRuntime rt;
        rt.model_index = static_cast<int>(i);
        rt.phase = d.phase;
        rt.secondary_bus = m.lines[static_cast<std::size_t>(d.line_index)].to_index;
        rt.st = VrAutomatonState{d.tap, 0.0, 0, r.v_set, r.deadband, r.time_delay, false};
        rt.tuner =
            VrTunerConfig{cfg.v2_max, cfg.v2_min, r.deadband, cfg.vr_cadence_minutes, cfg.margin};
        rt.tuner.validate(cfg.ibr_cadence_minutes);
        const int g = group_of("vr:" + d.id);
        if (g >= 0) rt.critical = final_buses[static_cast<std::size_t>(g)];
        if (cfg.vr_tuning_enabled && rt.critical.empty())
            metrics.warnings.push_back("regulator '" + d.id +
                                       "' has no critical nodes; tuner skipped");
        devices.push_back(std::move(rt));
    }
    // Upstream devices act first so a substation correction is visible to the
    // feeder devices before they judge their own bands.
    std::sort(devices.begin(), devices.end(), [&](const DeviceRuntime& a, const DeviceRuntime& b) {
        const int da = depth[static_cast<std::size_t>(a.secondary_bus)];
        const int db = depth[static_cast<std::size_t>(b.secondary_bus)];
        return da != db ? da < db : a.model_index < b.model_index;
    });

    // --- trace columns --------------------------------------------------------
    std::set<std::pair<int, int>> trace_set; // (bus, phase)
    for (const CtrlSlot& c : ctrls)
        for (int b : c.ctrl.critical()) trace_set.emplace(b, static_cast<int>(c.ctrl.phase()));
    for (const DeviceRuntime& d : devices)
        for (int b : d.critical) trace_set.emplace(b, static_cast<int>(d.phase));
    const std::vector<std::pair<int, int>> trace_pairs(trace_set.begin(), trace_set.end());
    out.trace.header.push_back("minute");
    for (const auto& [b, p] : trace_pairs)
        out.trace.header.push_back(m.buses[static_cast<std::size_t>(b)].id + "_" +
                                   std::string(1, phase_char(static_cast<Phase>(p))));
    for (const DeviceRuntime& d : devices)
        out.trace.header.push_back("sec_" +
                                   m.regulators[static_cast<std::size_t>(d.model_index)].id);

    // --- time loop -------------------------------------------------------------
    TapSet taps = taps_from_model(m);
    std::vector<double> pv_q(m.pvs.size(), 0.0); // applied setpoints, kvar injection
    std::vector<double> pv_p(m.pvs.size(), 0.0); // current active output, kW
    InjectionSet inj(m.buses.size());
    NodalVoltageState state;
    long long seq = 0;

    auto scatter_setpoints = [&] {
        std::fill(pv_q.begin(), pv_q.end(), 0.0);
        for (const CtrlSlot& c : ctrls) {
            const auto s = c.ctrl.setpoints();
            const auto& idx = c.ctrl.pv_indices();
            for (std::size_t i = 0; i < idx.size(); ++i)
                pv_q[static_cast<std::size_t>(idx[i])] = s[i];
        }
    };
    auto gather = [](const std::vector<double>& all, const std::vector<int>& idx) {
        std::vector<double> v(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) v[i] = all[static_cast<std::size_t>(idx[i])];
        return v;
    };
    auto resolve = [&](int ts) {
        try {
            state = solve(m, inj, taps, cfg.source_pu);
            ++metrics.solves;
        } catch (const NumericalError& e) {
            std::string dump = "taps=[";
            for (std::size_t i = 0; i < taps.size(); ++i)
                dump += (i ? "," : "") + std::to_string(taps[i]);
            dump += "]";
            throw NumericalError("simulation aborted at t=" + std::to_string(ts) + " s (minute " +
                                 std::to_string(ts / 60) + "): " + e.what() + "; " + dump);
        }
    };

    const int t_begin = cfg.start_minute * 60;
    const int t_end = (cfg.start_minute + cfg.horizon_minutes) * 60;
    for (int ts = t_begin; ts < t_end; ts += cfg.tick_seconds) {
        const bool minute_b = ts % 60 == 0;
        const int minute = ts / 60;

        if (minute_b) {
            for (std::size_t i = 0; i < m.pvs.size(); ++i)
                pv_p[i] = profiles.at(minute, profiles.column(m.pvs[i].profile));
            // Profiles moved: re-fit setpoints to the new capability first.
            for (CtrlSlot& c : ctrls) {
                for (const IbrAction& a : c.ctrl.apply_capability(gather(pv_p, c.ctrl.pv_indices())))
                    out.actions.push_back({seq++, ts, c.label,
                                           m.pvs[static_cast<std::size_t>(a.pv_index)].bus,
                                           a.delta_kvar, a.setpoint_kvar, a.kind});
            }
            scatter_setpoints();
            inj = build_injections(m, profiles, minute, pv_q);
            resolve(ts);
        }

        if (cfg.ibr_enabled && minute_b && minute % cfg.ibr_cadence_minutes == 0) {
            bool changed = false;
            for (CtrlSlot& c : ctrls) {
                std::vector<double> v_hat(c.ctrl.critical().size());
                for (std::size_t i = 0; i < v_hat.size(); ++i)
                    v_hat[i] = state.vm_pu(m, c.ctrl.critical()[i], c.ctrl.phase());
                const IbrStepResult res = c.ctrl.step(v_hat, gather(pv_p, c.ctrl.pv_indices()));
                for (const IbrAction& a : res.actions)
                    out.actions.push_back({seq++, ts, c.label,
                                           m.pvs[static_cast<std::size_t>(a.pv_index)].bus,
                                           a.delta_kvar, a.setpoint_kvar, a.kind});
                if (res.depleted)
                    metrics.warnings.push_back("t=" + std::to_string(ts) + " s: zone " + c.label +
                                               " ran out of inverter headroom");
                changed = changed || !res.actions.empty();
            }
            if (changed) {
                scatter_setpoints();
                inj = build_injections(m, profiles, minute, pv_q);
                resolve(ts);
            }
        }

        if (cfg.vr_tuning_enabled && minute_b && minute % cfg.vr_cadence_minutes == 0) {
            // Band moves only; each automaton reacts on its own clock.
            for (DeviceRuntime& d : devices) {
                if (d.critical.empty()) continue;
                std::vector<double> v_hat(d.critical.size());
                for (std::size_t i = 0; i < v_hat.size(); ++i)
                    v_hat[i] = state.vm_pu(m, d.critical[i], d.phase);
                const double v_g2 = state.vm_pu(m, d.secondary_bus, d.phase);
                const double v_new = tune_setpoint(v_hat, v_g2, d.tuner);
                if (v_new != d.st.v_set) {
                    d.st.v_set = v_new;
                    out.vr_events.push_back(
                        {seq++, ts, m.regulators[static_cast<std::size_t>(d.model_index)].id,
                         d.phase, "setpoint", d.st.tap, v_new});
                }
            }
        }

        bool tapped = false;
        for (DeviceRuntime& d : devices) {
            const double v_sec = state.vm_pu(m, d.secondary_bus, d.phase) * 120.0;
            if (const auto ev = automaton_tick(d.st, v_sec, cfg.tick_seconds)) {
                taps[static_cast<std::size_t>(d.model_index)] = ev->new_tap;
                tapped = true;
                ++metrics.tap_changes;
                ++metrics.taps_per_device[static_cast<std::size_t>(d.model_index)];
                out.vr_events.push_back(
                    {seq++, ts, m.regulators[static_cast<std::size_t>(d.model_index)].id, d.phase,
                     "tap", ev->new_tap, d.st.v_set});
            }
        }
        if (tapped) resolve(ts);

        if (minute_b) {
            metrics.violations += count_violations(m, state, cfg.ansi_lo, cfg.ansi_hi);
            // Reactive energy on the minute grid. The global total sums in
            // inverter (model) order so a replay from the action log can
            // reproduce it bit for bit; zone totals sum each zone's own slots.
            scatter_setpoints();
            for (std::size_t i = 0; i < pv_q.size(); ++i) metrics.q_ibr_kvarh += pv_q[i] / 60.0;
            for (std::size_t ci = 0; ci < ctrls.size(); ++ci) {
                const auto s = ctrls[ci].ctrl.setpoints();
                for (const double si : s) metrics.q_per_zone[ci].second += si / 60.0;
            }
            std::vector<double> row;
            row.reserve(out.trace.header.size());
            row.push_back(static_cast<double>(minute));
            for (const auto& [b, p] : trace_pairs)
                row.push_back(state.vm_pu(m, b, static_cast<Phase>(p)));
            for (const DeviceRuntime& d : devices)
                row.push_back(state.vm_pu(m, d.secondary_bus, d.phase));
            out.trace.rows.push_back(std::move(row));
        }
    }

    metrics.minutes = cfg.horizon_minutes;
    for (const DeviceRuntime& d : devices)
        if (d.st.saturated_flag)
            metrics.warnings.push_back(
                "regulator '" + m.regulators[static_cast<std::size_t>(d.model_index)].id +
                "' hit a tap rail during the run");
    return out;
}

} // namespace zvvc
