#include "zvvc/powerflow.hpp"

#include "zvvc/errors.hpp"
#include "zvvc/kernels.hpp"

#include <cmath>
#include <numbers>

namespace zvvc {

namespace {

using cd = std::complex<double>;

// Source phasor directions: a at 0, b at -120, c at +120 degrees.
std::array<cd, 3> unit_phasors() {
    constexpr double rad = 2.0 * std::numbers::pi / 3.0;
    return {cd{1.0, 0.0}, std::polar(1.0, -rad), std::polar(1.0, rad)};
}

} // namespace

TapSet taps_from_model(const FeederModel& m) {
    TapSet taps(m.regulators.size());
    for (std::size_t i = 0; i < m.regulators.size(); ++i) taps[i] = m.regulators[i].tap;
    return taps;
}

NodalVoltageState solve(const FeederModel& m, const InjectionSet& inj, const TapSet& taps,
                        double source_pu) {
    const std::size_t n = m.buses.size();
    if (taps.size() != m.regulators.size())
        throw ConfigError("tap set has " + std::to_string(taps.size()) + " entries for " +
                          std::to_string(m.regulators.size()) + " regulators");
    for (std::size_t i = 0; i < taps.size(); ++i) {
        if (taps[i] < kTapMin || taps[i] > kTapMax)
            throw ConfigError("regulator '" + m.regulators[i].id + "': tap " +
                              std::to_string(taps[i]) + " outside [" + std::to_string(kTapMin) +
                              ", " + std::to_string(kTapMax) + "]");
    }

    // Per-line, per-phase regulator ratios (1.0 where no device sits).
    std::vector<std::array<double, 3>> ratio(m.lines.size(), {1.0, 1.0, 1.0});
    for (std::size_t i = 0; i < m.regulators.size(); ++i) {
        const VoltageRegulatorDevice& d = m.regulators[i];
        ratio[static_cast<std::size_t>(d.line_index)][static_cast<std::size_t>(
            static_cast<int>(d.phase))] = 1.0 + taps[i] * d.step_pu;
    }

    const auto dir = unit_phasors();
    NodalVoltageState state;
    state.v.assign(n, {cd{}, cd{}, cd{}});

    // Flat start at each bus's own base voltage.
    for (std::size_t b = 0; b < n; ++b) {
        const Bus& bus = m.buses[b];
        for (Phase ph : phase_list(bus.phases))
            state.v[b][static_cast<std::size_t>(static_cast<int>(ph))] =
                source_pu * bus.base_kv * 1000.0 * dir[static_cast<std::size_t>(static_cast<int>(ph))];
    }

    std::vector<std::array<cd, 3>> branch_i(m.lines.size()); // primary-side amps
    double worst = 0.0;

    for (int iter = 1; iter <= 100; ++iter) {
        // Backward sweep: accumulate primary-side branch currents leaf-first.
        for (auto& bi : branch_i) bi = {cd{}, cd{}, cd{}};
        for (auto it = m.sweep_order.rbegin(); it != m.sweep_order.rend(); ++it) {
            const int b = *it;
            const std::size_t bi = static_cast<std::size_t>(b);
            std::array<cd, 3> total{cd{}, cd{}, cd{}};
            for (Phase ph : phase_list(m.buses[bi].phases)) {
                const std::size_t k = static_cast<std::size_t>(static_cast<int>(ph));
                const cd s{inj.p_kw[bi][k] * 1000.0, inj.q_kvar[bi][k] * 1000.0};
                if (s == cd{}) continue;
                const cd v = state.v[bi][k];
                if (std::abs(v) < 1e-6 * m.buses[bi].base_kv * 1000.0)
                    throw NumericalError("voltage collapse at bus '" + m.buses[bi].id +
                                         "' phase " + std::string(1, phase_char(ph)) +
                                         " (pathological input)");
                total[k] = std::conj(s / v);
            }
            for (int li : m.child_lines[bi])
                for (std::size_t k = 0; k < 3; ++k)
                    total[k] += branch_i[static_cast<std::size_t>(li)][k];
            const int pl = m.parent_line[bi];
            if (pl >= 0) {
                const std::size_t pls = static_cast<std::size_t>(pl);
                // Ideal transformer: primary current = ratio * secondary current.
                for (std::size_t k = 0; k < 3; ++k)
                    branch_i[pls][k] = ratio[pls][k] * total[k];
            }
        }

        // Forward sweep: drop over the segment, then the regulator ratio.
        worst = 0.0;
        for (int b : m.sweep_order) {
            const int pl = m.parent_line[static_cast<std::size_t>(b)];
            if (pl < 0) continue;
            const LineSegment& line = m.lines[static_cast<std::size_t>(pl)];
            const std::size_t parent = static_cast<std::size_t>(line.from_index);
            const std::size_t child = static_cast<std::size_t>(b);
            for (Phase ph : phase_list(line.phases)) {
                const std::size_t k = static_cast<std::size_t>(static_cast<int>(ph));
                cd drop{};
                for (std::size_t j = 0; j < 3; ++j)
                    drop += line.z_ohm[k][j] * branch_i[static_cast<std::size_t>(pl)][j];
                const cd vnew =
                    ratio[static_cast<std::size_t>(pl)][k] * (state.v[parent][k] - drop);
                if (!std::isfinite(vnew.real()) || !std::isfinite(vnew.imag()))
                    throw NumericalError("numerical overflow at bus '" + m.buses[child].id +
                                         "' (pathological input)");
                const double delta = std::abs(vnew - state.v[child][k]) /
                                     (m.buses[child].base_kv * 1000.0);
                if (delta > worst) worst = delta;
                state.v[child][k] = vnew;
            }
        }

        state.iterations = iter;
        if (worst < 1e-6) {
            state.converged = true;
            return state;
        }
    }
    throw NumericalError("power flow did not converge after 100 iterations (worst mismatch " +
                         csv::format_double(worst) + " pu)");
}

std::vector<std::pair<int, Phase>> live_pairs(const FeederModel& m) {
    std::vector<std::pair<int, Phase>> out;
    for (std::size_t b = 0; b < m.buses.size(); ++b)
        for (Phase ph : phase_list(m.buses[b].phases))
            out.emplace_back(static_cast<int>(b), ph);
    return out;
}

std::vector<double> flatten_vm_pu(const FeederModel& m, const NodalVoltageState& state) {
    std::vector<double> out;
    out.reserve(3 * m.buses.size());
    for (std::size_t b = 0; b < m.buses.size(); ++b)
        for (Phase ph : phase_list(m.buses[b].phases))
            out.push_back(state.vm_pu(m, static_cast<int>(b), ph));
    return out;
}

int count_violations(const FeederModel& m, const NodalVoltageState& state, double v_lo,
                     double v_hi) {
    const std::vector<double> vm = flatten_vm_pu(m, state);
    return static_cast<int>(kernels::count_outside(vm, v_lo, v_hi));
}

InjectionSet build_injections(const FeederModel& m, const ProfileSet& profiles, int minute,
                              std::span<const double> pv_q_setpoint_kvar,
                              std::vector<double>* applied_q) {
    if (minute < 0 || minute >= profiles.minutes())
        throw DataError("minute " + std::to_string(minute) + " outside profile table (0.." +
                        std::to_string(profiles.minutes() - 1) + ")");
    if (!pv_q_setpoint_kvar.empty() && pv_q_setpoint_kvar.size() != m.pvs.size())
        throw ConfigError("got " + std::to_string(pv_q_setpoint_kvar.size()) +
                          " PV reactive setpoints for " + std::to_string(m.pvs.size()) +
                          " PV systems");

    InjectionSet inj(m.buses.size());
    for (const LoadPoint& lp : m.loads) {
        const double p = profiles.at(minute, profiles.column(lp.profile));
        double q;
        if (lp.kvar_profile.empty())
            q = p * std::tan(std::acos(lp.power_factor));
        else
            q = profiles.at(minute, profiles.column(lp.kvar_profile));
        inj.add(lp.bus_index, lp.phase, p, q);
    }
    if (applied_q) applied_q->assign(m.pvs.size(), 0.0);
    for (std::size_t i = 0; i < m.pvs.size(); ++i) {
        const PvSystem& pv = m.pvs[i];
        const double p = profiles.at(minute, profiles.column(pv.profile));
        double q_inj = pv_q_setpoint_kvar.empty() ? 0.0 : pv_q_setpoint_kvar[i];
        const double cap = pv.q_capability_kvar(p);
        if (q_inj > cap) q_inj = cap;
        if (q_inj < -cap) q_inj = -cap;
        if (applied_q) (*applied_q)[i] = q_inj;
        inj.add(pv.bus_index, pv.phase, -p, -q_inj);
    }
    return inj;
}

} // namespace zvvc
