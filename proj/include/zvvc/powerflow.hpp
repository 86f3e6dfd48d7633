#pragma once

#include "zvvc/feeder.hpp"
#include "zvvc/profiles.hpp"

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace zvvc {

// Per (bus, phase) power draw in kW / kvar. Load positive, generation
// negative; reactive absorption positive, injection negative. Slots for
// phases a bus does not carry must stay zero.
struct InjectionSet {
    std::vector<std::array<double, 3>> p_kw;
    std::vector<std::array<double, 3>> q_kvar;

    explicit InjectionSet(std::size_t n_buses)
        : p_kw(n_buses, {0, 0, 0}), q_kvar(n_buses, {0, 0, 0}) {}

    void add(int bus, Phase ph, double kw, double kvar) {
        p_kw[static_cast<std::size_t>(bus)][static_cast<std::size_t>(static_cast<int>(ph))] += kw;
        q_kvar[static_cast<std::size_t>(bus)][static_cast<std::size_t>(static_cast<int>(ph))] += kvar;
    }
};

// Complex bus voltages in volts; absent phases hold 0.
struct NodalVoltageState {
    std::vector<std::array<std::complex<double>, 3>> v;
    int iterations = 0;
    bool converged = false;

    double vm_pu(const FeederModel& m, int bus, Phase ph) const {
        return std::abs(v[static_cast<std::size_t>(bus)][static_cast<std::size_t>(
                   static_cast<int>(ph))]) /
               (m.buses[static_cast<std::size_t>(bus)].base_kv * 1000.0);
    }
};

using TapSet = std::vector<int>; // one tap per regulator, model order

TapSet taps_from_model(const FeederModel& m);

// Unbalanced forward-backward sweep (current summation) with constant-power
// injections and ideal per-phase regulator ratios 1 + tap * step_pu.
// Converges when the largest voltage change between sweeps drops below
// 1e-6 pu; throws NumericalError after 100 iterations (message carries the
// worst mismatch) or on numeric blow-up. Pure function of its inputs:
// concurrent calls on a shared FeederModel are safe, and equal inputs give
// bit-identical states.
NodalVoltageState solve(const FeederModel& m, const InjectionSet& inj, const TapSet& taps,
                        double source_pu = 1.0);

// Voltage magnitudes (pu) for every live (bus, phase) pair, bus-major in
// canonical bus order, phases a-b-c. The companion index list identifies
// each entry.
std::vector<double> flatten_vm_pu(const FeederModel& m, const NodalVoltageState& state);
std::vector<std::pair<int, Phase>> live_pairs(const FeederModel& m);

// Number of live (bus, phase) magnitudes strictly outside [v_lo, v_hi] pu.
int count_violations(const FeederModel& m, const NodalVoltageState& state, double v_lo,
                     double v_hi);

// Injections for one minute of the profile table: constant-power loads (kW
// from their profile column, kvar from power factor or explicit column) and
// PV generation (negative kW). `pv_q_setpoint_kvar` is the commanded
// injection per PV system (positive boosts voltage); each is clamped to the
// inverter's capability at its current active output before use, and the
// clamped values are written back through `applied_q` when given.
InjectionSet build_injections(const FeederModel& m, const ProfileSet& profiles, int minute,
                              std::span<const double> pv_q_setpoint_kvar = {},
                              std::vector<double>* applied_q = nullptr);

} // namespace zvvc
