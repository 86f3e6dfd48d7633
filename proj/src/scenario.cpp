#include "zvvc/scenario.hpp"

#include "zvvc/errors.hpp"
#include "zvvc/rng.hpp"

#include <algorithm>
#include <cmath>

namespace zvvc {

namespace {

constexpr std::uint64_t kScenarioStream = 0x5ce0a710;

// In-window peak kW of a profile column and the minute it occurs at.
std::pair<double, int> window_peak(const ProfileSet& profiles, int col, ScenarioWindow w) {
    double best = profiles.at(w.start_minute, col);
    int best_minute = w.start_minute;
    for (int minute = w.start_minute + 1; minute < w.end_minute; ++minute) {
        const double v = profiles.at(minute, col);
        if (v > best) {
            best = v;
            best_minute = minute;
        }
    }
    return {best, best_minute};
}

} // namespace

std::vector<Scenario> generate_scenarios(const FeederModel& m, const ProfileSet& profiles,
                                         ScenarioWindow window, int count, std::uint64_t seed) {
    if (count < 0) throw ConfigError("scenario count must be >= 0");
    if (window.start_minute < 0 || window.end_minute > profiles.minutes() ||
        window.start_minute >= window.end_minute)
        throw ConfigError("empty sampling window [" + std::to_string(window.start_minute) + ", " +
                          std::to_string(window.end_minute) + ") for a profile table of " +
                          std::to_string(profiles.minutes()) + " minutes");

    // Per-load base draw: in-window peak kW, with kvar fixed at that minute
    // (explicit kvar column) or implied by the power factor.
    std::vector<double> base_kw(m.loads.size()), base_kvar(m.loads.size());
    for (std::size_t i = 0; i < m.loads.size(); ++i) {
        const LoadPoint& lp = m.loads[i];
        const auto [kw, minute] = window_peak(profiles, profiles.column(lp.profile), window);
        base_kw[i] = kw;
        base_kvar[i] = lp.kvar_profile.empty()
                           ? kw * std::tan(std::acos(lp.power_factor))
                           : profiles.at(minute, profiles.column(lp.kvar_profile));
    }

    std::vector<Scenario> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, kScenarioStream, static_cast<std::uint64_t>(i)));
        Scenario& s = out[static_cast<std::size_t>(i)];
        s.load_kw.resize(m.loads.size());
        s.load_kvar.resize(m.loads.size());
        s.load_mult.resize(m.loads.size());
        for (std::size_t j = 0; j < m.loads.size(); ++j) {
            s.load_mult[j] = rng.uniform(0.2, 1.0);
            s.load_kw[j] = s.load_mult[j] * base_kw[j];
            s.load_kvar[j] = s.load_mult[j] * base_kvar[j];
        }
        s.pv_kw.resize(m.pvs.size());
        s.pv_mult.resize(m.pvs.size());
        // One sun: a feeder-wide irradiance draw, with per-system jitter for
        // panel orientation and local shading. Independent per-PV draws would
        // let every lateral tip take turns hosting the zone extreme, which is
        // not how clear-sky statistics behave at feeder scale.
        const double irradiance = rng.uniform(0.0, 1.0);
        for (std::size_t j = 0; j < m.pvs.size(); ++j) {
            s.pv_mult[j] = std::min(irradiance * rng.uniform(0.9, 1.1), 1.0);
            s.pv_kw[j] = s.pv_mult[j] * m.pvs[j].rated_kw;
        }
    }
    return out;
}

InjectionSet scenario_injections(const FeederModel& m, const Scenario& s) {
    if (s.load_kw.size() != m.loads.size() || s.pv_kw.size() != m.pvs.size())
        throw ConfigError("scenario shape does not match the feeder's load/PV counts");
    InjectionSet inj(m.buses.size());
    for (std::size_t i = 0; i < m.loads.size(); ++i)
        inj.add(m.loads[i].bus_index, m.loads[i].phase, s.load_kw[i], s.load_kvar[i]);
    for (std::size_t i = 0; i < m.pvs.size(); ++i)
        inj.add(m.pvs[i].bus_index, m.pvs[i].phase, -s.pv_kw[i], 0.0);
    return inj;
}

} // namespace zvvc
