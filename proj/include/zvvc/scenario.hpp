#pragma once

#include "zvvc/feeder.hpp"
#include "zvvc/powerflow.hpp"
#include "zvvc/profiles.hpp"

#include <cstdint>
#include <vector>

namespace zvvc {

// One sampled operating snapshot: kW and kvar per load point and kW per PV
// system, with the underlying multipliers kept for statistical audit.
struct Scenario {
    std::vector<double> load_kw;
    std::vector<double> load_kvar;
    std::vector<double> load_mult;
    std::vector<double> pv_kw;
    std::vector<double> pv_mult;
};

// Daylight study window, minutes of the profile table, half-open [start, end).
struct ScenarioWindow {
    int start_minute = 9 * 60;
    int end_minute = 20 * 60;
};

// Reproducible scenario draws: each load draws a multiplier uniform in
// [0.2, 1.0] applied to its in-window peak kW (kvar scales along, so the
// peak minute's power factor is preserved). PV output is driven by one
// feeder-wide irradiance factor uniform in [0, 1.0] — the sun is shared —
// with a per-system jitter uniform in [0.9, 1.1] (clamped so output never
// exceeds rating). Scenario i depends only on (seed, i), so the set is
// identical for a given seed regardless of worker count or call order.
// Throws ConfigError if the window is empty or outside the profile table.
std::vector<Scenario> generate_scenarios(const FeederModel& m, const ProfileSet& profiles,
                                         ScenarioWindow window, int count, std::uint64_t seed);

// Constant-power injections for one scenario (PV runs at unity power factor).
InjectionSet scenario_injections(const FeederModel& m, const Scenario& s);

} // namespace zvvc
