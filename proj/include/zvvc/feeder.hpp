#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace zvvc {

// ---------------------------------------------------------------------------
// Phases. Collections indexed by phase use slots 0..2 (a, b, c); a bus's
// PhaseMask says which slots are live there.
// ---------------------------------------------------------------------------

enum class Phase : int { A = 0, B = 1, C = 2 };

using PhaseMask = std::uint8_t;

inline constexpr PhaseMask phase_bit(Phase p) {
    return static_cast<PhaseMask>(1u << static_cast<int>(p));
}
inline constexpr bool mask_has(PhaseMask m, Phase p) { return (m & phase_bit(p)) != 0; }
inline constexpr char phase_char(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }

// "a" / "bc" / "abc" (lowercase, in order, no repeats) <-> mask.
// Throws DataError on anything else.
PhaseMask parse_phases(const std::string& s);
std::string phases_string(PhaseMask m);
Phase parse_phase(const std::string& s); // exactly one of "a", "b", "c"

// Phases present in a mask, in a-b-c order.
std::vector<Phase> phase_list(PhaseMask m);

// ---------------------------------------------------------------------------
// Network elements
// ---------------------------------------------------------------------------

struct Bus {
    std::string id;
    PhaseMask phases = 0;
    double base_kv = 0.0; // line-to-neutral kV
};

struct LineSegment {
    std::string from;
    std::string to;
    PhaseMask phases = 0;  // equals the to-bus phases; subset of from-bus phases
    double length_km = 0.0;
    // Compact impedance matrix over the phases present, ohms/km, row/column
    // order following phase_list(phases).
    std::vector<std::vector<std::complex<double>>> z_per_km;

    // Derived during validation:
    int from_index = -1;
    int to_index = -1;
    // z_per_km * length_km expanded to full 3x3 slots; absent phases are zero.
    std::array<std::array<std::complex<double>, 3>, 3> z_ohm{};
};

struct VoltageRegulatorDevice {
    std::string id;
    std::string from; // primary-side bus of the regulated segment
    std::string to;   // secondary-side bus
    Phase phase = Phase::A;
    int tap = 0;               // in [-16, +16]
    double step_pu = 0.00625;  // ratio change per tap
    double v_set = 0.0;        // volts on the 120 V base (1 pu = 120 V)
    double deadband = 0.0;     // volts on the 120 V base
    double time_delay = 0.0;   // seconds
    bool substation_oltc = false;

    int line_index = -1; // derived

    double ratio() const { return 1.0 + tap * step_pu; }
};

inline constexpr int kTapMin = -16;
inline constexpr int kTapMax = 16;

struct LoadPoint {
    std::string bus;
    Phase phase = Phase::A;
    std::string profile;      // kW column in the profile table
    double power_factor = 0;  // used when kvar_profile is empty (lagging)
    std::string kvar_profile; // explicit kvar column; mutually exclusive with power_factor

    int bus_index = -1; // derived
};

struct PvSystem {
    std::string bus;
    Phase phase = Phase::A;
    double rated_kw = 0.0;
    double oversize_factor = 1.10; // inverter kVA = oversize_factor * rated_kw
    std::string profile;           // kW output column in the profile table

    int bus_index = -1; // derived

    double inverter_kva() const { return oversize_factor * rated_kw; }
    // Headroom for reactive power at active output p_kw: sqrt(kva^2 - p^2),
    // floored at zero when the inverter is saturated.
    double q_capability_kvar(double p_kw) const;
};

// ---------------------------------------------------------------------------
// FeederModel: a validated radial network. Immutable after parse_feeder;
// safe to share read-only across threads.
//
// Element vectors are held in canonical order (buses by id; lines by
// (from, to); regulators by id; loads by (bus, phase, profile); pv likewise),
// so equal networks have equal serializations and bus indices are
// lexicographic over ids.
// ---------------------------------------------------------------------------

struct FeederModel {
    std::string source;
    double nominal_kv_ln = 0.0;

    std::vector<Bus> buses;
    std::vector<LineSegment> lines;
    std::vector<VoltageRegulatorDevice> regulators;
    std::vector<LoadPoint> loads;
    std::vector<PvSystem> pvs;

    // Topology, derived during validation.
    std::unordered_map<std::string, int> bus_index;
    int source_index = -1;
    std::vector<int> parent_line;             // per bus; -1 at the source
    std::vector<std::vector<int>> child_lines; // per bus, outgoing line indices
    std::vector<int> sweep_order;             // parents always before children

    int bus_of(const std::string& id) const; // -1 if unknown
};

// Parse and fully validate a feeder document (JSON; schema frozen in
// docs/feeder-format.md). Throws DataError naming the offending field,
// reference, or bus on any violation. `origin` labels error messages.
FeederModel parse_feeder(const std::string& text, const std::string& origin = "feeder");

FeederModel load_feeder_file(const std::string& path);

// Canonical serialization: parse_feeder(serialize_feeder(m)) reproduces m
// exactly (same element order, same numeric bits).
std::string serialize_feeder(const FeederModel& m);

// Buses fed through `device`'s segment that carry its phase, excluding any
// bus that sits below a further regulator on the same phase (per-phase zones
// never overlap). Sorted ascending; never contains the source bus.
std::vector<int> downstream_nodes(const FeederModel& m, const VoltageRegulatorDevice& device);

} // namespace zvvc
