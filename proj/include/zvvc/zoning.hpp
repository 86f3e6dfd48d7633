#pragma once

#include "zvvc/feeder.hpp"
#include "zvvc/sensitivity.hpp"

#include <string>
#include <vector>

namespace zvvc {

// A group of mutually well-correlated load nodes on one phase, served by the
// first-stage (inverter) controller. Critical nodes start empty and are
// filled after the Monte-Carlo identification stage.
struct IbrZone {
    int index = 0;
    Phase phase = Phase::A;
    std::vector<int> members;  // bus indices, ascending (scan order)
    std::vector<int> critical; // bus indices
};

// Load nodes downstream of one regulator on its phase, served by the
// second-stage (regulator setpoint) controller.
struct VrZone {
    std::string device_id;
    Phase phase = Phase::A;
    std::vector<int> members;
    std::vector<int> critical;
};

struct ZonePartition {
    double alpha = 0.0;
    std::array<std::vector<int>, 3> nodes;    // per-phase load nodes (matrix order)
    std::array<std::vector<IbrZone>, 3> ibr;  // per phase
    std::vector<VrZone> vr;                   // one per regulator, model order
};

// Mean correlation between node position `l` and a zone's member positions
// (all positions into the phase's node list). Zone must be non-empty.
double mean_correlation(const CorrelationMatrix& c, Phase ph, int l,
                        const std::vector<int>& zone_positions);

// Single-pass incremental clustering over one phase's node positions:
// position 0 seeds the first zone; each later node joins the zone with the
// highest mean correlation if that is >= alpha (lowest zone index on ties),
// otherwise it opens a new zone. Returns member-position lists per zone.
std::vector<std::vector<int>> fic_cluster(const CorrelationMatrix& c, Phase ph, double alpha);

// Full offline partition: incremental clustering per phase plus one zone per
// regulator (its downstream load nodes on its phase). alpha must be in (0, 1].
ZonePartition build_partition(const FeederModel& m, const CorrelationMatrix& c, double alpha);

} // namespace zvvc
