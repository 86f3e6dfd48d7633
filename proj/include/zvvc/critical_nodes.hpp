#pragma once

#include "zvvc/feeder.hpp"
#include "zvvc/profiles.hpp"
#include "zvvc/scenario.hpp"
#include "zvvc/zoning.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace zvvc {

// One zone to watch for extreme voltages: an inverter zone ("ibr:<phase>:<k>")
// or a regulator zone ("vr:<device id>").
struct MonitorGroup {
    std::string label;
    Phase phase = Phase::A;
    std::vector<int> members; // bus indices, ascending
};

// Every partition zone that has members, inverter zones first (phases a, b,
// c, zone order), then regulator zones in model order.
std::vector<MonitorGroup> monitor_groups(const ZonePartition& part);

// Voltages and extremes observed for one group across all kept runs.
struct GroupRuns {
    std::vector<std::vector<double>> v; // [run][member] voltage magnitude, pu
    std::vector<int> max_member;        // per run, position into members
    std::vector<int> min_member;
};

struct OccurrenceRecord {
    int runs = 0;                        // successful (kept) runs
    int attempted = 0;
    std::vector<std::string> discarded;  // one line per dropped run
    std::vector<GroupRuns> groups;       // parallel to the group list
};

// Sample `num_runs` scenarios and record, per group and run, every member's
// voltage plus the max- and min-voltage member (first on ties, so the lowest
// bus id). Runs whose power flow diverges are dropped and logged; kept runs
// stay in run-index order, so results are deterministic for a given seed and
// any worker count.
OccurrenceRecord monte_carlo_extremes(const FeederModel& m,
                                      const std::vector<MonitorGroup>& groups,
                                      const ProfileSet& profiles, ScenarioWindow window,
                                      int num_runs, std::uint64_t seed, int workers = 1);

// Members split by how often they were a run's extreme: occurrence counts
// (runs where the member was max or min), then X = counted in at least
// th_percent of runs (inclusive), Y = the rest of the ever-extreme members.
struct OccurrenceSplit {
    std::vector<int> count; // per member position
    std::vector<int> x;     // member positions, ascending
    std::vector<int> y;
};
OccurrenceSplit split_by_occurrence(const GroupRuns& g, int runs, double th_percent);

// Core of the low-occurrence screen: given the |voltage difference| matrix
// between a candidate and each reference node (rows) across the candidate's
// extreme runs (columns), take each row's maximum, then the minimum across
// rows; the candidate is rejected when that minimum falls below delta_v_th
// (strictly). Exposed separately so the arithmetic can be checked on literal
// matrices.
struct DeltaVerdict {
    std::vector<double> row_max;
    double dv_min = 0.0;
    bool accepted = false;
};
DeltaVerdict evaluate_delta_matrix(const std::vector<std::vector<double>>& dv, double delta_v_th);

// Builds the matrix |V_y(r) - V_x(r)| over the runs r where member y was the
// group's extreme, one row per reference member in x_positions, and applies
// evaluate_delta_matrix.
DeltaVerdict voltage_difference_test(const GroupRuns& g, int y_position,
                                     const std::vector<int>& x_positions, double delta_v_th);

struct CriticalGroupResult {
    std::vector<int> count;      // per member position
    std::vector<int> x;          // member positions
    std::vector<int> y;
    std::vector<int> accepted_y;
    std::vector<int> final_set;  // x then accepted_y, ascending
};

struct CriticalNodeSet {
    double th_percent = 0.0;
    double delta_v_th = 0.0;
    int runs = 0;
    std::vector<CriticalGroupResult> groups;
};

// Full selection per group: the high-occurrence members are accepted
// wholesale; each low-occurrence member must pass the voltage-difference
// test. A group where no member clears the occurrence threshold promotes its
// most frequent extreme member (lowest bus id on ties) so every zone keeps a
// sensor; a group with no observations at all is an error.
CriticalNodeSet finalize(const OccurrenceRecord& rec, const std::vector<MonitorGroup>& groups,
                         double th_percent, double delta_v_th);

} // namespace zvvc
