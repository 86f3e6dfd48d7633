#include "zvvc/critical_nodes.hpp"

#include "zvvc/errors.hpp"
#include "zvvc/kernels.hpp"
#include "zvvc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace zvvc {

std::vector<MonitorGroup> monitor_groups(const ZonePartition& part) {
    std::vector<MonitorGroup> out;
    for (int p = 0; p < 3; ++p) {
        for (const IbrZone& z : part.ibr[static_cast<std::size_t>(p)]) {
            if (z.members.empty()) continue;
            out.push_back({"ibr:" + std::string(1, phase_char(z.phase)) + ":" +
                               std::to_string(z.index),
                           z.phase, z.members});
        }
    }
    for (const VrZone& z : part.vr) {
        if (z.members.empty()) continue;
        out.push_back({"vr:" + z.device_id, z.phase, z.members});
    }
    return out;
}

OccurrenceRecord monte_carlo_extremes(const FeederModel& m,
                                      const std::vector<MonitorGroup>& groups,
                                      const ProfileSet& profiles, ScenarioWindow window,
                                      int num_runs, std::uint64_t seed, int workers) {
    if (num_runs < 1) throw ConfigError("Monte-Carlo run count must be >= 1");
    if (workers < 1) throw ConfigError("worker count must be >= 1");

    const std::vector<Scenario> scenarios =
        generate_scenarios(m, profiles, window, num_runs, seed);
    const TapSet taps = taps_from_model(m);

    // Per-run slots, filled independently, then compacted in run order.
    struct RunResult {
        bool ok = false;
        std::string error;
        std::vector<std::vector<double>> group_v; // [group][member]
    };
    std::vector<RunResult> results(static_cast<std::size_t>(num_runs));

    auto run_one = [&](int r) {
        RunResult& res = results[static_cast<std::size_t>(r)];
        NodalVoltageState state;
        try {
            state = solve(m, scenario_injections(m, scenarios[static_cast<std::size_t>(r)]), taps);
        } catch (const Error& e) {
            res.error = e.what();
            return;
        }
        res.group_v.resize(groups.size());
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const MonitorGroup& grp = groups[g];
            res.group_v[g].resize(grp.members.size());
            for (std::size_t i = 0; i < grp.members.size(); ++i)
                res.group_v[g][i] = state.vm_pu(m, grp.members[i], grp.phase);
        }
        res.ok = true;
    };

    if (workers == 1) {
        for (int r = 0; r < num_runs; ++r) run_one(r);
    } else {
        const int nw = std::min(workers, num_runs);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nw));
        for (int w = 0; w < nw; ++w)
            pool.emplace_back([&, w] {
                for (int r = w; r < num_runs; r += nw) run_one(r);
            });
        for (auto& th : pool) th.join();
    }

    OccurrenceRecord rec;
    rec.attempted = num_runs;
    rec.groups.resize(groups.size());
    for (int r = 0; r < num_runs; ++r) {
        RunResult& res = results[static_cast<std::size_t>(r)];
        if (!res.ok) {
            rec.discarded.push_back("run " + std::to_string(r) + " discarded: " + res.error);
            continue;
        }
        for (std::size_t g = 0; g < groups.size(); ++g) {
            GroupRuns& gr = rec.groups[g];
            const auto mm = kernels::minmax(res.group_v[g]); // ties -> first, lowest bus id
            gr.max_member.push_back(static_cast<int>(mm.max_index));
            gr.min_member.push_back(static_cast<int>(mm.min_index));
            gr.v.push_back(std::move(res.group_v[g]));
        }
        ++rec.runs;
    }
    return rec;
}

OccurrenceSplit split_by_occurrence(const GroupRuns& g, int runs, double th_percent) {
    if (runs < 1) throw DataError("occurrence split over a record with no kept runs");
    const std::size_t members = g.v.empty() ? 0 : g.v.front().size();
    OccurrenceSplit out;
    out.count.assign(members, 0);
    for (std::size_t r = 0; r < g.v.size(); ++r) {
        // One tally per run even when the same member is both extremes
        // (single-member groups).
        out.count[static_cast<std::size_t>(g.max_member[r])] += 1;
        if (g.min_member[r] != g.max_member[r])
            out.count[static_cast<std::size_t>(g.min_member[r])] += 1;
    }
    for (std::size_t i = 0; i < members; ++i) {
        if (out.count[i] == 0) continue; // never extreme: not a candidate at all
        const double pct = 100.0 * static_cast<double>(out.count[i]) / static_cast<double>(runs);
        if (pct >= th_percent)
            out.x.push_back(static_cast<int>(i));
        else
            out.y.push_back(static_cast<int>(i));
    }
    return out;
}

DeltaVerdict evaluate_delta_matrix(const std::vector<std::vector<double>>& dv,
                                   double delta_v_th) {
    if (dv.empty()) throw DataError("voltage-difference matrix has no reference rows");
    DeltaVerdict verdict;
    verdict.row_max.reserve(dv.size());
    for (const auto& row : dv) {
        if (row.empty()) throw DataError("voltage-difference matrix has an empty row");
        verdict.row_max.push_back(kernels::minmax(row).max_value);
    }
    verdict.dv_min = kernels::minmax(verdict.row_max).min_value;
    verdict.accepted = !(verdict.dv_min < delta_v_th);
    return verdict;
}

DeltaVerdict voltage_difference_test(const GroupRuns& g, int y_position,
                                     const std::vector<int>& x_positions, double delta_v_th) {
    if (x_positions.empty()) throw DataError("voltage-difference test needs reference nodes");
    std::vector<std::size_t> extreme_runs;
    for (std::size_t r = 0; r < g.v.size(); ++r)
        if (g.max_member[r] == y_position || g.min_member[r] == y_position)
            extreme_runs.push_back(r);
    if (extreme_runs.empty())
        throw DataError("member was never an extreme; no runs to difference against");

    const std::size_t members = g.v.front().size();
    std::vector<std::vector<double>> dv(x_positions.size());
    for (std::size_t u = 0; u < x_positions.size(); ++u) {
        dv[u].reserve(extreme_runs.size());
        for (std::size_t r : extreme_runs) {
            if (g.v[r].size() != members)
                throw DataError("voltage record incomplete at run " + std::to_string(r));
            dv[u].push_back(std::abs(g.v[r][static_cast<std::size_t>(y_position)] -
                                     g.v[r][static_cast<std::size_t>(x_positions[u])]));
        }
    }
    return evaluate_delta_matrix(dv, delta_v_th);
}

CriticalNodeSet finalize(const OccurrenceRecord& rec, const std::vector<MonitorGroup>& groups,
                         double th_percent, double delta_v_th) {
    if (rec.groups.size() != groups.size())
        throw ConfigError("occurrence record does not match the monitor group list");
    CriticalNodeSet out;
    out.th_percent = th_percent;
    out.delta_v_th = delta_v_th;
    out.runs = rec.runs;

    for (std::size_t g = 0; g < groups.size(); ++g) {
        const GroupRuns& gr = rec.groups[g];
        if (gr.v.empty())
            throw DataError("zone '" + groups[g].label +
                            "' has no extreme observations (all runs discarded?); "
                            "it cannot be monitored");
        CriticalGroupResult res;
        OccurrenceSplit split = split_by_occurrence(gr, rec.runs, th_percent);
        res.count = split.count;
        res.x = split.x;
        res.y = split.y;

        std::vector<int> references = split.x;
        if (references.empty()) {
            // Keep at least one sensor: promote the most frequent extreme.
            int best = split.y.front();
            for (int cand : split.y)
                if (split.count[static_cast<std::size_t>(cand)] >
                    split.count[static_cast<std::size_t>(best)])
                    best = cand;
            res.accepted_y.push_back(best);
            references.push_back(best);
            std::erase(split.y, best); // already accepted; skip re-testing it
        }
        for (int y : split.y) {
            if (voltage_difference_test(gr, y, references, delta_v_th).accepted)
                res.accepted_y.push_back(y);
        }

        res.final_set = res.x;
        res.final_set.insert(res.final_set.end(), res.accepted_y.begin(), res.accepted_y.end());
        std::sort(res.final_set.begin(), res.final_set.end());
        std::sort(res.accepted_y.begin(), res.accepted_y.end());
        out.groups.push_back(std::move(res));
    }
    return out;
}

} // namespace zvvc
