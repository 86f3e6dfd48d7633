#pragma once

#include "zvvc/feeder.hpp"
#include "zvvc/powerflow.hpp"

#include <array>
#include <string>
#include <vector>

namespace zvvc {

// Bus indices carrying at least one load on each phase, ascending. These are
// the "nodes" all sensitivity, correlation, and zoning math runs over.
std::array<std::vector<int>, 3> load_nodes_by_phase(const FeederModel& m);

// Per-phase square voltage/reactive-power sensitivity: entry (i, j) is the
// per-unit voltage rise at node i per kvar injected at node j, from one
// perturbed power-flow solve per column.
struct VlsmQ {
    std::array<std::vector<int>, 3> nodes;     // bus indices per phase
    std::array<std::vector<double>, 3> q;      // row-major N_ph x N_ph, pu/kvar
    double delta_q_kvar = 0.0;                 // perturbation used
    InjectionSet scenario{0};                  // operating point it was taken at

    double at(Phase ph, int i, int j) const {
        const auto& mat = q[static_cast<std::size_t>(static_cast<int>(ph))];
        const std::size_t n = nodes[static_cast<std::size_t>(static_cast<int>(ph))].size();
        return mat[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
    }
};

// Base solve plus one solve per (phase, load node) with delta_q_kvar injected
// there, taps frozen. A perturbed solve that fails to converge raises
// NumericalError naming the node. `workers` > 1 splits the columns across
// threads; results are identical for any worker count.
VlsmQ compute_vlsm(const FeederModel& m, const InjectionSet& scenario, const TapSet& taps,
                   double delta_q_kvar, int workers = 1);

// How scenario samples aggregate into one Pearson matrix:
//  - stacked: every scenario contributes its N rows to one pooled data set;
//    means/deviations are taken over all pooled rows (population 1/M).
//  - per_scenario_mean: a Pearson matrix per scenario, then the element-wise
//    mean across scenarios (kept for sensitivity analysis of that choice).
enum class CorrelationMode { stacked, per_scenario_mean };

struct CorrelationMatrix {
    std::array<std::vector<int>, 3> nodes;
    std::array<std::vector<double>, 3> c;      // row-major, symmetric, diag == 1
    std::array<std::vector<double>, 3> mean;   // pooled per-column mean (audit)
    std::array<std::vector<double>, 3> stddev; // pooled per-column sigma (audit)
    int scenario_count = 0;
    std::vector<std::string> warnings;         // degenerate (zero-variance) columns

    double at(Phase ph, int i, int j) const {
        const auto& mat = c[static_cast<std::size_t>(static_cast<int>(ph))];
        const std::size_t n = nodes[static_cast<std::size_t>(static_cast<int>(ph))].size();
        return mat[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
    }
};

// Pearson correlation between sensitivity columns across scenarios. Needs at
// least 2 samples of identical shape (ConfigError otherwise). The diagonal is
// set to exactly 1 without arithmetic; off-diagonal values are clamped to
// [-1, 1]; a zero-variance column correlates as 0 with everything and adds a
// warning instead of producing NaN.
CorrelationMatrix compute_correlation(const std::vector<VlsmQ>& samples,
                                      CorrelationMode mode = CorrelationMode::stacked);

} // namespace zvvc
