#include "zvvc/sensitivity.hpp"

#include "zvvc/errors.hpp"
#include "zvvc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

namespace zvvc {

std::array<std::vector<int>, 3> load_nodes_by_phase(const FeederModel& m) {
    std::array<std::set<int>, 3> seen;
    for (const LoadPoint& lp : m.loads)
        seen[static_cast<std::size_t>(static_cast<int>(lp.phase))].insert(lp.bus_index);
    std::array<std::vector<int>, 3> out;
    for (std::size_t p = 0; p < 3; ++p) out[p].assign(seen[p].begin(), seen[p].end());
    return out;
}

VlsmQ compute_vlsm(const FeederModel& m, const InjectionSet& scenario, const TapSet& taps,
                   double delta_q_kvar, int workers) {
    if (delta_q_kvar <= 0) throw ConfigError("sensitivity perturbation must be > 0 kvar");
    if (workers < 1) throw ConfigError("worker count must be >= 1");

    VlsmQ out;
    out.nodes = load_nodes_by_phase(m);
    out.delta_q_kvar = delta_q_kvar;
    out.scenario = scenario;

    const NodalVoltageState base = solve(m, scenario, taps);

    struct Task {
        Phase ph;
        int col;
        int bus;
    };
    std::vector<Task> tasks;
    for (int p = 0; p < 3; ++p) {
        const auto& nodes = out.nodes[static_cast<std::size_t>(p)];
        out.q[static_cast<std::size_t>(p)].assign(nodes.size() * nodes.size(), 0.0);
        for (std::size_t j = 0; j < nodes.size(); ++j)
            tasks.push_back({static_cast<Phase>(p), static_cast<int>(j), nodes[j]});
    }

    // Each task fills one column; any worker count gives identical output.
    std::vector<std::string> task_error(tasks.size());
    auto run_task = [&](std::size_t ti) {
        const Task& t = tasks[ti];
        const std::size_t p = static_cast<std::size_t>(static_cast<int>(t.ph));
        const auto& nodes = out.nodes[p];
        InjectionSet perturbed = scenario;
        perturbed.add(t.bus, t.ph, 0.0, -delta_q_kvar); // reactive injection
        NodalVoltageState pert;
        try {
            pert = solve(m, perturbed, taps);
        } catch (const Error& e) {
            task_error[ti] = "sensitivity perturbation at bus '" +
                             m.buses[static_cast<std::size_t>(t.bus)].id + "' phase " +
                             std::string(1, phase_char(t.ph)) + ": " + e.what();
            return;
        }
        const std::size_t n = nodes.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = pert.vm_pu(m, nodes[i], t.ph) - base.vm_pu(m, nodes[i], t.ph);
            out.q[p][i * n + static_cast<std::size_t>(t.col)] = dv / delta_q_kvar;
        }
    };

    if (workers == 1 || tasks.size() <= 1) {
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti);
    } else {
        const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), tasks.size());
        std::vector<std::thread> pool;
        pool.reserve(nw);
        for (std::size_t w = 0; w < nw; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t ti = w; ti < tasks.size(); ti += nw) run_task(ti);
            });
        }
        for (auto& th : pool) th.join();
    }
    for (const std::string& err : task_error)
        if (!err.empty()) throw NumericalError(err);
    return out;
}

namespace {

// Pooled per-column data across samples, column-major for kernel use.
std::vector<std::vector<double>> pool_columns(const std::vector<VlsmQ>& samples, std::size_t p,
                                              std::size_t n) {
    std::vector<std::vector<double>> col(n);
    for (auto& c : col) c.reserve(samples.size() * n);
    for (const VlsmQ& s : samples)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) col[j].push_back(s.q[p][i * n + j]);
    return col;
}

double clamp_unit(double v) { return std::min(1.0, std::max(-1.0, v)); }

// Pearson over pre-centered columns with population normalization; sigma of
// column j is sig[j]. Fills a symmetric matrix with an exact unit diagonal.
void pearson_fill(const std::vector<std::vector<double>>& centered,
                  const std::vector<double>& sig, double rows, std::vector<double>& out) {
    const std::size_t n = centered.size();
    out.assign(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        out[a * n + a] = 1.0; // by construction, not arithmetic
        for (std::size_t b = a + 1; b < n; ++b) {
            double c = 0.0;
            if (sig[a] > 0 && sig[b] > 0)
                c = clamp_unit(kernels::dot(centered[a], centered[b]) / rows / (sig[a] * sig[b]));
            out[a * n + b] = c;
            out[b * n + a] = c;
        }
    }
}

} // namespace

CorrelationMatrix compute_correlation(const std::vector<VlsmQ>& samples, CorrelationMode mode) {
    if (samples.size() < 2)
        throw ConfigError("correlation needs at least 2 sensitivity samples, got " +
                          std::to_string(samples.size()));
    for (const VlsmQ& s : samples)
        if (s.nodes != samples.front().nodes)
            throw ConfigError("sensitivity samples disagree on the load-node sets");

    CorrelationMatrix out;
    out.nodes = samples.front().nodes;
    out.scenario_count = static_cast<int>(samples.size());

    for (std::size_t p = 0; p < 3; ++p) {
        const auto& nodes = out.nodes[p];
        const std::size_t n = nodes.size();
        out.c[p].clear();
        out.mean[p].assign(n, 0.0);
        out.stddev[p].assign(n, 0.0);
        if (n == 0) continue;

        // Pooled statistics (always retained for audit).
        auto col = pool_columns(samples, p, n);
        const double rows = static_cast<double>(col[0].size());
        std::vector<std::vector<double>> centered(n);
        std::vector<double> sig(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double mu = kernels::sum(col[j]) / rows;
            out.mean[p][j] = mu;
            centered[j].resize(col[j].size());
            for (std::size_t r = 0; r < col[j].size(); ++r) centered[j][r] = col[j][r] - mu;
            sig[j] = std::sqrt(kernels::dot(centered[j], centered[j]) / rows);
            out.stddev[p][j] = sig[j];
            if (sig[j] == 0.0) {
                const char pc = phase_char(static_cast<Phase>(static_cast<int>(p)));
                out.warnings.push_back("zero-variance sensitivity column at node index " +
                                       std::to_string(nodes[j]) + " phase " +
                                       std::string(1, pc) +
                                       "; correlations with it set to 0");
            }
        }

        if (mode == CorrelationMode::stacked) {
            pearson_fill(centered, sig, rows, out.c[p]);
            continue;
        }

        // per_scenario_mean: one Pearson matrix per sample, then the mean.
        std::vector<double> acc(n * n, 0.0), one;
        std::vector<std::vector<double>> scol(n), scentered(n);
        std::vector<double> ssig(n);
        std::set<std::size_t> degenerate;
        for (const VlsmQ& s : samples) {
            for (std::size_t j = 0; j < n; ++j) {
                scol[j].resize(n);
                for (std::size_t i = 0; i < n; ++i) scol[j][i] = s.q[p][i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double mu = kernels::sum(scol[j]) / static_cast<double>(n);
                scentered[j].resize(n);
                for (std::size_t i = 0; i < n; ++i) scentered[j][i] = scol[j][i] - mu;
                ssig[j] =
                    std::sqrt(kernels::dot(scentered[j], scentered[j]) / static_cast<double>(n));
                if (ssig[j] == 0.0) degenerate.insert(j);
            }
            pearson_fill(scentered, ssig, static_cast<double>(n), one);
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += one[k];
        }
        const double inv = 1.0 / static_cast<double>(samples.size());
        for (double& v : acc) v = clamp_unit(v * inv);
        for (std::size_t j = 0; j < n; ++j) acc[j * n + j] = 1.0;
        out.c[p] = std::move(acc);
        for (std::size_t j : degenerate) {
            const char pc = phase_char(static_cast<Phase>(static_cast<int>(p)));
            out.warnings.push_back("zero-variance per-scenario column at node index " +
                                   std::to_string(out.nodes[p][j]) + " phase " +
                                   std::string(1, pc) + " in at least one scenario");
        }
    }
    return out;
}

} // namespace zvvc
