#include "zvvc/zoning.hpp"

#include "zvvc/errors.hpp"

#include <algorithm>

namespace zvvc {

double mean_correlation(const CorrelationMatrix& c, Phase ph, int l,
                        const std::vector<int>& zone_positions) {
    if (zone_positions.empty()) throw ConfigError("mean correlation against an empty zone");
    const std::size_t p = static_cast<std::size_t>(static_cast<int>(ph));
    const std::size_t n = c.nodes[p].size();
    double acc = 0.0;
    for (int v : zone_positions)
        acc += c.c[p][static_cast<std::size_t>(l) * n + static_cast<std::size_t>(v)];
    return acc / static_cast<double>(zone_positions.size());
}

std::vector<std::vector<int>> fic_cluster(const CorrelationMatrix& c, Phase ph, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("clustering threshold must be in (0, 1]");
    const std::size_t p = static_cast<std::size_t>(static_cast<int>(ph));
    const std::size_t n = c.nodes[p].size();

    std::vector<std::vector<int>> zones;
    if (n == 0) return zones;
    zones.push_back({0});
    for (std::size_t l = 1; l < n; ++l) {
        int best_zone = -1;
        double best = 0.0;
        for (std::size_t k = 0; k < zones.size(); ++k) {
            const double mcc = mean_correlation(c, ph, static_cast<int>(l), zones[k]);
            if (best_zone < 0 || mcc > best) { // strict: ties keep the lowest index
                best_zone = static_cast<int>(k);
                best = mcc;
            }
        }
        if (best >= alpha)
            zones[static_cast<std::size_t>(best_zone)].push_back(static_cast<int>(l));
        else
            zones.push_back({static_cast<int>(l)});
    }
    return zones;
}

ZonePartition build_partition(const FeederModel& m, const CorrelationMatrix& c, double alpha) {
    ZonePartition part;
    part.alpha = alpha;
    part.nodes = c.nodes;

    for (int p = 0; p < 3; ++p) {
        const Phase ph = static_cast<Phase>(p);
        const auto& nodes = c.nodes[static_cast<std::size_t>(p)];
        const auto zones = fic_cluster(c, ph, alpha);
        for (std::size_t k = 0; k < zones.size(); ++k) {
            IbrZone z;
            z.index = static_cast<int>(k);
            z.phase = ph;
            for (int pos : zones[k]) z.members.push_back(nodes[static_cast<std::size_t>(pos)]);
            std::sort(z.members.begin(), z.members.end());
            part.ibr[static_cast<std::size_t>(p)].push_back(std::move(z));
        }
    }

    for (const VoltageRegulatorDevice& d : m.regulators) {
        VrZone z;
        z.device_id = d.id;
        z.phase = d.phase;
        const std::vector<int> subtree = downstream_nodes(m, d);
        const auto& nodes = c.nodes[static_cast<std::size_t>(static_cast<int>(d.phase))];
        // Keep only load nodes: those are the voltages the tuner meters.
        for (int b : subtree)
            if (std::binary_search(nodes.begin(), nodes.end(), b)) z.members.push_back(b);
        part.vr.push_back(std::move(z));
    }
    return part;
}

} // namespace zvvc
