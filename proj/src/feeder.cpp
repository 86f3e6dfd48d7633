#include "zvvc/feeder.hpp"

#include "zvvc/csv.hpp"
#include "zvvc/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <set>

#include "json.hpp"

namespace zvvc {

using json = nlohmann::ordered_json;

// --- phase helpers ---------------------------------------------------------

PhaseMask parse_phases(const std::string& s) {
    if (s.empty()) throw DataError("phase set must not be empty");
    PhaseMask m = 0;
    int last = -1;
    for (char c : s) {
        if (c < 'a' || c > 'c')
            throw DataError("invalid phase set '" + s + "' (want a subset of \"abc\")");
        int p = c - 'a';
        if (p <= last)
            throw DataError("phase set '" + s + "' must be in a-b-c order without repeats");
        last = p;
        m |= static_cast<PhaseMask>(1u << p);
    }
    return m;
}

std::string phases_string(PhaseMask m) {
    std::string s;
    for (int p = 0; p < 3; ++p)
        if (m & (1u << p)) s += static_cast<char>('a' + p);
    return s;
}

Phase parse_phase(const std::string& s) {
    if (s.size() != 1 || s[0] < 'a' || s[0] > 'c')
        throw DataError("invalid phase '" + s + "' (want \"a\", \"b\" or \"c\")");
    return static_cast<Phase>(s[0] - 'a');
}

std::vector<Phase> phase_list(PhaseMask m) {
    std::vector<Phase> out;
    for (int p = 0; p < 3; ++p)
        if (m & (1u << p)) out.push_back(static_cast<Phase>(p));
    return out;
}

double PvSystem::q_capability_kvar(double p_kw) const {
    double kva = inverter_kva();
    double head = kva * kva - p_kw * p_kw;
    return head > 0.0 ? std::sqrt(head) : 0.0;
}

int FeederModel::bus_of(const std::string& id) const {
    auto it = bus_index.find(id);
    return it == bus_index.end() ? -1 : it->second;
}

// --- JSON field access -----------------------------------------------------

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
    throw DataError(origin + ": " + msg);
}

const json& req(const json& j, const char* key, const std::string& ctx, const std::string& origin) {
    auto it = j.find(key);
    if (it == j.end()) fail(origin, ctx + ": missing field '" + key + "'");
    return *it;
}

std::string req_str(const json& j, const char* key, const std::string& ctx, const std::string& origin) {
    const json& v = req(j, key, ctx, origin);
    if (!v.is_string()) fail(origin, ctx + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

double req_num(const json& j, const char* key, const std::string& ctx, const std::string& origin) {
    const json& v = req(j, key, ctx, origin);
    if (!v.is_number()) fail(origin, ctx + ": field '" + key + "' must be a number");
    return v.get<double>();
}

double opt_num(const json& j, const char* key, double dflt, const std::string& ctx,
               const std::string& origin) {
    auto it = j.find(key);
    if (it == j.end()) return dflt;
    if (!it->is_number()) fail(origin, ctx + ": field '" + key + "' must be a number");
    return it->get<double>();
}

bool opt_bool(const json& j, const char* key, bool dflt, const std::string& ctx,
              const std::string& origin) {
    auto it = j.find(key);
    if (it == j.end()) return dflt;
    if (!it->is_boolean()) fail(origin, ctx + ": field '" + key + "' must be a boolean");
    return it->get<bool>();
}

const json& req_array(const json& j, const char* key, const std::string& ctx,
                      const std::string& origin) {
    const json& v = req(j, key, ctx, origin);
    if (!v.is_array()) fail(origin, ctx + ": field '" + key + "' must be an array");
    return v;
}

// --- validation ------------------------------------------------------------

void build_topology(FeederModel& m, const std::string& origin) {
    const int n = static_cast<int>(m.buses.size());
    m.parent_line.assign(static_cast<std::size_t>(n), -1);
    m.child_lines.assign(static_cast<std::size_t>(n), {});

    for (std::size_t li = 0; li < m.lines.size(); ++li) {
        LineSegment& l = m.lines[li];
        if (l.to_index == m.source_index)
            fail(origin, "line " + l.from + "->" + l.to + ": the source bus cannot be fed");
        if (m.parent_line[static_cast<std::size_t>(l.to_index)] != -1) {
            const LineSegment& other =
                m.lines[static_cast<std::size_t>(m.parent_line[static_cast<std::size_t>(l.to_index)])];
            fail(origin, "bus '" + l.to + "' is fed twice (from '" + other.from + "' and '" +
                             l.from + "'): network is not radial");
        }
        m.parent_line[static_cast<std::size_t>(l.to_index)] = static_cast<int>(li);
        m.child_lines[static_cast<std::size_t>(l.from_index)].push_back(static_cast<int>(li));
    }

    // Breadth-first from the source; covers reachability and gives the sweep
    // order (parents before children). Anything left unvisited is either an
    // island or a cycle detached from the source.
    m.sweep_order.clear();
    m.sweep_order.reserve(static_cast<std::size_t>(n));
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::deque<int> queue{m.source_index};
    seen[static_cast<std::size_t>(m.source_index)] = 1;
    while (!queue.empty()) {
        int b = queue.front();
        queue.pop_front();
        m.sweep_order.push_back(b);
        for (int li : m.child_lines[static_cast<std::size_t>(b)]) {
            int child = m.lines[static_cast<std::size_t>(li)].to_index;
            if (!seen[static_cast<std::size_t>(child)]) {
                seen[static_cast<std::size_t>(child)] = 1;
                queue.push_back(child);
            }
        }
    }
    if (static_cast<int>(m.sweep_order.size()) != n) {
        std::string unreached;
        for (int b = 0; b < n; ++b) {
            if (!seen[static_cast<std::size_t>(b)]) {
                if (!unreached.empty()) unreached += ", ";
                unreached += m.buses[static_cast<std::size_t>(b)].id;
            }
        }
        fail(origin, "buses not reachable from source '" + m.source + "': " + unreached +
                         " (island or cycle)");
    }
}

void validate(FeederModel& m, const std::string& origin) {
    if (m.buses.empty()) fail(origin, "feeder has no buses");
    if (m.nominal_kv_ln <= 0) fail(origin, "field 'nominal_kv_ln' must be > 0");

    for (std::size_t i = 0; i < m.buses.size(); ++i) {
        const Bus& b = m.buses[i];
        if (b.phases == 0) fail(origin, "bus '" + b.id + "': empty phase set");
        if (b.base_kv <= 0) fail(origin, "bus '" + b.id + "': base_kv must be > 0");
        if (!m.bus_index.emplace(b.id, static_cast<int>(i)).second)
            fail(origin, "duplicate bus id '" + b.id + "'");
    }

    m.source_index = m.bus_of(m.source);
    if (m.source_index < 0) fail(origin, "source bus '" + m.source + "' is not defined");

    for (LineSegment& l : m.lines) {
        const std::string ctx = "line " + l.from + "->" + l.to;
        l.from_index = m.bus_of(l.from);
        l.to_index = m.bus_of(l.to);
        if (l.from_index < 0) fail(origin, ctx + ": unknown bus '" + l.from + "'");
        if (l.to_index < 0) fail(origin, ctx + ": unknown bus '" + l.to + "'");
        if (l.from_index == l.to_index) fail(origin, ctx + ": self-loop");
        if (l.length_km < 0) fail(origin, ctx + ": length_km must be >= 0");

        const Bus& from = m.buses[static_cast<std::size_t>(l.from_index)];
        const Bus& to = m.buses[static_cast<std::size_t>(l.to_index)];
        if (l.phases != to.phases)
            fail(origin, ctx + ": phase set '" + phases_string(l.phases) +
                             "' must match the to-bus phases '" + phases_string(to.phases) + "'");
        if ((l.phases & from.phases) != l.phases)
            fail(origin, ctx + ": carries phases '" + phases_string(l.phases) +
                             "' not all present at from-bus ('" + phases_string(from.phases) + "')");

        const auto live = phase_list(l.phases);
        if (l.z_per_km.size() != live.size())
            fail(origin, ctx + ": impedance matrix is " + std::to_string(l.z_per_km.size()) +
                             "x" + std::to_string(l.z_per_km.empty() ? 0 : l.z_per_km[0].size()) +
                             " but the line carries " + std::to_string(live.size()) + " phase(s)");
        for (std::size_t r = 0; r < live.size(); ++r) {
            if (l.z_per_km[r].size() != live.size())
                fail(origin, ctx + ": impedance matrix row " + std::to_string(r) +
                                 " has wrong width");
            if (l.z_per_km[r][r].real() < 0)
                fail(origin, ctx + ": negative self-resistance on phase " +
                                 std::string(1, phase_char(live[r])));
        }
        for (auto& row : l.z_ohm)
            row.fill({0.0, 0.0});
        for (std::size_t r = 0; r < live.size(); ++r)
            for (std::size_t c = 0; c < live.size(); ++c)
                l.z_ohm[static_cast<std::size_t>(static_cast<int>(live[r]))]
                       [static_cast<std::size_t>(static_cast<int>(live[c]))] =
                    l.z_per_km[r][c] * l.length_km;
    }

    build_topology(m, origin);

    std::set<std::pair<int, int>> reg_slots; // (line_index, phase)
    std::set<std::string> reg_ids;
    for (VoltageRegulatorDevice& d : m.regulators) {
        const std::string ctx = "regulator '" + d.id + "'";
        if (!reg_ids.insert(d.id).second) fail(origin, "duplicate regulator id '" + d.id + "'");
        d.line_index = -1;
        for (std::size_t li = 0; li < m.lines.size(); ++li) {
            if (m.lines[li].from == d.from && m.lines[li].to == d.to) {
                d.line_index = static_cast<int>(li);
                break;
            }
        }
        if (d.line_index < 0)
            fail(origin, ctx + ": no line segment " + d.from + "->" + d.to);
        if (!mask_has(m.lines[static_cast<std::size_t>(d.line_index)].phases, d.phase))
            fail(origin, ctx + ": segment does not carry phase " +
                             std::string(1, phase_char(d.phase)));
        if (d.tap < kTapMin || d.tap > kTapMax)
            fail(origin, ctx + ": tap " + std::to_string(d.tap) + " outside [" +
                             std::to_string(kTapMin) + ", " + std::to_string(kTapMax) + "]");
        if (d.step_pu <= 0) fail(origin, ctx + ": step_pu must be > 0");
        if (d.deadband <= 0) fail(origin, ctx + ": deadband must be > 0");
        if (d.time_delay <= 0) fail(origin, ctx + ": time_delay must be > 0");
        if (!reg_slots.emplace(d.line_index, static_cast<int>(d.phase)).second)
            fail(origin, ctx + ": another regulator already controls segment " + d.from + "->" +
                             d.to + " phase " + std::string(1, phase_char(d.phase)));
    }

    for (LoadPoint& lp : m.loads) {
        const std::string ctx =
            "load at " + lp.bus + " phase " + std::string(1, phase_char(lp.phase));
        lp.bus_index = m.bus_of(lp.bus);
        if (lp.bus_index < 0) fail(origin, ctx + ": unknown bus '" + lp.bus + "'");
        if (!mask_has(m.buses[static_cast<std::size_t>(lp.bus_index)].phases, lp.phase))
            fail(origin, ctx + ": bus does not carry that phase");
        if (lp.profile.empty()) fail(origin, ctx + ": field 'profile' must not be empty");
        if (lp.kvar_profile.empty()) {
            if (!(lp.power_factor > 0 && lp.power_factor <= 1))
                fail(origin, ctx + ": power_factor must be in (0, 1]");
        } else if (lp.power_factor != 0) {
            fail(origin, ctx + ": give either power_factor or kvar_profile, not both");
        }
    }

    for (PvSystem& pv : m.pvs) {
        const std::string ctx =
            "pv at " + pv.bus + " phase " + std::string(1, phase_char(pv.phase));
        pv.bus_index = m.bus_of(pv.bus);
        if (pv.bus_index < 0) fail(origin, ctx + ": unknown bus '" + pv.bus + "'");
        if (!mask_has(m.buses[static_cast<std::size_t>(pv.bus_index)].phases, pv.phase))
            fail(origin, ctx + ": bus does not carry that phase");
        if (pv.rated_kw <= 0) fail(origin, ctx + ": rated_kw must be > 0");
        if (pv.oversize_factor < 1.0)
            fail(origin, ctx + ": oversize_factor must be >= 1 (inverter at least rated kW)");
        if (pv.profile.empty()) fail(origin, ctx + ": field 'profile' must not be empty");
    }
}

void sort_canonical(FeederModel& m) {
    std::sort(m.buses.begin(), m.buses.end(),
              [](const Bus& a, const Bus& b) { return a.id < b.id; });
    std::sort(m.lines.begin(), m.lines.end(), [](const LineSegment& a, const LineSegment& b) {
        return std::tie(a.from, a.to) < std::tie(b.from, b.to);
    });
    std::sort(m.regulators.begin(), m.regulators.end(),
              [](const VoltageRegulatorDevice& a, const VoltageRegulatorDevice& b) {
                  return a.id < b.id;
              });
    std::sort(m.loads.begin(), m.loads.end(), [](const LoadPoint& a, const LoadPoint& b) {
        return std::tie(a.bus, a.phase, a.profile) < std::tie(b.bus, b.phase, b.profile);
    });
    std::sort(m.pvs.begin(), m.pvs.end(), [](const PvSystem& a, const PvSystem& b) {
        return std::tie(a.bus, a.phase, a.profile) < std::tie(b.bus, b.phase, b.profile);
    });
}

} // namespace

// --- parse / serialize -----------------------------------------------------

FeederModel parse_feeder(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(origin + ": not valid JSON: " + e.what());
    }
    if (!doc.is_object()) fail(origin, "top level must be an object");

    FeederModel m;
    m.source = req_str(doc, "source", "feeder", origin);
    m.nominal_kv_ln = req_num(doc, "nominal_kv_ln", "feeder", origin);

    for (const json& jb : req_array(doc, "buses", "feeder", origin)) {
        Bus b;
        b.id = req_str(jb, "id", "bus", origin);
        const std::string ctx = "bus '" + b.id + "'";
        try {
            b.phases = parse_phases(req_str(jb, "phases", ctx, origin));
        } catch (const DataError& e) {
            fail(origin, ctx + ": " + e.what());
        }
        b.base_kv = opt_num(jb, "base_kv", m.nominal_kv_ln, ctx, origin);
        m.buses.push_back(std::move(b));
    }

    for (const json& jl : req_array(doc, "lines", "feeder", origin)) {
        LineSegment l;
        l.from = req_str(jl, "from", "line", origin);
        l.to = req_str(jl, "to", "line", origin);
        const std::string ctx = "line " + l.from + "->" + l.to;
        try {
            l.phases = parse_phases(req_str(jl, "phases", ctx, origin));
        } catch (const DataError& e) {
            fail(origin, ctx + ": " + e.what());
        }
        l.length_km = req_num(jl, "length_km", ctx, origin);
        const json& jz = req_array(jl, "z_ohm_per_km", ctx, origin);
        for (const json& jrow : jz) {
            if (!jrow.is_array()) fail(origin, ctx + ": z_ohm_per_km rows must be arrays");
            std::vector<std::complex<double>> row;
            for (const json& jc : jrow) {
                if (!jc.is_array() || jc.size() != 2 || !jc[0].is_number() || !jc[1].is_number())
                    fail(origin, ctx + ": impedance entries must be [r, x] number pairs");
                row.emplace_back(jc[0].get<double>(), jc[1].get<double>());
            }
            l.z_per_km.push_back(std::move(row));
        }
        m.lines.push_back(std::move(l));
    }

    if (doc.contains("regulators")) {
        for (const json& jr : req_array(doc, "regulators", "feeder", origin)) {
            VoltageRegulatorDevice d;
            d.id = req_str(jr, "id", "regulator", origin);
            const std::string ctx = "regulator '" + d.id + "'";
            d.from = req_str(jr, "from", ctx, origin);
            d.to = req_str(jr, "to", ctx, origin);
            try {
                d.phase = parse_phase(req_str(jr, "phase", ctx, origin));
            } catch (const DataError& e) {
                fail(origin, ctx + ": " + e.what());
            }
            d.tap = static_cast<int>(opt_num(jr, "tap", 0, ctx, origin));
            d.step_pu = opt_num(jr, "step_pu", 0.00625, ctx, origin);
            d.v_set = req_num(jr, "v_set", ctx, origin);
            d.deadband = req_num(jr, "deadband", ctx, origin);
            d.time_delay = req_num(jr, "time_delay", ctx, origin);
            d.substation_oltc = opt_bool(jr, "substation_oltc", false, ctx, origin);
            m.regulators.push_back(std::move(d));
        }
    }

    if (doc.contains("loads")) {
        for (const json& jl : req_array(doc, "loads", "feeder", origin)) {
            LoadPoint lp;
            lp.bus = req_str(jl, "bus", "load", origin);
            const std::string ctx = "load at " + lp.bus;
            try {
                lp.phase = parse_phase(req_str(jl, "phase", ctx, origin));
            } catch (const DataError& e) {
                fail(origin, ctx + ": " + e.what());
            }
            lp.profile = req_str(jl, "profile", ctx, origin);
            lp.power_factor = opt_num(jl, "power_factor", 0.0, ctx, origin);
            if (jl.contains("kvar_profile"))
                lp.kvar_profile = req_str(jl, "kvar_profile", ctx, origin);
            m.loads.push_back(std::move(lp));
        }
    }

    if (doc.contains("pv")) {
        for (const json& jp : req_array(doc, "pv", "feeder", origin)) {
            PvSystem pv;
            pv.bus = req_str(jp, "bus", "pv", origin);
            const std::string ctx = "pv at " + pv.bus;
            try {
                pv.phase = parse_phase(req_str(jp, "phase", ctx, origin));
            } catch (const DataError& e) {
                fail(origin, ctx + ": " + e.what());
            }
            pv.rated_kw = req_num(jp, "rated_kw", ctx, origin);
            pv.oversize_factor = opt_num(jp, "oversize_factor", 1.10, ctx, origin);
            pv.profile = req_str(jp, "profile", ctx, origin);
            m.pvs.push_back(std::move(pv));
        }
    }

    sort_canonical(m);
    validate(m, origin);
    return m;
}

FeederModel load_feeder_file(const std::string& path) {
    return parse_feeder(csv::read_text_file(path), path);
}

std::string serialize_feeder(const FeederModel& m) {
    json doc;
    doc["source"] = m.source;
    doc["nominal_kv_ln"] = m.nominal_kv_ln;

    json jbuses = json::array();
    for (const Bus& b : m.buses)
        jbuses.push_back({{"id", b.id}, {"phases", phases_string(b.phases)}, {"base_kv", b.base_kv}});
    doc["buses"] = std::move(jbuses);

    json jlines = json::array();
    for (const LineSegment& l : m.lines) {
        json jz = json::array();
        for (const auto& row : l.z_per_km) {
            json jrow = json::array();
            for (const auto& z : row) jrow.push_back({z.real(), z.imag()});
            jz.push_back(std::move(jrow));
        }
        jlines.push_back({{"from", l.from},
                          {"to", l.to},
                          {"phases", phases_string(l.phases)},
                          {"length_km", l.length_km},
                          {"z_ohm_per_km", std::move(jz)}});
    }
    doc["lines"] = std::move(jlines);

    json jregs = json::array();
    for (const VoltageRegulatorDevice& d : m.regulators) {
        jregs.push_back({{"id", d.id},
                         {"from", d.from},
                         {"to", d.to},
                         {"phase", std::string(1, phase_char(d.phase))},
                         {"tap", d.tap},
                         {"step_pu", d.step_pu},
                         {"v_set", d.v_set},
                         {"deadband", d.deadband},
                         {"time_delay", d.time_delay},
                         {"substation_oltc", d.substation_oltc}});
    }
    doc["regulators"] = std::move(jregs);

    json jloads = json::array();
    for (const LoadPoint& lp : m.loads) {
        json jl = {{"bus", lp.bus},
                   {"phase", std::string(1, phase_char(lp.phase))},
                   {"profile", lp.profile}};
        if (lp.kvar_profile.empty())
            jl["power_factor"] = lp.power_factor;
        else
            jl["kvar_profile"] = lp.kvar_profile;
        jloads.push_back(std::move(jl));
    }
    doc["loads"] = std::move(jloads);

    json jpv = json::array();
    for (const PvSystem& pv : m.pvs) {
        jpv.push_back({{"bus", pv.bus},
                       {"phase", std::string(1, phase_char(pv.phase))},
                       {"rated_kw", pv.rated_kw},
                       {"oversize_factor", pv.oversize_factor},
                       {"profile", pv.profile}});
    }
    doc["pv"] = std::move(jpv);

    return doc.dump(2) + "\n";
}

std::vector<int> downstream_nodes(const FeederModel& m, const VoltageRegulatorDevice& device) {
    std::vector<int> out;
    std::deque<int> queue{m.lines[static_cast<std::size_t>(device.line_index)].to_index};
    while (!queue.empty()) {
        int b = queue.front();
        queue.pop_front();
        if (mask_has(m.buses[static_cast<std::size_t>(b)].phases, device.phase)) out.push_back(b);
        for (int li : m.child_lines[static_cast<std::size_t>(b)]) {
            // A further regulator on the same phase starts its own zone.
            bool cut = false;
            for (const VoltageRegulatorDevice& other : m.regulators) {
                if (other.line_index == li && other.phase == device.phase) {
                    cut = true;
                    break;
                }
            }
            if (!cut) queue.push_back(m.lines[static_cast<std::size_t>(li)].to_index);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace zvvc
