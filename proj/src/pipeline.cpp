#include "zvvc/pipeline.hpp"

#include "zvvc/errors.hpp"
#include "zvvc/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace zvvc::pipeline {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

ordered_json parse_json_file(const std::string& path) {
    const std::string text = csv::read_text_file(path);
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError(path + ": not valid JSON");
    return j;
}

const ordered_json& req(const ordered_json& j, const char* key, const std::string& origin) {
    const auto it = j.find(key);
    if (it == j.end()) throw DataError(origin + ": missing field '" + key + "'");
    return *it;
}

ordered_json manifest_block(std::vector<std::pair<std::string, std::string>> inputs,
                            ordered_json params) {
    ordered_json m;
    m["tool_version"] = kToolVersion;
    ordered_json in = ordered_json::object();
    for (auto& [k, v] : inputs) in[k] = v;
    m["inputs"] = std::move(in);
    m["params"] = std::move(params);
    return m;
}

// Refuse to consume an artifact whose recorded input no longer matches the
// file on disk: mixing stage outputs from different runs silently corrupts
// every downstream result, so this is a hard stop.
void require_fresh(const ordered_json& artifact, const std::string& artifact_name,
                   const std::string& input_key, const std::string& path,
                   const std::string& producer_stage) {
    const ordered_json& manifest = req(artifact, "manifest", artifact_name);
    const ordered_json& inputs = req(manifest, "inputs", artifact_name + ".manifest");
    const auto it = inputs.find(input_key);
    if (it == inputs.end())
        throw DataError(artifact_name + ": manifest records no '" + input_key + "' input");
    const std::string recorded = it->get<std::string>();
    const std::string current = hash_file(path);
    if (recorded != current)
        throw DataError(artifact_name + " is stale: it was produced from " + input_key +
                        " hash " + recorded + " but '" + path + "' now hashes " + current +
                        "; re-run " + producer_stage);
}

void write_json_file(const std::string& path, const ordered_json& j) {
    csv::write_text_file(path, j.dump(2) + "\n");
}

// Square per-phase matrix with bus ids in the header; data rows start with
// the row ordinal so the file is self-describing and purely numeric past the
// header.
void write_matrix_csv(const std::string& path, const FeederModel& m, const std::vector<int>& nodes,
                      const std::vector<double>& mat) {
    csv::Table t;
    t.header.push_back("node");
    for (int b : nodes) t.header.push_back(m.buses[static_cast<std::size_t>(b)].id);
    const std::size_t n = nodes.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row;
        row.reserve(n + 1);
        row.push_back(static_cast<double>(i));
        for (std::size_t j = 0; j < n; ++j) row.push_back(mat[i * n + j]);
        t.rows.push_back(std::move(row));
    }
    csv::write_table_file(path, t);
}

std::pair<std::vector<int>, std::vector<double>> read_matrix_csv(const std::string& path,
                                                                 const FeederModel& m) {
    const csv::Table t = csv::read_table_file(path);
    if (t.header.empty() || t.header[0] != "node")
        throw DataError(path + ": expected a leading 'node' column");
    std::vector<int> nodes;
    for (std::size_t k = 1; k < t.header.size(); ++k) {
        const int b = m.bus_of(t.header[k]);
        if (b < 0) throw DataError(path + ": column '" + t.header[k] + "' is not a feeder bus");
        nodes.push_back(b);
    }
    const std::size_t n = nodes.size();
    if (t.rows.size() != n)
        throw DataError(path + ": expected " + std::to_string(n) + " rows, found " +
                        std::to_string(t.rows.size()));
    std::vector<double> mat(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) mat[i * n + j] = t.rows[i][j + 1];
    return {std::move(nodes), std::move(mat)};
}

std::string phase_key(int p) { return std::string(1, phase_char(static_cast<Phase>(p))); }

std::vector<std::string> bus_ids(const FeederModel& m, const std::vector<int>& idx) {
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (int b : idx) out.push_back(m.buses[static_cast<std::size_t>(b)].id);
    return out;
}

std::vector<int> bus_indices(const FeederModel& m, const ordered_json& ids,
                             const std::string& origin) {
    std::vector<int> out;
    for (const auto& v : ids) {
        const std::string id = v.get<std::string>();
        const int b = m.bus_of(id);
        if (b < 0) throw DataError(origin + ": unknown bus '" + id + "'");
        out.push_back(b);
    }
    return out;
}

// CSV escaping is deliberately absent: bus and device ids are identifiers
// (validated on parse), never free text.
void write_action_log(const std::string& path, const std::vector<ActionLogRow>& rows) {
    std::string text = "seq,t_seconds,zone,node,delta_kvar,setpoint_kvar,mode\n";
    for (const ActionLogRow& a : rows) {
        text += std::to_string(a.seq) + "," + std::to_string(a.t_seconds) + "," + a.zone + "," +
                a.node + "," + csv::format_double(a.delta_kvar) + "," +
                csv::format_double(a.setpoint_kvar) + "," + a.mode + "\n";
    }
    csv::write_text_file(path, text);
}

void write_vr_events(const std::string& path, const std::vector<VrEventRow>& rows) {
    std::string text = "seq,t_seconds,device,phase,kind,tap,v_set\n";
    for (const VrEventRow& e : rows) {
        text += std::to_string(e.seq) + "," + std::to_string(e.t_seconds) + "," + e.device + "," +
                std::string(1, phase_char(e.phase)) + "," + e.kind + "," + std::to_string(e.tap) +
                "," + csv::format_double(e.v_set) + "\n";
    }
    csv::write_text_file(path, text);
}

ordered_json simulation_params(const SimulationConfig& cfg) {
    ordered_json p;
    p["tick_seconds"] = cfg.tick_seconds;
    p["ibr_cadence_minutes"] = cfg.ibr_cadence_minutes;
    p["vr_cadence_minutes"] = cfg.vr_cadence_minutes;
    p["start_minute"] = cfg.start_minute;
    p["horizon_minutes"] = cfg.horizon_minutes;
    p["v2_max"] = cfg.v2_max;
    p["v2_min"] = cfg.v2_min;
    p["eps_u"] = cfg.eps_u;
    p["eps_d"] = cfg.eps_d;
    p["margin"] = cfg.margin;
    p["alpha_scale"] = cfg.alpha_scale;
    p["ansi_lo"] = cfg.ansi_lo;
    p["ansi_hi"] = cfg.ansi_hi;
    p["ibr_enabled"] = cfg.ibr_enabled;
    p["vr_tuning_enabled"] = cfg.vr_tuning_enabled;
    p["source_pu"] = cfg.source_pu;
    ordered_json ov = ordered_json::array();
    for (const DeviceOverride& o : cfg.device_overrides) {
        ordered_json e;
        e["id"] = o.id;
        if (o.v_set) e["v_set"] = *o.v_set;
        if (o.deadband) e["deadband"] = *o.deadband;
        if (o.time_delay) e["time_delay"] = *o.time_delay;
        ov.push_back(std::move(e));
    }
    p["device_overrides"] = std::move(ov);
    return p;
}

} // namespace

std::string validate_stage(const std::string& feeder_path, const std::string& profiles_path) {
    const FeederModel m = load_feeder_file(feeder_path);
    std::ostringstream out;
    out << "feeder '" << feeder_path << "' ok: " << m.buses.size() << " buses, " << m.lines.size()
        << " segments, " << m.regulators.size() << " regulators, " << m.loads.size() << " loads, "
        << m.pvs.size() << " pv systems\n";
    if (!profiles_path.empty()) {
        const ProfileSet profiles = load_profiles_file(profiles_path);
        check_profiles(m, profiles);
        out << "profiles '" << profiles_path << "' ok: " << profiles.minutes() << " minutes, "
            << profiles.table.header.size() << " columns; every referenced column present\n";
    }
    const auto nodes = load_nodes_by_phase(m);
    out << "load nodes per phase: a=" << nodes[0].size() << " b=" << nodes[1].size()
        << " c=" << nodes[2].size() << "\n";
    return out.str();
}

void powerflow_stage(const std::string& feeder_path, const std::string& profiles_path, int minute,
                     double source_pu, const std::string& out_csv) {
    const FeederModel m = load_feeder_file(feeder_path);
    const ProfileSet profiles = load_profiles_file(profiles_path);
    check_profiles(m, profiles);
    if (minute < 0 || minute >= profiles.minutes())
        throw ConfigError("minute " + std::to_string(minute) + " is outside the profile table (0-" +
                          std::to_string(profiles.minutes() - 1) + ")");
    const InjectionSet inj = build_injections(m, profiles, minute);
    const NodalVoltageState state = solve(m, inj, taps_from_model(m), source_pu);

    std::string text = "bus,phase,vm_pu,vm_volts,angle_deg\n";
    for (const auto& [b, ph] : live_pairs(m)) {
        const auto v = state.v[static_cast<std::size_t>(b)][static_cast<std::size_t>(
            static_cast<int>(ph))];
        text += m.buses[static_cast<std::size_t>(b)].id + "," + std::string(1, phase_char(ph)) +
                "," + csv::format_double(state.vm_pu(m, b, ph)) + "," +
                csv::format_double(std::abs(v)) + "," +
                csv::format_double(std::arg(v) * 180.0 / std::numbers::pi) + "\n";
    }
    csv::write_text_file(out_csv, text);
}

void sensitivity_stage(const std::string& feeder_path, const std::string& profiles_path,
                       const SensitivityParams& p, const std::string& out_dir) {
    if (p.scenarios < 2)
        throw ConfigError("sensitivity needs at least 2 scenarios to correlate, got " +
                          std::to_string(p.scenarios));
    const FeederModel m = load_feeder_file(feeder_path);
    const ProfileSet profiles = load_profiles_file(profiles_path);
    check_profiles(m, profiles);

    const std::vector<Scenario> scenarios =
        generate_scenarios(m, profiles, p.window, p.scenarios, p.seed);
    const TapSet taps = taps_from_model(m);
    std::vector<VlsmQ> samples;
    samples.reserve(scenarios.size());
    for (const Scenario& s : scenarios)
        samples.push_back(compute_vlsm(m, scenario_injections(m, s), taps, p.delta_q_kvar,
                                       p.workers));
    const CorrelationMatrix corr = compute_correlation(samples, p.mode);

    // Element-wise mean sensitivity across scenarios: the representative
    // operating point handed to the online controller.
    VlsmQ mean = samples.front();
    for (int ph = 0; ph < 3; ++ph) {
        auto& acc = mean.q[static_cast<std::size_t>(ph)];
        for (std::size_t s = 1; s < samples.size(); ++s) {
            const auto& q = samples[s].q[static_cast<std::size_t>(ph)];
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += q[k];
        }
        for (double& v : acc) v /= static_cast<double>(samples.size());
    }

    fs::create_directories(out_dir);
    ordered_json outputs = ordered_json::object();
    for (int ph = 0; ph < 3; ++ph) {
        const auto& nodes = mean.nodes[static_cast<std::size_t>(ph)];
        const std::string vp = out_dir + "/vlsm_" + phase_key(ph) + ".csv";
        const std::string cp = out_dir + "/corr_" + phase_key(ph) + ".csv";
        write_matrix_csv(vp, m, nodes, mean.q[static_cast<std::size_t>(ph)]);
        write_matrix_csv(cp, m, nodes, corr.c[static_cast<std::size_t>(ph)]);
        outputs["vlsm_" + phase_key(ph) + ".csv"] = hash_file(vp);
        outputs["corr_" + phase_key(ph) + ".csv"] = hash_file(cp);
    }

    ordered_json params;
    params["scenarios"] = p.scenarios;
    params["delta_q_kvar"] = p.delta_q_kvar;
    params["seed"] = p.seed;
    params["window_start_minute"] = p.window.start_minute;
    params["window_end_minute"] = p.window.end_minute;
    params["correlation_mode"] =
        p.mode == CorrelationMode::stacked ? "stacked" : "per_scenario_mean";

    ordered_json doc;
    doc["manifest"] = manifest_block(
        {{"feeder", hash_file(feeder_path)}, {"profiles", hash_file(profiles_path)}},
        std::move(params));
    doc["outputs"] = std::move(outputs);
    ordered_json nodes_j = ordered_json::object();
    for (int ph = 0; ph < 3; ++ph)
        nodes_j[phase_key(ph)] = bus_ids(m, mean.nodes[static_cast<std::size_t>(ph)]);
    doc["nodes"] = std::move(nodes_j);
    doc["scenario_count"] = static_cast<int>(samples.size());
    doc["warnings"] = corr.warnings;
    write_json_file(out_dir + "/sensitivity.json", doc);
}

SensitivityArtifacts load_sensitivity(const std::string& dir, const FeederModel& m) {
    const std::string meta_path = dir + "/sensitivity.json";
    const ordered_json doc = parse_json_file(meta_path);
    const ordered_json& outputs = req(doc, "outputs", meta_path);

    SensitivityArtifacts art;
    art.scenario_count = req(doc, "scenario_count", meta_path).get<int>();
    const ordered_json& params = req(req(doc, "manifest", meta_path), "params", meta_path);
    art.mean_vlsm.delta_q_kvar = req(params, "delta_q_kvar", meta_path).get<double>();
    art.corr.scenario_count = art.scenario_count;

    for (int ph = 0; ph < 3; ++ph) {
        for (const char* stem : {"vlsm_", "corr_"}) {
            const std::string name = std::string(stem) + phase_key(ph) + ".csv";
            const std::string path = dir + "/" + name;
            const auto it = outputs.find(name);
            if (it == outputs.end())
                throw DataError(meta_path + ": missing output record for " + name);
            if (it->get<std::string>() != hash_file(path))
                throw DataError(path + " does not match the hash recorded in " + meta_path +
                                "; re-run the sensitivity stage");
        }
        auto [vn, vq] = read_matrix_csv(dir + "/vlsm_" + phase_key(ph) + ".csv", m);
        auto [cn, cc] = read_matrix_csv(dir + "/corr_" + phase_key(ph) + ".csv", m);
        if (vn != cn)
            throw DataError(dir + ": vlsm and correlation node lists disagree on phase " +
                            phase_key(ph));
        art.mean_vlsm.nodes[static_cast<std::size_t>(ph)] = vn;
        art.mean_vlsm.q[static_cast<std::size_t>(ph)] = std::move(vq);
        art.corr.nodes[static_cast<std::size_t>(ph)] = std::move(vn);
        art.corr.c[static_cast<std::size_t>(ph)] = std::move(cc);
    }
    return art;
}

void partition_stage(const std::string& feeder_path, const std::string& sensitivity_dir,
                     double alpha, const std::string& out_path) {
    const FeederModel m = load_feeder_file(feeder_path);
    const std::string meta_path = sensitivity_dir + "/sensitivity.json";
    const ordered_json meta = parse_json_file(meta_path);
    require_fresh(meta, meta_path, "feeder", feeder_path, "the sensitivity stage");
    const SensitivityArtifacts art = load_sensitivity(sensitivity_dir, m);

    const ZonePartition part = build_partition(m, art.corr, alpha);

    ordered_json doc;
    ordered_json params;
    params["alpha"] = alpha;
    doc["manifest"] = manifest_block(
        {{"feeder", hash_file(feeder_path)}, {"sensitivity", hash_file(meta_path)}},
        std::move(params));
    ordered_json zones = ordered_json::object();
    for (int ph = 0; ph < 3; ++ph) {
        ordered_json arr = ordered_json::array();
        for (const IbrZone& z : part.ibr[static_cast<std::size_t>(ph)])
            arr.push_back(bus_ids(m, z.members));
        zones[phase_key(ph)] = std::move(arr);
    }
    doc["zones"] = std::move(zones);
    ordered_json vr = ordered_json::array();
    for (const VrZone& z : part.vr) {
        ordered_json e;
        e["device"] = z.device_id;
        e["phase"] = std::string(1, phase_char(z.phase));
        e["members"] = bus_ids(m, z.members);
        vr.push_back(std::move(e));
    }
    doc["vr_zones"] = std::move(vr);
    write_json_file(out_path, doc);
}

ZonePartition load_partition(const std::string& path, const FeederModel& m) {
    const ordered_json doc = parse_json_file(path);
    ZonePartition part;
    part.alpha = req(req(req(doc, "manifest", path), "params", path), "alpha", path).get<double>();
    part.nodes = load_nodes_by_phase(m);
    const ordered_json& zones = req(doc, "zones", path);
    for (int ph = 0; ph < 3; ++ph) {
        const ordered_json& arr = req(zones, phase_key(ph).c_str(), path);
        int k = 0;
        for (const auto& members : arr) {
            IbrZone z;
            z.index = k++;
            z.phase = static_cast<Phase>(ph);
            z.members = bus_indices(m, members, path);
            part.ibr[static_cast<std::size_t>(ph)].push_back(std::move(z));
        }
    }
    for (const auto& e : req(doc, "vr_zones", path)) {
        VrZone z;
        z.device_id = req(e, "device", path).get<std::string>();
        z.phase = parse_phase(req(e, "phase", path).get<std::string>());
        z.members = bus_indices(m, req(e, "members", path), path);
        part.vr.push_back(std::move(z));
    }
    return part;
}

void critical_stage(const std::string& feeder_path, const std::string& profiles_path,
                    const std::string& partition_path, const CriticalParams& p,
                    const std::string& out_path) {
    const FeederModel m = load_feeder_file(feeder_path);
    const ProfileSet profiles = load_profiles_file(profiles_path);
    check_profiles(m, profiles);
    const ordered_json pdoc = parse_json_file(partition_path);
    require_fresh(pdoc, partition_path, "feeder", feeder_path, "the partition stage");
    const ZonePartition part = load_partition(partition_path, m);

    const std::vector<MonitorGroup> groups = monitor_groups(part);
    const OccurrenceRecord rec =
        monte_carlo_extremes(m, groups, profiles, ScenarioWindow{}, p.runs, p.seed, p.workers);
    const CriticalNodeSet result = finalize(rec, groups, p.th_percent, p.delta_v_th);

    ordered_json doc;
    ordered_json params;
    params["runs"] = p.runs;
    params["th_percent"] = p.th_percent;
    params["delta_v_th"] = p.delta_v_th;
    params["seed"] = p.seed;
    doc["manifest"] = manifest_block({{"feeder", hash_file(feeder_path)},
                                      {"profiles", hash_file(profiles_path)},
                                      {"partition", hash_file(partition_path)}},
                                     std::move(params));
    doc["runs_kept"] = rec.runs;
    doc["runs_attempted"] = rec.attempted;
    doc["discarded"] = rec.discarded;
    ordered_json garr = ordered_json::array();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const CriticalGroupResult& r = result.groups[g];
        auto ids_at = [&](const std::vector<int>& positions) {
            std::vector<std::string> out;
            for (int pos : positions)
                out.push_back(
                    m.buses[static_cast<std::size_t>(groups[g].members[static_cast<std::size_t>(
                                pos)])].id);
            return out;
        };
        ordered_json e;
        e["label"] = groups[g].label;
        e["members"] = bus_ids(m, groups[g].members);
        e["count"] = r.count;
        e["x"] = ids_at(r.x);
        e["y"] = ids_at(r.y);
        e["accepted_y"] = ids_at(r.accepted_y);
        e["final"] = ids_at(r.final_set);
        garr.push_back(std::move(e));
    }
    doc["groups"] = std::move(garr);
    write_json_file(out_path, doc);
}

CriticalNodeSet load_critical(const std::string& path, const FeederModel& m,
                              const ZonePartition& part) {
    const ordered_json doc = parse_json_file(path);
    const std::vector<MonitorGroup> groups = monitor_groups(part);
    const ordered_json& garr = req(doc, "groups", path);
    if (garr.size() != groups.size())
        throw DataError(path + ": holds " + std::to_string(garr.size()) +
                        " groups but the partition defines " + std::to_string(groups.size()) +
                        "; re-run the critical-nodes stage");
    const ordered_json& params = req(req(doc, "manifest", path), "params", path);

    CriticalNodeSet out;
    out.th_percent = req(params, "th_percent", path).get<double>();
    out.delta_v_th = req(params, "delta_v_th", path).get<double>();
    out.runs = req(doc, "runs_kept", path).get<int>();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const ordered_json& e = garr[g];
        const std::string label = req(e, "label", path).get<std::string>();
        if (label != groups[g].label)
            throw DataError(path + ": group '" + label + "' does not match the partition " +
                            "(expected '" + groups[g].label + "'); re-run the critical-nodes " +
                            "stage");
        const std::vector<std::string> want = bus_ids(m, groups[g].members);
        if (req(e, "members", path).get<std::vector<std::string>>() != want)
            throw DataError(path + ": group '" + label + "' member list does not match the " +
                            "partition; re-run the critical-nodes stage");
        auto positions_of = [&](const char* key) {
            std::vector<int> pos;
            for (const auto& v : req(e, key, path)) {
                const std::string id = v.get<std::string>();
                const auto it = std::find(want.begin(), want.end(), id);
                if (it == want.end())
                    throw DataError(path + ": group '" + label + "' lists '" + id +
                                    "' which is not one of its members");
                pos.push_back(static_cast<int>(it - want.begin()));
            }
            return pos;
        };
        CriticalGroupResult r;
        r.count = req(e, "count", path).get<std::vector<int>>();
        if (r.count.size() != want.size())
            throw DataError(path + ": group '" + label + "' count list has the wrong length");
        r.x = positions_of("x");
        r.y = positions_of("y");
        r.accepted_y = positions_of("accepted_y");
        r.final_set = positions_of("final");
        out.groups.push_back(std::move(r));
    }
    return out;
}

void simulate_stage(const std::string& feeder_path, const std::string& profiles_path,
                    const std::string& sensitivity_dir, const std::string& partition_path,
                    const std::string& critical_path, const SimulationConfig& cfg,
                    const std::string& out_dir) {
    const FeederModel m = load_feeder_file(feeder_path);
    const ProfileSet profiles = load_profiles_file(profiles_path);
    check_profiles(m, profiles);

    const std::string meta_path = sensitivity_dir + "/sensitivity.json";
    const ordered_json smeta = parse_json_file(meta_path);
    require_fresh(smeta, meta_path, "feeder", feeder_path, "the sensitivity stage");
    require_fresh(smeta, meta_path, "profiles", profiles_path, "the sensitivity stage");
    const ordered_json pdoc = parse_json_file(partition_path);
    require_fresh(pdoc, partition_path, "feeder", feeder_path, "the partition stage");
    require_fresh(pdoc, partition_path, "sensitivity", meta_path, "the partition stage");
    const ordered_json cdoc = parse_json_file(critical_path);
    require_fresh(cdoc, critical_path, "feeder", feeder_path, "the critical-nodes stage");
    require_fresh(cdoc, critical_path, "partition", partition_path, "the critical-nodes stage");

    const SensitivityArtifacts art = load_sensitivity(sensitivity_dir, m);
    const ZonePartition part = load_partition(partition_path, m);
    const CriticalNodeSet critical = load_critical(critical_path, m, part);

    const SimulationResult res =
        run_simulation(m, part, critical, art.mean_vlsm, art.corr, profiles, cfg);

    fs::create_directories(out_dir);
    write_action_log(out_dir + "/actions.csv", res.actions);
    write_vr_events(out_dir + "/vr_events.csv", res.vr_events);
    csv::write_table_file(out_dir + "/trace.csv", res.trace);

    ordered_json doc;
    doc["manifest"] = manifest_block({{"feeder", hash_file(feeder_path)},
                                      {"profiles", hash_file(profiles_path)},
                                      {"sensitivity", hash_file(meta_path)},
                                      {"partition", hash_file(partition_path)},
                                      {"critical", hash_file(critical_path)}},
                                     simulation_params(cfg));
    ordered_json metrics;
    metrics["violations"] = res.metrics.violations;
    metrics["tap_changes"] = res.metrics.tap_changes;
    metrics["q_ibr_kvarh"] = res.metrics.q_ibr_kvarh;
    metrics["solves"] = res.metrics.solves;
    metrics["minutes"] = res.metrics.minutes;
    ordered_json tpd = ordered_json::object();
    for (std::size_t i = 0; i < m.regulators.size(); ++i)
        tpd[m.regulators[i].id] = res.metrics.taps_per_device[i];
    metrics["taps_per_device"] = std::move(tpd);
    ordered_json qpz = ordered_json::object();
    for (const auto& [label, kvarh] : res.metrics.q_per_zone) qpz[label] = kvarh;
    metrics["q_per_zone"] = std::move(qpz);
    metrics["warnings"] = res.metrics.warnings;
    doc["metrics"] = std::move(metrics);
    ordered_json outputs = ordered_json::object();
    for (const char* name : {"actions.csv", "vr_events.csv", "trace.csv"})
        outputs[name] = hash_file(out_dir + "/" + name);
    doc["outputs"] = std::move(outputs);
    write_json_file(out_dir + "/metrics.json", doc);
}

std::string report_stage(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
    fs::create_directories(out_dir);

    struct Row {
        std::string label;
        double margin = 0.0;
        long long violations = 0;
        long long tap_changes = 0;
        double q_ibr_kvarh = 0.0;
        int minutes = 0;
    };
    std::vector<Row> rows;
    std::string feeder_hash;
    std::vector<std::string> used_labels;

    for (const std::string& dir : run_dirs) {
        const std::string mpath = dir + "/metrics.json";
        const ordered_json doc = parse_json_file(mpath);
        const ordered_json& manifest = req(doc, "manifest", mpath);
        const std::string fh =
            req(req(manifest, "inputs", mpath), "feeder", mpath).get<std::string>();
        if (feeder_hash.empty())
            feeder_hash = fh;
        else if (fh != feeder_hash)
            throw DataError("run '" + dir + "' was simulated on a different feeder (hash " + fh +
                            " vs " + feeder_hash + "); report refuses to mix feeders");

        fs::path p(dir);
        std::string label = p.filename().string();
        if (label.empty()) label = p.parent_path().filename().string();
        while (std::find(used_labels.begin(), used_labels.end(), label) != used_labels.end())
            label += "_";
        used_labels.push_back(label);

        const ordered_json& params = req(manifest, "params", mpath);
        const ordered_json& metrics = req(doc, "metrics", mpath);
        Row r;
        r.label = label;
        r.margin = req(params, "margin", mpath).get<double>();
        r.violations = req(metrics, "violations", mpath).get<long long>();
        r.tap_changes = req(metrics, "tap_changes", mpath).get<long long>();
        r.q_ibr_kvarh = req(metrics, "q_ibr_kvarh", mpath).get<double>();
        r.minutes = req(metrics, "minutes", mpath).get<int>();
        rows.push_back(r);

        // Voltage envelope for Fig.-11-style plots: per minute, the extremes
        // over every traced voltage column.
        const std::string tpath = dir + "/trace.csv";
        if (fs::exists(tpath)) {
            const csv::Table trace = csv::read_table_file(tpath);
            csv::Table env;
            env.header = {"minute", "v_min", "v_max"};
            for (const auto& row : trace.rows) {
                double lo = 0.0, hi = 0.0;
                bool first = true;
                for (std::size_t c = 1; c < row.size(); ++c) {
                    if (first) {
                        lo = hi = row[c];
                        first = false;
                    } else {
                        lo = std::min(lo, row[c]);
                        hi = std::max(hi, row[c]);
                    }
                }
                if (!first) env.rows.push_back({row[0], lo, hi});
            }
            csv::write_table_file(out_dir + "/envelope_" + label + ".csv", env);
        }

        // Tap timeline: the tap events lifted out of the device log.
        const std::string vpath = dir + "/vr_events.csv";
        if (fs::exists(vpath)) {
            const std::string text = csv::read_text_file(vpath);
            std::string taps_csv = "t_seconds,device,tap\n";
            std::istringstream in(text);
            std::string line;
            std::getline(in, line); // header
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::vector<std::string> f;
                std::size_t start = 0;
                for (std::size_t i = 0; i <= line.size(); ++i)
                    if (i == line.size() || line[i] == ',') {
                        f.push_back(line.substr(start, i - start));
                        start = i + 1;
                    }
                if (f.size() == 7 && f[4] == "tap")
                    taps_csv += f[1] + "," + f[2] + "," + f[5] + "\n";
            }
            csv::write_text_file(out_dir + "/taps_" + label + ".csv", taps_csv);
        }

        // Per-zone reactive energy.
        std::string zones_csv = "zone,q_kvarh\n";
        for (const auto& [zlabel, kvarh] : req(metrics, "q_per_zone", mpath).items())
            zones_csv += zlabel + "," + csv::format_double(kvarh.get<double>()) + "\n";
        csv::write_text_file(out_dir + "/zones_" + label + ".csv", zones_csv);
    }

    std::string summary = "run,margin,violations,tap_changes,q_ibr_kvarh,minutes\n";
    for (const Row& r : rows)
        summary += r.label + "," + csv::format_double(r.margin) + "," +
                   std::to_string(r.violations) + "," + std::to_string(r.tap_changes) + "," +
                   csv::format_double(r.q_ibr_kvarh) + "," + std::to_string(r.minutes) + "\n";
    csv::write_text_file(out_dir + "/summary.csv", summary);

    std::ostringstream txt;
    txt << std::left << std::setw(20) << "run" << std::right << std::setw(10) << "margin"
        << std::setw(12) << "N_V" << std::setw(10) << "N_VR" << std::setw(16) << "Q_IBR_kvarh"
        << "\n";
    txt << std::string(68, '-') << "\n";
    for (const Row& r : rows) {
        txt << std::left << std::setw(20) << r.label << std::right << std::setw(10)
            << csv::format_double(r.margin) << std::setw(12) << r.violations << std::setw(10)
            << r.tap_changes << std::setw(16) << csv::format_double(r.q_ibr_kvarh) << "\n";
    }
    return txt.str();
}

} // namespace zvvc::pipeline
