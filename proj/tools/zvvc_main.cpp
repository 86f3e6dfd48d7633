// Command-line front door: chains the offline stages (validate, powerflow,
// sensitivity, partition, critical-nodes) into the online ones (simulate,
// report). Settings come from an optional JSON config document with one
// section per subcommand; command-line flags override the document; defaults
// fill whatever is left.
#include "zvvc/errors.hpp"
#include "zvvc/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json load_config(int argc, char** argv) {
    std::string path;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) path = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0) path = a.substr(9);
    }
    if (path.empty()) return ordered_json::object();
    ordered_json j =
        ordered_json::parse(zvvc::csv::read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw zvvc::ConfigError(path + ": not valid JSON");
    if (!j.is_object()) throw zvvc::ConfigError(path + ": config root must be an object");
    return j;
}

ordered_json section(const ordered_json& cfg, const char* name) {
    const auto it = cfg.find(name);
    return it == cfg.end() ? ordered_json::object() : *it;
}

template <typename T> void pick(const ordered_json& sect, const char* key, T& target) {
    const auto it = sect.find(key);
    if (it != sect.end()) target = it->get<T>();
}

zvvc::CorrelationMode parse_mode(const std::string& s) {
    if (s == "stacked") return zvvc::CorrelationMode::stacked;
    if (s == "per_scenario_mean") return zvvc::CorrelationMode::per_scenario_mean;
    throw zvvc::ConfigError("correlation mode must be 'stacked' or 'per_scenario_mean', got '" +
                            s + "'");
}

std::vector<zvvc::DeviceOverride> parse_overrides(const ordered_json& sect) {
    std::vector<zvvc::DeviceOverride> out;
    const auto it = sect.find("device_overrides");
    if (it == sect.end()) return out;
    for (const auto& e : *it) {
        zvvc::DeviceOverride o;
        const auto id = e.find("id");
        if (id == e.end()) throw zvvc::ConfigError("device override without an 'id'");
        o.id = id->get<std::string>();
        if (e.contains("v_set")) o.v_set = e["v_set"].get<double>();
        if (e.contains("deadband")) o.deadband = e["deadband"].get<double>();
        if (e.contains("time_delay")) o.time_delay = e["time_delay"].get<double>();
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    try {
        const ordered_json cfg = load_config(argc, argv);

        CLI::App app{"Two-stage zonal volt/var study pipeline"};
        app.require_subcommand(1);
        std::string config_path;
        app.add_option("--config", config_path, "JSON config document (per-subcommand sections)");

        std::string feeder, profiles, out, sensitivity_dir, partition_path, critical_path;
        std::vector<std::string> run_dirs;

        // --- validate -------------------------------------------------------
        auto* sv = app.add_subcommand("validate", "Parse and cross-check feeder and profiles");
        sv->add_option("--feeder", feeder, "feeder document")->required();
        sv->add_option("--profiles", profiles, "profile table (optional)");

        // --- powerflow ------------------------------------------------------
        const ordered_json pf_cfg = section(cfg, "powerflow");
        int pf_minute = 720;
        double pf_source = 1.0;
        pick(pf_cfg, "minute", pf_minute);
        pick(pf_cfg, "source_pu", pf_source);
        auto* sp = app.add_subcommand("powerflow", "One solve at a profile minute, voltages to CSV");
        sp->add_option("--feeder", feeder)->required();
        sp->add_option("--profiles", profiles)->required();
        sp->add_option("--minute", pf_minute, "profile minute to solve");
        sp->add_option("--source-pu", pf_source, "source voltage, pu");
        sp->add_option("--out", out, "output CSV path")->required();

        // --- sensitivity ----------------------------------------------------
        const ordered_json se_cfg = section(cfg, "sensitivity");
        zvvc::pipeline::SensitivityParams sparams;
        std::string mode_name = "stacked";
        pick(se_cfg, "scenarios", sparams.scenarios);
        pick(se_cfg, "delta_q_kvar", sparams.delta_q_kvar);
        pick(se_cfg, "seed", sparams.seed);
        pick(se_cfg, "window_start_minute", sparams.window.start_minute);
        pick(se_cfg, "window_end_minute", sparams.window.end_minute);
        pick(se_cfg, "correlation_mode", mode_name);
        pick(se_cfg, "workers", sparams.workers);
        auto* ss = app.add_subcommand("sensitivity",
                                      "Scenario sampling, sensitivity and correlation matrices");
        ss->add_option("--feeder", feeder)->required();
        ss->add_option("--profiles", profiles)->required();
        ss->add_option("--out", out, "output directory")->required();
        ss->add_option("--scenarios", sparams.scenarios, "number of sampled scenarios");
        ss->add_option("--delta-q", sparams.delta_q_kvar, "perturbation size, kvar");
        ss->add_option("--seed", sparams.seed, "scenario seed");
        ss->add_option("--window-start", sparams.window.start_minute, "sampling window start");
        ss->add_option("--window-end", sparams.window.end_minute, "sampling window end");
        ss->add_option("--mode", mode_name, "stacked | per_scenario_mean");
        ss->add_option("--workers", sparams.workers, "threads for the perturbed solves");

        // --- partition ------------------------------------------------------
        const ordered_json pa_cfg = section(cfg, "partition");
        double alpha = 0.96;
        pick(pa_cfg, "alpha", alpha);
        auto* spa = app.add_subcommand("partition", "Cluster load nodes into control zones");
        spa->add_option("--feeder", feeder)->required();
        spa->add_option("--sensitivity", sensitivity_dir, "sensitivity stage output dir")
            ->required();
        spa->add_option("--alpha", alpha, "correlation threshold (0, 1]");
        spa->add_option("--out", out, "partition document path")->required();

        // --- critical-nodes ---------------------------------------------------
        const ordered_json cr_cfg = section(cfg, "critical");
        zvvc::pipeline::CriticalParams cparams;
        pick(cr_cfg, "runs", cparams.runs);
        pick(cr_cfg, "th_percent", cparams.th_percent);
        pick(cr_cfg, "delta_v_th", cparams.delta_v_th);
        pick(cr_cfg, "seed", cparams.seed);
        pick(cr_cfg, "workers", cparams.workers);
        auto* sc = app.add_subcommand("critical-nodes",
                                      "Monte-Carlo extreme-voltage node identification");
        sc->add_option("--feeder", feeder)->required();
        sc->add_option("--profiles", profiles)->required();
        sc->add_option("--partition", partition_path)->required();
        sc->add_option("--runs", cparams.runs, "Monte-Carlo runs");
        sc->add_option("--th", cparams.th_percent, "occurrence threshold, percent");
        sc->add_option("--dvth", cparams.delta_v_th, "voltage-difference threshold, pu");
        sc->add_option("--seed", cparams.seed, "sampling seed");
        sc->add_option("--workers", cparams.workers, "threads for the runs");
        sc->add_option("--out", out, "critical-node document path")->required();

        // --- simulate ---------------------------------------------------------
        const ordered_json si_cfg = section(cfg, "simulate");
        zvvc::SimulationConfig sim;
        sim.horizon_minutes = 1440;
        pick(si_cfg, "tick_seconds", sim.tick_seconds);
        pick(si_cfg, "ibr_cadence_minutes", sim.ibr_cadence_minutes);
        pick(si_cfg, "vr_cadence_minutes", sim.vr_cadence_minutes);
        pick(si_cfg, "start_minute", sim.start_minute);
        pick(si_cfg, "horizon_minutes", sim.horizon_minutes);
        pick(si_cfg, "v2_max", sim.v2_max);
        pick(si_cfg, "v2_min", sim.v2_min);
        pick(si_cfg, "eps_u", sim.eps_u);
        pick(si_cfg, "eps_d", sim.eps_d);
        pick(si_cfg, "margin", sim.margin);
        pick(si_cfg, "alpha_scale", sim.alpha_scale);
        pick(si_cfg, "ansi_lo", sim.ansi_lo);
        pick(si_cfg, "ansi_hi", sim.ansi_hi);
        pick(si_cfg, "ibr_enabled", sim.ibr_enabled);
        pick(si_cfg, "vr_tuning_enabled", sim.vr_tuning_enabled);
        pick(si_cfg, "source_pu", sim.source_pu);
        sim.device_overrides = parse_overrides(si_cfg);
        bool no_ibr = false, no_vr_tuning = false;
        auto* ssim = app.add_subcommand("simulate", "Closed-loop quasi-static day run");
        ssim->add_option("--feeder", feeder)->required();
        ssim->add_option("--profiles", profiles)->required();
        ssim->add_option("--sensitivity", sensitivity_dir)->required();
        ssim->add_option("--partition", partition_path)->required();
        ssim->add_option("--critical", critical_path)->required();
        ssim->add_option("--out", out, "output directory")->required();
        ssim->add_option("--tick", sim.tick_seconds, "engine tick, seconds");
        ssim->add_option("--ibr-cadence", sim.ibr_cadence_minutes, "first-stage cadence, minutes");
        ssim->add_option("--vr-cadence", sim.vr_cadence_minutes, "second-stage cadence, minutes");
        ssim->add_option("--start", sim.start_minute, "start minute");
        ssim->add_option("--horizon", sim.horizon_minutes, "horizon, minutes");
        ssim->add_option("--margin", sim.margin, "coordination margin, pu");
        ssim->add_option("--v2-max", sim.v2_max, "second-stage upper limit, pu");
        ssim->add_option("--v2-min", sim.v2_min, "second-stage lower limit, pu");
        ssim->add_option("--alpha-scale", sim.alpha_scale, "reactive-ask scaling");
        ssim->add_option("--ansi-lo", sim.ansi_lo, "violation band low, pu");
        ssim->add_option("--ansi-hi", sim.ansi_hi, "violation band high, pu");
        ssim->add_option("--source-pu", sim.source_pu, "source voltage, pu");
        ssim->add_flag("--no-ibr", no_ibr, "disable the first stage");
        ssim->add_flag("--no-vr-tuning", no_vr_tuning, "freeze regulator setpoints (local mode)");

        // --- report -----------------------------------------------------------
        auto* sr = app.add_subcommand("report", "Aggregate simulate runs into a summary table");
        sr->add_option("--run", run_dirs, "simulate output directory (repeatable)")->required();
        sr->add_option("--out", out, "output directory")->required();

        CLI11_PARSE(app, argc, argv);

        if (*sv) {
            std::cout << zvvc::pipeline::validate_stage(feeder, profiles);
        } else if (*sp) {
            zvvc::pipeline::powerflow_stage(feeder, profiles, pf_minute, pf_source, out);
            std::cout << "wrote " << out << "\n";
        } else if (*ss) {
            sparams.mode = parse_mode(mode_name);
            zvvc::pipeline::sensitivity_stage(feeder, profiles, sparams, out);
            std::cout << "wrote " << out << "/sensitivity.json\n";
        } else if (*spa) {
            zvvc::pipeline::partition_stage(feeder, sensitivity_dir, alpha, out);
            std::cout << "wrote " << out << "\n";
        } else if (*sc) {
            zvvc::pipeline::critical_stage(feeder, profiles, partition_path, cparams, out);
            std::cout << "wrote " << out << "\n";
        } else if (*ssim) {
            if (no_ibr) sim.ibr_enabled = false;
            if (no_vr_tuning) sim.vr_tuning_enabled = false;
            zvvc::pipeline::simulate_stage(feeder, profiles, sensitivity_dir, partition_path,
                                           critical_path, sim, out);
            std::cout << "wrote " << out << "/metrics.json\n";
        } else if (*sr) {
            std::cout << zvvc::pipeline::report_stage(run_dirs, out);
        }
        return 0;
    } catch (const zvvc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
