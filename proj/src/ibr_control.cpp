#include "zvvc/ibr_control.hpp"

#include "zvvc/errors.hpp"
#include "zvvc/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace zvvc {

void IbrControllerConfig::validate() const {
    if (!(v1_min < v1_max))
        throw ConfigError("first-stage limits: v1_min must be below v1_max");
    if (!(eps_u > 0) || !(eps_d > 0))
        throw ConfigError("first-stage return margins eps_u/eps_d must be > 0");
    if (!(v1_min + eps_d < v1_max - eps_u))
        throw ConfigError("first-stage return band is empty: v1_min + eps_d must stay below "
                          "v1_max - eps_u");
    if (!(alpha_scale > 0)) throw ConfigError("reactive-ask scaling alpha must be > 0");
    if (cadence_minutes < 1) throw ConfigError("first-stage cadence must be >= 1 minute");
}

const char* zone_mode_name(ZoneMode mode) {
    switch (mode) {
    case ZoneMode::idle: return "idle";
    case ZoneMode::correcting_over: return "correcting-over";
    case ZoneMode::correcting_under: return "correcting-under";
    case ZoneMode::resetting: return "resetting";
    }
    return "?";
}

std::optional<Violation> detect_violation(std::span<const double> v_hat,
                                          const IbrControllerConfig& cfg) {
    if (v_hat.empty()) throw ConfigError("violation test without critical-node measurements");
    const auto mm = kernels::minmax(v_hat);
    const bool over = mm.max_value >= cfg.v1_max;
    const bool under = mm.min_value <= cfg.v1_min;
    if (!over && !under) return std::nullopt;
    const double dv_over = mm.max_value - cfg.v1_max;
    const double dv_under = cfg.v1_min - mm.min_value;
    // Simultaneous over and under: a single ask cannot fix both, so act on
    // the larger excursion (ties go to over).
    if (over && (!under || dv_over >= dv_under))
        return Violation{true, static_cast<int>(mm.max_index), dv_over};
    return Violation{false, static_cast<int>(mm.min_index), dv_under};
}

double required_reactive(double delta_v, double q_rr, double alpha) {
    if (!(alpha > 0)) throw ConfigError("reactive-ask scaling alpha must be > 0");
    if (!(q_rr > 0))
        throw DataError("voltage sensitivity at the extreme node is not positive; "
                        "the sensitivity table is unusable here");
    return delta_v / (alpha * q_rr);
}

DispatchOutcome dispatch(double request_kvar, const std::vector<int>& priority,
                         std::span<const double> setpoints, std::span<const double> cap_kvar) {
    DispatchOutcome out;
    out.delta.assign(setpoints.size(), 0.0);
    double remaining = request_kvar;
    for (int slot : priority) {
        if (remaining == 0.0) break;
        const std::size_t i = static_cast<std::size_t>(slot);
        double give;
        if (remaining > 0) {
            give = std::min(remaining, cap_kvar[i] - setpoints[i]); // room to inject
        } else {
            give = std::max(remaining, -(setpoints[i] + cap_kvar[i])); // room to absorb
        }
        if (give == 0.0) continue;
        out.delta[i] = give;
        out.allocated += std::abs(give);
        remaining -= give;
    }
    out.depleted = remaining != 0.0;
    return out;
}

ZoneController::ZoneController(const FeederModel& m, Phase phase, int zone_index,
                               std::vector<int> critical_buses, std::vector<int> pv_indices,
                               const VlsmQ& vlsm, const CorrelationMatrix& corr,
                               IbrControllerConfig cfg)
    : phase_(phase),
      zone_index_(zone_index),
      critical_(std::move(critical_buses)),
      pv_indices_(std::move(pv_indices)),
      cfg_(cfg) {
    cfg_.validate();
    if (critical_.empty())
        throw ConfigError("zone controller needs at least one critical node");
    if (pv_indices_.empty())
        throw ConfigError("zone controller needs at least one inverter");
    std::sort(pv_indices_.begin(), pv_indices_.end());

    const std::size_t p = static_cast<std::size_t>(static_cast<int>(phase));
    const std::vector<int>& nodes = corr.nodes[p];
    if (vlsm.nodes[p] != nodes)
        throw ConfigError("sensitivity and correlation tables disagree on the node set");
    n_nodes_ = nodes.size();
    corr_ = corr.c[p];
    diag_q_.resize(n_nodes_);
    for (std::size_t i = 0; i < n_nodes_; ++i)
        diag_q_[i] = vlsm.q[p][i * n_nodes_ + i];

    auto node_pos = [&](int bus, const char* what) {
        const auto it = std::lower_bound(nodes.begin(), nodes.end(), bus);
        if (it == nodes.end() || *it != bus)
            throw ConfigError(std::string(what) + " bus #" + std::to_string(bus) +
                              " is not a load node on phase " +
                              std::string(1, phase_char(phase)));
        return static_cast<int>(it - nodes.begin());
    };
    for (int b : critical_) critical_node_pos_.push_back(node_pos(b, "critical"));
    for (int pvi : pv_indices_) {
        const PvSystem& pv = m.pvs[static_cast<std::size_t>(pvi)];
        if (pv.phase != phase)
            throw ConfigError("inverter at " + pv.bus + " is on the wrong phase for this zone");
        pv_node_pos_.push_back(node_pos(pv.bus_index, "inverter"));
        pv_kva_.push_back(pv.inverter_kva());
    }
    setpoints_.assign(pv_indices_.size(), 0.0);
}

std::vector<double> ZoneController::capabilities(std::span<const double> pv_p_kw) const {
    std::vector<double> cap(pv_kva_.size());
    for (std::size_t i = 0; i < pv_kva_.size(); ++i) {
        const double head = pv_kva_[i] * pv_kva_[i] - pv_p_kw[i] * pv_p_kw[i];
        cap[i] = head > 0 ? std::sqrt(head) : 0.0;
    }
    return cap;
}

void ZoneController::rebuild_priority(int r_node_pos) {
    if (priority_for_ == r_node_pos) return;
    priority_for_ = r_node_pos;
    priority_.resize(pv_indices_.size());
    for (std::size_t i = 0; i < priority_.size(); ++i) priority_[i] = static_cast<int>(i);
    std::stable_sort(priority_.begin(), priority_.end(), [&](int a, int b) {
        const double ca = corr_[static_cast<std::size_t>(pv_node_pos_[static_cast<std::size_t>(a)]) *
                                    n_nodes_ +
                                static_cast<std::size_t>(r_node_pos)];
        const double cb = corr_[static_cast<std::size_t>(pv_node_pos_[static_cast<std::size_t>(b)]) *
                                    n_nodes_ +
                                static_cast<std::size_t>(r_node_pos)];
        return ca > cb; // stable: equal correlations keep ascending bus order
    });
}

IbrStepResult ZoneController::step(std::span<const double> critical_v,
                                   std::span<const double> pv_p_kw) {
    IbrStepResult res;
    if (critical_v.empty()) {
        // Measurements missing: hold the last setpoints and flag it.
        res.telemetry_flag = true;
        res.mode = mode_;
        return res;
    }
    if (critical_v.size() != critical_.size())
        throw ConfigError("got " + std::to_string(critical_v.size()) +
                          " critical voltages for " + std::to_string(critical_.size()) +
                          " critical nodes");
    if (pv_p_kw.size() != pv_indices_.size())
        throw ConfigError("got " + std::to_string(pv_p_kw.size()) + " inverter outputs for " +
                          std::to_string(pv_indices_.size()) + " inverters");

    const auto violation = detect_violation(critical_v, cfg_);
    if (violation) {
        const int r_pos = critical_node_pos_[static_cast<std::size_t>(violation->index)];
        rebuild_priority(r_pos);
        const double mag = required_reactive(violation->delta_v,
                                             diag_q_[static_cast<std::size_t>(r_pos)],
                                             cfg_.alpha_scale);
        const double request = violation->over ? -mag : mag;
        const auto caps = capabilities(pv_p_kw);
        const auto outcome = dispatch(request, priority_, setpoints_, caps);
        for (std::size_t i = 0; i < outcome.delta.size(); ++i) {
            if (outcome.delta[i] == 0.0) continue;
            setpoints_[i] += outcome.delta[i];
            res.actions.push_back(
                {pv_indices_[i], outcome.delta[i], setpoints_[i], "dispatch"});
        }
        mode_ = violation->over ? ZoneMode::correcting_over : ZoneMode::correcting_under;
        res.mode = mode_;
        res.depleted = outcome.depleted;
        res.extreme_bus = critical_[static_cast<std::size_t>(violation->index)];
        res.requested_kvar = request;
        return res;
    }

    bool any = false;
    for (double s : setpoints_)
        if (s != 0.0) any = true;
    if (!any) {
        mode_ = ZoneMode::idle;
        res.mode = mode_;
        return res;
    }

    const auto mm = kernels::minmax(critical_v);
    const bool in_reset_band =
        mm.max_value <= cfg_.v1_max - cfg_.eps_u && mm.min_value >= cfg_.v1_min + cfg_.eps_d;
    if (!in_reset_band) {
        // Idle band between the return band edge and the limit: hold.
        res.mode = mode_;
        return res;
    }

    // Release toward unity power factor, sized so the predicted voltage move
    // stays inside the return band (never bouncing back out), walking the
    // priority list in reverse so the last-dispatched inverter lets go first.
    double net = 0.0;
    for (double s : setpoints_) net += s;
    double amount; // |kvar| to release
    if (net < 0) {
        // Absorbing (over-voltage history): releasing raises the maximum.
        const int r_pos = critical_node_pos_[mm.max_index];
        rebuild_priority(r_pos);
        const double q_rr = diag_q_[static_cast<std::size_t>(r_pos)];
        const double ask = required_reactive(cfg_.v1_max - mm.max_value, q_rr, cfg_.alpha_scale);
        const double safe = ((cfg_.v1_max - cfg_.eps_u) - mm.max_value) / q_rr;
        amount = std::min(ask, safe);
        res.extreme_bus = critical_[mm.max_index];
    } else if (net > 0) {
        // Injecting (under-voltage history): releasing lowers the minimum.
        const int r_pos = critical_node_pos_[mm.min_index];
        rebuild_priority(r_pos);
        const double q_rr = diag_q_[static_cast<std::size_t>(r_pos)];
        const double ask = required_reactive(mm.min_value - cfg_.v1_min, q_rr, cfg_.alpha_scale);
        const double safe = (mm.min_value - (cfg_.v1_min + cfg_.eps_d)) / q_rr;
        amount = std::min(ask, safe);
        res.extreme_bus = critical_[mm.min_index];
    } else {
        // Balanced leftovers (only possible after opposing corrections):
        // their voltage effects cancel, so drain them outright.
        amount = 0.0;
        for (double s : setpoints_) amount += std::abs(s);
    }
    if (amount <= 0.0) {
        res.mode = mode_;
        return res;
    }
    res.requested_kvar = amount;

    double remaining = amount;
    for (auto it = priority_.rbegin(); it != priority_.rend() && remaining > 0.0; ++it) {
        const std::size_t i = static_cast<std::size_t>(*it);
        if (setpoints_[i] == 0.0) continue;
        const double d = std::min(remaining, std::abs(setpoints_[i]));
        const double delta = setpoints_[i] < 0 ? d : -d; // toward zero
        setpoints_[i] += delta;
        remaining -= d;
        res.actions.push_back({pv_indices_[i], delta, setpoints_[i], "release"});
    }
    bool cleared = true;
    for (double s : setpoints_)
        if (s != 0.0) cleared = false;
    mode_ = cleared ? ZoneMode::idle : ZoneMode::resetting;
    res.mode = mode_;
    return res;
}

std::vector<IbrAction> ZoneController::apply_capability(std::span<const double> pv_p_kw) {
    if (pv_p_kw.size() != pv_indices_.size())
        throw ConfigError("got " + std::to_string(pv_p_kw.size()) + " inverter outputs for " +
                          std::to_string(pv_indices_.size()) + " inverters");
    std::vector<IbrAction> actions;
    const auto caps = capabilities(pv_p_kw);
    for (std::size_t i = 0; i < setpoints_.size(); ++i) {
        double clamped = setpoints_[i];
        if (clamped > caps[i]) clamped = caps[i];
        if (clamped < -caps[i]) clamped = -caps[i];
        if (clamped != setpoints_[i]) {
            actions.push_back({pv_indices_[i], clamped - setpoints_[i], clamped, "clamp"});
            setpoints_[i] = clamped;
        }
    }
    return actions;
}

} // namespace zvvc
