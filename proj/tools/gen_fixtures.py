#!/usr/bin/env python3
"""Regenerates everything under fixtures/.  The bundled artifacts are frozen;
rerun this only when deliberately rebasing the fixture set, then re-pin any
test expectations that depend on the day profile."""
import json
import math
import os

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")
os.makedirs(OUT, exist_ok=True)

# ---------------------------------------------------------------- profiles
def bell(t, t0, w):
    return math.exp(-((t - t0) / w) ** 2)

# One sun for the whole feeder: a clear-sky bell with passing clouds.  The
# dips are what make the local-control base case chase its tail all day.
CLOUDS = [(598, 12, 0.42), (642, 10, 0.30), (689, 14, 0.48), (731, 11, 0.28),
          (768, 16, 0.52), (812, 10, 0.33), (851, 13, 0.40), (897, 11, 0.28),
          (941, 14, 0.45), (986, 10, 0.30), (1031, 12, 0.26)]

def sun(t):
    s = bell(t, 755, 190)
    shade = sum(d * bell(t, t0, w) for t0, w, d in CLOUDS)
    return max(0.0, s * max(0.25, 1.0 - shade))

# Loads run light outside business hours on purpose: the long rural trunk
# sags hard per MW, and an evening that rivals midday would drown the PV
# story in under-voltage.  Industrial and commercial follow the working day.
rows = []
for t in range(1440):
    wig = math.sin(2 * math.pi * t / 97.0)
    res_a = 7 + 8 * bell(t, 470, 110) + 4 * bell(t, 1100, 150) + 0.8 * wig
    res_b = 5.5 + 6 * bell(t, 455, 100) + 3 * bell(t, 1110, 160) + 0.7 * wig
    com_a = 4.5 + 68 * bell(t, 780, 210) + 1.2 * wig
    ind_a = 3 + 26 * bell(t, 800, 280) + 1.5 * math.sin(2 * math.pi * t / 311.0)
    res_s = 2.5 + 3 * bell(t, 470, 110) + 1.5 * bell(t, 1100, 150) + 0.4 * wig
    res_m = 3.0 + 3.4 * bell(t, 470, 110) + 1.3 * bell(t, 1100, 150) + 0.5 * wig
    lat_s = 2.2 + 2 * bell(t, 460, 105) + 1.5 * bell(t, 1110, 160) + 0.3 * wig
    s = sun(t)
    pv_40 = max(0.0, 38 * (s - 0.02))
    pv_100 = max(0.0, 95 * (s - 0.02))
    pv_80 = max(0.0, 76 * (s - 0.02))
    pv_125 = max(0.0, 118 * (s - 0.02))
    pv_160 = max(0.0, 152 * (s - 0.02))
    pv_200 = max(0.0, 190 * (s - 0.02))
    pv_250 = max(0.0, 238 * (s - 0.02))
    pv_320 = max(0.0, 304 * (s - 0.02))
    pv_400 = max(0.0, 380 * (s - 0.02))
    kvar_ind = 1.5 + 8 * bell(t, 800, 280) + 1.0 * math.sin(2 * math.pi * t / 233.0)
    rows.append([res_a, res_b, com_a, ind_a, res_s, res_m, lat_s,
                 pv_40, pv_80, pv_100, pv_125, pv_160, pv_200, pv_250, pv_320, pv_400, kvar_ind])

hdr = ("minute,res_a,res_b,com_a,ind_a,res_s,res_m,lat_s,"
       "pv_40,pv_80,pv_100,pv_125,pv_160,pv_200,pv_250,pv_320,pv_400,kvar_ind")
with open(f"{OUT}/profiles_day.csv", "w") as f:
    f.write(hdr + "\n")
    for t, r in enumerate(rows):
        f.write(str(t) + "," + ",".join(f"{v:.3f}" for v in r) + "\n")

# ---------------------------------------------------------------- impedances
def zmat3(zs, zm1, zm2):
    return [
        [list(zs), list(zm1), list(zm2)],
        [list(zm1), list(zs), list(zm1)],
        [list(zm2), list(zm1), list(zs)],
    ]

Z_TRUNK = zmat3((0.42, 0.48), (0.02, 0.06), (0.02, 0.05))
Z_LAT3 = zmat3((0.55, 0.68), (0.04, 0.07), (0.04, 0.06))
Z_LAT1 = [[[0.70, 0.72]]]
Z_REG = zmat3((0.01, 0.03), (0.0, 0.01), (0.0, 0.01))  # short regulator segment

# ---------------------------------------------------------------- feeder2
feeder2 = {
    "source": "src",
    "nominal_kv_ln": 2.4,
    "buses": [
        {"id": "src", "phases": "abc"},
        {"id": "b1", "phases": "abc"},
    ],
    "lines": [
        {"from": "src", "to": "b1", "phases": "abc", "length_km": 1.0,
         "z_ohm_per_km": Z_TRUNK},
    ],
    "regulators": [],
    "loads": [
        {"bus": "b1", "phase": "a", "profile": "res_a", "power_factor": 0.95},
        {"bus": "b1", "phase": "b", "profile": "res_b", "power_factor": 0.95},
        {"bus": "b1", "phase": "c", "profile": "com_a", "power_factor": 0.92},
    ],
    "pv": [
        {"bus": "b1", "phase": "a", "rated_kw": 80, "profile": "pv_80"},
    ],
}
with open(f"{OUT}/feeder2.json", "w") as f:
    json.dump(feeder2, f, indent=2)
    f.write("\n")

# ---------------------------------------------------------------- feeder13
buses13 = [{"id": "sub", "phases": "abc"}]
for i in range(1, 8):
    buses13.append({"id": f"b{i:02d}", "phases": "abc"})
buses13 += [
    {"id": "b08", "phases": "a"},
    {"id": "b09", "phases": "a"},
    {"id": "b10", "phases": "b"},
    {"id": "b11", "phases": "abc"},
    {"id": "b12", "phases": "abc"},
    {"id": "b13", "phases": "c"},
]
lines13 = [
    {"from": "sub", "to": "b01", "phases": "abc", "length_km": 0.05, "z_ohm_per_km": Z_REG},
    {"from": "b01", "to": "b02", "phases": "abc", "length_km": 0.6, "z_ohm_per_km": Z_TRUNK},
    {"from": "b02", "to": "b03", "phases": "abc", "length_km": 0.6, "z_ohm_per_km": Z_TRUNK},
    {"from": "b03", "to": "b04", "phases": "abc", "length_km": 0.6, "z_ohm_per_km": Z_TRUNK},
    {"from": "b04", "to": "b05", "phases": "abc", "length_km": 0.6, "z_ohm_per_km": Z_TRUNK},
    {"from": "b05", "to": "b06", "phases": "abc", "length_km": 0.6, "z_ohm_per_km": Z_TRUNK},
    {"from": "b06", "to": "b07", "phases": "abc", "length_km": 0.05, "z_ohm_per_km": Z_REG},
    {"from": "b03", "to": "b08", "phases": "a", "length_km": 0.5, "z_ohm_per_km": Z_LAT1},
    {"from": "b08", "to": "b09", "phases": "a", "length_km": 0.5, "z_ohm_per_km": Z_LAT1},
    {"from": "b04", "to": "b10", "phases": "b", "length_km": 0.4, "z_ohm_per_km": Z_LAT1},
    {"from": "b07", "to": "b11", "phases": "abc", "length_km": 0.5, "z_ohm_per_km": Z_LAT3},
    {"from": "b11", "to": "b12", "phases": "abc", "length_km": 0.5, "z_ohm_per_km": Z_LAT3},
    {"from": "b05", "to": "b13", "phases": "c", "length_km": 0.4, "z_ohm_per_km": Z_LAT1},
]
regs13 = [
    {"id": "oltc_a", "from": "sub", "to": "b01", "phase": "a", "v_set": 123, "deadband": 4,
     "time_delay": 30, "substation_oltc": True},
    {"id": "oltc_b", "from": "sub", "to": "b01", "phase": "b", "v_set": 123, "deadband": 4,
     "time_delay": 30, "substation_oltc": True},
    {"id": "oltc_c", "from": "sub", "to": "b01", "phase": "c", "v_set": 123, "deadband": 4,
     "time_delay": 30, "substation_oltc": True},
    {"id": "svr1", "from": "b06", "to": "b07", "phase": "c", "v_set": 123, "deadband": 4,
     "time_delay": 45},
]
loads13 = []
pf = {"a": 0.95, "b": 0.95, "c": 0.92}
prof = {"a": "res_a", "b": "res_b", "c": "com_a"}
for bid in ["b02", "b03", "b04", "b05", "b06", "b11", "b12"]:
    for ph in "abc":
        loads13.append({"bus": bid, "phase": ph, "profile": prof[ph], "power_factor": pf[ph]})
loads13 += [
    {"bus": "b08", "phase": "a", "profile": "res_a", "power_factor": 0.95},
    {"bus": "b09", "phase": "a", "profile": "res_a", "power_factor": 0.95},
    {"bus": "b10", "phase": "b", "profile": "ind_a", "kvar_profile": "kvar_ind"},
    {"bus": "b13", "phase": "c", "profile": "com_a", "power_factor": 0.92},
]
pv13 = [
    {"bus": "b09", "phase": "a", "rated_kw": 60, "profile": "pv_80"},
    {"bus": "b12", "phase": "a", "rated_kw": 125, "profile": "pv_125"},
    {"bus": "b12", "phase": "b", "rated_kw": 125, "profile": "pv_125"},
    {"bus": "b12", "phase": "c", "rated_kw": 125, "profile": "pv_125"},
    {"bus": "b13", "phase": "c", "rated_kw": 80, "profile": "pv_80"},
]
feeder13 = {"source": "sub", "nominal_kv_ln": 2.4, "buses": buses13, "lines": lines13,
            "regulators": regs13, "loads": loads13, "pv": pv13}
with open(f"{OUT}/feeder13.json", "w") as f:
    json.dump(feeder13, f, indent=2)
    f.write("\n")

# ---------------------------------------------------------------- highpv
# Long rural trunk with a substation OLTC bank, a mid-feeder SVR bank at
# t20->t21, and the PV concentrated toward the tail so the midday voltage
# profile tilts hard.  Lateral chains carry load only; they fill out the bus
# count without hosting voltage extremes of their own.
NT = 40  # trunk buses t01..t40; t01 and t21 are regulator secondaries
buses = [{"id": "sub", "phases": "abc"}]
lines = []
for i in range(1, NT + 1):
    buses.append({"id": f"t{i:02d}", "phases": "abc"})
lines.append({"from": "sub", "to": "t01", "phases": "abc", "length_km": 0.05,
              "z_ohm_per_km": Z_REG})
for i in range(1, NT):
    frm, to = f"t{i:02d}", f"t{i + 1:02d}"
    seg = {"from": frm, "to": to, "phases": "abc", "length_km": 0.35, "z_ohm_per_km": Z_TRUNK}
    if frm == "t20":  # regulator segment mid-feeder
        seg["length_km"] = 0.05
        seg["z_ohm_per_km"] = Z_REG
    lines.append(seg)

# The head of the feeder stays pure trunk (its extremes pin to the segment
# ends); bus count comes from chains hung deep enough that their shared path
# to the source keeps them correlated with the trunk.  One chain (t26) is
# long and heavy on purpose: its tip is where the feeder's low voltage lives.
laterals = [
    ("t11", 5, "lat_s", 0.08), ("t13", 8, "lat_s", 0.08), ("t26", 14, "res_m", 0.25),
    ("t30", 6, "lat_s", 0.15), ("t33", 8, "lat_s", 0.15),
]
lat_profile = {}
for root, n, prof_name, hop_km in laterals:
    prev = root
    for j in range(1, n + 1):
        bid = f"{root}l{j}"
        buses.append({"id": bid, "phases": "abc"})
        lines.append({"from": prev, "to": bid, "phases": "abc", "length_km": hop_km,
                      "z_ohm_per_km": Z_LAT3})
        lat_profile[bid] = prof_name
        prev = bid

regs = []
for ph in "abc":
    regs.append({"id": f"oltc_{ph}", "from": "sub", "to": "t01", "phase": ph, "v_set": 123,
                 "deadband": 4, "time_delay": 30, "substation_oltc": True})
for ph in "abc":
    regs.append({"id": f"svr_{ph}", "from": "t20", "to": "t21", "phase": ph, "v_set": 123,
                 "deadband": 3, "time_delay": 45})

loads = []
pfv = {"res_a": 0.95, "res_b": 0.95, "com_a": 0.92, "ind_a": 0.90,
       "res_s": 0.95, "res_m": 0.95, "lat_s": 0.95}
# Commercial load lives upstream of the SVR; downstream is residential, so the
# tail is light exactly when the sun is high.  Cycle length 7 is coprime with
# the phase count, so every profile visits every phase instead of one phase
# collecting all of the reactive-heavy industrial load.
cycle_z2 = ["res_a", "res_b", "com_a", "res_a", "ind_a", "res_b", "com_a"]
cycle_z3 = ["res_a", "res_b", "res_a", "ind_a", "res_b", "res_a", "res_b"]
k = 0
for b in buses:
    bid = b["id"]
    if bid in ("sub", "t01", "t21"):
        continue  # keep regulator secondaries load-free
    for ph in b["phases"]:
        if bid in lat_profile:
            p = lat_profile[bid]
        else:
            cyc = cycle_z2 if bid <= "t20" else cycle_z3
            p = cyc[k % len(cyc)]
        k += 1
        if p == "ind_a" and ph == "b":
            loads.append({"bus": bid, "phase": ph, "profile": p, "kvar_profile": "kvar_ind"})
        else:
            loads.append({"bus": bid, "phase": ph, "profile": p, "power_factor": pfv[p]})

pv = []
pv_sites = [
    # light sprinkle upstream of the SVR; deliberately generous inverters so
    # the sparse mid-feeder fleet still has reactive headroom at full sun
    ("t06", 40, "pv_40", 1.30), ("t12", 40, "pv_40", 1.30),
    ("t16", 40, "pv_40", 1.30), ("t19", 80, "pv_80", 1.30),
    # mid-tail adopters
    ("t23", 125, "pv_125", 1.15), ("t25", 160, "pv_160", 1.15),
    ("t27", 125, "pv_125", 1.15), ("t29", 160, "pv_160", 1.15),
    ("t31", 125, "pv_125", 1.15), ("t33", 160, "pv_160", 1.15),
    ("t35", 200, "pv_200", 1.15),
    # the tail cluster: ratings grow toward the end of the feeder, and the
    # interconnection study sized these plants for volt/var duty
    ("t36", 250, "pv_250", 1.25), ("t37", 250, "pv_250", 1.25),
    ("t38", 320, "pv_320", 1.25), ("t39", 320, "pv_320", 1.25),
    ("t40", 400, "pv_400", 1.25),
]
for bid, kw, prf, ovr in pv_sites:
    for ph in "abc":
        pv.append({"bus": bid, "phase": ph, "rated_kw": kw, "profile": prf,
                   "oversize_factor": ovr})

highpv = {"source": "sub", "nominal_kv_ln": 7.2, "buses": buses, "lines": lines,
          "regulators": regs, "loads": loads, "pv": pv}
with open(f"{OUT}/highpv.json", "w") as f:
    json.dump(highpv, f, indent=2)
    f.write("\n")
print("buses:", len(buses), "lines:", len(lines), "loads:", len(loads), "pv:", len(pv))

# ---------------------------------------------------------------- configs
config_base = {
    "sensitivity": {"scenarios": 200, "delta_q_kvar": 10, "seed": 11,
                    "window_start_minute": 540, "window_end_minute": 1200,
                    "correlation_mode": "stacked", "workers": 4},
    "partition": {"alpha": 0.80},
    "critical": {"runs": 3000, "th_percent": 5, "delta_v_th": 0.004, "seed": 23, "workers": 4},
    "simulate": {"tick_seconds": 15, "ibr_cadence_minutes": 1, "vr_cadence_minutes": 2,
                 "start_minute": 0, "horizon_minutes": 1440, "v2_max": 1.049, "v2_min": 0.96,
                 "eps_u": 0.001, "eps_d": 0.001, "margin": 0.0, "alpha_scale": 0.6,
                 "ansi_lo": 0.95, "ansi_hi": 1.05, "ibr_enabled": False,
                 "vr_tuning_enabled": False, "source_pu": 1.0},
}
config_coord = json.loads(json.dumps(config_base))
config_coord["simulate"].update({
    "margin": 0.004, "ibr_enabled": True, "vr_tuning_enabled": True,
    "eps_u": 0.004, "eps_d": 0.004,
    "device_overrides": [
        {"id": "oltc_a", "time_delay": 75, "deadband": 5.0},
        {"id": "oltc_b", "time_delay": 75, "deadband": 5.0},
        {"id": "oltc_c", "time_delay": 75, "deadband": 5.0},
        {"id": "svr_a", "time_delay": 90, "deadband": 5.0},
        {"id": "svr_b", "time_delay": 90, "deadband": 5.0},
        {"id": "svr_c", "time_delay": 105, "deadband": 5.0},
    ],
})
with open(f"{OUT}/config_base.json", "w") as f:
    json.dump(config_base, f, indent=2)
    f.write("\n")
with open(f"{OUT}/config_coordinated.json", "w") as f:
    json.dump(config_coord, f, indent=2)
    f.write("\n")
print("fixtures written")
