"""Calibration batch 2: fig1b angle, referenced gradient recovery, C5/C6/C9
parameters, supp5-small property, CSS baseline."""
import sys, time, warnings
import numpy as np
from dataclasses import replace

warnings.filterwarnings("ignore")

from squeezelab import scans, estimators
from squeezelab.reproduce import (
    _array_config, _pair_config, _ramsey_spec, _gradient_config,
    ANCHOR_T_HOLD, GRADIENT_T_PER_UM,
)
from squeezelab.lattice import RegionSpec
from squeezelab.units import to_db

T0 = time.time()

def stamp(msg):
    print(f"[{time.time()-T0:7.1f}s] {msg}", flush=True)

# ---- G: noiseless linearity of expected dz vs t_int (analytic, cheap) ------
cfg = _gradient_config(100, 42)
t_holds = np.linspace(ANCHOR_T_HOLD, 3.0e-3, 7)
dzs = []
t_ints = []
for th in t_holds:
    c = scans._set_sequence(cfg, t_hold_s=float(th))
    phase = scans.working_point_phase_deg(c)
    dz = scans.expected_delta_z(c, phase)
    t_ints.append(th + (342e-6 - ANCHOR_T_HOLD))
    dzs.append(abs(dz))
t_arr = np.array(t_ints); d_arr = np.array(dzs)
slope = np.sum(t_arr*d_arr)/np.sum(t_arr**2)
res = d_arr - slope*t_arr
r2 = 1 - np.sum(res**2)/np.sum((d_arr-d_arr.mean())**2)
stamp(f"G noiseless linearity: slope {slope:.4f} /s  R2 {r2:.6f}")
stamp("   dz " + " ".join(f"{v:.5f}" for v in d_arr))

# ---- F: CSS baseline quick (M=300 version of C1) ---------------------------
css = _array_config(300, 1, loss_on=False)
css = replace(
    css,
    sequence={**css.sequence, "evolution_total_s": 0.0, "ideal_pulses": True},
)
rec = scans._records(css, 1)
sig = css.noise.detection_sigma
n_sites = rec[0].n_sites
full = tuple(range(n_sites))
split = (n_sites + 1) // 2
rel = estimators.xi2_rel(rec, RegionSpec((full[:split],)), RegionSpec((full[split:],)), sig)
direct = estimators.xi2_direct(rec, RegionSpec((full,)), sig)
stamp(f"F CSS baseline M=300: xi2_rel {rel.value:.4f} ({to_db(rel.value):+.3f} dB)  "
      f"xi2_direct {direct.value:.4f} ({to_db(direct.value):+.3f} dB)")

# ---- D: C6 fringe visibility at t_hold = 1 us ------------------------------
pc = _pair_config(150, 22)
pc = replace(pc, sequence=_ramsey_spec(1e-6, readout_ideal=False))
fr = scans.fringe_scan(pc, list(range(0, 331, 30)), workers=1)
stamp(f"D fringe t_hold=1us: V {fr.fit.visibility:.4f} +- {fr.fit.visibility_err:.4f} "
      f"offset {fr.fit.offset:+.4f} resid {fr.fit.residual_rms:.4f}")

# ---- A: fig1b tomography angle sweep ---------------------------------------
for alpha in (-12.0, -10.0, -8.0):
    c = _array_config(300, 11)
    c = replace(c, sequence={**c.sequence, "tomography_angle_deg": alpha})
    r = scans._records(c, 1)
    sig = c.noise.detection_sigma
    n_sites = r[0].n_sites
    full = tuple(range(n_sites))
    split = (n_sites + 1) // 2
    d = estimators.xi2_direct(r, RegionSpec((full,)), sig)
    rl = estimators.xi2_rel(r, RegionSpec((full[:split],)), RegionSpec((full[split:],)), sig)
    ndet = np.mean([rec.n_a_det.sum() + rec.n_b_det.sum() for rec in r])
    stamp(f"A alpha {alpha:+.0f}: xi2_direct {to_db(d.value):+.3f} dB  "
          f"xi2_rel {to_db(rl.value):+.3f} dB  n_det {ndet:.0f}")

# ---- C: C5 tomography stability across seeds (2 wells, loss off) -----------
angles = list(range(-90, 91, 15))
mins = []
for seed in (5, 6):
    c = _pair_config(150, seed, loss_on=False)
    ts = scans.tomography_scan(c, angles, workers=1, n_resamples=300)
    mins.append(ts.curve.alpha_min_deg)
    stamp(f"C seed {seed}: R2 {ts.curve.r_squared:.4f}  alpha_min {ts.curve.alpha_min_deg:+.2f} deg")
stamp(f"C min spread {abs(mins[0]-mins[1]):.2f} deg")

# ---- B: referenced gradient series (the C8 statistic) ----------------------
gc = _gradient_config(300, 42)
series = scans.gradient_series(
    gc, [ANCHOR_T_HOLD, 542e-6, 884e-6], visibility=0.98, n_resamples=300
)
for p in series.points:
    stamp(f"B t_int {p.t_int*1e6:6.0f}us phase {p.readout_phase_deg:+8.3f} "
          f"dz {p.mean_dz:+.5f}+-{p.sem_dz:.5f}  g {p.gradient*1e12:6.2f}+-{p.gradient_ci*1e12:.2f} pT/um")
stamp(f"B pooled: g {series.gradient_est*1e12:.2f} +- {series.gradient_ci*1e12:.2f} pT/um "
      f"(true {GRADIENT_T_PER_UM*1e12:.2f})  R2 {series.r_squared:.4f}  "
      f"baseline {series.baseline_um:.2f} um")

# ---- E: supp5-small property (long-term noise kills mean contrast) ---------
sc = _array_config(100, 51, n_sites=5)
sc = replace(
    sc,
    sequence=_ramsey_spec(ANCHOR_T_HOLD),
    noise=replace(sc.noise, longterm_enabled=True, block_size=5),
)
sens = scans.sensitivity_scan(sc, [ANCHOR_T_HOLD, 6e-3], workers=1, n_resamples=200)
for p in sens.points:
    stamp(f"E t_int {p.t_int*1e3:6.2f}ms  V_mean {p.mean_contrast:.4f}  "
          f"V_ss {p.single_shot_visibility:.4f}  sigma_B {p.sigma_b*1e12:7.1f} pT  "
          f"sql {p.sql*1e12:7.1f} pT")

stamp("batch 2 done")
