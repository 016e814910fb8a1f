import math, time, warnings
import numpy as np
from dataclasses import replace
from squeezelab import scans
from squeezelab.config import RunConfig, EnvironmentConfig
from squeezelab.lattice import AtomNumberLaw, LatticeConfig, halves
from squeezelab.magnetometry import T_PI_SWAP, GradiometerGeometry, delta_b
from squeezelab.pipeline import prepare_run
warnings.simplefilter("ignore")

t_hold = 342e-6 - 2*T_PI_SWAP
law = AtomNumberLaw(kind="uniform", low=392, high=592)
t0 = time.time()

cfg3 = RunConfig(
    lattice=LatticeConfig(n_sites=25, atom_number_law=law),
    sequence={"kind": "ramsey", "t_hold_s": t_hold, "readout_phase_deg": 90.0,
              "readout_ideal": True},
    n_shots=300, master_seed=42,
)
cfg3 = replace(cfg3, loss=replace(cfg3.loss, enabled=True))
sp = scans.sensitivity_point(cfg3, t_hold, n_resamples=150)
db = 20*math.log10(sp.sigma_b/sp.sql)
print(f"fig3b rot75.5 ideal-readout: sigma_b {sp.sigma_b*1e12:.1f} pT (ci {sp.ci*1e12:.1f}) sql {sp.sql*1e12:.1f} "
      f"ratio {sp.sigma_b/sp.sql:.3f} ({db:+.2f} dB) V {sp.mean_contrast:.4f} Vss {sp.single_shot_visibility:.4f} "
      f"n_det {sp.n_detected:.0f} [{time.time()-t0:.0f}s]", flush=True)

cfg4 = replace(cfg3, environment=EnvironmentConfig(gradient=19.6e-12))
phase = scans.working_point_phase_deg(cfg4)
dz_exp = scans.expected_delta_z(cfg4, phase)
print(f"fig4 working phase {phase:.3f}, expected dz {dz_exp:+.5f}", flush=True)
records = scans._records(scans._set_readout_phase(cfg4, phase), 1)
prep = prepare_run(cfg4)
params = replace(cfg4.protocol, t_hold=t_hold, visibility=sp.mean_contrast)
pair = halves(25)
dz = scans._delta_z(records, pair)
geom = GradiometerGeometry.from_regions(list(prep.sites), pair)
mean_dz = float(np.mean(dz)); sem = float(np.std(dz)/math.sqrt(len(dz)))
g_rec = delta_b(abs(mean_dz), params)/geom.baseline_um
g_hi = delta_b(abs(mean_dz)+sem, params)/geom.baseline_um
print(f"recovery: mean_dz {mean_dz:+.5f}+-{sem:.5f}  g {g_rec*1e12:.2f} +- {(g_hi-g_rec)*1e12:.2f} pT/um (true 19.60) [{time.time()-t0:.0f}s]", flush=True)

bs = scans.baseline_scan(records, list(prep.sites), params)
print(f"exponent {bs.exponent:.3f} +- {bs.exponent_err:.3f}")
for p in bs.points:
    if p.kind == "summed" and p.baseline_um > 30:
        print(f"  d={p.baseline_um:5.1f}um  sigma {p.sigma_grad*1e12:6.2f} pT/um  sql {p.sql_grad*1e12:6.2f}  enh {p.enhancement:+.3f}")
print(f"DONE [{time.time()-t0:.0f}s]", flush=True)
