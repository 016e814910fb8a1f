"""End-to-end shot pipeline: seeded simulation, persistence, and analysis.

Every random draw in a run comes from a substream keyed by
(master_seed, purpose, shot, site), so shot i is the same no matter how many
workers run the pool or in which order shots complete.  Outputs are a CSV of
per-site detected populations, a JSON sidecar of per-shot noise draws, and a
manifest that is written before shots stream and completed (with content
hashes) on success.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, rng as streams
from .config import RunConfig, config_to_dict
from .errors import ConfigError, DataError
from .estimators import EstimateResult, bootstrap, xi2_direct, xi2_rel, xi2_rel_simple
from .lattice import RegionSpec, SiteParams, build_lattice, halves
from .measurement import ShotRecord, imbalances, measure_shot
from .noise import DETECTION_SIGMA, ShotNoise, draw_block_offset, draw_shot_noise_split
from .sequences import ExecutionParams, Sequence, SwapOut, execute
from .units import TWO_PI

CSV_FIELDS = ("run_id", "shot", "site", "n_a_true", "n_b_true", "n_a_det", "n_b_det")
CSV_HEADER = ",".join(CSV_FIELDS)

SHOTS_FILENAME = "shots.csv"
NOISE_FILENAME = "noise.json"
MANIFEST_FILENAME = "manifest.json"


# --- preparation ------------------------------------------------------------


@dataclass(frozen=True)
class PreparedRun:
    """Everything deterministic that shots share: lattice, program, fields."""

    config: RunConfig
    run_id: str
    sequence: Sequence
    sites: tuple[SiteParams, ...]
    extra_fields: tuple[float, ...]  # T per site, from the static environment
    swapped_sensitivity: float  # Hz/T during holds; 0 for swap-free programs


def prepare_run(config: RunConfig) -> PreparedRun:
    config.validate()
    sequence = config.build_sequence()
    sites = build_lattice(config.lattice, streams.substream(config.master_seed, streams.ATOM_NUMBERS))
    center = float(np.mean([s.position for s in sites]))
    extra = tuple(config.environment.field_at(s.position, center) for s in sites)
    has_swap = any(isinstance(step, SwapOut) for step in sequence.steps)
    return PreparedRun(
        config=config,
        run_id=config.run_id(),
        sequence=sequence,
        sites=tuple(sites),
        extra_fields=extra,
        swapped_sensitivity=config.protocol.s_per_tesla if has_swap else 0.0,
    )


def shot_noise_for(config: RunConfig, shot_index: int) -> ShotNoise:
    """This shot's noise draws, independent of evaluation order."""
    noise = config.noise
    seed = config.master_seed
    block_offset = 0.0
    if noise.longterm_enabled:
        block = shot_index // noise.block_size
        block_offset = draw_block_offset(noise, streams.substream(seed, streams.BLOCK, block))
    return draw_shot_noise_split(
        noise,
        streams.substream(seed, streams.FIELD, shot_index),
        streams.substream(seed, streams.GEN_DETUNING, shot_index),
        streams.substream(seed, streams.PULSE_DETUNING, shot_index),
        block_offset,
    )


def run_shot(prep: PreparedRun, shot_index: int) -> ShotRecord:
    """Simulate and measure one shot across all sites."""
    config = prep.config
    seed = config.master_seed
    noise = shot_noise_for(config, shot_index)
    loss_on = config.loss.enabled
    states = []
    for site, extra in zip(prep.sites, prep.extra_fields):
        params = ExecutionParams(
            noise_config=config.noise,
            swapped_sensitivity=prep.swapped_sensitivity,
            extra_field=extra,
            loss=config.loss if loss_on else None,
        )
        loss_rng = streams.substream(seed, streams.LOSS, shot_index, site.site_index) if loss_on else None
        states.append(execute(prep.sequence, site, noise, params, rng=loss_rng))
    return measure_shot(
        states,
        config.noise,
        streams.substream(seed, streams.PROJECTION, shot_index),
        detection_rng=streams.substream(seed, streams.DETECTION, shot_index),
        shot_index=shot_index,
        noise=noise,
        run_id=prep.run_id,
    )


# --- worker pool ------------------------------------------------------------


def _run_chunk(prep: PreparedRun, indices: list[int]) -> list[ShotRecord]:
    return [run_shot(prep, i) for i in indices]


def iter_shots(prep: PreparedRun, workers: int = 1):
    """Yield ShotRecords in shot order, parallelizing across a process pool.

    Substream seeding makes the records identical for any worker count; the
    ordered merge makes the output stream identical too.
    """
    n = prep.config.n_shots
    if workers <= 1:
        for i in range(n):
            yield run_shot(prep, i)
        return
    chunk = max(1, math.ceil(n / (4 * workers)))
    batches = [list(range(lo, min(lo + chunk, n))) for lo in range(0, n, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for records in pool.map(_run_chunk, [prep] * len(batches), batches):
            yield from records


# --- persistence ------------------------------------------------------------


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def config_sha256(config: RunConfig) -> str:
    payload = config_to_dict(config)
    payload.pop("out_dir", None)
    return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _manifest_payload(prep: PreparedRun, status: str, created: str, outputs: dict) -> dict:
    return {
        "run_id": prep.run_id,
        "tool_version": __version__,
        "status": status,
        "created_utc": created,
        "completed_utc": _utc_now() if status == "complete" else None,
        "master_seed": int(prep.config.master_seed),
        "n_shots": prep.config.n_shots,
        "n_sites": len(prep.sites),
        "config_sha256": config_sha256(prep.config),
        "config": config_to_dict(prep.config),
        "outputs": outputs,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _noise_sidecar(prep: PreparedRun, records: list[ShotRecord]) -> dict:
    shots = []
    for rec in records:
        noise = rec.noise if rec.noise is not None else shot_noise_for(prep.config, rec.shot_index)
        shots.append(
            {
                "shot": rec.shot_index,
                "field_offset_t": noise.field_offset,
                "gen_detuning_hz": noise.gen_detuning / TWO_PI,
                "pulse_detuning_hz": noise.pulse_detuning / TWO_PI,
            }
        )
    return {"run_id": prep.run_id, "shots": shots}


@dataclass(frozen=True)
class RunResult:
    prep: PreparedRun
    records: list[ShotRecord]
    run_dir: Path | None = None
    csv_path: Path | None = None
    manifest_path: Path | None = None
    noise_path: Path | None = None

    @property
    def run_id(self) -> str:
        return self.prep.run_id

    @property
    def sites(self) -> tuple[SiteParams, ...]:
        return self.prep.sites


def run_simulation(config: RunConfig, *, workers: int = 1, out_root: str | Path | None = None) -> RunResult:
    """Run all shots; when out_root is given, persist CSV + noise + manifest
    under out_root/<run_id>/ with the manifest written before shots stream."""
    prep = prepare_run(config)
    if out_root is None:
        records = list(iter_shots(prep, workers))
        return RunResult(prep=prep, records=records)

    run_dir = Path(out_root) / prep.run_id
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {run_dir}: {exc}") from None
    manifest_path = run_dir / MANIFEST_FILENAME
    csv_path = run_dir / SHOTS_FILENAME
    noise_path = run_dir / NOISE_FILENAME
    created = _utc_now()
    _write_json(manifest_path, _manifest_payload(prep, "pending", created, {}))

    records: list[ShotRecord] = []
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for rec in iter_shots(prep, workers):
            _write_record(writer, rec)
            records.append(rec)
    _write_json(noise_path, _noise_sidecar(prep, records))

    outputs = {
        name: {"sha256": _sha256_file(path), "bytes": path.stat().st_size}
        for name, path in ((SHOTS_FILENAME, csv_path), (NOISE_FILENAME, noise_path))
    }
    _write_json(manifest_path, _manifest_payload(prep, "complete", created, outputs))
    return RunResult(
        prep=prep,
        records=records,
        run_dir=run_dir,
        csv_path=csv_path,
        manifest_path=manifest_path,
        noise_path=noise_path,
    )


def _write_record(writer, rec: ShotRecord) -> None:
    for site in range(rec.n_sites):
        writer.writerow(
            [
                rec.run_id,
                rec.shot_index,
                site,
                int(rec.n_a_true[site]),
                int(rec.n_b_true[site]),
                repr(float(rec.n_a_det[site])),
                repr(float(rec.n_b_det[site])),
            ]
        )


def write_csv(records: list[ShotRecord], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for rec in records:
            _write_record(writer, rec)
    return path


def read_csv(path: str | Path) -> list[ShotRecord]:
    """Parse a shots CSV back into ShotRecords, validating schema and shape.

    Row diagnostics name the 1-based physical line of the file.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read shots CSV {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header {CSV_HEADER!r}") from None
        if header != list(CSV_FIELDS):
            raise DataError(f"{path}: bad header {','.join(header)!r}, expected {CSV_HEADER!r}")
        rows: dict[int, dict[int, tuple]] = {}
        run_id = None
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_FIELDS):
                raise DataError(f"{path}: row {line_no}: {len(row)} fields, expected {len(CSV_FIELDS)}")
            try:
                shot = int(row[1])
                site = int(row[2])
                na, nb = int(row[3]), int(row[4])
                na_det, nb_det = float(row[5]), float(row[6])
            except ValueError as exc:
                raise DataError(f"{path}: row {line_no}: {exc}") from None
            if run_id is None:
                run_id = row[0]
            elif row[0] != run_id:
                raise DataError(f"{path}: row {line_no}: run_id {row[0]!r} != {run_id!r}")
            if shot < 0 or site < 0:
                raise DataError(f"{path}: row {line_no}: negative shot or site index")
            sites = rows.setdefault(shot, {})
            if site in sites:
                raise DataError(f"{path}: row {line_no}: duplicate (shot {shot}, site {site})")
            sites[site] = (na, nb, na_det, nb_det)
    if not rows:
        raise DataError(f"{path}: no data rows")
    n_sites = len(next(iter(rows.values())))
    records = []
    for shot in sorted(rows):
        sites = rows[shot]
        if sorted(sites) != list(range(n_sites)):
            raise DataError(f"{path}: shot {shot} has sites {sorted(sites)}, expected 0..{n_sites - 1}")
        vals = [sites[i] for i in range(n_sites)]
        records.append(
            ShotRecord(
                shot_index=shot,
                n_a_true=np.array([v[0] for v in vals], dtype=int),
                n_b_true=np.array([v[1] for v in vals], dtype=int),
                n_a_det=np.array([v[2] for v in vals]),
                n_b_det=np.array([v[3] for v in vals]),
                run_id=run_id or "",
            )
        )
    return records


# --- analysis ---------------------------------------------------------------

ANALYSIS_ESTIMATORS = ("xi2_rel", "xi2_direct", "xi2_rel_simple", "delta_z_std")


def _region_from_spec(sites, n_sites: int, default: tuple[int, ...], where: str) -> RegionSpec:
    if sites is None:
        return RegionSpec((default,))
    if not isinstance(sites, list) or not all(isinstance(i, int) for i in sites):
        raise ConfigError(f"{where} must be a list of site indices")
    if any(not 0 <= i < n_sites for i in sites):
        raise ConfigError(f"{where} has indices outside 0..{n_sites - 1}")
    return RegionSpec((tuple(sites),))


def _estimate_to_record(est: EstimateResult, params: dict, seed: int) -> dict:
    return {
        "estimator": est.estimator_name,
        "value": est.value,
        "ci": [est.ci_low, est.ci_high],
        "params": params,
        "seed": seed,
        "n_shots": est.n_shots,
        "n_resamples": est.n_resamples,
        "negative_variance": est.negative_variance,
    }


def analyze_records(
    records: list[ShotRecord],
    spec: dict,
    *,
    seed: int = 0,
    input_info: dict | None = None,
) -> dict:
    """Apply the requested estimators to parsed shot records.

    spec keys: "estimators" (list of {"name", optional region lists}),
    "detection_sigma_atoms" (default 4), "n_resamples" (default 1000; 0
    disables bootstrap CIs).
    """
    if not isinstance(spec, dict):
        raise ConfigError("analysis spec must be a JSON object")
    unknown = sorted(set(spec) - {"estimators", "detection_sigma_atoms", "n_resamples"})
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in analysis spec")
    requests = spec.get("estimators", [{"name": "xi2_rel"}, {"name": "xi2_direct"}])
    sigma = float(spec.get("detection_sigma_atoms", DETECTION_SIGMA))
    n_resamples = int(spec.get("n_resamples", 1000))
    n_sites = records[0].n_sites
    left_default, right_default = halves(n_sites).regions

    results = []
    for index, req in enumerate(requests):
        if not isinstance(req, dict) or "name" not in req:
            raise ConfigError(f"estimator request {index} must be a dict with a 'name'")
        name = req["name"]
        rng = streams.substream(seed, streams.BOOTSTRAP, index) if n_resamples > 0 else None
        if name == "xi2_rel":
            left = _region_from_spec(req.get("left_sites"), n_sites, left_default, "left_sites")
            right = _region_from_spec(req.get("right_sites"), n_sites, right_default, "right_sites")
            est = xi2_rel(records, left, right, sigma, n_resamples=n_resamples, rng=rng)
            params = {"left_sites": list(left.regions[0]), "right_sites": list(right.regions[0]),
                      "detection_sigma_atoms": sigma}
        elif name == "xi2_direct":
            region = _region_from_spec(req.get("sites"), n_sites, tuple(range(n_sites)), "sites")
            est = xi2_direct(records, region, sigma, n_resamples=n_resamples, rng=rng)
            params = {"sites": list(region.regions[0]), "detection_sigma_atoms": sigma}
        elif name == "xi2_rel_simple":
            left = _region_from_spec(req.get("left_sites"), n_sites, left_default, "left_sites")
            right = _region_from_spec(req.get("right_sites"), n_sites, right_default, "right_sites")
            value = xi2_rel_simple(records, left, right)
            est = EstimateResult(value, value, value, len(records), 0, "xi2_rel_simple")
            params = {"left_sites": list(left.regions[0]), "right_sites": list(right.regions[0])}
        elif name == "delta_z_std":
            left = _region_from_spec(req.get("left_sites"), n_sites, left_default, "left_sites")
            right = _region_from_spec(req.get("right_sites"), n_sites, right_default, "right_sites")
            pair = RegionSpec((left.regions[0], right.regions[0]))

            def dz_std(data, pair=pair):
                return float(np.std([imbalances(s, pair).delta_z for s in data]))

            if n_resamples > 0:
                est = bootstrap(dz_std, records, n_resamples, rng, name="delta_z_std")
            else:
                value = dz_std(records)
                est = EstimateResult(value, value, value, len(records), 0, "delta_z_std")
            params = {"left_sites": list(left.regions[0]), "right_sites": list(right.regions[0])}
        else:
            raise ConfigError(f"unknown estimator {name!r} (available: {', '.join(ANALYSIS_ESTIMATORS)})")
        results.append(_estimate_to_record(est, params, seed))

    return {
        "input": input_info or {},
        "resampling": {"scheme": "bootstrap", "n_resamples": n_resamples, "seed": seed},
        "results": results,
    }


def analyze_csv(path: str | Path, spec: dict, *, seed: int = 0) -> dict:
    """Parse, validate, and analyze a shots CSV; embeds the input hash."""
    path = Path(path)
    records = read_csv(path)
    info = {
        "path": str(path),
        "sha256": _sha256_file(path),
        "run_id": records[0].run_id,
        "n_shots": len(records),
        "n_sites": records[0].n_sites,
    }
    return analyze_records(records, spec, seed=seed, input_info=info)
