"""Seeded Monte-Carlo sweep execution and result persistence.

Every (sweep point, trial) pair derives its own RNG stream from the master
seed through an explicit SeedSequence spawn key, so results are independent
of scheduling and byte-identical across worker counts. All estimators at a
point consume the same measurements (paired comparison).
"""

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .arrays import ArrayGeometry, build_dictionaries
from .channel import cascaded_channel, draw_scenario, nominal_sensor_std
from .config import ExperimentConfig, config_to_dict
from .estimators import make_estimator
from .measurement import TrainingSetup, build_training, design_quantizer, simulate
from .metrics import (MetricRecord, PowerModel, energy_efficiency, nmse_db,
                      power_total, sum_spectral_efficiency)

CSV_COLUMNS = ("sweep_name", "sweep_value", "trial", "estimator", "nmse_f_db",
               "nmse_g_db", "nmse_h_db", "nmse_casc_db", "se", "power_w", "ee",
               "seed")

_DB_COLUMNS = {"nmse_f_db", "nmse_g_db", "nmse_h_db", "nmse_casc_db"}


@dataclass(frozen=True)
class SweepResult:
    records: tuple  # MetricRecord rows in deterministic order
    config_hash: str
    seed: int
    version: str
    wall_time_s: float

    @property
    def errors(self):
        return [r for r in self.records if r.error]


def apply_sweep_value(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """Point config with the swept knob replaced."""
    if axis == "tx_power_dbm":
        scenario = dataclasses.replace(cfg.scenario, tx_power_dbm=float(value))
        return dataclasses.replace(cfg, scenario=scenario)
    if axis == "T":
        training = dataclasses.replace(cfg.training, t=int(value))
        return dataclasses.replace(cfg, training=training)
    if axis == "N_a":
        training = dataclasses.replace(cfg.training, n_active=int(value))
        return dataclasses.replace(cfg, training=training)
    if axis == "B":
        training = dataclasses.replace(cfg.training, bits=int(value))
        return dataclasses.replace(cfg, training=training)
    raise ValueError(f"unknown sweep axis '{axis}'")


def run_trial(cfg: ExperimentConfig, sweep_value, trial: int) -> list:
    """Draw one scenario + protocol + measurements and run every estimator."""
    point_idx = cfg.sweep.values.index(sweep_value)
    ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(point_idx, trial))
    rng = np.random.default_rng(ss)
    point_cfg = apply_sweep_value(cfg, cfg.sweep.axis, sweep_value)

    geo = point_cfg.geometry
    geom = ArrayGeometry(geo.bs_antennas, geo.irs_h, geo.irs_v)
    dictionary = build_dictionaries(geom, geo.m_g, geo.n_g)
    scenario = point_cfg.scenario
    noise_var = scenario.noise_variance

    truth = draw_scenario(rng, scenario, dictionary, on_grid=point_cfg.on_grid)
    setup = TrainingSetup(
        n_elements=geom.irs_elements, n_users=scenario.n_users,
        t=point_cfg.training.t, t_c=point_cfg.training.t_c,
        warmup_off=point_cfg.training.warmup_off, f_sn=point_cfg.training.f_sn,
        n_active=point_cfg.training.n_active, tx_power_w=scenario.tx_power_w,
        v_redraw=point_cfg.training.v_redraw)
    protocol = build_training(rng, setup)
    quantizer = design_quantizer(point_cfg.training.bits,
                                 nominal_sensor_std(scenario, geom.irs_elements))
    meas = simulate(rng, truth, protocol, noise_var, noise_var, quantizer)

    casc_truth = cascaded_channel(truth.f_bar, truth.g_bar)
    pm = PowerModel()
    records = []
    for name in cfg.estimators:
        est_obj = make_estimator(name, point_cfg)
        error = None
        try:
            est_obj.fit(meas, protocol=protocol, dictionary=dictionary,
                        noise_var=noise_var)
            est = est_obj.estimates_
            nf = nmse_db(est.f_bar, truth.f_bar) if est.f_bar is not None else float("nan")
            ng = nmse_db(est.g_bar, truth.g_bar) if est.g_bar is not None else float("nan")
            nh = nmse_db(est.h_bar, truth.h_bar)
            nc = nmse_db(est.cascaded, casc_truth)
            se = sum_spectral_efficiency(est, truth, scenario.data_power_w, noise_var)
        except Exception as exc:  # recorded per-row, the sweep continues
            error = f"{type(exc).__name__}: {exc}"
            nf = ng = nh = nc = float("nan")
            se = float("nan")
        n_a_power = point_cfg.training.n_active if est_obj.uses_sensors else 0
        power = power_total(pm, geo.bs_antennas, n_a_power, point_cfg.training.bits,
                            scenario.bandwidth_hz, point_cfg.training.t,
                            point_cfg.training.t_c)
        ee = energy_efficiency(se, power, scenario.bandwidth_hz) if np.isfinite(se) else float("nan")
        records.append(MetricRecord(
            estimator=name, sweep_name=cfg.sweep.axis, sweep_value=float(sweep_value),
            trial=trial, seed=cfg.seed, nmse_f_db=nf, nmse_g_db=ng, nmse_h_db=nh,
            nmse_casc_db=nc, se=se, power_w=power, ee=ee, error=error))
    return records


def _trial_task(args):
    cfg, sweep_value, trial = args
    return (cfg.sweep.values.index(sweep_value), trial), run_trial(cfg, sweep_value, trial)


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Execute the full sweep; deterministic for a fixed config and seed."""
    started = time.perf_counter()
    tasks = [(cfg, v, r) for v in cfg.sweep.values for r in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            keyed = list(pool.map(_trial_task, tasks))
    else:
        keyed = [_trial_task(t) for t in tasks]
    keyed.sort(key=lambda kv: kv[0])
    records = tuple(rec for _, recs in keyed for rec in recs)
    wall = time.perf_counter() - started
    return SweepResult(records=records, config_hash=config_hash(cfg), seed=cfg.seed,
                       version=__version__, wall_time_s=wall)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _format_field(name: str, value) -> str:
    if name in _DB_COLUMNS:
        return f"{value:.4f}"
    if name in ("sweep_value",):
        return f"{value:g}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        row = [_format_field(c, getattr(r, c)) for c in CSV_COLUMNS]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list:
    """Rows back as dicts with float metric fields (round-trip helper)."""
    lines = [ln for ln in text.strip().split("\n") if ln]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        vals = ln.split(",")
        row = dict(zip(header, vals))
        for key in ("sweep_value", "nmse_f_db", "nmse_g_db", "nmse_h_db",
                    "nmse_casc_db", "se", "power_w", "ee"):
            row[key] = float(row[key])
        row["trial"] = int(row["trial"])
        row["seed"] = int(row["seed"])
        out.append(row)
    return out


_PLOT_TEMPLATE = """\
#!/usr/bin/env python3
\"\"\"Plot NMSE and EE against the swept axis from {csv_name}.\"\"\"
import csv
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("{csv_name}")))
axis = rows[0]["sweep_name"] if rows else "sweep_value"

by_est = defaultdict(lambda: defaultdict(list))
for row in rows:
    key = (row["estimator"], float(row["sweep_value"]))
    by_est[row["estimator"]][float(row["sweep_value"])].append(row)

for metric, fname in (("nmse_casc_db", "nmse_vs_axis.png"), ("ee", "ee_vs_axis.png")):
    fig, ax = plt.subplots()
    for est, points in sorted(by_est.items()):
        xs = sorted(points)
        ys = [sum(float(r[metric]) for r in points[x]) / len(points[x]) for x in xs]
        ax.plot(xs, ys, marker="o", label=est)
    ax.set_xlabel(axis)
    ax.set_ylabel(metric)
    ax.grid(True)
    ax.legend()
    fig.savefig(fname, dpi=150)
    print("wrote", fname)
"""


def emit_results(result: SweepResult, cfg: ExperimentConfig, out_dir,
                 plot_script: bool = False) -> dict:
    """Write results.csv, manifest.json and optionally a plot script.

    Returns the written paths keyed by artifact name.
    """
    if not result.records:
        raise ValueError("refusing to emit an empty result")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    csv_path = out / "results.csv"
    csv_path.write_text(records_to_csv(result.records), encoding="utf-8")
    paths["csv"] = csv_path

    manifest = {
        "config": config_to_dict(cfg),
        "config_hash": result.config_hash,
        "seed": result.seed,
        "version": result.version,
        "wall_time_s": result.wall_time_s,
        "rows": len(result.records),
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str) + "\n",
                             encoding="utf-8")
    paths["manifest"] = manifest_path

    if plot_script:
        script_path = out / "plot_results.py"
        script_path.write_text(_PLOT_TEMPLATE.format(csv_name="results.csv"),
                               encoding="utf-8")
        paths["plot_script"] = script_path
    return paths
