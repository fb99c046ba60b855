"""Result emission (CSV, JSON summary, plot-data columns) and config file
round-tripping. All writers are byte-deterministic for identical inputs:
floats are serialized with shortest round-trip repr and no wall-clock data
enters these files (timing lives in the bench outputs).
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np
import yaml

from .scenarios import ConfigError, ScenarioConfig, TimeSeriesOutput


def config_to_dict(config: ScenarioConfig) -> dict:
    out = {}
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    return out


def config_from_dict(data: dict) -> ScenarioConfig:
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(data)
    for key in ("axis", "spin_radps", "uniform_velocity_mps", "CN_N",
                "CM_Nm2", "J_kgm"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(kwargs[key])
    return ScenarioConfig(**kwargs)


def save_config(config: ScenarioConfig, path: str):
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=True)


def load_config(path: str) -> ScenarioConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} does not hold a mapping")
    return config_from_dict(data)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_timeseries_csv(output: TimeSeriesOutput, path: str):
    """Probe displacement history: t, ux, uy, uz plus solver stats columns."""
    with open(path, "w") as fh:
        fh.write("t,ux,uy,uz,newton_iters,corrector_passes\n")
        for k in range(output.t.size):
            u = output.tip_displacement[k]
            fh.write(",".join([_fmt(output.t[k]), _fmt(u[0]), _fmt(u[1]),
                               _fmt(u[2]), str(int(output.newton_iterations[k])),
                               str(int(output.corrector_passes[k]))]) + "\n")


def read_timeseries_csv(path: str):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return data


def write_summary_json(output: TimeSeriesOutput, path: str):
    summary = {
        "config": config_to_dict(output.config),
        "steps": int(output.steps),
        "samples": int(output.t.size),
        "final_time_s": float(output.t[-1]),
        "final_tip_displacement_m": [float(x) for x in output.tip_displacement[-1]],
        "total_newton_iterations": int(output.newton_iterations.sum()),
        "total_corrector_passes": int(output.corrector_passes.sum()),
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_plot_data(output: TimeSeriesOutput, path_stem: str):
    """One two-column x-y file per displacement component."""
    paths = []
    for k, comp in enumerate(("ux", "uy", "uz")):
        path = f"{path_stem}_{comp}.dat"
        with open(path, "w") as fh:
            for i in range(output.t.size):
                fh.write(f"{_fmt(output.t[i])} "
                         f"{_fmt(output.tip_displacement[i, k])}\n")
        paths.append(path)
    return paths


def emit_results(output: TimeSeriesOutput, format: str, path: str):
    """Write one run's results; ``format`` is csv, json, plot, or all.

    ``path`` is a directory; files are named after the scenario.
    """
    os.makedirs(path, exist_ok=True)
    stem = os.path.join(path, output.config.name)
    written = []
    if format in ("csv", "all"):
        p = stem + "_timeseries.csv"
        write_timeseries_csv(output, p)
        written.append(p)
    if format in ("json", "all"):
        p = stem + "_summary.json"
        write_summary_json(output, p)
        written.append(p)
    if format in ("plot", "all"):
        written.extend(write_plot_data(output, stem))
    if not written:
        raise ConfigError(f"unknown output format {format!r}")
    return written
