"""Run persistence: series CSV, snapshot text files, verdict and check
reports as JSON, and a manifest written last.

Layout of a run directory:

    config.json      the experiment configuration (with its hash embedded)
    series.csv       per-step diagnostics, fixed column header
    snap_00000.txt   self-describing snapshots (n, R, N, t, edges, r, u, v)
    verdict.json     the BlowupVerdict
    checks.json      CheckReports, written by the verify step
    manifest.json    inventory with file hashes; written last, atomically

A directory containing manifest.json is complete: everything else is
written first and the manifest lands via os.replace.  All floats are
written with 17 significant digits so reload is bit-exact.  Snapshots store
the cell edges explicitly; rebuilding the grid from them reproduces the
original quadrature weights bitwise, which center-only storage does not.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__ as _VERSION
from .config import ExperimentConfig, config_hash, save_config
from .functionals import StatePair
from .grid import RadialField, RadialGrid, _grid_from_edges
from .solver import SERIES_COLUMNS, BlowupVerdict, SolverConfig, Trajectory
from .verifier import CheckReport

__all__ = [
    "persist_run",
    "load_run",
    "load_series",
    "load_snapshot",
    "write_checks",
    "RunData",
]

_F = "%.17g"


def _fmt(x: float) -> str:
    return _F % float(x)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_series(series: dict, path: str, cfg_hash: str) -> None:
    cols = [series[name] for name in SERIES_COLUMNS]
    nrows = len(cols[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(",".join(SERIES_COLUMNS) + "\n")
        for i in range(nrows):
            fh.write(",".join(_fmt(c[i]) for c in cols) + "\n")


def load_series(path: str) -> tuple[dict, Optional[str]]:
    """Read a series file; returns (columns, embedded config hash)."""
    cfg_hash = None
    lines = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln in fh:
            if ln.startswith("#"):
                if ln.startswith("# config_hash="):
                    cfg_hash = ln.partition("=")[2].strip()
                continue
            lines.append(ln)
    header = lines[0].strip().split(",")
    if tuple(header) != SERIES_COLUMNS:
        raise ValueError(f"unexpected series header {header}")
    data = np.array(
        [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
    ).reshape(-1, len(SERIES_COLUMNS))
    cols = {name: data[:, i].copy() for i, name in enumerate(SERIES_COLUMNS)}
    return cols, cfg_hash


def write_snapshot(s: StatePair, path: str, cfg_hash: str) -> None:
    g = s.grid
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# radial state snapshot\n")
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(f"n {g.n}\n")
        fh.write(f"R {_fmt(g.R)}\n")
        fh.write(f"N {g.ncells}\n")
        fh.write(f"t {_fmt(s.t)}\n")
        for name, vals in (
            ("edges", g.edges), ("r", g.centers),
            ("u", s.u.values), ("v", s.v.values),
        ):
            fh.write(name + " " + " ".join(_fmt(x) for x in vals) + "\n")


def load_snapshot(path: str) -> StatePair:
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln in fh:
            if ln.startswith("#") or not ln.strip():
                continue
            key, _, rest = ln.partition(" ")
            fields[key] = rest.strip()
    n = int(fields["n"])
    R = float(fields["R"])
    ncells = int(fields["N"])
    t = float(fields["t"])
    edges = np.array([float(x) for x in fields["edges"].split()])
    r = np.array([float(x) for x in fields["r"].split()])
    u = np.array([float(x) for x in fields["u"].split()])
    v = np.array([float(x) for x in fields["v"].split()])
    if edges.size != ncells + 1 or r.size != ncells:
        raise ValueError(f"inconsistent snapshot {path}")
    g = _grid_from_edges(n, R, edges)
    if not np.array_equal(g.centers, r):
        raise ValueError(f"snapshot centers do not match rebuilt grid: {path}")
    return StatePair(RadialField(g, u), RadialField(g, v), t)


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _verdict_dict(v: BlowupVerdict) -> dict:
    return dataclasses.asdict(v)


def _report_dict(rep: CheckReport) -> dict:
    d = dataclasses.asdict(rep)
    loc = d["location"]
    if loc is not None and not isinstance(loc, (int, float, str)):
        d["location"] = str(loc)
    return d


@dataclass
class RunData:
    directory: str
    config: ExperimentConfig
    series: dict
    snapshots: list
    verdict: BlowupVerdict
    manifest: dict

    def as_trajectory(self) -> Trajectory:
        """Rebuild a Trajectory equivalent for the verifier checks."""
        from .grid import _derivative_values
        s0 = self.snapshots[0]
        g = s0.grid
        vr0 = _derivative_values(g, np.asarray(s0.v.values, float), "neumann")
        return Trajectory(
            grid=g, config=self.config.solver, series=self.series,
            snapshots=self.snapshots, verdict=self.verdict,
            u0_l1=g.integrate_values(np.abs(s0.u.values)),
            v0_l1=g.integrate_values(np.abs(s0.v.values)),
            gradv0_l2=math.sqrt(g.integrate_values(vr0 * vr0)),
        )


def persist_run(
    traj: Trajectory, cfg: ExperimentConfig, directory: str
) -> dict:
    """Write a complete run directory and return the manifest."""
    os.makedirs(directory, exist_ok=True)
    h = config_hash(cfg)
    inventory = {}

    save_config(cfg, os.path.join(directory, "config.json"))
    inventory["config.json"] = None

    write_series(traj.series, os.path.join(directory, "series.csv"), h)
    inventory["series.csv"] = None

    for i, snap in enumerate(traj.snapshots):
        name = f"snap_{i:05d}.txt"
        write_snapshot(snap, os.path.join(directory, name), h)
        inventory[name] = None

    verdict = _verdict_dict(traj.verdict)
    verdict["config_hash"] = h
    _write_json(verdict, os.path.join(directory, "verdict.json"))
    inventory["verdict.json"] = None

    manifest = {
        "artifact_version": _VERSION,
        "config_hash": h,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "status": "complete",
        "name": cfg.name,
        "verdict": verdict,
        "files": {
            name: {"sha256": _sha256(os.path.join(directory, name))}
            for name in sorted(inventory)
        },
    }
    _commit_manifest(manifest, directory)
    return manifest


def write_checks(
    reports: Sequence[CheckReport], directory: str, battery: str
) -> dict:
    """Add check reports to an existing run directory and recommit the
    manifest (manifest stays last: the checks file is written first).

    One file per battery, so repeated verifies do not clobber each other.
    """
    man_path = os.path.join(directory, "manifest.json")
    with open(man_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    payload = {
        "battery": battery,
        "config_hash": manifest["config_hash"],
        "all_passed": all(r.passed for r in reports),
        "reports": [_report_dict(r) for r in reports],
    }
    fname = f"checks_{battery}.json"
    _write_json(payload, os.path.join(directory, fname))
    manifest["files"][fname] = {
        "sha256": _sha256(os.path.join(directory, fname))
    }
    _commit_manifest(manifest, directory)
    return payload


def _commit_manifest(manifest: dict, directory: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".manifest.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, os.path.join(directory, "manifest.json"))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_run(directory: str) -> RunData:
    man_path = os.path.join(directory, "manifest.json")
    if not os.path.exists(man_path):
        raise FileNotFoundError(
            f"no manifest in {directory}: run directory incomplete")
    with open(man_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    from .config import load_config
    cfg = load_config(os.path.join(directory, "config.json"))
    series, series_hash = load_series(os.path.join(directory, "series.csv"))
    if series_hash is not None and series_hash != manifest["config_hash"]:
        raise ValueError(
            f"series config hash {series_hash} does not match manifest")
    snaps = [
        load_snapshot(os.path.join(directory, name))
        for name in sorted(manifest["files"])
        if name.startswith("snap_")
    ]
    with open(os.path.join(directory, "verdict.json"), "r", encoding="utf-8") as fh:
        vd = json.load(fh)
    verdict = BlowupVerdict(
        outcome=vd["outcome"], t_detect=vd["t_detect"],
        t_extrapolated=vd["t_extrapolated"], trigger=vd["trigger"],
    )
    return RunData(
        directory=directory, config=cfg, series=series,
        snapshots=snaps, verdict=verdict, manifest=manifest,
    )
