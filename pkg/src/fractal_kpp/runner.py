"""Experiment orchestration: per-alpha pipelines, CSV output and the run manifest."""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import QuasiparticleSolution, field_moments, initial_packet
from .calculus import FractalGrid
from .config import ExperimentConfig, serialize
from .errors import ResolutionError, StageError
from .flees import MomentTrajectory, solve_flees
from .fractal_set import build_prefractal
from .reference import PdeConfig, compare, solve_direct

CSV_FORMAT = "%.17g"


def write_csv(path: Path, header: list[str], columns) -> Path:
    """RFC-4180 CSV with a header row and 17 significant digits."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if len(columns) else np.empty((0, 0))
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(",".join(header) + "\r\n")
        if data.size:
            np.savetxt(fh, data, fmt=CSV_FORMAT, delimiter=",", newline="\r\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def alpha_dirname(index: int, alpha: float) -> str:
    return f"alpha_{index:02d}_{alpha:.6f}"


def snapshot_name(prefix: str, t: float) -> str:
    return f"{prefix}_t{t:.6f}.csv"


def moments_csv(path: Path, traj: MomentTrajectory) -> Path:
    K = traj.params.K
    header, cols = ["t", "S"], [traj.times, traj.staircase_values]
    for name, arr in (("mu", traj.mu), ("x", traj.x), ("alpha2", traj.alpha2)):
        header += [f"{name}_{s + 1}" for s in range(K)]
        cols += [arr[:, s] for s in range(K)]
    return write_csv(path, header, cols)


def field_csv(path: Path, field) -> Path:
    header, cols = ["x", "u"], [field.grid.x, field.u]
    for s in range(field.K):
        header += [f"v0_{s + 1}", f"v1_{s + 1}", f"v2_{s + 1}"]
        cols += [field.v0[s], field.v1[s], field.v2[s]]
    return write_csv(path, header, cols)


def trajectory_for(config: ExperimentConfig, alpha: float) -> MomentTrajectory:
    F = build_prefractal(alpha, config.generation)
    grid = FractalGrid.build(F, config.time_grid.dt, config.time_grid.n_tau, extra_times=config.snapshots)
    return solve_flees(config.params, grid=grid, closure_mode=config.closure_mode)


def run_alpha(config: ExperimentConfig, alpha: float, out_dir, root=None,
              asymptotic: bool = True, reference: bool | None = None,
              moments_name: str = "moments.csv") -> list[str]:
    """Run every stage for one alpha into ``out_dir``; returns paths relative to ``root``."""
    out = Path(out_dir)
    root = Path(root) if root is not None else out
    if reference is None:
        reference = config.reference.enabled
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    stage = "prefractal"
    try:
        F = build_prefractal(alpha, config.generation)
        stage = "flees"
        grid = FractalGrid.build(F, config.time_grid.dt, config.time_grid.n_tau, extra_times=config.snapshots)
        traj = solve_flees(config.params, grid=grid, closure_mode=config.closure_mode)
        written.append(moments_csv(out / moments_name, traj))

        if asymptotic:
            stage = "assemble"
            sol = QuasiparticleSolution(traj, config.formulas)
            fields = [sol.field(config.space_grid, t) for t in config.snapshots]
            rows = []
            for f in fields:
                written.append(field_csv(out / snapshot_name("snapshot", f.time), f))
                row = [f.time]
                for s in range(f.K):
                    try:
                        row += list(field_moments(f, s))
                    except ResolutionError:
                        row += [float("nan")] * 3
                rows.append(row)
            header = ["t"] + [f"{q}_{s + 1}" for s in range(config.params.K) for q in ("mu_hat", "x_hat", "alpha2_hat")]
            written.append(write_csv(out / "field_moments.csv", header, list(np.array(rows).T)))

        if reference:
            stage = "reference"
            ref = config.reference
            pde = PdeConfig.stable(config.space_grid, config.params, F, courant=ref.courant,
                                   scheme=ref.scheme, convolution=ref.convolution,
                                   laplacian_order=ref.laplacian_order)
            u0 = sum(initial_packet(config.params, s, config.space_grid.x) for s in range(config.params.K))
            direct = solve_direct(pde, u0, config.snapshots)
            for t, u in zip(config.snapshots, direct.fields):
                name = snapshot_name("reference" if asymptotic else "snapshot", t)
                written.append(write_csv(out / name, ["x", "u"], [config.space_grid.x, u]))
        if reference and asymptotic:
            stage = "compare"
            rep = compare(config.space_grid, np.array([f.u for f in fields]), direct.fields, config.snapshots)
            written.append(write_csv(out / "comparison.csv", ["t", "l2", "linf", "l2_rel", "linf_rel"],
                                     [rep.times, rep.l2, rep.linf, rep.l2_rel, rep.linf_rel]))
    except Exception as exc:
        for p in written:
            p.unlink(missing_ok=True)
        raise StageError(alpha, stage, exc) from exc
    return [p.relative_to(root).as_posix() for p in written]


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(config: ExperimentConfig, out_dir=None, workers: int = 1) -> dict:
    """Run the full alpha sweep and write ``manifest.json``; returns the manifest.

    On failure every output written by this call is removed before the
    :class:`StageError` propagates.
    """
    root = Path(out_dir if out_dir is not None else config.output)
    created_root = not root.exists()
    root.mkdir(parents=True, exist_ok=True)
    dirs = [root / alpha_dirname(i, a) for i, a in enumerate(config.alphas)]
    fresh = [d for d in dirs if not d.exists()]
    jobs = list(enumerate(config.alphas))
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                futures = [pool.submit(run_alpha, config, a, root / alpha_dirname(i, a), root) for i, a in jobs]
                results = [f.result() for f in futures]
        else:
            results = [run_alpha(config, a, root / alpha_dirname(i, a), root) for i, a in jobs]
        cfg_path = root / "config.json"
        cfg_path.write_text(serialize(config), encoding="utf-8")
    except BaseException:
        for d in fresh:
            shutil.rmtree(d, ignore_errors=True)
        if created_root:
            shutil.rmtree(root, ignore_errors=True)
        raise

    files = ["config.json"] + [p for r in results for p in r]
    manifest = {
        "software": "fractal-kpp",
        "version": __version__,
        "config_hash": config.digest(),
        "files": [{"path": p, "sha256": _digest(root / p), "bytes": (root / p).stat().st_size} for p in files],
    }
    with open(root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
