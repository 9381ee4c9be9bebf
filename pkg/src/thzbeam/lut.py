"""Precomputed beam lookup tables over (estimated distance, AoD deviation)."""
from __future__ import annotations

import bisect
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .beamformer import sinc_taper
from .objectives import BeamEvaluator, ObjectiveConfig, scalarized_objective
from .optimizer import PsoConfig, pso_optimize

FORMAT_VERSION = 1
FIELDS = ("v", "omega", "expected_rate_bps", "outage_prob", "g_alpha")
BEAM_CLASSES = ("sinc", "conjugate")


class FingerprintMismatch(RuntimeError):
    pass


def scenario_fingerprint(cfg: ObjectiveConfig, beam_class: str = "sinc") -> str:
    payload = asdict(cfg)
    payload["beam_class"] = beam_class
    blob = json.dumps(payload, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def default_d_grid(step: float = 0.25) -> np.ndarray:
    return np.round(np.arange(0.5, 15.0 + 1e-9, step), 10)


def default_sigma_grid(step_deg: float = 0.25, max_deg: float = 10.0) -> np.ndarray:
    return np.deg2rad(np.round(np.arange(0.0, max_deg + 1e-9, step_deg), 10))


@dataclass(frozen=True)
class LutRecord:
    v: float
    omega: float
    g_alpha: float
    expected_rate_bps: float
    outage_prob: float
    clamped: bool = False


@dataclass(eq=False)
class LookupTable:
    d_grid_m: np.ndarray
    sigma_grid_rad: np.ndarray
    cells: np.ndarray  # (n_d, n_sigma, 5) ordered as FIELDS
    scenario_fingerprint: str
    beam_class: str = "sinc"
    alpha: float = float("nan")

    def __post_init__(self):
        self.d_grid_m = np.asarray(self.d_grid_m, dtype=float)
        self.sigma_grid_rad = np.asarray(self.sigma_grid_rad, dtype=float)
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.shape != (len(self.d_grid_m), len(self.sigma_grid_rad), len(FIELDS)):
            raise ValueError(f"cell array shape {self.cells.shape} does not match the grids")
        self._d = self.d_grid_m.tolist()
        self._s = self.sigma_grid_rad.tolist()
        self._d_mid = [(a + b) / 2 for a, b in zip(self._d, self._d[1:])]
        self._s_mid = [(a + b) / 2 for a, b in zip(self._s, self._s[1:])]

    def __eq__(self, other):
        if not isinstance(other, LookupTable):
            return NotImplemented
        return (self.scenario_fingerprint == other.scenario_fingerprint
                and self.beam_class == other.beam_class
                and (self.alpha == other.alpha or (math.isnan(self.alpha) and math.isnan(other.alpha)))
                and np.array_equal(self.d_grid_m, other.d_grid_m)
                and np.array_equal(self.sigma_grid_rad, other.sigma_grid_rad)
                and np.array_equal(self.cells, other.cells))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape[:2]

    def field(self, name: str) -> np.ndarray:
        return self.cells[..., FIELDS.index(name)]

    def check(self, cfg: ObjectiveConfig) -> None:
        expected = scenario_fingerprint(cfg, self.beam_class)
        if expected != self.scenario_fingerprint:
            raise FingerprintMismatch(
                f"lookup table fingerprint {self.scenario_fingerprint} does not match the active "
                f"scenario ({expected}); rebuild it with `thzbeam lut-build`")

    def nearest_index(self, d_hat_m: float, sigma_eff_rad: float) -> tuple[int, int, bool]:
        # per-axis nearest node == nearest under axis-scaled Euclidean distance
        i = bisect.bisect_right(self._d_mid, d_hat_m)
        j = bisect.bisect_right(self._s_mid, sigma_eff_rad)
        clamped = (d_hat_m < self._d[0] or d_hat_m > self._d[-1]
                   or sigma_eff_rad < self._s[0] or sigma_eff_rad > self._s[-1])
        return i, j, clamped


def lut_query(table: LookupTable, d_hat_m: float, sigma_eff_rad: float) -> LutRecord:
    """Nearest grid node, clamped to the grid (no extrapolation)."""
    i, j, clamped = table.nearest_index(d_hat_m, sigma_eff_rad)
    v, omega, rate, out, g = table.cells[i, j].tolist()
    return LutRecord(v, omega, g, rate, out, clamped)


def cell_rng(master_seed: int, cell_index: int) -> np.random.Generator:
    """Per-cell stream: counter split of the master seed."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(cell_index,)))


def _solve_cell(args):
    d, s, cfg, pso, index, beam_class = args
    if beam_class == "conjugate":
        ev = BeamEvaluator(d, s, cfg)
        n = cfg.link.n_tx
        val = ev.value(np.full(n, math.sqrt(cfg.link.tx_power_w / n)))
        return index, (0.0, 0.0, val.expected_rate_bps, val.outage_prob, val.g_alpha)
    params, val = pso_optimize(d, s, cfg, pso, rng=cell_rng(pso.seed, index))
    return index, (params.v, params.omega, val.expected_rate_bps, val.outage_prob, val.g_alpha)


def build_lookup_table(d_grid, sigma_grid, cfg: ObjectiveConfig, pso: PsoConfig = PsoConfig(),
                       workers: int = 1, beam_class: str = "sinc", progress=None) -> LookupTable:
    """Optimize every grid cell. Output does not depend on ``workers``.

    ``beam_class="conjugate"`` stores the narrow beam's objective values
    instead of optimized parameters (used by the non-robust schemes).
    """
    if beam_class not in BEAM_CLASSES:
        raise ValueError(f"beam_class must be one of {BEAM_CLASSES}")
    d_grid = np.asarray(d_grid, dtype=float)
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    if d_grid.size == 0 or sigma_grid.size == 0:
        raise ValueError("grids must be nonempty")
    if np.any(np.diff(d_grid) <= 0) or np.any(np.diff(sigma_grid) <= 0):
        raise ValueError("grids must be strictly ascending")
    if d_grid[0] <= 0 or sigma_grid[0] < 0:
        raise ValueError("distances must be positive and deviations nonnegative")
    jobs = [(float(d), float(s), cfg, pso, i * len(sigma_grid) + j, beam_class)
            for i, d in enumerate(d_grid) for j, s in enumerate(sigma_grid)]
    cells = np.empty((len(d_grid), len(sigma_grid), len(FIELDS)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_solve_cell, jobs, chunksize=8)
            for done, (index, rec) in enumerate(results):
                cells.flat[index * len(FIELDS):(index + 1) * len(FIELDS)] = rec
                if progress:
                    progress(done + 1, len(jobs))
    else:
        for done, job in enumerate(jobs):
            index, rec = _solve_cell(job)
            cells.flat[index * len(FIELDS):(index + 1) * len(FIELDS)] = rec
            if progress:
                progress(done + 1, len(jobs))
    return LookupTable(d_grid, sigma_grid, cells, scenario_fingerprint(cfg, beam_class),
                       beam_class, cfg.alpha)


def recompute_g(table: LookupTable, cfg: ObjectiveConfig) -> np.ndarray:
    """Scalarized objective recomputed from the stored rate and outage columns."""
    from .objectives import r_max
    rmax = np.array([r_max(d, cfg.link) for d in table.d_grid_m])[:, None]
    return scalarized_objective(table.field("expected_rate_bps"), table.field("outage_prob"),
                                rmax, cfg.alpha)


def cell_taper(table: LookupTable, i: int, j: int, cfg: ObjectiveConfig) -> np.ndarray:
    from .beamformer import saturate_power
    v, omega = table.cells[i, j, 0], table.cells[i, j, 1]
    n, p = cfg.link.n_tx, cfg.link.tx_power_w
    return saturate_power(v, omega, p, n) * sinc_taper(v, omega, n)


# -- persistence -----------------------------------------------------------------


def save_lut(table: LookupTable, path: str | Path) -> None:
    """Write a JSON header line followed by one CSV line per cell (row-major)."""
    header = {
        "format": "thzbeam-lut",
        "version": FORMAT_VERSION,
        "fingerprint": table.scenario_fingerprint,
        "beam_class": table.beam_class,
        "alpha": repr(float(table.alpha)),
        "d_grid_m": [repr(float(x)) for x in table.d_grid_m],
        "sigma_grid_rad": [repr(float(x)) for x in table.sigma_grid_rad],
        "fields": list(FIELDS),
        "cells": int(table.cells.shape[0] * table.cells.shape[1]),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in table.cells.reshape(-1, len(FIELDS)):
            fh.write(",".join(repr(float(x)) for x in rec) + "\n")


def load_lut(path: str | Path) -> LookupTable:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty lookup table file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed lookup table header") from exc
    if header.get("format") != "thzbeam-lut":
        raise ValueError(f"{path}: not a lookup table file")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported lookup table version {header.get('version')!r}")
    d = np.array([float(x) for x in header["d_grid_m"]])
    s = np.array([float(x) for x in header["sigma_grid_rad"]])
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != header["cells"] or len(body) != len(d) * len(s):
        raise ValueError(f"{path}: expected {header['cells']} cell records, found {len(body)} "
                         "(truncated file?)")
    try:
        cells = np.array([[float(x) for x in ln.split(",")] for ln in body])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed cell record") from exc
    if cells.shape[1] != len(FIELDS):
        raise ValueError(f"{path}: cell records must have {len(FIELDS)} columns")
    return LookupTable(d, s, cells.reshape(len(d), len(s), len(FIELDS)), header["fingerprint"],
                       header["beam_class"], float(header["alpha"]))


def export_lut_csv(table: LookupTable, path: str | Path, comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in comment.splitlines():
            fh.write(f"# {line}\n")
        fh.write("d_m,sigma_rad," + ",".join(FIELDS) + "\n")
        for i, d in enumerate(table.d_grid_m):
            for j, s in enumerate(table.sigma_grid_rad):
                fh.write(f"{float(d)!r},{float(s)!r}," + ",".join(repr(float(x)) for x in table.cells[i, j]) + "\n")
