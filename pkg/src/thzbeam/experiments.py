"""Experiment drivers. Each writes one CSV whose ``#`` header embeds the
resolved configuration and master seed; data rows are deterministic.

Seeds: one master seed; subordinate streams are counter-based splits
``SeedSequence(master, spawn_key=(k1, k2, ...))`` ordered experiment ->
replica -> cell (see ``derive_seed`` and ``lut.cell_rng``).
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .beamformer import (beam_gain, chirp_taper, conjugate_precoder, partial_activation_count,
                         partial_activation_taper, sinc_taper)
from .config import R_Q_NOTE, ConfigError, RunConfig, grid, resolved_lines
from .lut import LookupTable, build_lookup_table, save_lut, scenario_fingerprint
from .objectives import BeamEvaluator
from .optimizer import chirp_parameter_search, pareto_sweep, pso_optimize
from .tracking import parse_scheme, run_tracking, trace_rows, TRACE_COLUMNS

log = logging.getLogger(__name__)

KINDS = ("lut_build", "beam_pattern", "pareto", "contour", "absorption_sweep", "baseline_compare",
         "tracking_trace", "tracking_cdf", "outage_vs_overhead")

# per-experiment defaults, applied unless the config sets the key
KIND_DEFAULTS = {
    "beam_pattern": {"r_min_gbps": "5", "alpha_list": "0, 0.5, 1"},
    "pareto": {"r_min_gbps": "5"},
    "contour": {"r_min_gbps": "5"},
    "absorption_sweep": {"r_min_gbps": "5"},
    "baseline_compare": {"r_min_gbps": "5"},
    "tracking_trace": {"horizon_slots": "1000"},
}
_ALIASES = {"r_min_gbps": ("r_min_bps",), "alpha_list": (), "horizon_slots": ()}


def apply_kind_defaults(kind: str, cfg: RunConfig) -> RunConfig:
    given = {k for k, _ in cfg.raw}
    extra = {k: v for k, v in KIND_DEFAULTS.get(kind, {}).items()
             if k not in given and not given.intersection(_ALIASES.get(k, ()))}
    return cfg.with_overrides(**extra) if extra else cfg


def derive_seed(master_seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint32)[0])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, kind: str, cfg: RunConfig, columns, rows, notes=()) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# experiment = {kind}\n")
        for line in resolved_lines(cfg):
            fh.write(f"# {line}\n")
        for note in notes:
            fh.write(f"# note: {note}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
            count += 1
    return count


def read_csv(path) -> tuple[list[str], list[dict[str, str]]]:
    """Counterpart of ``write_csv``: (comment lines, data rows as dicts)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    comments = [ln[2:] for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return comments, list(csv.DictReader(body))


def _pool_map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def find_lut(luts, cfg: RunConfig, alpha: float | None = None) -> LookupTable:
    objective = cfg.objective if alpha is None else cfg.objective.with_(alpha=alpha)
    want = scenario_fingerprint(objective)
    for table in luts:
        if table.scenario_fingerprint == want:
            return table
    raise ConfigError(
        f"no lookup table matches the scenario (alpha={objective.alpha:g}, fingerprint {want}); "
        f"build one with `thzbeam lut-build --config <file> --set alpha={objective.alpha:g} "
        "--out <lut>` and pass it with --lut <lut>")


# -- drivers -----------------------------------------------------------------


def lut_build(cfg: RunConfig, out, luts=(), workers=1):
    def progress(done, total):
        if done % max(1, total // 20) == 0 or done == total:
            log.info("lut-build: %d/%d cells", done, total)
    table = build_lookup_table(cfg.lut_grid.d_grid_m, cfg.lut_grid.sigma_grid_rad, cfg.objective,
                               cfg.pso, workers=workers, progress=progress)
    save_lut(table, out)
    return table


def beam_pattern(cfg: RunConfig, out, luts=(), workers=1):
    exp, link = cfg.experiment, cfg.link
    d, s = exp.d_m, math.radians(exp.sigma_deg)
    angles = np.linspace(-exp.angle_span_deg, exp.angle_span_deg, exp.angle_points)
    phis = np.deg2rad(angles)
    rows = []
    beams = []
    for alpha in sorted(exp.alpha_list):
        params, _ = pso_optimize(d, s, cfg.objective.with_(alpha=alpha), cfg.pso)
        f = params.beta * sinc_taper(params.v, params.omega, link.n_tx)
        beams.append((f"sinc_alpha{alpha:g}", alpha, params.v, params.omega, f))
    beams.append(("nonrobust", float("nan"), 0.0, 0.0,
                  conjugate_precoder(0.0, link.n_tx, link.tx_power_w)))
    for name, alpha, v, omega, f in beams:
        gains = beam_gain(f, phis)
        for a, g in zip(angles, gains):
            rows.append((name, alpha, v, omega, a, g, 10 * math.log10(max(g, 1e-30))))
    return write_csv(out, "beam_pattern", cfg,
                     ("beam", "alpha", "v", "omega", "angle_deg", "gain", "gain_db"), rows)


def pareto(cfg: RunConfig, out, luts=(), workers=1):
    exp = cfg.experiment
    points = pareto_sweep(exp.d_m, math.radians(exp.sigma_deg), exp.alpha_list, cfg.objective,
                          cfg.pso, restarts=cfg.restarts, seed=derive_seed(cfg.seed, 1))
    rows = [(p.alpha, p.solver, p.expected_rate_bps, p.outage_prob, p.outage_exact, p.g_alpha,
             p.v, p.omega) for p in points]
    return write_csv(out, "pareto", cfg, ("alpha", "solver", "expected_rate_bps", "outage_prob",
                                          "outage_exact", "g_alpha", "v", "omega"), rows)


def contour(cfg: RunConfig, out, luts=(), workers=1):
    exp = cfg.experiment
    d_grid = grid(exp.contour_d_min_m, exp.contour_d_max_m, exp.contour_d_step_m)
    s_grid = np.deg2rad(grid(0.0, exp.contour_sigma_max_deg, exp.contour_sigma_step_deg))
    rows = []
    for alpha in (0.0, 1.0):
        table = build_lookup_table(d_grid, s_grid, cfg.objective.with_(alpha=alpha), cfg.pso,
                                   workers=workers)
        for i, d in enumerate(d_grid):
            for j, s in enumerate(s_grid):
                v, omega, rate, outage, g = table.cells[i, j]
                rows.append((alpha, d, s, math.degrees(s), v, omega, rate, outage, g))
    return write_csv(out, "contour", cfg, ("alpha", "d_m", "sigma_rad", "sigma_deg", "v", "omega",
                                           "expected_rate_bps", "outage_prob", "g_alpha"), rows)


def _absorption_job(args):
    cfg, f_ghz, d, alpha = args
    link = cfg.link.with_(carrier_frequency_hz=f_ghz * 1e9)
    objective = cfg.objective.with_(alpha=alpha, link=link)
    s = cfg.experiment.absorption_misalignment_m / d
    params, val = pso_optimize(d, s, objective, cfg.pso)
    ev = BeamEvaluator(d, s, objective)
    taper = params.beta * sinc_taper(params.v, params.omega, link.n_tx)
    return (f_ghz, d, math.degrees(s), alpha, link.absorption_per_m, params.v, params.omega,
            val.expected_rate_bps, val.outage_prob, float(ev.outage_exact(taper)))


def absorption_sweep(cfg: RunConfig, out, luts=(), workers=1):
    exp = cfg.experiment
    jobs = [(cfg, f, d, a) for d in exp.absorption_d_list_m for a in (0.0, 1.0)
            for f in exp.frequency_list_ghz]
    rows = _pool_map(_absorption_job, jobs, workers)
    return write_csv(out, "absorption_sweep", cfg,
                     ("frequency_ghz", "d_m", "sigma_deg", "alpha", "absorption_per_m", "v", "omega",
                      "expected_rate_bps", "outage_prob", "outage_exact"), rows)


def baseline_rows(cfg: RunConfig, sigmas_deg, d_m: float):
    """Expected rate and outage of every beamformer per deviation."""
    link = cfg.link
    n, p = link.n_tx, link.tx_power_w
    rows = []
    for sd in sigmas_deg:
        s = math.radians(sd)
        ev = BeamEvaluator(d_m, s, cfg.objective)
        beams = []
        for alpha in (1.0, 0.0):
            params, _ = pso_optimize(d_m, s, cfg.objective.with_(alpha=alpha), cfg.pso)
            beams.append((f"proposed_alpha{alpha:g}", params.v,
                          params.beta * sinc_taper(params.v, params.omega, n)))
        beams.append(("nonrobust", 0.0, np.full(n, math.sqrt(p / n))))
        zeta = chirp_parameter_search(d_m, s, cfg.objective)
        beams.append(("chirp", zeta, chirp_taper(zeta, n, p)))
        n_active = partial_activation_count(s, n) if s > 0 else n
        beams.append(("partial", float(n_active), partial_activation_taper(s, n, p) if s > 0
                      else np.full(n, math.sqrt(p / n))))
        for name, param, taper in beams:
            rate, out = ev.rate_and_outage(taper)
            rows.append((sd, name, param, float(rate), float(out), float(ev.outage_exact(taper))))
    return rows


def baseline_compare(cfg: RunConfig, out, luts=(), workers=1):
    exp = cfg.experiment
    rows = baseline_rows(cfg, exp.sigma_list_deg, exp.d_m)
    return write_csv(out, "baseline_compare", cfg, ("sigma_deg", "beam", "parameter",
                                                    "expected_rate_bps", "outage_prob",
                                                    "outage_exact"), rows,
                     notes=["parameter: v (proposed), zeta (chirp), active antennas (partial)"])


def _scenario_for(cfg: RunConfig, scheme: str, luts, alpha=None, r_q=None, seed=None):
    beam, mode = parse_scheme(scheme)
    sc = cfg.scenario
    objective = sc.objective if alpha is None else sc.objective.with_(alpha=alpha)
    kw = dict(scheme=scheme, objective=objective)
    if r_q is not None:
        kw.update(r_q=r_q, period=max(1, round(1.0 / r_q)))
    if seed is not None:
        kw["master_seed"] = seed
    kw["lut"] = find_lut(luts, cfg, objective.alpha) if beam == "proposed" else None
    return sc.with_(**kw)


def tracking_trace(cfg: RunConfig, out, luts=(), workers=1):
    scenario = _scenario_for(cfg, cfg.scenario.scheme, luts)
    records, summary = run_tracking(scenario)
    notes = [f"outage_fraction = {summary.outage_fraction!r}",
             f"avg_overhead = {summary.avg_overhead!r}",
             f"handovers = {summary.handover_count}"]
    return write_csv(out, "tracking_trace", cfg, TRACE_COLUMNS, trace_rows(records), notes)


def _run_summary(scenario):
    _, summary = run_tracking(scenario)
    return summary


def tracking_cdf(cfg: RunConfig, out, luts=(), workers=1):
    exp, r_q = cfg.experiment, cfg.scenario.r_q
    runs = [("proposed_event_alpha0", _scenario_for(cfg, "proposed_event", luts, alpha=0.0, r_q=r_q)),
            ("proposed_event_alpha1", _scenario_for(cfg, "proposed_event", luts, alpha=1.0, r_q=r_q)),
            ("nonrobust_periodic", _scenario_for(cfg, "nonrobust_periodic", luts, r_q=r_q))]
    summaries = _pool_map(_run_summary, [sc for _, sc in runs], workers)
    rates = np.round(np.arange(0.0, exp.cdf_rate_max_gbps + 1e-9, exp.cdf_rate_step_gbps), 10)
    sorted_samples = [np.sort(s.rate_samples) for s in summaries]
    cols = [np.searchsorted(x, rates * 1e9, side="right") / len(x) for x in sorted_samples]
    rows = [(r, *(c[i] for c in cols)) for i, r in enumerate(rates)]
    r_min = cfg.objective.r_min_bps
    notes = [f"{name}: fraction_below_r_min = {s.fraction_below(r_min)!r}, "
             f"avg_overhead = {s.avg_overhead!r}" for (name, _), s in zip(runs, summaries)]
    return write_csv(out, "tracking_cdf", cfg, ("rate_gbps", *(n for n, _ in runs)), rows, notes)


def outage_vs_overhead(cfg: RunConfig, out, luts=(), workers=1):
    exp = cfg.experiment
    keys, jobs = [], []
    for scheme in exp.scheme_list:
        for r_q in exp.r_q_list:
            for rep in range(exp.replicas):
                seed = derive_seed(cfg.seed, rep)  # shared across schemes: common random numbers
                keys.append((scheme, r_q, rep, seed))
                jobs.append(_scenario_for(cfg, scheme, luts, r_q=r_q, seed=seed))
    summaries = _pool_map(_run_summary, jobs, workers)
    rows = []
    for (scheme, r_q, rep, seed), s in zip(keys, summaries):
        rows.append((scheme, r_q, rep, seed, s.outage_fraction, s.avg_overhead, s.voluntary_pilots,
                     s.forced_pilots, s.handover_count, s.mean_rate_bps))
    return write_csv(out, "outage_vs_overhead", cfg,
                     ("scheme", "r_q", "replica", "seed", "outage_fraction", "avg_overhead",
                      "voluntary_pilots", "forced_pilots", "handovers", "mean_rate_bps"), rows,
                     notes=[R_Q_NOTE, "periodic schemes use period round(1 / r_q)"])


DRIVERS = {
    "lut_build": lut_build,
    "beam_pattern": beam_pattern,
    "pareto": pareto,
    "contour": contour,
    "absorption_sweep": absorption_sweep,
    "baseline_compare": baseline_compare,
    "tracking_trace": tracking_trace,
    "tracking_cdf": tracking_cdf,
    "outage_vs_overhead": outage_vs_overhead,
}


def run_experiment(kind: str, cfg: RunConfig, out, luts=(), workers: int = 1):
    if kind not in DRIVERS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return DRIVERS[kind](apply_kind_defaults(kind, cfg), out, luts=luts, workers=workers)
