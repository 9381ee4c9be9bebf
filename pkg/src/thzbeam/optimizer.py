"""Beam parameter search: PSO over (v, omega), the unconstrained-taper
gradient-ascent solver, the chirp spreading search and Pareto sweeps."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .beamformer import BeamParams, chirp_taper, make_params, saturate_power, sinc_taper
from .objectives import BeamEvaluator, ObjectiveConfig, ObjectiveValue

log = logging.getLogger(__name__)

CHIRP_GRID_POINTS = 256
CHIRP_ZETA_MAX = 8.0


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 48
    iterations: int = 120
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    v_bounds: tuple[float, float] = (0.0, 1.0)
    omega_bounds: tuple[float, float] | None = None  # None -> [-pi N_t, pi N_t]
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        lo, hi = self.v_bounds
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("v_bounds must be an ordered sub-interval of [0, 1]")
        if self.omega_bounds is not None and not self.omega_bounds[0] < self.omega_bounds[1]:
            raise ValueError("omega_bounds must be ordered")

    def bounds(self, n_tx: int) -> tuple[np.ndarray, np.ndarray]:
        om = self.omega_bounds or (-math.pi * n_tx, math.pi * n_tx)
        return np.array([self.v_bounds[0], om[0]]), np.array([self.v_bounds[1], om[1]])


def _sinc_batch(x: np.ndarray, p_max_w: float, n_tx: int) -> np.ndarray:
    v, omega = x[:, 0], x[:, 1]
    return saturate_power(v, omega, p_max_w, n_tx)[:, None] * sinc_taper(v, omega, n_tx)


def pso_optimize(d_hat_m: float, sigma_eff_rad: float, cfg: ObjectiveConfig,
                 pso: PsoConfig = PsoConfig(), rng=None) -> tuple[BeamParams, ObjectiveValue]:
    """Maximize g_alpha over the sinc beam parameters with a global-best swarm.

    beta is eliminated through ``saturate_power``. One particle starts at the
    narrow beam (v=0, omega=0) so the result never falls below it. Bounds are
    reflecting. Deterministic for a given ``pso.seed`` (or ``rng``).
    """
    n_tx, p_max = cfg.link.n_tx, cfg.link.tx_power_w
    ev = BeamEvaluator(d_hat_m, sigma_eff_rad, cfg)
    rng = np.random.default_rng(pso.seed) if rng is None else rng
    lb, ub = pso.bounds(n_tx)
    span = ub - lb

    def objective(x):
        return ev.g_alpha(_sinc_batch(x, p_max, n_tx))

    x = lb + rng.random((pso.swarm_size, 2)) * span
    x[0] = [max(lb[0], 0.0), min(max(0.0, lb[1]), ub[1])]
    vel = (rng.random((pso.swarm_size, 2)) - 0.5) * 0.2 * span
    fx = objective(x)
    pbest, pbest_f = x.copy(), fx.copy()
    gi = int(np.argmax(pbest_f))
    gbest, gbest_f = pbest[gi].copy(), pbest_f[gi]

    for _ in range(pso.iterations):
        r1 = rng.random((pso.swarm_size, 2))
        r2 = rng.random((pso.swarm_size, 2))
        vel = (pso.inertia * vel + pso.cognitive * r1 * (pbest - x)
               + pso.social * r2 * (gbest - x))
        vel = np.clip(vel, -span, span)
        x = x + vel
        over, under = x > ub, x < lb
        x = np.where(over, 2 * ub - x, x)
        x = np.where(under, 2 * lb - x, x)
        vel = np.where(over | under, -vel, vel)
        x = np.clip(x, lb, ub)
        fx = objective(x)
        better = fx > pbest_f
        pbest[better], pbest_f[better] = x[better], fx[better]
        gi = int(np.argmax(pbest_f))
        if pbest_f[gi] > gbest_f:
            gbest, gbest_f = pbest[gi].copy(), pbest_f[gi]

    params = make_params(gbest[0], gbest[1], p_max, n_tx)
    return params, ev.value(_sinc_batch(gbest[None, :], p_max, n_tx)[0])


# -- general (unstructured) precoder -----------------------------------------


def _project(f: np.ndarray, p_max: float) -> np.ndarray:
    norm2 = np.sum(f.real**2 + f.imag**2, axis=-1, keepdims=True)
    return f * np.where(norm2 > p_max, np.sqrt(p_max / np.maximum(norm2, 1e-300)), 1.0)


def gradient_ascent_general(d_hat_m: float, sigma_eff_rad: float, cfg: ObjectiveConfig,
                            restarts: int = 4, seed: int = 0, initial=(),
                            max_steps: int = 500, tol: float = 1e-10):
    """Projected gradient ascent of g_alpha over arbitrary complex tapers.

    Gradients are central finite differences (step 1e-4 * sqrt(P/N) per real
    and imaginary component). Step sizes come from a backtracking line search.
    The first restart starts at the narrow beam, further ones at random points
    on the power sphere; ``initial`` adds caller-chosen starting tapers
    (tried before the random ones). Returns ``(taper, ObjectiveValue)`` of the
    best local optimum; restarts that produce non-finite values are dropped.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    n_tx, p_max = cfg.link.n_tx, cfg.link.tx_power_w
    ev = BeamEvaluator(d_hat_m, sigma_eff_rad, cfg)
    rng = np.random.default_rng(seed)
    h = 1e-4 * math.sqrt(p_max / n_tx)

    starts = [np.full(n_tx, math.sqrt(p_max / n_tx), dtype=complex)]
    starts += [np.asarray(t, dtype=complex) for t in initial]
    while len(starts) < restarts + len(initial):
        z = rng.normal(size=n_tx) + 1j * rng.normal(size=n_tx)
        starts.append(z * math.sqrt(p_max) / np.linalg.norm(z))

    # perturbation basis: +-h on each real and imaginary component
    basis = np.concatenate([np.eye(n_tx), 1j * np.eye(n_tx)]) * h

    def grad(f):
        vals = ev.g_alpha(np.concatenate([f + basis, f - basis]))
        k = 2 * n_tx
        d = (vals[:k] - vals[k:]) / (2 * h)
        return d[:n_tx] + 1j * d[n_tx:]

    best_f, best_val = None, -np.inf
    for start in starts:
        f = _project(start, p_max)
        val = float(ev.g_alpha(f))
        step = 0.1 * math.sqrt(p_max)
        ok = np.isfinite(val)
        for _ in range(max_steps if ok else 0):
            g = grad(f)
            gnorm = np.linalg.norm(g)
            if not np.isfinite(gnorm):
                ok = False
                break
            if gnorm == 0:
                break
            direction = g / gnorm
            improved = False
            while step > 1e-9 * math.sqrt(p_max):
                cand = _project(f + step * direction, p_max)
                cval = float(ev.g_alpha(cand))
                if np.isfinite(cval) and cval > val:
                    gain = cval - val
                    f, val, improved = cand, cval, True
                    step *= 1.5
                    break
                step *= 0.5
            if not improved or gain < tol:
                break
        if not ok or not np.isfinite(val):
            log.warning("gradient ascent restart dropped: non-finite objective")
            continue
        if val > best_val:
            best_f, best_val = f, val
    if best_f is None:
        raise FloatingPointError("all gradient ascent restarts produced non-finite objectives")
    return best_f, ev.value(best_f)


# -- chirp baseline -------------------------------------------------------------


def chirp_parameter_search(d_hat_m: float, sigma_eff_rad: float, cfg: ObjectiveConfig,
                           points: int = CHIRP_GRID_POINTS, zeta_max: float = CHIRP_ZETA_MAX) -> float:
    """Expected-rate maximizing chirp spreading on a uniform grid (ties -> smallest)."""
    n_tx, p_max = cfg.link.n_tx, cfg.link.tx_power_w
    ev = BeamEvaluator(d_hat_m, sigma_eff_rad, cfg)
    zetas = np.linspace(0.0, zeta_max, points)
    tapers = np.stack([chirp_taper(z, n_tx, p_max) for z in zetas])
    rates = ev.expected_rate(tapers)
    return float(zetas[int(np.argmax(rates))])


# -- Pareto sweep ---------------------------------------------------------------


@dataclass(frozen=True)
class ParetoPoint:
    solver: str  # "parameterized" or "general"
    alpha: float
    expected_rate_bps: float
    outage_prob: float
    outage_exact: float
    g_alpha: float
    v: float = float("nan")
    omega: float = float("nan")
    taper: np.ndarray | None = field(default=None, compare=False, repr=False)


def pareto_sweep(d_hat_m: float, sigma_eff_rad: float, alpha_list, cfg: ObjectiveConfig,
                 pso: PsoConfig = PsoConfig(), restarts: int = 4, seed: int = 0,
                 general: bool = True) -> list[ParetoPoint]:
    """Optimize both beam classes for every alpha; rows sorted by (alpha, solver)."""
    alphas = sorted(float(a) for a in alpha_list)
    if not alphas or alphas[0] < 0 or alphas[-1] > 1:
        raise ValueError("alpha_list must be nonempty and inside [0, 1]")
    n_tx = cfg.link.n_tx
    rows = []
    for i, alpha in enumerate(alphas):
        acfg = cfg.with_(alpha=alpha)
        ev = BeamEvaluator(d_hat_m, sigma_eff_rad, acfg)
        params, val = pso_optimize(d_hat_m, sigma_eff_rad, acfg, pso)
        taper = params.beta * sinc_taper(params.v, params.omega, n_tx)
        rows.append(ParetoPoint("parameterized", alpha, val.expected_rate_bps, val.outage_prob,
                                float(ev.outage_exact(taper)), val.g_alpha, params.v,
                                params.omega, taper))
        if general:
            # the parameterized optimum is a valid start, so the general class
            # never reports a worse local optimum than the structured one
            gtaper, gval = gradient_ascent_general(d_hat_m, sigma_eff_rad, acfg, restarts,
                                                   seed=seed + i, initial=[taper])
            rows.append(ParetoPoint("general", alpha, gval.expected_rate_bps, gval.outage_prob,
                                    float(ev.outage_exact(gtaper)), gval.g_alpha, taper=gtaper))
    return rows
