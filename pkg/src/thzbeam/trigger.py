"""Virtual-queue pilot trigger: decide per slot whether a pilot is worth its overhead."""
from __future__ import annotations

from dataclasses import dataclass

from .lut import LookupTable, lut_query
from .objectives import ObjectiveConfig, r_max


@dataclass(frozen=True)
class TriggerState:
    z: float = 0.0
    r_q: float = 0.05
    mu: float = 0.5

    def __post_init__(self):
        if self.z < 0:
            raise ValueError("virtual queue backlog z must be nonnegative")
        if not 0.0 < self.r_q <= 1.0:
            raise ValueError(f"r_q must lie in (0, 1], got {self.r_q}")
        if not self.mu > 0:
            raise ValueError("mu must be positive")


def g_perfect(d_hat_m: float, p_block: float, alpha: float, cfg: ObjectiveConfig,
              r_max_bps: float | None = None) -> float:
    """Objective after a pilot: perfect alignment, only blockage can cause outage."""
    if not 0.0 <= p_block <= 1.0:
        raise ValueError("p_block must lie in [0, 1]")
    if r_max_bps is None:
        r_max_bps = r_max(d_hat_m, cfg.link)
    if r_max_bps >= cfg.r_min_bps:
        return alpha - p_block
    return (1.0 - p_block) * alpha - (1.0 - alpha)


def g_imperfect(table: LookupTable, d_hat_m: float, sigma_eff_rad: float,
                cfg: ObjectiveConfig | None = None, p_block: float | None = None) -> float:
    """Stored objective of the best beam under the current uncertainty.

    Blockage is ignored unless ``p_block`` is given (symmetrized variant):
    then the rate term is scaled by ``1 - p_block`` and ``p_block`` is added
    to the outage term, mirroring ``g_perfect``.
    """
    if cfg is not None:
        table.check(cfg)
    rec = lut_query(table, d_hat_m, sigma_eff_rad)
    if p_block is None:
        return rec.g_alpha
    if cfg is None:
        raise ValueError("the symmetrized objective needs the scenario config")
    alpha = cfg.alpha
    rate_term = rec.expected_rate_bps / r_max(d_hat_m, cfg.link)
    outage = p_block + (1.0 - p_block) * rec.outage_prob
    return alpha * (1.0 - p_block) * rate_term - (1.0 - alpha) * outage


def trigger_decision(state: TriggerState, g_p: float, g_imp: float) -> bool:
    """Pilot iff the expected gain outweighs the backlog-weighted overhead (strict)."""
    return state.z - state.r_q + 0.5 < (g_p - g_imp) / state.mu


def queue_update(state: TriggerState, q: bool) -> TriggerState:
    return TriggerState(max(0.0, state.z + (1.0 if q else 0.0) - state.r_q), state.r_q, state.mu)
