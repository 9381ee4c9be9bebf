"""Random-walk user mobility and the BS-side position belief."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class BeliefState:
    """Last observed UE position (BS at origin) and the slots elapsed since."""

    est_position_m: tuple[float, float]
    slots_since_pilot: int = 0
    step_std_m: float = 0.05

    def __post_init__(self):
        if not self.est_distance_m > 0:
            raise ValueError("estimated distance must be positive")
        if self.slots_since_pilot < 0:
            raise ValueError("slots_since_pilot must be nonnegative")

    @property
    def est_distance_m(self) -> float:
        return float(np.hypot(*self.est_position_m))

    @property
    def est_aod_rad(self) -> float:
        x, y = self.est_position_m
        return float(np.arctan2(y, x))

    @property
    def position_std_m(self) -> float:
        return float(np.sqrt(self.slots_since_pilot) * self.step_std_m)

    @property
    def aod_std_rad(self) -> float:
        return self.position_std_m / self.est_distance_m

    @property
    def effective_aod_std_rad(self) -> float:
        """AoD deviation after the small-angle substitution (scaled by |cos phi_hat|)."""
        return abs(np.cos(self.est_aod_rad)) * self.aod_std_rad


def random_walk_step(position_m, step_std_m: float, rng) -> np.ndarray:
    return np.asarray(position_m, dtype=float) + rng.normal(0.0, step_std_m, size=2)


def belief_update(belief: BeliefState, observed_position=None) -> BeliefState:
    """Reset to the observation on a pilot slot, otherwise age the estimate by one slot."""
    if observed_position is not None:
        pos = tuple(float(x) for x in observed_position)
        return replace(belief, est_position_m=pos, slots_since_pilot=0)
    return replace(belief, slots_since_pilot=belief.slots_since_pilot + 1)


def aod_error_pdf(sigma_eps_rad: float, eps_rad):
    if not sigma_eps_rad > 0:
        raise ValueError("sigma_eps_rad must be positive")
    eps = np.asarray(eps_rad, dtype=float)
    out = np.exp(-0.5 * (eps / sigma_eps_rad) ** 2) / np.sqrt(2.0 * np.pi * sigma_eps_rad**2)
    return float(out) if out.ndim == 0 else out
