"""Transmit precoders for a half-wavelength ULA.

All constructors return the full precoder ``f`` (length ``n_tx``) steered to
the estimated AoD. The sinc precoder is the variable-beamwidth design; the
conjugate, chirp and partial-activation beams are the comparison schemes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POWER_RTOL = 1e-9


def sinc(x):
    """sin(x)/x with sinc(0) = 1 (unnormalized), stable near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BeamParams:
    v: float
    omega: float
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"v must lie in [0, 1], got {self.v}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def power(self, n_tx: int) -> float:
        return float(self.beta**2 * np.sum(sinc_taper(self.v, self.omega, n_tx) ** 2))


def sinc_taper(v, omega, n_tx: int) -> np.ndarray:
    """Unscaled real taper sinc((omega - pi n) v), n = 0..n_tx-1.

    ``v`` and ``omega`` may be arrays of equal shape; the antenna axis is last.
    """
    v = np.asarray(v, dtype=float)[..., None]
    omega = np.asarray(omega, dtype=float)[..., None]
    n = np.arange(n_tx)
    return sinc((omega - np.pi * n) * v)


def saturate_power(v, omega, p_max_w: float, n_tx: int):
    """Scaling that makes the sinc precoder use exactly ``p_max_w``."""
    t = sinc_taper(v, omega, n_tx)
    beta = np.sqrt(p_max_w / np.sum(t * t, axis=-1))
    return float(beta) if beta.ndim == 0 else beta


def make_params(v: float, omega: float, p_max_w: float, n_tx: int) -> BeamParams:
    return BeamParams(float(v), float(omega), saturate_power(v, omega, p_max_w, n_tx))


def direction_phase(phi_hat_rad: float, n_tx: int) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(n_tx) * np.sin(phi_hat_rad))


def sinc_precoder(params: BeamParams, phi_hat_rad: float, n_tx: int) -> np.ndarray:
    taper = params.beta * sinc_taper(params.v, params.omega, n_tx)
    return taper * direction_phase(phi_hat_rad, n_tx)


def conjugate_precoder(phi_hat_rad: float, n_tx: int, p_max_w: float) -> np.ndarray:
    """Maximum-ratio transmission toward the estimated AoD (the narrowest beam)."""
    return np.sqrt(p_max_w / n_tx) * direction_phase(phi_hat_rad, n_tx)


def chirp_taper(zeta: float, n_tx: int, p_max_w: float) -> np.ndarray:
    """Quadratic phase pi zeta n^2 / N_t^2: the beam sweeps 2 zeta / N_t in sin-space."""
    n = np.arange(n_tx)
    return np.sqrt(p_max_w / n_tx) * np.exp(1j * np.pi * zeta * n * n / n_tx**2)


def chirp_precoder(zeta: float, phi_hat_rad: float, n_tx: int, p_max_w: float) -> np.ndarray:
    """Constant-modulus quadratic-phase beam; ``zeta`` spreads the beam."""
    return chirp_taper(zeta, n_tx, p_max_w) * direction_phase(phi_hat_rad, n_tx)


def beam_gain(precoder: np.ndarray, phi_rad) -> np.ndarray | float:
    """|a(phi)^H f|^2 for a scalar angle or an array of angles."""
    f = np.asarray(precoder)
    phi = np.asarray(phi_rad, dtype=float)
    n = np.arange(f.shape[-1])
    a = np.exp(1j * np.pi * np.multiply.outer(np.sin(phi), n)) / np.sqrt(f.shape[-1])
    g = np.abs(a.conj() @ f) ** 2
    return float(g) if g.ndim == 0 else g


def pattern_in_sin_space(taper: np.ndarray, u) -> np.ndarray:
    """Gain of a direction-relative taper as a function of the sin-space offset ``u``."""
    taper = np.asarray(taper)
    n = np.arange(taper.shape[-1])
    e = np.exp(1j * np.pi * np.multiply.outer(np.asarray(u, dtype=float), n))
    return np.abs(e @ taper) ** 2 / taper.shape[-1]


def half_power_beamwidth(taper: np.ndarray, resolution: int = 8001) -> float:
    """Width in sin-space (radians at broadside) where gain is within 3 dB of peak.

    Measured between the outermost half-power crossings in ``u in [-1, 1]``
    (linearly interpolated), so flat-topped beams whose ripple dips below
    half power are not cut at the first dip.
    """
    u = np.linspace(-1.0, 1.0, resolution)
    g = pattern_in_sin_space(taper, u)
    thr = 0.5 * g.max()
    inside = np.flatnonzero(g >= thr)
    lo_i, hi_i = inside[0], inside[-1]

    def crossing(i, j):  # i at or above threshold, j below
        return u[i] + (u[j] - u[i]) * (g[i] - thr) / (g[i] - g[j])

    lo = crossing(lo_i, lo_i - 1) if lo_i > 0 else u[0]
    hi = crossing(hi_i, hi_i + 1) if hi_i < resolution - 1 else u[-1]
    return float(hi - lo)


def active_antennas(precoder: np.ndarray, threshold_fraction: float, mode: str = "amplitude") -> np.ndarray:
    """Indices of antennas kept on by threshold-based deactivation.

    ``mode="amplitude"`` keeps |f_n| >= thr * max|f|; ``mode="power"`` keeps
    |f_n|^2 >= thr * max|f|^2.
    """
    mag = np.abs(np.asarray(precoder))
    peak = mag.max()
    if peak == 0:
        raise ValueError("cannot select antennas of an all-zero precoder")
    if mode == "amplitude":
        keep = mag >= threshold_fraction * peak
    elif mode == "power":
        keep = mag**2 >= threshold_fraction * peak**2
    else:
        raise ValueError(f"unknown deactivation mode {mode!r}")
    return np.flatnonzero(keep)


def partial_activation_count(sigma_eps_rad: float, n_tx: int) -> int:
    """Largest number of active antennas whose HPBW still covers +-sigma."""
    if not sigma_eps_rad > 0:
        raise ValueError("sigma_eps_rad must be positive")
    for n_active in range(n_tx, 0, -1):
        if _hpbw_uniform(n_active) >= 2.0 * sigma_eps_rad:
            return n_active
    return 1


_HPBW_CACHE: dict[int, float] = {}


def _hpbw_uniform(n_active: int) -> float:
    if n_active not in _HPBW_CACHE:
        _HPBW_CACHE[n_active] = (
            2.0 if n_active == 1 else half_power_beamwidth(np.ones(n_active))
        )
    return _HPBW_CACHE[n_active]


def partial_activation_taper(sigma_eps_rad: float, n_tx: int, p_max_w: float) -> np.ndarray:
    n_active = partial_activation_count(sigma_eps_rad, n_tx)
    taper = np.zeros(n_tx)
    taper[:n_active] = np.sqrt(p_max_w / n_active)
    return taper


def partial_activation_precoder(sigma_eps_rad: float, phi_hat_rad: float, n_tx: int,
                                p_max_w: float) -> np.ndarray:
    return partial_activation_taper(sigma_eps_rad, n_tx, p_max_w) * direction_phase(phi_hat_rad, n_tx)

