"""Expected rate, outage probability and the scalarized beam objective.

Everything here is evaluated from the BS point of view: the estimated distance
``d_hat`` stands in for the true one and only the effective AoD error
``eps ~ N(0, sigma_eff^2)`` is averaged over. A beam is either ``BeamParams``
(sinc precoder) or a direction-relative taper ``c`` with ``f = c * exp(j pi n
sin(phi_hat))``; in both cases the gain at error ``eps`` is
``|sum_n c_n exp(j pi n eps)|^2 / N_t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .beamformer import BeamParams, sinc_taper
from .channel import LinkConfig, channel_snr_per_unit_gain

EXACT_GRID_POINTS = 4096
RATE_UNIT_BPS = 1e9  # theta acts on rates expressed in Gbps


@dataclass(frozen=True)
class ObjectiveConfig:
    """Scalarization weight, target rate and numerics of the beam objective.

    ``theta`` is the slope of the logistic outage surrogate
    ``1 / (1 + exp(-theta (R_min - R)))`` with rates in Gbps.
    """

    alpha: float = 0.6
    r_min_bps: float = 10e9
    theta: float = 20.0
    quadrature_nodes: int = 256
    link: LinkConfig = field(default_factory=LinkConfig)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not self.r_min_bps > 0:
            raise ValueError("r_min_bps must be positive")
        if self.quadrature_nodes < 1:
            raise ValueError("quadrature_nodes must be >= 1")

    def with_(self, **kw) -> "ObjectiveConfig":
        from dataclasses import replace
        return replace(self, **kw)


@dataclass(frozen=True)
class ObjectiveValue:
    expected_rate_bps: float
    outage_prob: float
    g_alpha: float


def r_max(d_hat_m: float, link: LinkConfig) -> float:
    """Rate of a perfectly aligned beam using the full power budget."""
    snr = link.tx_power_w * channel_snr_per_unit_gain(link, d_hat_m)
    return float(link.bandwidth_hz * np.log2(1.0 + snr))


def scalarized_objective(expected_rate_bps, outage_prob, r_max_bps, alpha):
    if not np.all(np.asarray(r_max_bps) > 0):
        raise ValueError("r_max must be positive")
    return alpha * expected_rate_bps / r_max_bps - (1.0 - alpha) * outage_prob


def integration_halfwidth(sigma_eff_rad: float) -> float:
    return min(math.pi / 2, 6.0 * sigma_eff_rad)


def node_count(sigma_eff_rad: float, n_tx: int, base_nodes: int) -> int:
    """Gauss-Legendre order: ``base_nodes`` per 8/N_t of half-window.

    The beam pattern oscillates on the scale 2/N_t in error space, so a fixed
    order under-resolves wide windows.
    """
    half = integration_halfwidth(sigma_eff_rad)
    return base_nodes * max(1, math.ceil(half * n_tx / 8.0))


@lru_cache(maxsize=4096)
def _gauss_rule(sigma_eff_rad: float, n_tx: int, base_nodes: int):
    half = integration_halfwidth(sigma_eff_rad)
    order = node_count(sigma_eff_rad, n_tx, base_nodes)
    x, w = np.polynomial.legendre.leggauss(order)
    eps = half * x
    weights = w * np.exp(-0.5 * (eps / sigma_eff_rad) ** 2)
    weights /= weights.sum()  # Gaussian truncated to the window
    phase = np.pi * np.outer(np.arange(n_tx), eps)
    pos = eps > 0
    half_weights = 2.0 * weights[pos] if order % 2 == 0 else None
    # real tapers give gain(-eps) == gain(eps): fold onto eps > 0
    cos_half = np.cos(phase[:, pos]) if order % 2 == 0 else None
    sin_half = np.sin(phase[:, pos]) if order % 2 == 0 else None
    return eps, weights, np.exp(1j * phase), cos_half, sin_half, half_weights


@lru_cache(maxsize=1024)
def _uniform_rule(sigma_eff_rad: float, n_tx: int, points: int = EXACT_GRID_POINTS):
    half = integration_halfwidth(sigma_eff_rad)
    eps = np.linspace(-half, half, points)
    w = np.exp(-0.5 * (eps / sigma_eff_rad) ** 2)
    w[0] *= 0.5
    w[-1] *= 0.5
    w /= w.sum()
    return eps, w, np.exp(1j * np.pi * np.outer(np.arange(n_tx), eps))


def as_taper(beam, n_tx: int) -> np.ndarray:
    """Direction-relative taper of a sinc ``BeamParams`` or a raw taper array."""
    if isinstance(beam, BeamParams):
        return beam.beta * sinc_taper(beam.v, beam.omega, n_tx)
    taper = np.asarray(beam)
    if taper.shape[-1] != n_tx:
        raise ValueError(f"taper length {taper.shape[-1]} does not match n_tx={n_tx}")
    return taper


class BeamEvaluator:
    """Batched objective evaluation at one operating point ``(d_hat, sigma_eff)``.

    Tapers are passed as an array of shape ``(..., n_tx)``; all methods
    broadcast over the leading axes.
    """

    def __init__(self, d_hat_m: float, sigma_eff_rad: float, cfg: ObjectiveConfig):
        if not d_hat_m > 0:
            raise ValueError("d_hat_m must be positive")
        if sigma_eff_rad < 0:
            raise ValueError("sigma_eff_rad must be nonnegative")
        link = cfg.link
        self.cfg = cfg
        self.n_tx = link.n_tx
        self.sigma = float(sigma_eff_rad)
        self.snr_unit = float(channel_snr_per_unit_gain(link, d_hat_m))
        self.bandwidth = link.bandwidth_hz
        self.r_max = r_max(d_hat_m, link)
        self.se_min = cfg.r_min_bps / link.bandwidth_hz
        # logistic slope per unit of spectral efficiency
        self._slope = cfg.theta * link.bandwidth_hz / RATE_UNIT_BPS
        if self.sigma > 0:
            (self.eps, self.weights, self.phasor, self._cos, self._sin,
             self._half_w) = _gauss_rule(self.sigma, self.n_tx, cfg.quadrature_nodes)

    # -- gains ---------------------------------------------------------------
    def _gains(self, taper):
        """Return (gain samples, quadrature weights) for a batch of tapers."""
        taper = np.asarray(taper)
        if self.sigma == 0:
            g = np.abs(taper.sum(axis=-1, keepdims=True)) ** 2 / self.n_tx
            return g, np.ones(1)
        if not np.iscomplexobj(taper) and self._cos is not None:
            re = taper @ self._cos
            im = taper @ self._sin
            return (re * re + im * im) / self.n_tx, self._half_w
        s = taper @ self.phasor
        return (s.real**2 + s.imag**2) / self.n_tx, self.weights

    def spectral_efficiency(self, gains):
        return np.log2(1.0 + self.snr_unit * gains)

    # -- objectives ----------------------------------------------------------
    def rate_and_outage(self, taper):
        g, w = self._gains(taper)
        se = self.spectral_efficiency(g)
        rate = self.bandwidth * (se @ w)
        soft = expit(-self._slope * (se - self.se_min))
        return rate, soft @ w

    def expected_rate(self, taper):
        return self.rate_and_outage(taper)[0]

    def outage_smooth(self, taper):
        return self.rate_and_outage(taper)[1]

    def outage_exact(self, taper):
        taper = np.asarray(taper)
        if self.sigma == 0:
            g, _ = self._gains(taper)
            return (self.spectral_efficiency(g)[..., 0] < self.se_min).astype(float)
        _, w, phasor = _uniform_rule(self.sigma, self.n_tx)
        s = taper @ phasor
        se = self.spectral_efficiency((s.real**2 + s.imag**2) / self.n_tx)
        return (se < self.se_min).astype(float) @ w

    def g_alpha(self, taper):
        rate, out = self.rate_and_outage(taper)
        return scalarized_objective(rate, out, self.r_max, self.cfg.alpha)

    def value(self, taper) -> ObjectiveValue:
        rate, out = self.rate_and_outage(taper)
        rate, out = float(rate), float(out)
        return ObjectiveValue(rate, out, float(scalarized_objective(rate, out, self.r_max, self.cfg.alpha)))


def expected_rate(beam, d_hat_m: float, sigma_eff_rad: float, cfg: ObjectiveConfig) -> float:
    ev = BeamEvaluator(d_hat_m, sigma_eff_rad, cfg)
    return float(ev.expected_rate(as_taper(beam, ev.n_tx)))


def outage_prob_smooth(beam, d_hat_m: float, sigma_eff_rad: float, cfg: ObjectiveConfig) -> float:
    ev = BeamEvaluator(d_hat_m, sigma_eff_rad, cfg)
    return float(ev.outage_smooth(as_taper(beam, ev.n_tx)))


def outage_prob_exact(beam, d_hat_m: float, sigma_eff_rad: float, cfg: ObjectiveConfig) -> float:
    ev = BeamEvaluator(d_hat_m, sigma_eff_rad, cfg)
    return float(ev.outage_exact(as_taper(beam, ev.n_tx)))


def evaluate(beam, d_hat_m: float, sigma_eff_rad: float, cfg: ObjectiveConfig) -> ObjectiveValue:
    ev = BeamEvaluator(d_hat_m, sigma_eff_rad, cfg)
    return ev.value(as_taper(beam, ev.n_tx))
