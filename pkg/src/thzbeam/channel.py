"""Physical layer: LOS path gain with molecular absorption, noise, ULA steering
vectors, achievable rate and the dynamic-blockage on/off chain."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

C = 299_792_458.0  # speed of light [m/s]


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(w: float) -> float:
    return 10.0 * np.log10(w) + 30.0


def absorption_line_curve(
    k_at_300ghz: float = 0.0012,
    line_center_hz: float = 325e9,
    line_peak_per_m: float = 0.03,
    line_halfwidth_hz: float = 5e9,
    f_min_hz: float = 100e9,
    f_max_hz: float = 450e9,
    step_hz: float = 1e9,
) -> tuple[tuple[float, float], ...]:
    """Tabulate a smooth background plus one Lorentzian absorption line.

    The background scales as f**2.5 and is sized so the total coefficient at
    300 GHz equals ``k_at_300ghz``.
    """
    def line(f):
        return line_peak_per_m / (1.0 + ((f - line_center_hz) / line_halfwidth_hz) ** 2)

    f = np.arange(f_min_hz, f_max_hz + 0.5 * step_hz, step_hz)
    scale = max(k_at_300ghz - line(300e9), 0.0)
    k = scale * (f / 300e9) ** 2.5 + line(f)
    return tuple((float(a), float(b)) for a, b in zip(f, k))


DEFAULT_ABSORPTION_CURVE = absorption_line_curve()


def flat_curve(k_per_m: float = 0.0012, f_min_hz: float = 100e9, f_max_hz: float = 450e9):
    return ((f_min_hz, k_per_m), (f_max_hz, k_per_m))


def load_absorption_curve(path: str | Path) -> tuple[tuple[float, float], ...]:
    """Read a two-column ``frequency_hz, K_per_m`` file with one header line."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty absorption curve file")
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two columns, got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    _check_curve(rows)
    return tuple(rows)


def save_absorption_curve(curve, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frequency_hz,K_per_m\n")
        for f, k in curve:
            fh.write(f"{f!r},{k!r}\n")


def _check_curve(curve) -> None:
    if len(curve) == 0:
        raise ValueError("absorption curve needs at least one point")
    f = np.array([p[0] for p in curve], dtype=float)
    k = np.array([p[1] for p in curve], dtype=float)
    if np.any(np.diff(f) <= 0):
        raise ValueError("absorption curve frequencies must be strictly increasing")
    if np.any(k < 0):
        raise ValueError("absorption coefficients must be nonnegative")


@dataclass(frozen=True)
class LinkConfig:
    """Static link scenario. Defaults reproduce the reference indoor setup."""

    carrier_frequency_hz: float = 300e9
    bandwidth_hz: float = 10e9
    tx_power_w: float = 1.0
    noise_psd_w_per_hz: float = dbm_to_w(-174.0)
    n_tx: int = 64
    n_rx: int = 16
    slot_duration_s: float = 0.05
    blocker_density_per_m2: float = 0.3
    blocker_speed_mps: float = 1.0
    height_bs_m: float = 3.5
    height_ue_m: float = 1.5
    height_blocker_m: float = 1.8
    unblocking_rate_hz: float = 3.0
    absorption_curve: tuple = DEFAULT_ABSORPTION_CURVE

    def __post_init__(self):
        positive = ("carrier_frequency_hz", "bandwidth_hz", "tx_power_w", "noise_psd_w_per_hz",
                    "slot_duration_s", "height_bs_m", "height_ue_m", "height_blocker_m",
                    "unblocking_rate_hz")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("n_tx", "n_rx"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val!r}")
        for name in ("blocker_density_per_m2", "blocker_speed_mps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.height_bs_m > self.height_blocker_m > self.height_ue_m:
            raise ValueError("heights must satisfy height_bs_m > height_blocker_m > height_ue_m")
        curve = tuple((float(f), float(k)) for f, k in self.absorption_curve)
        _check_curve(curve)
        object.__setattr__(self, "absorption_curve", curve)

    @cached_property
    def absorption_per_m(self) -> float:
        """K at the carrier frequency."""
        return absorption_coefficient(self, self.carrier_frequency_hz)

    def with_(self, **kw) -> "LinkConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class LinkState:
    ue_position_m: tuple[float, float]
    blocked: bool = False

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError("UE must not sit at the BS position")

    @property
    def distance_m(self) -> float:
        return float(np.hypot(*self.ue_position_m))

    @property
    def aod_rad(self) -> float:
        x, y = self.ue_position_m
        return float(np.arctan2(y, x))


def absorption_coefficient(config: LinkConfig, f_hz: float) -> float:
    curve = config.absorption_curve
    f = np.array([p[0] for p in curve])
    k = np.array([p[1] for p in curve])
    if f_hz < f[0] or f_hz > f[-1]:
        raise ValueError(f"frequency {f_hz:g} Hz outside absorption curve range "
                         f"[{f[0]:g}, {f[-1]:g}] Hz")
    return float(np.interp(f_hz, f, k))


def free_space_amplitude(d_m, f_hz):
    return C / (4.0 * np.pi * f_hz * np.asarray(d_m, dtype=float))


def path_gain(d_m, f_hz: float, k_per_m: float):
    """Amplitude gain c/(4 pi f d) * exp(-K d / 2)."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = free_space_amplitude(d, f_hz) * np.exp(-0.5 * k_per_m * d)
    return float(out) if out.ndim == 0 else out


def noise_power(config: LinkConfig, d_m):
    """Thermal noise plus molecular re-radiation noise [W]."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    k = config.absorption_per_m
    thermal = config.noise_psd_w_per_hz * config.bandwidth_hz
    fs = free_space_amplitude(d, config.carrier_frequency_hz)
    out = thermal + config.tx_power_w * fs**2 * (-np.expm1(-k * d))
    return float(out) if out.ndim == 0 else out


def channel_snr_per_unit_gain(config: LinkConfig, d_m):
    """eta^2(d) / sigma_n^2(d): SNR per unit of beam gain |a^H f|^2."""
    g = path_gain(d_m, config.carrier_frequency_hz, config.absorption_per_m)
    return np.asarray(g) ** 2 / noise_power(config, d_m)


def steering_vector(phi_rad: float, n_antennas: int) -> np.ndarray:
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    n = np.arange(n_antennas)
    return np.exp(1j * np.pi * n * np.sin(phi_rad)) / np.sqrt(n_antennas)


def achievable_rate(config: LinkConfig, state: LinkState, precoder: np.ndarray) -> float:
    """Rate with MRC at the UE; the unit-norm combiner adds no gain."""
    f = np.asarray(precoder)
    if f.shape != (config.n_tx,):
        raise ValueError(f"precoder length {f.shape} does not match n_tx={config.n_tx}")
    power = float(np.vdot(f, f).real)
    if power > config.tx_power_w * (1.0 + 1e-9):
        raise ValueError(f"precoder power {power:g} W exceeds tx_power_w={config.tx_power_w:g} W")
    if state.blocked:
        return 0.0
    a = steering_vector(state.aod_rad, config.n_tx)
    gain = abs(np.vdot(a, f)) ** 2
    snr = channel_snr_per_unit_gain(config, state.distance_m) * gain
    return float(config.bandwidth_hz * np.log2(1.0 + snr))


def blockage_arrival_rate(config: LinkConfig, d_m: float) -> float:
    if d_m <= 0:
        raise ValueError("distance must be positive")
    ratio = (config.height_blocker_m - config.height_ue_m) / (config.height_bs_m - config.height_ue_m)
    return 2.0 / np.pi * config.blocker_density_per_m2 * config.blocker_speed_mps * ratio * d_m


def blocking_probability(config: LinkConfig, d_m: float) -> float:
    """P(blocked in this slot | unblocked in the previous one)."""
    return float(-np.expm1(-blockage_arrival_rate(config, d_m) * config.slot_duration_s))


def unblocking_probability(config: LinkConfig) -> float:
    return float(-np.expm1(-config.unblocking_rate_hz * config.slot_duration_s))


def blockage_step(blocked_prev: bool, config: LinkConfig, d_m: float, rng) -> bool:
    u = rng.random()
    if blocked_prev:
        return not (u < unblocking_probability(config))
    return bool(u < blocking_probability(config, d_m))
