"""Scenario files: flat ``key = value`` text with optional ``[section]`` headers.

Every key is unique across sections, so a section header only documents
grouping (a key under the wrong section is still an error). Unknown keys are
rejected. Powers may be given in dBm (``tx_power_dbm``, ``noise_psd_dbm_per_hz``).
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .channel import LinkConfig, absorption_line_curve, dbm_to_w, flat_curve, load_absorption_curve
from .objectives import ObjectiveConfig
from .optimizer import PsoConfig
from .tracking import ConfigurationError, ScenarioConfig, parse_scheme

ConfigError = ConfigurationError


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(t) for t in items)


def _optional_bool(text: str):
    return None if text.strip().lower() in ("auto", "none", "") else _bool(text)


# key -> (section, parser)
KEYS: dict[str, tuple[str, object]] = {
    # link
    "carrier_frequency_hz": ("link", float),
    "carrier_frequency_ghz": ("link", float),
    "bandwidth_hz": ("link", float),
    "tx_power_w": ("link", float),
    "tx_power_dbm": ("link", float),
    "noise_psd_w_per_hz": ("link", float),
    "noise_psd_dbm_per_hz": ("link", float),
    "n_tx": ("link", int),
    "n_rx": ("link", int),
    "slot_duration_s": ("link", float),
    "blocker_density_per_m2": ("link", float),
    "blocker_speed_mps": ("link", float),
    "height_bs_m": ("link", float),
    "height_ue_m": ("link", float),
    "height_blocker_m": ("link", float),
    "unblocking_rate_hz": ("link", float),
    "absorption_per_m": ("link", float),
    "absorption_curve_file": ("link", str),
    "absorption_line_peak_per_m": ("link", float),
    # objective
    "alpha": ("objective", float),
    "r_min_bps": ("objective", float),
    "r_min_gbps": ("objective", float),
    "theta": ("objective", float),
    "quadrature_nodes": ("objective", int),
    # optimizer
    "swarm_size": ("pso", int),
    "iterations": ("pso", int),
    "inertia": ("pso", float),
    "cognitive": ("pso", float),
    "social": ("pso", float),
    "restarts": ("pso", int),
    # lookup table grid
    "lut_d_min_m": ("lut", float),
    "lut_d_max_m": ("lut", float),
    "lut_d_step_m": ("lut", float),
    "lut_sigma_max_deg": ("lut", float),
    "lut_sigma_step_deg": ("lut", float),
    # tracking
    "r_q": ("tracking", float),
    "mu": ("tracking", float),
    "scheme": ("tracking", str),
    "period": ("tracking", int),
    "horizon_slots": ("tracking", int),
    "step_std_m": ("tracking", float),
    "handover_min_m": ("tracking", float),
    "handover_max_m": ("tracking", float),
    "symmetrize_trigger": ("tracking", _bool),
    "nack_pilots": ("tracking", _optional_bool),
    # experiment sweeps
    "seed": ("experiment", int),
    "d_m": ("experiment", float),
    "sigma_deg": ("experiment", float),
    "alpha_list": ("experiment", _floats),
    "sigma_list_deg": ("experiment", _floats),
    "frequency_list_ghz": ("experiment", _floats),
    "absorption_d_list_m": ("experiment", _floats),
    "absorption_misalignment_m": ("experiment", float),
    "r_q_list": ("experiment", _floats),
    "schemes": ("experiment", str),
    "replicas": ("experiment", int),
    "angle_span_deg": ("experiment", float),
    "angle_points": ("experiment", int),
    "contour_d_min_m": ("experiment", float),
    "contour_d_max_m": ("experiment", float),
    "contour_d_step_m": ("experiment", float),
    "contour_sigma_max_deg": ("experiment", float),
    "contour_sigma_step_deg": ("experiment", float),
    "cdf_rate_max_gbps": ("experiment", float),
    "cdf_rate_step_gbps": ("experiment", float),
}
SECTIONS = ("link", "objective", "pso", "lut", "tracking", "experiment")
EXCLUSIVE = (("tx_power_w", "tx_power_dbm"), ("noise_psd_w_per_hz", "noise_psd_dbm_per_hz"),
             ("r_min_bps", "r_min_gbps"), ("carrier_frequency_hz", "carrier_frequency_ghz"),
             ("absorption_per_m", "absorption_curve_file", "absorption_line_peak_per_m"))

R_Q_NOTE = ("default r_q list uses 0.0667 (one pilot per 15 slots); "
            "a listed value of 0.667 is out of sequence and treated as a misprint")


@dataclass(frozen=True)
class ExperimentParams:
    seed: int = 0
    d_m: float = 8.0
    sigma_deg: float = 1.5
    alpha_list: tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(11))
    sigma_list_deg: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    frequency_list_ghz: tuple[float, ...] = tuple(float(f) for f in range(300, 351, 1))
    absorption_d_list_m: tuple[float, ...] = (5.0, 10.0)
    absorption_misalignment_m: float = 0.35
    r_q_list: tuple[float, ...] = (0.05, 0.0667, 0.1, 0.2)
    schemes: str = "proposed_event,nonrobust_event,proposed_periodic,nonrobust_periodic"
    replicas: int = 5
    angle_span_deg: float = 30.0
    angle_points: int = 1201
    contour_d_min_m: float = 1.0
    contour_d_max_m: float = 10.0
    contour_d_step_m: float = 0.5
    contour_sigma_max_deg: float = 10.0
    contour_sigma_step_deg: float = 0.5
    cdf_rate_max_gbps: float = 50.0
    cdf_rate_step_gbps: float = 0.25

    @property
    def scheme_list(self) -> tuple[str, ...]:
        out = tuple(s.strip() for s in self.schemes.split(",") if s.strip())
        for s in out:
            parse_scheme(s)
        return out


@dataclass(frozen=True)
class LutGrid:
    d_min_m: float = 0.5
    d_max_m: float = 15.0
    d_step_m: float = 0.25
    sigma_max_deg: float = 10.0
    sigma_step_deg: float = 0.25

    def __post_init__(self):
        if not 0 < self.d_min_m <= self.d_max_m:
            raise ConfigError("lut_d_min_m/lut_d_max_m: need 0 < min <= max")
        if not self.d_step_m > 0 or not self.sigma_step_deg > 0:
            raise ConfigError("lut grid steps must be positive")
        if self.sigma_max_deg < 0:
            raise ConfigError("lut_sigma_max_deg must be nonnegative")

    @property
    def d_grid_m(self) -> np.ndarray:
        return grid(self.d_min_m, self.d_max_m, self.d_step_m)

    @property
    def sigma_grid_rad(self) -> np.ndarray:
        return np.deg2rad(grid(0.0, self.sigma_max_deg, self.sigma_step_deg))


def grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 10)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    restarts: int = 4
    lut_grid: LutGrid = field(default_factory=LutGrid)
    experiment: ExperimentParams = field(default_factory=ExperimentParams)
    raw: tuple[tuple[str, str], ...] = ()

    @property
    def objective(self) -> ObjectiveConfig:
        return self.scenario.objective

    @property
    def link(self) -> LinkConfig:
        return self.scenario.link

    @property
    def seed(self) -> int:
        return self.experiment.seed

    def with_seed(self, seed: int) -> "RunConfig":
        return self._rebuild(seed=str(int(seed)))

    def with_overrides(self, **kw) -> "RunConfig":
        return self._rebuild(**{k: str(v) for k, v in kw.items()})

    def _rebuild(self, **kw) -> "RunConfig":
        items = dict(self.raw)
        items.update(kw)
        return build_config(items)


def _read_items(text: str, origin: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       strict=True, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string("[__top__]\n" + text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: malformed config: {exc}") from exc
    items: dict[str, str] = {}
    for section in parser.sections():
        if section != "__top__" and section not in SECTIONS:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in KEYS:
                raise ConfigError(f"{origin}: unknown key {key!r}")
            if section != "__top__" and KEYS[key][0] != section:
                raise ConfigError(f"{origin}: key {key!r} belongs in section [{KEYS[key][0]}]")
            if key in items:
                raise ConfigError(f"{origin}: key {key!r} given twice")
            items[key] = value
    return items


def parse_overrides(pairs) -> dict[str, str]:
    """``["alpha=0", "r_q=0.1"]`` -> dict; keys are validated later."""
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"override {pair!r} must look like key=value")
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        out[key] = value.strip()
    return out


def parse_config(path: str | Path | None = None, overrides=None) -> RunConfig:
    """Defaults overridden by the file at ``path`` and then by ``overrides``."""
    items: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        items = _read_items(p.read_text(encoding="utf-8"), str(p))
    items.update(overrides or {})
    return build_config(items)


def parse_config_text(text: str, origin: str = "<string>") -> RunConfig:
    return build_config(_read_items(text, origin))


def _convert(items: dict[str, str]) -> dict[str, object]:
    values = {}
    for key, text in items.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            values[key] = KEYS[key][1](text)
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from exc
    for group in EXCLUSIVE:
        given = [k for k in group if k in values]
        if len(given) > 1:
            raise ConfigError(f"{given[0]} and {given[1]} are mutually exclusive")
    for key, val in values.items():
        if isinstance(val, float) and not math.isfinite(val):
            raise ConfigError(f"{key}: value must be finite")
    return values


def _guard(key_hint, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key_hint}: {exc}") from exc


def _name_key(exc: Exception, candidates) -> str:
    msg = str(exc)
    for key in candidates:
        if key in msg:
            return key
    return "/".join(candidates)


def build_config(items: dict[str, str]) -> RunConfig:
    values = _convert(items)
    link_kw = {}
    for f in fields(LinkConfig):
        if f.name in values:
            link_kw[f.name] = values[f.name]
    if "tx_power_dbm" in values:
        link_kw["tx_power_w"] = dbm_to_w(values["tx_power_dbm"])
    if "noise_psd_dbm_per_hz" in values:
        link_kw["noise_psd_w_per_hz"] = dbm_to_w(values["noise_psd_dbm_per_hz"])
    if "carrier_frequency_ghz" in values:
        link_kw["carrier_frequency_hz"] = values["carrier_frequency_ghz"] * 1e9
    if "absorption_per_m" in values:
        link_kw["absorption_curve"] = flat_curve(values["absorption_per_m"])
    if "absorption_curve_file" in values:
        link_kw["absorption_curve"] = _guard(
            "absorption_curve_file", lambda: load_absorption_curve(values["absorption_curve_file"]))
    if "absorption_line_peak_per_m" in values:
        link_kw["absorption_curve"] = _guard(
            "absorption_line_peak_per_m",
            lambda: absorption_line_curve(line_peak_per_m=values["absorption_line_peak_per_m"]))
    try:
        link = LinkConfig(**link_kw)
        link.absorption_per_m  # carrier inside the curve range
    except ValueError as exc:
        key = _name_key(exc, [k for k in KEYS if KEYS[k][0] == "link"])
        if "frequency" in str(exc) and "curve" in str(exc):
            key = "carrier_frequency_hz"
        raise ConfigError(f"{key}: {exc}") from exc

    obj_kw = {k: values[k] for k in ("alpha", "r_min_bps", "theta", "quadrature_nodes") if k in values}
    if "r_min_gbps" in values:
        obj_kw["r_min_bps"] = values["r_min_gbps"] * 1e9
    try:
        objective = ObjectiveConfig(link=link, **obj_kw)
    except ValueError as exc:
        raise ConfigError(f"{_name_key(exc, ('alpha', 'theta', 'r_min_bps', 'quadrature_nodes'))}: {exc}") from exc

    exp_kw = {f.name: values[f.name] for f in fields(ExperimentParams) if f.name in values}
    experiment = ExperimentParams(**exp_kw)
    _guard("schemes", lambda: experiment.scheme_list)
    for name in ("alpha_list",):
        if any(not 0 <= a <= 1 for a in getattr(experiment, name)):
            raise ConfigError(f"{name}: entries must lie in [0, 1]")
    if any(s < 0 for s in experiment.sigma_list_deg) or experiment.sigma_deg < 0:
        raise ConfigError("sigma_deg/sigma_list_deg: deviations must be nonnegative")
    if any(not 0 < r <= 1 for r in experiment.r_q_list):
        raise ConfigError("r_q_list: entries must lie in (0, 1]")
    if experiment.replicas < 1:
        raise ConfigError("replicas must be >= 1")
    if experiment.angle_points < 2:
        raise ConfigError("angle_points must be >= 2")
    if not experiment.d_m > 0:
        raise ConfigError("d_m must be positive")

    pso_kw = {k: values[k] for k in ("swarm_size", "iterations", "inertia", "cognitive", "social")
              if k in values}
    try:
        pso = PsoConfig(seed=experiment.seed, **pso_kw)
    except ValueError as exc:
        raise ConfigError(f"{_name_key(exc, ('swarm_size', 'iterations'))}: {exc}") from exc
    for k in ("inertia", "cognitive", "social"):
        if not getattr(pso, k) > 0:
            raise ConfigError(f"{k} must be positive")
    restarts = values.get("restarts", 4)
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")

    lut_kw = {k[4:]: values[k] for k in KEYS if k.startswith("lut_") and k in values}
    lut_grid = LutGrid(**lut_kw)

    trk_kw = {k: values[k] for k in ("r_q", "mu", "scheme", "period", "horizon_slots", "step_std_m",
                                     "symmetrize_trigger", "nack_pilots") if k in values}
    if "handover_min_m" in values or "handover_max_m" in values:
        trk_kw["handover_distance_m"] = (values.get("handover_min_m", 3.0),
                                         values.get("handover_max_m", 7.0))
    try:
        scenario = ScenarioConfig(objective=objective, master_seed=experiment.seed, **trk_kw)
    except ValueError as exc:
        keys = ("r_q", "mu", "scheme", "period", "horizon_slots", "step_std_m", "handover")
        raise ConfigError(f"{_name_key(exc, keys)}: {exc}") from exc
    return RunConfig(scenario, pso, restarts, lut_grid, experiment, tuple(sorted(items.items())))


def resolved_lines(cfg: RunConfig) -> list[str]:
    """Human-readable dump of every effective parameter (for output headers)."""
    link, obj, sc = cfg.link, cfg.objective, cfg.scenario
    lines = [f"seed = {cfg.seed}"]
    for f in fields(LinkConfig):
        if f.name == "absorption_curve":
            continue
        lines.append(f"{f.name} = {getattr(link, f.name)!r}")
    lines.append(f"absorption_per_m_at_carrier = {link.absorption_per_m!r}")
    lines.append(f"absorption_curve_points = {len(link.absorption_curve)}")
    for k in ("alpha", "r_min_bps", "theta", "quadrature_nodes"):
        lines.append(f"{k} = {getattr(obj, k)!r}")
    for f in fields(PsoConfig):
        lines.append(f"pso_{f.name} = {getattr(cfg.pso, f.name)!r}")
    lines.append(f"restarts = {cfg.restarts}")
    for f in fields(LutGrid):
        lines.append(f"lut_{f.name} = {getattr(cfg.lut_grid, f.name)!r}")
    for k in ("r_q", "mu", "scheme", "period", "horizon_slots", "step_std_m", "handover_distance_m",
              "symmetrize_trigger", "nack_pilots"):
        lines.append(f"{k} = {getattr(sc, k)!r}")
    for f in fields(ExperimentParams):
        if f.name != "seed":
            lines.append(f"{f.name} = {getattr(cfg.experiment, f.name)!r}")
    if cfg.raw:
        lines.append("overrides = " + "; ".join(f"{k}={v}" for k, v in cfg.raw))
    return lines
