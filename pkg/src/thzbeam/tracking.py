"""Closed-loop beam tracking: mobility, blockage, pilots, handover and the trigger."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .beamformer import chirp_taper, partial_activation_taper
from .channel import C, LinkConfig, blockage_arrival_rate, unblocking_probability
from .lut import LookupTable, cell_taper, default_d_grid, default_sigma_grid
from .objectives import BeamEvaluator, ObjectiveConfig
from .optimizer import chirp_parameter_search
from .trigger import TriggerState, g_perfect, queue_update, trigger_decision

BEAM_SCHEMES = ("proposed", "nonrobust", "chirp", "partial")
PILOT_MODES = ("event", "periodic")


class ConfigurationError(ValueError):
    pass


def parse_scheme(scheme: str) -> tuple[str, str]:
    """``"proposed_event"`` -> ``("proposed", "event")``."""
    beam, _, mode = scheme.rpartition("_")
    if beam not in BEAM_SCHEMES or mode not in PILOT_MODES:
        raise ConfigurationError(
            f"unknown scheme {scheme!r}; expected <{'|'.join(BEAM_SCHEMES)}>_<{'|'.join(PILOT_MODES)}>")
    return beam, mode


@dataclass(frozen=True)
class ScenarioConfig:
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    r_q: float = 0.05
    mu: float = 0.5
    scheme: str = "proposed_event"
    period: int = 20
    horizon_slots: int = 100_000
    master_seed: int = 0
    step_std_m: float = 0.05
    handover_distance_m: tuple[float, float] = (3.0, 7.0)
    symmetrize_trigger: bool = False
    nack_pilots: bool | None = None  # None: only the event scheme reacts to NACKs
    lut: LookupTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        parse_scheme(self.scheme)
        if self.period < 1:
            raise ConfigurationError("period must be >= 1")
        if self.horizon_slots < 1:
            raise ConfigurationError("horizon_slots must be >= 1")
        if self.step_std_m < 0:
            raise ConfigurationError("step_std_m must be nonnegative")
        lo, hi = self.handover_distance_m
        if not 0 < lo <= hi:
            raise ConfigurationError("handover_distance_m must be an ordered positive interval")
        TriggerState(0.0, self.r_q, self.mu)

    @property
    def reacts_to_nack(self) -> bool:
        if self.nack_pilots is None:
            return parse_scheme(self.scheme)[1] == "event"
        return self.nack_pilots

    @property
    def link(self) -> LinkConfig:
        return self.objective.link

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class SlotRecord:
    slot_index: int
    true_distance_m: float
    true_aod_rad: float
    sigma_eff_rad: float
    blocked: bool
    pilot: bool
    forced_pilot: bool
    handover: bool
    achieved_rate_bps: float
    outage: bool
    z_after: float
    g_p: float = float("nan")
    g_imp: float = float("nan")


@dataclass(frozen=True)
class RunSummary:
    outage_fraction: float
    avg_overhead: float
    handover_count: int
    rate_samples: np.ndarray = field(repr=False, compare=False)
    mean_rate_bps: float
    voluntary_pilots: int = 0
    forced_pilots: int = 0

    @property
    def mean_pilot_spacing(self) -> float:
        return math.inf if self.avg_overhead == 0 else 1.0 / self.avg_overhead

    def fraction_below(self, rate_bps: float) -> float:
        return float(np.mean(self.rate_samples < rate_bps))


def aggregate_metrics(records) -> RunSummary:
    if not records:
        raise ValueError("cannot summarize an empty trace")
    n = len(records)
    rates = np.array([r.achieved_rate_bps for r in records])
    pilots = sum(r.pilot for r in records)
    forced = sum(r.pilot and r.forced_pilot for r in records)
    return RunSummary(
        outage_fraction=sum(r.outage for r in records) / n,
        avg_overhead=pilots / n,
        handover_count=sum(r.handover for r in records),
        rate_samples=rates,
        mean_rate_bps=float(rates.mean()),
        voluntary_pilots=pilots - forced,
        forced_pilots=forced,
    )


def handover(rng, distance_range=(3.0, 7.0)) -> tuple[float, float]:
    """UE position in the frame of a fresh, currently unblocked BS."""
    d = rng.uniform(*distance_range)
    phi = rng.uniform(-math.pi / 2, math.pi / 2)
    return d * math.cos(phi), d * math.sin(phi)


def replica_streams(master_seed: int) -> tuple[np.random.Generator, ...]:
    """Independent (mobility, blockage, handover) generators for one replica."""
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(3))


class _BeamSource:
    """Beam and imperfect-CSI objective per grid node, memoized."""

    def __init__(self, beam: str, scenario: ScenarioConfig):
        cfg = scenario.objective
        self.beam, self.cfg, self.n_tx = beam, cfg, cfg.link.n_tx
        self.table = scenario.lut
        if beam == "proposed":
            if self.table is None:
                raise ConfigurationError(
                    "the proposed scheme needs a lookup table; build one with `thzbeam lut-build`")
            self.table.check(cfg)
            d_grid, s_grid = self.table.d_grid_m, self.table.sigma_grid_rad
        elif self.table is not None:
            d_grid, s_grid = self.table.d_grid_m, self.table.sigma_grid_rad
        else:
            d_grid, s_grid = default_d_grid(), default_sigma_grid()
        self.d_grid, self.s_grid = d_grid.tolist(), s_grid.tolist()
        self._d_mid = [(a + b) / 2 for a, b in zip(self.d_grid, self.d_grid[1:])]
        self._s_mid = [(a + b) / 2 for a, b in zip(self.s_grid, self.s_grid[1:])]
        self._taper: dict = {}
        self._g: dict = {}

    def node(self, d_hat: float, sigma: float) -> tuple[int, int]:
        return bisect.bisect_right(self._d_mid, d_hat), bisect.bisect_right(self._s_mid, sigma)

    def taper(self, key) -> np.ndarray:
        t = self._taper.get(key)
        if t is None:
            i, j = key
            d, s = self.d_grid[i], self.s_grid[j]
            p = self.cfg.link.tx_power_w
            if self.beam == "proposed":
                t = cell_taper(self.table, i, j, self.cfg)
            elif self.beam == "nonrobust" or s == 0:
                t = np.full(self.n_tx, math.sqrt(p / self.n_tx))
            elif self.beam == "chirp":
                t = chirp_taper(chirp_parameter_search(d, s, self.cfg), self.n_tx, p)
            else:
                t = partial_activation_taper(s, self.n_tx, p)
            t = self._taper[key] = np.asarray(t, dtype=complex)
        return t

    def record(self, key):
        """(g_alpha, expected_rate, outage) of this scheme's beam at the node."""
        rec = self._g.get(key)
        if rec is None:
            i, j = key
            if self.beam == "proposed":
                g, rate, out = (self.table.cells[i, j, k] for k in (4, 2, 3))
            else:
                ev = BeamEvaluator(self.d_grid[i], self.s_grid[j], self.cfg)
                t = self.taper(key)
                val = ev.value(t.real if not np.any(t.imag) else t)
                g, rate, out = val.g_alpha, val.expected_rate_bps, val.outage_prob
            rec = self._g[key] = (float(g), float(rate), float(out))
        return rec


def run_tracking(scenario: ScenarioConfig):
    """Simulate ``horizon_slots`` slots; returns ``(records, summary)``.

    Per slot: mobility and blockage on the true state, pilot decision (forced
    after a NACK, else event condition or periodic counter), pilot/handover
    handling, beam selection from the belief, transmission at R_min against the
    true channel, then the virtual-queue update with the realized pilot flag.
    """
    beam, mode = parse_scheme(scenario.scheme)
    source = _BeamSource(beam, scenario)
    cfg, link = scenario.objective, scenario.link
    alpha, r_min = cfg.alpha, cfg.r_min_bps
    n_tx, horizon = link.n_tx, scenario.horizon_slots
    mob_rng, blk_rng, ho_rng = replica_streams(scenario.master_seed)
    steps = mob_rng.normal(0.0, scenario.step_std_m, size=(horizon, 2))
    uniforms = blk_rng.random(horizon)

    # link budget constants for a scalar fast path (same model as the channel module)
    k_abs = link.absorption_per_m
    fs_const = C / (4.0 * math.pi * link.carrier_frequency_hz)
    thermal = link.noise_psd_w_per_hz * link.bandwidth_hz
    p_max, bw = link.tx_power_w, link.bandwidth_hz

    def snr_unit(d):
        fs2 = (fs_const / d) ** 2
        att = math.exp(-k_abs * d)
        return fs2 * att / (thermal + p_max * fs2 * (1.0 - att))

    def rmax(d):
        return bw * math.log2(1.0 + p_max * snr_unit(d))

    # blocking probability is 1 - exp(-kappa_per_m * d * T_s)
    kappa_per_m = blockage_arrival_rate(link, 1.0) * link.slot_duration_s

    def p_block(d):
        return -math.expm1(-kappa_per_m * d)

    p_unblock = unblocking_probability(link)
    react = scenario.reacts_to_nack
    phase_n = math.pi * np.arange(n_tx)

    state = TriggerState(0.0, scenario.r_q, scenario.mu)
    x, y = handover(ho_rng, scenario.handover_distance_m)
    blocked = False
    est_x, est_y, since_pilot = x, y, 0
    pending_forced = True  # initial acquisition
    records = []
    for k in range(horizon):
        handed_over = False
        if k > 0:
            x += steps[k, 0]
            y += steps[k, 1]
            d_true = math.hypot(x, y)
            if blocked:
                blocked = not (uniforms[k] < p_unblock)
            else:
                blocked = bool(uniforms[k] < p_block(d_true))
            since_pilot += 1
        d_hat = math.hypot(est_x, est_y)
        sigma = abs(est_x / d_hat) * math.sqrt(since_pilot) * scenario.step_std_m / d_hat

        forced = pending_forced
        g_p = g_imp = float("nan")
        if forced:
            pilot = True
        elif mode == "periodic":
            pilot = k % scenario.period == 0
        else:
            p_b = p_block(d_hat)
            rmax_hat = rmax(d_hat)
            g_p = g_perfect(d_hat, p_b, alpha, cfg, rmax_hat)
            g_imp, rate_imp, out_imp = source.record(source.node(d_hat, sigma))
            if scenario.symmetrize_trigger:
                g_imp = (alpha * (1.0 - p_b) * rate_imp / rmax_hat
                         - (1.0 - alpha) * (p_b + (1.0 - p_b) * out_imp))
            pilot = trigger_decision(state, g_p, g_imp)

        if pilot:
            if blocked or rmax(math.hypot(x, y)) < r_min:
                # failed estimate or out of range: move to a fresh BS
                x, y = handover(ho_rng, scenario.handover_distance_m)
                blocked, handed_over = False, True
            est_x, est_y, since_pilot = x, y, 0
            d_hat, sigma = math.hypot(x, y), 0.0

        taper = source.taper(source.node(d_hat, sigma))
        d_true = math.hypot(x, y)
        phi_true, phi_hat = math.atan2(y, x), math.atan2(est_y, est_x)
        if blocked:
            rate = 0.0
        else:
            u = math.sin(phi_hat) - math.sin(phi_true)
            s = np.dot(taper, np.exp(1j * phase_n * u))
            gain = (s.real * s.real + s.imag * s.imag) / n_tx
            rate = bw * math.log2(1.0 + snr_unit(d_true) * gain)
        outage = rate < r_min
        pending_forced = outage and react
        state = queue_update(state, pilot)
        records.append(SlotRecord(k, d_true, phi_true, sigma, blocked, pilot, forced,
                                  handed_over, rate, outage, state.z, g_p, g_imp))
    return records, aggregate_metrics(records)


TRACE_COLUMNS = ("slot", "true_distance_m", "true_aod_rad", "sigma_eff_rad", "blocked", "pilot",
                 "forced_pilot", "handover", "achieved_rate_bps", "outage", "z", "g_p", "g_imp")


def trace_rows(records):
    for r in records:
        yield (r.slot_index, r.true_distance_m, r.true_aod_rad, r.sigma_eff_rad, int(r.blocked),
               int(r.pilot), int(r.forced_pilot), int(r.handover), r.achieved_rate_bps,
               int(r.outage), r.z_after, r.g_p, r.g_imp)
