import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thzbeam.beamformer import conjugate_precoder
from thzbeam.channel import (LinkConfig, LinkState, absorption_coefficient, achievable_rate,
                             blockage_arrival_rate, blockage_step, blocking_probability, dbm_to_w,
                             flat_curve, load_absorption_curve, noise_power, path_gain,
                             save_absorption_curve, steering_vector, unblocking_probability)

C = 299_792_458.0


def oracle_path_gain(d, f, k):
    return C / (4 * math.pi * f * d) * math.exp(-k * d / 2)


def oracle_rmax(d):
    # reference link: 300 GHz, 10 GHz, 1 W, -174 dBm/Hz, K = 0.0012
    fs = C / (4 * math.pi * 300e9 * d)
    noise = 10 ** (-20.4) * 10e9 + fs**2 * (1 - math.exp(-0.0012 * d))
    return 10e9 * math.log2(1 + fs**2 * math.exp(-0.0012 * d) / noise)


def test_absorption_lookup():
    one = LinkConfig(absorption_curve=((300e9, 0.0012),))
    assert absorption_coefficient(one, 300e9) == pytest.approx(0.0012)
    flat = LinkConfig(absorption_curve=((100e9, 0.004), (400e9, 0.004)))
    assert absorption_coefficient(flat, 150e9) == pytest.approx(0.004)
    lin = LinkConfig(absorption_curve=((300e9, 0.001), (310e9, 0.003)))
    assert absorption_coefficient(lin, 305e9) == pytest.approx(0.002)
    with pytest.raises(ValueError, match="outside"):
        absorption_coefficient(lin, 320e9)


def test_default_link_uses_reference_absorption():
    assert LinkConfig().absorption_per_m == pytest.approx(0.0012, rel=1e-12)


def test_path_gain_examples():
    assert path_gain(1.0, 300e9, 0.0012) == pytest.approx(oracle_path_gain(1, 300e9, 0.0012), rel=1e-12)
    assert path_gain(8.0, 300e9, 0.0012) == pytest.approx(oracle_path_gain(8, 300e9, 0.0012), rel=1e-12)
    # published rounded values agree to 0.1 %
    assert path_gain(1.0, 300e9, 0.0012) == pytest.approx(7.953e-5, rel=1e-3)
    assert path_gain(8.0, 300e9, 0.0012) == pytest.approx(9.899e-6, rel=1e-3)
    for d in (0.3, 2.0, 11.0):
        assert path_gain(d, 300e9, 0.0) / path_gain(2 * d, 300e9, 0.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        path_gain(0.0, 300e9, 0.0012)


def test_noise_examples():
    link = LinkConfig()
    thermal = 10 ** (-17.4 - 3) * 10e9
    assert thermal == pytest.approx(3.981e-11, rel=1e-3)
    absorb = noise_power(link, 8.0) - thermal
    assert absorb == pytest.approx(9.44e-13, rel=1e-2)
    dry = LinkConfig(absorption_curve=flat_curve(0.0))
    assert noise_power(dry, 3.0) == noise_power(dry, 30.0) == pytest.approx(thermal)
    d = np.linspace(1, 500, 200)
    extra = noise_power(link, d) - thermal
    assert np.all(np.diff(extra) < 0)
    assert extra[-1] < (C / (4 * math.pi * 300e9 * 500)) ** 2
    with pytest.raises(ValueError):
        noise_power(link, -1.0)


def test_steering_vector_examples():
    assert np.allclose(steering_vector(0.0, 4), [0.5] * 4)
    assert np.allclose(steering_vector(math.pi / 6, 2), np.array([1, 1j]) / math.sqrt(2))


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.integers(1, 256))
def test_steering_vector_unit_norm(phi, n):
    assert np.linalg.norm(steering_vector(phi, n)) == pytest.approx(1.0, abs=1e-12)


def test_achievable_rate_examples():
    link = LinkConfig()
    f = conjugate_precoder(0.3, link.n_tx, link.tx_power_w)
    aligned = LinkState((8 * math.cos(0.3), 8 * math.sin(0.3)))
    assert achievable_rate(link, aligned, f) == pytest.approx(oracle_rmax(8.0), rel=1e-9)
    assert achievable_rate(link, aligned, f) == pytest.approx(17.7e9, abs=0.1e9)
    assert achievable_rate(link, LinkState((8.0, 0.0), blocked=True), f) == 0.0
    # a null of the uniform aperture: sin offset 2/N
    null = LinkState((8.0, 0.0))
    g = conjugate_precoder(math.asin(2.0 / link.n_tx), link.n_tx, link.tx_power_w)
    assert achievable_rate(link, null, g) == pytest.approx(0.0, abs=1e-3)


def test_achievable_rate_rejects_bad_precoders():
    link = LinkConfig()
    with pytest.raises(ValueError, match="exceeds"):
        achievable_rate(link, LinkState((5.0, 0.0)), np.ones(link.n_tx))
    with pytest.raises(ValueError, match="length"):
        achievable_rate(link, LinkState((5.0, 0.0)), np.ones(3) * 0.1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(1.0, 20.0), st.floats(-1.2, 1.2), st.integers(0, 2**31))
def test_rate_invariant_to_global_phase(rot, d, phi, seed):
    link = LinkConfig()
    rng = np.random.default_rng(seed)
    f = rng.normal(size=link.n_tx) + 1j * rng.normal(size=link.n_tx)
    f *= math.sqrt(link.tx_power_w) / np.linalg.norm(f)
    state = LinkState((d * math.cos(phi), d * math.sin(phi)))
    r0 = achievable_rate(link, state, f)
    r1 = achievable_rate(link, state, f * np.exp(1j * rot))
    assert r1 == pytest.approx(r0, rel=1e-9, abs=1e-3)


def test_blockage_rates():
    link = LinkConfig()
    assert blockage_arrival_rate(link, 8.0) == pytest.approx(2 / math.pi * 0.3 * 1 * 0.15 * 8)
    assert blockage_arrival_rate(link, 8.0) == pytest.approx(0.2292, abs=1e-4)
    assert blockage_arrival_rate(link, 6.0) == pytest.approx(2 * blockage_arrival_rate(link, 3.0))
    assert blockage_arrival_rate(link.with_(blocker_density_per_m2=0.0), 8.0) == 0.0
    assert unblocking_probability(link) == pytest.approx(1 - math.exp(-0.15))
    assert unblocking_probability(link) == pytest.approx(0.1393, abs=1e-4)
    assert blocking_probability(link, 8.0) == pytest.approx(1 - math.exp(-0.2292 * 0.05), abs=1e-6)


class FixedDraw:
    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def test_blockage_step_thresholds():
    link = LinkConfig()
    p = blocking_probability(link, 8.0)
    q = unblocking_probability(link)
    assert blockage_step(False, link, 8.0, FixedDraw(p * 0.999)) is True
    assert blockage_step(False, link, 8.0, FixedDraw(p * 1.001)) is False
    assert blockage_step(True, link, 8.0, FixedDraw(q * 0.999)) is False
    assert blockage_step(True, link, 8.0, FixedDraw(q * 1.001)) is True
    none = link.with_(blocker_density_per_m2=0.0)
    rng = np.random.default_rng(0)
    assert not any(blockage_step(False, none, 8.0, rng) for _ in range(1000))


def test_blockage_stationary_occupancy():
    link = LinkConfig()
    rng = np.random.default_rng(12)
    n = 1_000_000
    blocked, count = False, 0
    for _ in range(n):
        blocked = blockage_step(blocked, link, 8.0, rng)
        count += blocked
    p, q = blocking_probability(link, 8.0), unblocking_probability(link)
    pi = p / (p + q)
    rho = 1 - p - q  # lag-one autocorrelation of the two-state chain
    sd = math.sqrt(pi * (1 - pi) / n * (1 + rho) / (1 - rho))
    assert abs(count / n - pi) < 3 * sd


def test_blockage_occupancy_approaches_rate_ratio_for_short_slots():
    link = LinkConfig(slot_duration_s=1e-4)
    kappa, mu = blockage_arrival_rate(link, 8.0), link.unblocking_rate_hz
    p, q = blocking_probability(link, 8.0), unblocking_probability(link)
    assert p / (p + q) == pytest.approx(kappa / (kappa + mu), rel=1e-3)


def test_link_validation():
    with pytest.raises(ValueError, match="heights"):
        LinkConfig(height_blocker_m=4.0)
    with pytest.raises(ValueError, match="n_tx"):
        LinkConfig(n_tx=0)
    with pytest.raises(ValueError, match="increasing"):
        LinkConfig(absorption_curve=((300e9, 0.1), (200e9, 0.1)))
    with pytest.raises(ValueError):
        LinkState((0.0, 0.0))
    assert dbm_to_w(30.0) == pytest.approx(1.0)


def test_absorption_curve_file_round_trip(tmp_path):
    curve = ((280e9, 0.001), (325e9, 0.02), (360e9, 0.002))
    path = tmp_path / "k.csv"
    save_absorption_curve(curve, path)
    assert load_absorption_curve(path) == curve
    bad = tmp_path / "bad.csv"
    bad.write_text("f,k\n1,2,3\n")
    with pytest.raises(ValueError, match="two columns"):
        load_absorption_curve(bad)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 50.0), st.floats(0.01, 5.0), st.floats(0.0, 0.05), st.floats(1e-4, 0.05))
def test_path_gain_and_noise_monotone(d, dd, k, dk):
    assert path_gain(d + dd, 300e9, k) < path_gain(d, 300e9, k)
    assert path_gain(d, 300e9, k + dk) < path_gain(d, 300e9, k)
    lo = LinkConfig(absorption_curve=flat_curve(k))
    hi = LinkConfig(absorption_curve=flat_curve(k + dk))
    assert noise_power(hi, d) > noise_power(lo, d)
