import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from thzbeam.beamformer import make_params, pattern_in_sin_space, sinc_taper
from thzbeam.mobility import BeliefState, aod_error_pdf, belief_update, random_walk_step


def test_degenerate_walk():
    rng = np.random.default_rng(0)
    assert np.array_equal(random_walk_step((1.0, 2.0), 0.0, rng), [1.0, 2.0])


def test_walk_variance_grows_linearly():
    rng = np.random.default_rng(1)
    walks, m, s = 100_000, 16, 0.05
    pos = np.zeros((walks, 2))
    for _ in range(m):
        pos += rng.normal(0.0, s, size=(walks, 2))
    assert np.var(pos[:, 0]) == pytest.approx(m * s * s, rel=0.05)
    assert np.var(pos[:, 1]) == pytest.approx(m * s * s, rel=0.05)
    assert math.sqrt(m) * s == pytest.approx(0.2)


def test_walk_step_uses_rng_normal():
    a = random_walk_step((3.0, 0.0), 0.05, np.random.default_rng(5))
    b = np.array([3.0, 0.0]) + np.random.default_rng(5).normal(0.0, 0.05, size=2)
    assert np.array_equal(a, b)


def test_pilot_resets_belief():
    b = BeliefState((1.0, 1.0), slots_since_pilot=7)
    after = belief_update(b, (4.0, 3.0))
    assert after.est_distance_m == 5.0
    assert after.slots_since_pilot == 0
    assert after.aod_std_rad == 0.0 and after.position_std_m == 0.0


def test_uncertainty_growth_example():
    b = BeliefState((4.0, 0.0), slots_since_pilot=15, step_std_m=0.05)
    b = belief_update(b)
    assert b.slots_since_pilot == 16
    assert b.aod_std_rad == pytest.approx(0.05)
    assert math.degrees(b.aod_std_rad) == pytest.approx(2.86, abs=0.01)
    assert b.effective_aod_std_rad == b.aod_std_rad


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20), st.integers(0, 1000), st.floats(0.001, 0.5))
def test_belief_invariants(x, y, m, s):
    if math.hypot(x, y) < 0.1:
        return
    b = BeliefState((x, y), m, s)
    assert (b.position_std_m == 0) == (m == 0)
    assert b.effective_aod_std_rad <= b.aod_std_rad + 1e-15
    nxt = belief_update(b)
    assert nxt.aod_std_rad >= b.aod_std_rad
    if m > 0:
        assert nxt.aod_std_rad > b.aod_std_rad


def test_belief_validation():
    with pytest.raises(ValueError):
        BeliefState((0.0, 0.0))
    with pytest.raises(ValueError):
        BeliefState((1.0, 0.0), slots_since_pilot=-1)


def test_aod_error_pdf():
    assert aod_error_pdf(1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert aod_error_pdf(0.3, 0.17) == aod_error_pdf(0.3, -0.17)
    for s in (0.001, 0.05, 1.0):
        total, _ = integrate.quad(lambda e: aod_error_pdf(s, e), -6 * s, 6 * s)
        assert total == pytest.approx(1.0, abs=1e-6 + 2e-9)
    with pytest.raises(ValueError):
        aod_error_pdf(0.0, 0.1)


def test_small_angle_substitution_matches_exact_gain_distribution():
    n = 64
    p = make_params(0.08, 0.0, 1.0, n)
    taper = p.beta * sinc_taper(p.v, p.omega, n)
    rng = np.random.default_rng(9)
    for phi_hat in (0.0, 0.4, 0.9):
        for sigma_deg in (1.0, 3.0, 5.0):
            eps = rng.normal(0.0, math.radians(sigma_deg), 20_000)
            exact = pattern_in_sin_space(taper, np.sin(phi_hat + eps) - math.sin(phi_hat))
            approx = pattern_in_sin_space(taper, math.cos(phi_hat) * eps)
            assert stats.ks_2samp(exact, approx).statistic < 0.02
