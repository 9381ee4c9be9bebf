import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import QUICK_PSO
from thzbeam.beamformer import saturate_power, sinc_taper
from thzbeam.lut import (FIELDS, FingerprintMismatch, LookupTable, build_lookup_table, cell_rng,
                         cell_taper, export_lut_csv, load_lut, lut_query, recompute_g, save_lut,
                         scenario_fingerprint)
from thzbeam.objectives import BeamEvaluator, ObjectiveConfig
from thzbeam.optimizer import pso_optimize


def test_single_cell_table_equals_single_optimization():
    cfg = ObjectiveConfig(alpha=0.3, r_min_bps=5e9)
    table = build_lookup_table([6.0], [math.radians(2.0)], cfg, QUICK_PSO)
    params, val = pso_optimize(6.0, math.radians(2.0), cfg, QUICK_PSO, rng=cell_rng(QUICK_PSO.seed, 0))
    assert table.shape == (1, 1)
    assert table.cells[0, 0].tolist() == [params.v, params.omega, val.expected_rate_bps,
                                          val.outage_prob, val.g_alpha]


def test_table_invariants(small_lut):
    table, cfg = small_lut
    assert table.cells.shape == (3, 3, len(FIELDS))
    assert np.allclose(recompute_g(table, cfg), table.field("g_alpha"), atol=1e-9, rtol=0)
    n, p = cfg.link.n_tx, cfg.link.tx_power_w
    for i, d in enumerate(table.d_grid_m):
        for j, s in enumerate(table.sigma_grid_rad):
            taper = cell_taper(table, i, j, cfg)
            assert np.sum(taper**2) == pytest.approx(p, rel=1e-9)
            narrow = BeamEvaluator(d, s, cfg).g_alpha(np.full(n, math.sqrt(p / n)))
            assert table.field("g_alpha")[i, j] >= narrow - 1e-12


def test_build_is_independent_of_worker_count(small_lut):
    table, cfg = small_lut
    again = build_lookup_table(table.d_grid_m, table.sigma_grid_rad, cfg, QUICK_PSO, workers=2)
    assert again == table


def test_query_at_nodes_is_verbatim(small_lut):
    table, _ = small_lut
    for i, d in enumerate(table.d_grid_m):
        for j, s in enumerate(table.sigma_grid_rad):
            rec = lut_query(table, d, s)
            v, omega, rate, out, g = table.cells[i, j]
            assert (rec.v, rec.omega, rec.expected_rate_bps, rec.outage_prob, rec.g_alpha) == (
                v, omega, rate, out, g)
            assert not rec.clamped


def test_query_clamps_outside_grid(small_lut):
    table, _ = small_lut
    rec = lut_query(table, 40.0, math.radians(1.0))
    assert rec.clamped
    assert rec.g_alpha == table.field("g_alpha")[-1, 1]
    rec = lut_query(table, 5.0, math.radians(30.0))
    assert rec.clamped and rec.g_alpha == table.field("g_alpha")[1, -1]
    assert lut_query(table, 0.1, 0.0).g_alpha == table.field("g_alpha")[0, 0]


SYNTHETIC = LookupTable(np.arange(1.0, 6.01, 0.5), np.deg2rad(np.arange(0.0, 4.01, 0.25)),
                        np.random.default_rng(0).random((11, 17, 5)), "synthetic")


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 8.0), st.floats(0.0, 0.1))
def test_query_between_nodes_picks_nearest_in_step_units(d, s):
    dg, sg = SYNTHETIC.d_grid_m, SYNTHETIC.sigma_grid_rad
    step_d, step_s = 0.5, math.radians(0.25)
    cd, cs = min(max(d, dg[0]), dg[-1]), min(max(s, sg[0]), sg[-1])
    dist = np.array([[((cd - a) / step_d) ** 2 + ((cs - b) / step_s) ** 2 for b in sg] for a in dg])
    order = np.sort(dist, axis=None)
    if order[1] - order[0] < 1e-9:
        return  # equidistant nodes
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    rec = lut_query(SYNTHETIC, d, s)
    assert rec.g_alpha == SYNTHETIC.cells[i, j, 4]
    assert rec.v == SYNTHETIC.cells[i, j, 0]
    assert rec.clamped == (d > dg[-1] or d < dg[0] or s > sg[-1])


def test_round_trip_is_bit_exact(small_lut, tmp_path):
    table, _ = small_lut
    path = tmp_path / "t.lut"
    save_lut(table, path)
    loaded = load_lut(path)
    assert loaded == table
    assert loaded.scenario_fingerprint == table.scenario_fingerprint
    assert np.array_equal(loaded.cells, table.cells)


def test_truncated_and_malformed_files_fail(small_lut, tmp_path):
    table, _ = small_lut
    path = tmp_path / "t.lut"
    save_lut(table, path)
    lines = path.read_text().splitlines()
    cut = tmp_path / "cut.lut"
    cut.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(ValueError, match="truncated"):
        load_lut(cut)
    empty = tmp_path / "empty.lut"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        load_lut(empty)
    future = tmp_path / "future.lut"
    future.write_text("\n".join([lines[0].replace('"version": 1', '"version": 99')] + lines[1:]))
    with pytest.raises(ValueError, match="version"):
        load_lut(future)
    garbage = tmp_path / "garbage.lut"
    garbage.write_text("{not json\n")
    with pytest.raises(ValueError, match="header"):
        load_lut(garbage)


def test_fingerprint_rejects_other_scenarios(small_lut):
    table, cfg = small_lut
    table.check(cfg)
    for other in (cfg.with_(link=cfg.link.with_(carrier_frequency_hz=310e9)),
                  cfg.with_(alpha=0.5), cfg.with_(r_min_bps=5e9), cfg.with_(theta=10.0),
                  cfg.with_(link=cfg.link.with_(n_tx=32))):
        with pytest.raises(FingerprintMismatch):
            table.check(other)
    assert scenario_fingerprint(cfg, "conjugate") != scenario_fingerprint(cfg, "sinc")


def test_fingerprint_of_frequency_mutation():
    cfg300 = ObjectiveConfig()
    table = build_lookup_table([4.0], [0.0], cfg300, QUICK_PSO)
    cfg310 = cfg300.with_(link=cfg300.link.with_(carrier_frequency_hz=310e9))
    with pytest.raises(FingerprintMismatch):
        table.check(cfg310)


def test_conjugate_class_stores_narrow_beam():
    cfg = ObjectiveConfig()
    table = build_lookup_table([3.0, 6.0], [0.0, 0.02], cfg, beam_class="conjugate")
    assert np.all(table.field("v") == 0)
    ev = BeamEvaluator(6.0, 0.02, cfg)
    n = cfg.link.n_tx
    assert table.field("expected_rate_bps")[1, 1] == pytest.approx(
        float(ev.expected_rate(np.full(n, math.sqrt(1 / n)))))


def test_grid_validation():
    cfg = ObjectiveConfig()
    with pytest.raises(ValueError):
        build_lookup_table([], [0.0], cfg)
    with pytest.raises(ValueError):
        build_lookup_table([2.0, 1.0], [0.0], cfg)
    with pytest.raises(ValueError):
        build_lookup_table([1.0], [0.0], cfg, beam_class="hexagonal")
    with pytest.raises(ValueError):
        LookupTable([1.0], [0.0], np.zeros((2, 1, 5)), "x")


def test_csv_export(small_lut, tmp_path):
    table, cfg = small_lut
    path = tmp_path / "lut.csv"
    export_lut_csv(table, path, comment="alpha = 0.6")
    lines = path.read_text().splitlines()
    assert lines[0] == "# alpha = 0.6"
    assert lines[1] == "d_m,sigma_rad,v,omega,expected_rate_bps,outage_prob,g_alpha"
    assert len(lines) == 2 + 9
    d, s, v, omega = (float(x) for x in lines[2].split(",")[:4])
    assert (d, s, v, omega) == (2.0, 0.0, table.cells[0, 0, 0], table.cells[0, 0, 1])
    taper = saturate_power(v, omega, 1.0, 64) * sinc_taper(v, omega, 64)
    assert np.allclose(taper, cell_taper(table, 0, 0, cfg))
