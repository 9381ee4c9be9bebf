import hashlib

import numpy as np
import pytest

from thzbeam.lut import build_lookup_table, load_lut, save_lut, scenario_fingerprint
from thzbeam.objectives import ObjectiveConfig
from thzbeam.optimizer import PsoConfig

# grid used by the closed-loop runs: the default ranges at 0.5 m / 0.5 deg steps
TRACKING_D_GRID = np.round(np.arange(0.5, 15.0 + 1e-9, 0.5), 10)
TRACKING_SIGMA_GRID = np.deg2rad(np.round(np.arange(0.0, 10.0 + 1e-9, 0.5), 10))

QUICK_PSO = PsoConfig(swarm_size=8, iterations=6, seed=4)


@pytest.fixture(scope="session")
def small_lut():
    cfg = ObjectiveConfig(alpha=0.6, r_min_bps=10e9)
    table = build_lookup_table([2.0, 5.0, 9.0], np.deg2rad([0.0, 1.0, 3.0]), cfg, QUICK_PSO)
    return table, cfg


@pytest.fixture(scope="session")
def lut_store(request):
    """Build-or-load tables keyed by scenario and grid, cached across sessions."""
    root = request.config.cache.mkdir("thzbeam-luts")

    def get(cfg: ObjectiveConfig, d_grid=TRACKING_D_GRID, sigma_grid=TRACKING_SIGMA_GRID,
            pso: PsoConfig = PsoConfig()):
        key = hashlib.sha256(repr((scenario_fingerprint(cfg), np.asarray(d_grid).tolist(),
                                   np.asarray(sigma_grid).tolist(), pso)).encode()).hexdigest()[:16]
        path = root / f"{key}.lut"
        if path.exists():
            table = load_lut(path)
            if table.scenario_fingerprint == scenario_fingerprint(cfg):
                return table
        table = build_lookup_table(d_grid, sigma_grid, cfg, pso)
        save_lut(table, path)
        return table

    return get


ACCEPTANCE_LINES: list[str] = []


def report(number: int, name: str, ok: bool, detail: str) -> None:
    """Record one acceptance verdict and fail the calling test if it did not hold."""
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number:2d} ({name}): {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
