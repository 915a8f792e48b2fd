from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from dipolefade.types import Dipole, PolarizabilityParams, Role, Scene

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def bessel_oracle():
    rows = json.loads((DATA / "bessel_oracle.json").read_text())["rows"]
    x = np.array([r[0] for r in rows])
    j0 = np.array([float(r[1]) for r in rows])
    y0 = np.array([float(r[2]) for r in rows])
    return x, j0, y0


def random_scene(rng: np.random.Generator, n_env: int, n_ris: int = 0, box: float = 6.0,
                 n_tx: int = 1, n_rx: int = 1, trx: PolarizabilityParams | None = None,
                 freqs=(1.0,)) -> Scene:
    """Random points in a box, kept at least 0.1 apart."""
    trx = trx or PolarizabilityParams.from_chi(0.5, 1.0)
    n = n_tx + n_rx + n_env + n_ris
    pts: list[np.ndarray] = []
    while len(pts) < n:
        p = rng.uniform(0, box, 2)
        if all(np.hypot(*(p - q)) > 0.1 for q in pts):
            pts.append(p)
    env_p = [PolarizabilityParams.from_chi(rng.uniform(1, 50), rng.uniform(2, 10), rng.uniform(0, 1))
             for _ in range(n_env)]
    it = iter(pts)
    tx = [Dipole(tuple(next(it)), trx, Role.TRANSMITTER) for _ in range(n_tx)]
    rx = [Dipole(tuple(next(it)), trx, Role.RECEIVER) for _ in range(n_rx)]
    env = [Dipole(tuple(next(it)), p, Role.ENVIRONMENT) for p in env_p]
    ris = [Dipole(tuple(next(it)), PolarizabilityParams.from_chi(0.2, 1.0), Role.RIS) for _ in range(n_ris)]
    return Scene.from_blocks(tx, rx, env, ris, freqs)


# --- acceptance report -----------------------------------------------------------

def pytest_configure(config):
    config.acceptance = {}


@pytest.fixture
def criterion(request):
    """``criterion(number, part, passed, detail)`` records one checked item of
    an acceptance criterion for the end-of-run report."""
    def record(number: int, part: str, passed: bool, detail: str) -> None:
        request.config.acceptance.setdefault(number, {})[part] = (bool(passed), detail)
        print(f"criterion {number}{part}: {'PASS' if passed else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "acceptance", {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(results):
        parts = results[number]
        ok = all(p for p, _ in parts.values())
        detail = "; ".join(f"{k + ': ' if k else ''}{'pass' if p else 'FAIL'}, {d}"
                           for k, (p, d) in sorted(parts.items()))
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  ({detail})")
