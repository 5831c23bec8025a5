import numpy as np
import pytest

from irsbf.channel import generate_channels
from irsbf.scenario import default_geometry, desk_config

# (criterion, part, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    by_number = {}
    for number, part, ok, detail in ACCEPTANCE:
        by_number.setdefault(number, []).append((part, ok, detail))
    terminalreporter.section("acceptance criteria")
    for number in sorted(by_number):
        parts = by_number[number]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{p[0]}: {'ok' if p[1] else 'FAIL'} ({p[2]})" if p[0] else p[2] for p in parts)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk():
    cfg = desk_config(seed=0)
    geom = default_geometry(cfg)
    return cfg, geom, generate_channels(cfg, geom)


def random_unit_phases(rng, n):
    return np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
