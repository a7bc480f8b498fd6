import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_embed.modulus import (
    CompressionTarget,
    PhiError,
    default_grid,
    majorant_mu,
    sigma_of,
    validate_phi,
)

RATIONAL = CompressionTarget("rational")


@pytest.fixture(scope="module")
def rational_gauge():
    return majorant_mu(RATIONAL)


def test_validate_examples():
    assert validate_phi(RATIONAL).ok
    assert validate_phi(CompressionTarget("sqrt-log")).ok
    const = validate_phi(CompressionTarget.tabulated([(0, 1), (1, 1)]))
    assert not const.ok and any(t == 0.0 for t, _ in const.violations)
    two_t = CompressionTarget.tabulated([(0, 0), (0.25, 0.5), (1, 2), (10, 20)])
    bad = validate_phi(two_t)
    assert not bad.ok and any(t == 1.0 and ">= 1" in why for t, why in bad.violations)


def test_validate_flags_jumps():
    steep = CompressionTarget.tabulated([(1.0, 0.01), (1.0 + 1e-9, 0.9), (2.0, 0.9)])
    rep = validate_phi(steep)
    assert not rep.ok and any("jump" in why for _, why in rep.violations)


def test_majorant_rejects_invalid_phi():
    with pytest.raises(PhiError):
        majorant_mu(CompressionTarget.tabulated([(0, 1), (1, 1)]))


def test_mu_examples(rational_gauge):
    # log2(max(1/4, 1/2)) = -1 by hand
    assert rational_gauge.mu(1.0) == pytest.approx(-1.0, abs=1e-15)
    assert RATIONAL(1.0) <= 2.0 ** rational_gauge.mu(1.0)
    expected = math.log2(1e6 / (1 + 1e6))
    assert rational_gauge.mu(1e6) == pytest.approx(expected, rel=1e-12)
    assert rational_gauge.mu(1e6) > -1e-5


def test_sigma_examples(rational_gauge):
    # t/(1+t) = 1/2  <=>  t = 1; t/(1+t) = 2**-n  <=>  t = 1/(2**n - 1)
    assert sigma_of(rational_gauge, -1.0) == pytest.approx(1.0, rel=1e-11)
    for n in range(1, 20):
        assert rational_gauge.sigma(-n) == pytest.approx(1.0 / (2.0**n - 1), rel=1e-11)
    with pytest.raises(ValueError):
        sigma_of(rational_gauge, 0.0)


ADVERSARIAL = {
    "bump": [(0.0, 0.0), (0.01, 0.9), (0.02, 0.05), (1.0, 0.3), (5.0, 0.1), (50.0, 0.6)],
    "staircase": [(0.0, 0.0), (1e-4, 0.2), (1e-3, 0.2), (1e-2, 0.5), (1.0, 0.5), (10.0, 0.95)],
    "creeping": [(0.0, 0.0), (1e-3, 1e-9), (1.0, 1e-6), (1e3, 1e-3), (1e5, 0.999)],
}


def gauges():
    out = [("rational", majorant_mu(RATIONAL)), ("sqrt-log", majorant_mu(CompressionTarget("sqrt-log")))]
    for name, table in ADVERSARIAL.items():
        out.append((name, majorant_mu(CompressionTarget.tabulated(table, name))))
    return out


@pytest.mark.parametrize("name, g", gauges(), ids=lambda x: x if isinstance(x, str) else "")
def test_gauge_domination_and_monotonicity(name, g):
    t = g.grid
    mu = g.mu(t)
    assert np.all(np.exp2(mu) >= g.source(t))
    assert np.all(np.diff(mu) >= 0)
    assert np.all(mu < 0)
    # off-grid points too: tables are piecewise linear between grid nodes
    mid = np.sqrt(t[1:] * t[:-1])
    if g.source.table is not None:
        assert np.all(np.exp2(g.mu(mid)) >= g.source(mid) * (1 - 1e-12))


@pytest.mark.parametrize("name, g", gauges(), ids=lambda x: x if isinstance(x, str) else "")
def test_galois_pair(name, g):
    for y in -np.geomspace(1e-3, 40, 60):
        s = g.sigma(y)
        if math.isfinite(s):
            assert g.mu(s) >= y - 1e-9
    for t in g.grid[::37]:
        assert g.sigma(g.mu(t)) <= t * (1 + 1e-9)


@given(st.floats(-60, -1e-4), st.floats(-60, -1e-4))
@settings(max_examples=60, deadline=None)
def test_sigma_monotone(y1, y2):
    g = majorant_mu(CompressionTarget.tabulated(ADVERSARIAL["bump"]))
    lo, hi = sorted((y1, y2))
    assert g.sigma(lo) <= g.sigma(hi)


def test_non_monotone_phi_uses_running_sup():
    g = majorant_mu(CompressionTarget.tabulated(ADVERSARIAL["bump"]))
    # after the 0.9 spike at t = 0.01 the majorant must stay at least 0.9
    assert 2 ** g.mu(0.5) >= 0.9


def test_default_grid_spans_instance_range():
    grid = default_grid(0.01, 2.0, extra=[0.5, 0.0])
    assert grid[0] == pytest.approx(1e-8) and grid[-1] == pytest.approx(2e3)
    assert 0.5 in grid and np.all(grid > 0)


def test_tabulated_parse(tmp_path):
    path = tmp_path / "phi.json"
    path.write_text("[[0, 0], [1, 0.5], [2, 0.25]]")
    phi = CompressionTarget.parse(f"tabulated:{path}")
    assert phi(1.5) == pytest.approx(0.375)
    assert phi(100.0) == 0.25
    with pytest.raises(PhiError):
        CompressionTarget.parse("nope")
