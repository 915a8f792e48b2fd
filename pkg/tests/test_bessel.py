from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dipolefade.bessel import MILLER_MAX, SERIES_MAX, hankel2_0, j0_y0


def test_matches_frozen_oracle(bessel_oracle):
    x, j0, y0 = bessel_oracle
    j, y = j0_y0(x)
    assert np.max(np.abs(j - j0)) <= 1e-12
    assert np.max(np.abs(y - y0)) <= 1e-12


def test_value_at_one():
    j, y = j0_y0(1.0)
    assert j == pytest.approx(0.7651976866, abs=1e-10)
    assert y == pytest.approx(0.0882569642, abs=1e-10)


def test_small_argument_limits():
    j, y = j0_y0(np.array([1e-8, 1e-6]))
    assert np.allclose(j, 1.0, atol=1e-11)
    assert y[0] < y[1] < -8
    # Y0 ~ (2/pi)(ln(x/2) + gamma) near zero
    approx = 2 / np.pi * (np.log(1e-8 / 2) + 0.5772156649015329)
    assert y[0] == pytest.approx(approx, rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
def test_domain_error(bad):
    with pytest.raises(ValueError):
        j0_y0(bad)


def test_scalar_and_array_shapes():
    j, y = j0_y0(2.0)
    assert isinstance(j, float) and isinstance(y, float)
    jj, yy = j0_y0(np.full((2, 3), 2.0))
    assert jj.shape == (2, 3) and np.all(jj == j) and np.all(yy == y)


@pytest.mark.parametrize("edge", [SERIES_MAX, MILLER_MAX])
def test_continuous_across_branches(edge):
    x = np.array([edge * (1 - 1e-12), edge, edge * (1 + 1e-12)])
    j, y = j0_y0(x)
    assert np.ptp(j) < 1e-11 and np.ptp(y) < 1e-11


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.05, max_value=1e4))
def test_wronskian(x):
    # J1 = -J0', Y1 = -Y0'; the Wronskian J1 Y0 - J0 Y1 equals 2/(pi x)
    h = 1e-4
    jp, yp = j0_y0(x + h)
    jm, ym = j0_y0(x - h)
    j, y = j0_y0(x)
    dj = (jp - jm) / (2 * h)
    dy = (yp - ym) / (2 * h)
    w = j * dy - y * dj
    assert w == pytest.approx(2 / (np.pi * x), rel=1e-4)


def test_hankel_envelope_at_large_argument():
    x = np.logspace(2, 4, 50)
    assert np.allclose(np.abs(hankel2_0(x)), np.sqrt(2 / (np.pi * x)), rtol=2e-3)
