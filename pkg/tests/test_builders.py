from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dipolefade.builders import (METAL, RIS_ELEMENT, FenceSpec, StirrerSpec, apply_realization,
                                 build_enclosure, build_fence, build_ris_array, build_stirrer_ensemble,
                                 plane_wave_external_field, polyline_points, random_star_polygon,
                                 realization_angles)
from dipolefade.types import Dipole, Role, Scene, validate_scene

from conftest import random_scene


def test_segment_of_length_one():
    d = build_fence(FenceSpec(((0, 0), (1, 0)), 0.25))
    assert len(d) == 5
    assert d[0].position == (0, 0) and d[-1].position == (1, 0)
    assert all(x.params == METAL and x.role == Role.ENVIRONMENT for x in d)


def test_closed_square_has_no_duplicate_corners():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]
    pts = polyline_points(sq, 0.25)
    assert len(pts) == 16
    assert len({tuple(np.round(p, 12)) for p in pts}) == 16


def test_rectangular_enclosure_count():
    rect = [(0, 0), (3, 0), (3, 2), (0, 2), (0, 0)]
    assert len(build_enclosure(rect, 0.25)) == 40
    with pytest.raises(ValueError):
        build_enclosure(rect[:-1], 0.25)


def test_degenerate_polyline_rejected():
    with pytest.raises(ValueError):
        polyline_points([(1, 1), (1, 1)], 0.25)
    with pytest.raises(ValueError):
        polyline_points([(0, 0), (1, 0)], 0.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2, max_size=6),
       st.floats(0.05, 1.0))
def test_fence_spacing_bound(vertices, spacing):
    v = np.array(vertices)
    if np.hypot(*np.diff(v, axis=0).T).min() < 1e-3:
        return
    pts = polyline_points(v, spacing)
    gaps = np.hypot(*np.diff(pts, axis=0).T)
    assert gaps.max() <= spacing * (1 + 1e-9)


def test_star_polygon_properties():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = random_star_polygon(rng, 1.0)
        assert 9 <= len(p) <= 17 and np.array_equal(p[0], p[-1])
        r = np.hypot(*p.T)
        assert np.all((r >= 0.6 - 1e-12) & (r <= 1.4 + 1e-12))


def test_stirrer_rotation_is_rigid():
    spec = StirrerSpec.random((2, 3), 0.8, np.random.default_rng(1))
    a = spec.points(0.0)
    b = spec.points(1.234)
    da = np.hypot(*(a[:, None] - a[None]).transpose(2, 0, 1))
    db = np.hypot(*(b[:, None] - b[None]).transpose(2, 0, 1))
    assert np.allclose(da, db, atol=1e-12)
    assert np.allclose(a.mean(0) - (2, 3), (b.mean(0) - (2, 3)) @ np.array(
        [[np.cos(1.234), -np.sin(1.234)], [np.sin(1.234), np.cos(1.234)]]), atol=1e-12)


def test_ensemble_deterministic_and_split():
    specs = [StirrerSpec.random((0, 0), 0.5, np.random.default_rng(i)) for i in range(3)]
    a = build_stirrer_ensemble(specs, 5, seed=9)
    b = build_stirrer_ensemble(specs, 5, seed=9)
    assert a == b
    assert a[3].angles == tuple(realization_angles(9, 3, 3))
    assert build_stirrer_ensemble(specs, 1, 9)[0] == a[0]
    assert build_stirrer_ensemble(specs, 5, seed=10) != a
    with pytest.raises(ValueError):
        build_stirrer_ensemble(specs, 0, 1)


def test_angles_uniform_chi_squared():
    angles = np.concatenate([realization_angles(4, k, 2) for k in range(10_000)])
    counts, _ = np.histogram(angles, bins=16, range=(0, 2 * np.pi))
    assert stats.chisquare(counts).pvalue > 0.01


def test_apply_realization_appends_to_environment():
    sc = random_scene(np.random.default_rng(0), 3, 2)
    specs = [StirrerSpec.random((20, 20), 0.5, np.random.default_rng(0))]
    real = build_stirrer_ensemble(specs, 1, 0)[0]
    out = apply_realization(sc, specs, real)
    assert out.n_env == 3 + len(specs[0].local_points())
    assert out.ris == sc.ris and out.transmitters == sc.transmitters
    assert validate_scene(out) == []


def test_ris_array_count_and_standoff():
    wall = build_fence(FenceSpec(((0, 0), (20, 0)), 0.25))
    ris = build_ris_array(np.array([[0, 0], [20, 0]]), 45, 0.25, standoff=0.25, existing=wall)
    assert len(ris) == 45 and all(d.params == RIS_ELEMENT and d.role == Role.RIS for d in ris)
    rp = np.array([d.position for d in ris])
    wp = np.array([d.position for d in wall])
    dmin = np.hypot(*(rp[:, None] - wp[None]).transpose(2, 0, 1)).min()
    assert dmin == pytest.approx(0.25, abs=1e-12)


def test_ris_array_split_over_segments():
    anchors = [np.array([[0, 0], [5, 0]]), np.array([[10, 0], [10, 5]])]
    ris = build_ris_array(anchors, [7, 3], 0.25)
    assert len(ris) == 10
    assert sum(abs(d.position[1] - 0.25) < 1e-12 for d in ris) == 7


def test_ris_array_overlap_and_fit_errors():
    with pytest.raises(ValueError):
        build_ris_array(np.array([[0, 0], [1, 0]]), 10, 0.25)
    existing = [Dipole((2.5, 0.25), METAL, Role.ENVIRONMENT)]
    with pytest.raises(ValueError):
        build_ris_array(np.array([[0, 0], [5, 0]]), 21, 0.25, existing=existing)


def test_plane_wave_entries():
    sc = Scene.from_blocks([Dipole((0, 0), METAL, Role.TRANSMITTER)], [Dipole((1.0, 0), METAL, Role.RECEIVER)])
    e = plane_wave_external_field(sc, (1.0, 0.0), 1.0)
    assert e[0] == 1 + 0j
    assert e[1] == pytest.approx(e[0], abs=1e-12)
    with pytest.raises(ValueError):
        plane_wave_external_field(sc, (1.0, 1.0), 1.0)


def test_builders_pure():
    spec = FenceSpec(((0, 0), (1, 2), (3, 1)), 0.3)
    assert build_fence(spec) == build_fence(spec)
