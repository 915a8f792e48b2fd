from __future__ import annotations

import numpy as np
import pytest

from dipolefade.types import (Dipole, PolarizabilityParams, RisConfiguration, Role, Scene, grid_is_uniform,
                              validate_scene)

P = PolarizabilityParams.from_chi(0.5, 1.0)


def scene(**kw):
    base = dict(transmitters=[Dipole((0, 0), P, Role.TRANSMITTER)],
                receivers=[Dipole((1, 0), P, Role.RECEIVER)],
                environment=[Dipole((2, 0), P, Role.ENVIRONMENT)],
                ris=[Dipole((3, 0), P, Role.RIS)], frequency_grid=(0.9, 1.0, 1.1))
    base.update(kw)
    return Scene.from_blocks(**base)


def test_valid_scene():
    assert validate_scene(scene()) == []


def test_block_slices():
    sc = scene()
    assert sc.n == 4 and sc.positions[sc.ris_slice].tolist() == [[3.0, 0.0]]
    assert not sc.positions.flags.writeable


def test_block_order_violation():
    d = list(scene().dipoles)
    bad = Scene((d[1], d[0], d[2], d[3]), 1, 1, 1, 1)
    assert [v.kind for v in validate_scene(bad)] == ["block_order"]


def test_block_counts_must_match():
    with pytest.raises(ValueError):
        Scene(scene().dipoles, 1, 1, 1, 2)


@pytest.mark.parametrize("params,kind", [
    (PolarizabilityParams(0.0, 1.0), "params"),
    (PolarizabilityParams(1.0, -1.0), "params"),
    (PolarizabilityParams(1.0, 1.0, -0.1), "params"),
    (PolarizabilityParams(1.0, 1.0, 0.0, 0.6), "params"),
])
def test_param_violations(params, kind):
    sc = scene(environment=[Dipole((2, 0), params, Role.ENVIRONMENT)])
    assert kind in [v.kind for v in validate_scene(sc)]


def test_mixed_dipole_size_flagged():
    small = PolarizabilityParams.from_chi(0.5, 1.0, dipole_size=0.25)
    sc = scene(environment=[Dipole((2, 0), small, Role.ENVIRONMENT)])
    assert "dipole_size" in [v.kind for v in validate_scene(sc)]


def test_coincident_flagged():
    sc = scene(environment=[Dipole((0, 0), P, Role.ENVIRONMENT)])
    v = [x for x in validate_scene(sc) if x.kind == "coincident"]
    assert v and v[0].indices == (0, 2)


@pytest.mark.parametrize("grid", [(1.0, 0.9, 1.1), (0.9, 1.0, 1.2), (0.0, 1.0, 2.0)])
def test_grid_violations(grid):
    assert "grid" in [v.kind for v in validate_scene(scene(frequency_grid=grid))]


def test_grid_uniform_tolerance():
    assert grid_is_uniform(np.linspace(0.5, 1.5, 401))
    assert not grid_is_uniform([0.5, 1.0, 1.6])


def test_digest_is_stable_and_sensitive():
    a, b = scene(), scene()
    assert a.digest() == b.digest()
    assert scene(frequency_grid=(0.9, 1.0, 1.2)).digest() != a.digest()


def test_ris_configuration_roundtrip():
    cfg = RisConfiguration.from_bits([1, 0, 1])
    assert cfg.states == (1.0, 5.0, 1.0) and cfg.bits == (1, 0, 1)
    assert cfg.flipped(1).bits == (1, 1, 1)
    assert cfg.flipped(1).flipped(1) == cfg
    assert len(cfg) == 3
    with pytest.raises(ValueError):
        RisConfiguration((1.0, 2.0))


def test_degenerate_alphabet_flip_is_identity():
    cfg = RisConfiguration.uniform(4, 1.0, (1.0, 1.0))
    assert cfg.flipped(2) == cfg


def test_random_configuration_seeded():
    a = RisConfiguration.random(20, np.random.default_rng(5))
    b = RisConfiguration.random(20, np.random.default_rng(5))
    assert a == b and a.digest() == b.digest()


def test_replace_keeps_roles():
    sc = scene()
    swapped = sc.replace(transmitters=sc.receivers, receivers=sc.transmitters)
    assert swapped.transmitters[0].role == Role.TRANSMITTER
    assert swapped.transmitters[0].position == (1.0, 0.0)
