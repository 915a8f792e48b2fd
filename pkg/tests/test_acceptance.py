"""Acceptance gate: every criterion at its stated tolerance.

Each test records its outcome through the ``criterion`` fixture; the run
ends with one PASS/FAIL line per criterion. The long runs (fading sweep and
the 114-element equalization) take tens of minutes on one core.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from conftest import random_scene
from dipolefade import cli
from dipolefade.channel import channel_matrix, channel_tensor
from dipolefade.engine import greens_function, inverse_polarizability, wavenumber
from dipolefade.equalization import (CostEvaluator, effective_tap_width, improving_flips, optimize_ris,
                                     select_target_tap, target_tap_dominance_db)
from dipolefade.fading import FadingSetup, fit_distributions, transparency_sweep
from dipolefade.recipes import (desk_ris_room, fading_chamber, free_space_pair, reverberant_ris_room)
from dipolefade.ris import characterize_normal_incidence, normal_incidence_setup
from dipolefade.timedomain import causality_check, cir_from_spectrum
from dipolefade.types import PolarizabilityParams, RisConfiguration

pytestmark = pytest.mark.acceptance

DELTA = 0.5
EPS = 1.0


# --- 1: closed-form oracle ------------------------------------------------------

def test_criterion_1_two_dipole_closed_form(criterion):
    doc = free_space_pair(distance=4.0, resonant=True, grid=(0.5, 1.5, 101))
    scene = doc.scene()
    t = time.perf_counter()
    h = channel_tensor(scene, None).siso
    elapsed = time.perf_counter() - t
    p = scene.transmitters[0].params
    a1 = np.array([inverse_polarizability(p, f) for f in scene.frequencies])
    g = np.array([greens_function((0, 0), (4, 0), f) for f in scene.frequencies])
    # W = [[a1, -g], [-g, a2]], unit field on the transmitter, H = a2 * p2
    expected = a1 * g / (a1 * a1 - g * g)
    err = float(np.max(np.abs(h - expected) / np.abs(expected)))
    ok = err <= 1e-10 and elapsed < 1.0
    criterion(1, "", ok, f"max relative error {err:.2e} over 101 frequencies, {elapsed:.3f} s")
    assert ok


# --- 2: passivity ---------------------------------------------------------------

def test_criterion_2_passivity(criterion):
    rng = np.random.default_rng(2024)
    worst = np.inf
    for _ in range(1000):
        gamma, chi = rng.uniform(0, 1), 10 ** rng.uniform(-2, 2)
        f_res, f = rng.uniform(0.5, 20), rng.uniform(0.5, 1.5)
        inv = inverse_polarizability(PolarizabilityParams.from_chi(chi, f_res, gamma, DELTA), f)
        worst = min(worst, inv.imag - wavenumber(f) ** 2 / (4 * EPS * DELTA))
    ok = worst >= -1e-12
    criterion(2, "", ok, f"min Im(1/alpha) - k^2/(4 eps delta) = {worst:.3e} over 1000 draws")
    assert ok


# --- 3: reciprocity -------------------------------------------------------------

def test_criterion_3_reciprocity(criterion):
    worst, largest = 0.0, 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n_env, n_ris = int(rng.integers(20, 250)), int(rng.integers(0, 40))
        sc = random_scene(rng, n_env, n_ris, box=12.0, n_tx=2, n_rx=3)
        largest = max(largest, sc.n)
        cfg = RisConfiguration.random(n_ris, rng) if n_ris else None
        swapped = sc.replace(transmitters=sc.receivers, receivers=sc.transmitters)
        for f in (0.6, 1.0, 1.4):
            h = channel_matrix(sc, cfg, f)
            hs = channel_matrix(swapped, cfg, f)
            worst = max(worst, np.linalg.norm(h - hs.T) / np.linalg.norm(h))
    ok = worst <= 1e-10 and largest <= 300
    criterion(3, "", ok, f"max ||H - H_swapped^T|| / ||H|| = {worst:.2e} on 20 scenes (N <= {largest})")
    assert ok


# --- 4: RIS characterization ------------------------------------------------------

def test_criterion_4_ris_reflection(criterion):
    t = time.perf_counter()
    base = characterize_normal_incidence(normal_incidence_setup(), [1.0])
    dense = characterize_normal_incidence(normal_incidence_setup(ground_spacing=0.05), [1.0])
    elapsed = time.perf_counter() - t
    # off resonance: the OFF state (f_res = 5) at f = 1
    r_off, r_dense = abs(base.r_off[0]), abs(dense.r_off[0])
    dphi = float(base.delta_phi[0])
    checks = {
        "a": (abs(r_off - 0.70) <= 0.05, f"|R| off resonance {r_off:.3f} (target 0.70 +- 0.05)"),
        "b": (abs(r_dense - 0.88) <= 0.05, f"|R| with 5x denser ground {r_dense:.3f} (target 0.88 +- 0.05)"),
        "c": (abs(dphi - np.pi) <= 0.05, f"delta phi(f=1) {dphi:.3f} rad (target pi +- 0.05)"),
        "d": (elapsed < 120, f"runtime {elapsed:.1f} s"),
    }
    for part, (ok, detail) in checks.items():
        criterion(4, part, ok, detail)
    assert all(ok for ok, _ in checks.values())


# --- 5: fading sweep --------------------------------------------------------------

FADING_VALUES = np.logspace(1, 4, 7)
FADING_REALIZATIONS = 2000


@pytest.fixture(scope="module")
def fading_run():
    doc = fading_chamber()
    setup = FadingSetup(doc.scene(include_stirrers=False), list(doc.stirrers))
    t = time.perf_counter()
    result = transparency_sweep(setup, FADING_VALUES, FADING_REALIZATIONS, seed=1)
    return doc, result, time.perf_counter() - t


def smooth(y: np.ndarray) -> np.ndarray:
    """Three-point moving average with the end points kept."""
    out = y.copy()
    out[1:-1] = (y[:-2] + y[1:-1] + y[2:]) / 3
    return out


def test_criterion_5_fading_sweep(fading_run, criterion):
    doc, res, elapsed = fading_run
    k = res.mean_k_db
    ks = smooth(k)
    opaque = res.samples[:, 0].reshape(res.samples.shape[0], -1)
    fits = [fit_distributions(opaque[:, j]) for j in range(opaque.shape[1])]
    p = np.array([[f.real.p_value, f.imag.p_value, f.magnitude.p_value] for f in fits])
    r_eff = res.mean_effective_rank
    n_rx, n_tx = res.samples.shape[2:]
    checks = {
        "a": (bool(np.all(np.diff(ks) >= 0)), "smoothed mean K (dB) " + " ".join(f"{v:.1f}" for v in ks)),
        "b": (k.min() <= -15 and k.max() >= 40, f"mean K spans {k.min():.1f} to {k.max():.1f} dB"),
        "c": (p[0, 0] > 0.01 and p[0, 1] > 0.01,
              f"H[0,0] opaque KS Gaussian p real {p[0, 0]:.3f}, imag {p[0, 1]:.3f}; "
              f"{int(np.sum(p[:, :2] > 0.01))}/{2 * len(fits)} quadratures over all links pass"),
        "d": (p[0, 2] > 0.01, f"H[0,0] opaque KS Rician p {p[0, 2]:.3f}; "
                              f"{int(np.sum(p[:, 2] > 0.01))}/{len(fits)} links pass"),
        "e": (r_eff[0] > 2.0 and r_eff[-1] < 1.3 and (n_rx, n_tx) == (3, 4),
              f"{n_rx}x{n_tx} mean R_eff opaque {r_eff[0]:.2f}, transparent {r_eff[-1]:.2f}"),
        "f": (elapsed <= 1800 and len(doc.stirrers) >= 8,
              f"{len(doc.stirrers)} stirrers, {res.samples.shape[0]} realizations, {elapsed / 60:.1f} min"),
    }
    for part, (ok, detail) in checks.items():
        criterion(5, part, ok, detail)
    assert all(ok for ok, _ in checks.values())


# --- 6: time domain -----------------------------------------------------------------

def test_criterion_6_causality(criterion):
    t = time.perf_counter()
    reports = {}
    for resonant in (False, True):
        sc = free_space_pair(distance=4.0, resonant=resonant).scene()
        cir = cir_from_spectrum(sc.frequencies, channel_tensor(sc, None).siso)
        reports[resonant] = (causality_check(cir, 4.0), cir.dt)
    elapsed = time.perf_counter() - t
    nr, dt = reports[False]
    res, _ = reports[True]
    checks = {
        "a": (abs(nr.peak_time - 4.0) <= dt, f"non-resonant peak at t = {nr.peak_time:.4f} (dt {dt:.4f})"),
        "b": (nr.leakage_db <= -40, f"leakage before t = 3.6 is {nr.leakage_db:.1f} dB "
                                    f"(envelope {nr.envelope_leakage_db:.1f} dB)"),
        "c": (res.peak_time > 4.0, f"resonant peak at t = {res.peak_time:.4f}"),
        "d": (elapsed < 60, f"runtime {elapsed:.2f} s"),
    }
    for part, (ok, detail) in checks.items():
        criterion(6, part, ok, detail)
    assert all(ok for ok, _ in checks.values())


# --- 7: equalization ----------------------------------------------------------------

def equalize(scene, strategy, seed, n_random=50, n_passes=5):
    """The command-line equalization flow: random ensemble, target tap,
    greedy flips."""
    ev = CostEvaluator.for_scene(scene)
    rng = np.random.default_rng(seed)
    initial = [RisConfiguration.random(scene.n_ris, rng) for _ in range(n_random)]
    cirs = [ev.cir(c) for c in initial]
    distance = float(np.hypot(*(scene.positions[scene.n_tx] - scene.positions[0])))
    ev.window = select_target_tap(cirs, strategy, los_distance=distance,
                                  delta_t=effective_tap_width(scene.frequencies))
    final, trace = optimize_ris(ev, scene.n_ris, n_passes=n_passes, initial=initial)
    return ev, final, trace, cirs, distance


def strictly_increasing(trace) -> bool:
    acc = trace.accepted_costs
    return all(b > a for a, b in zip(acc, acc[1:])) and all(
        s.cost_after <= s.cost_before for s in trace.steps if not s.accepted)


@pytest.fixture(scope="module")
def desk_runs():
    scene = desk_ris_room().scene()
    return scene, [equalize(scene, "dominant_nlos", seed) for seed in range(3)]


def test_criterion_7a_monotone(desk_runs, criterion):
    _, runs = desk_runs
    ok = all(strictly_increasing(r[2]) for r in runs)
    n_acc = [r[2].n_accepted for r in runs]
    criterion(7, "a", ok, f"accepted-cost sequences strictly increasing on {len(runs)} seeded runs "
                          f"({n_acc} accepted flips)")
    assert ok


def test_criterion_7b_local_optimum(desk_runs, criterion):
    scene, runs = desk_runs
    t = time.perf_counter()
    improving = [improving_flips(ev, final) for ev, final, *_ in runs]
    elapsed = time.perf_counter() - t
    ok = scene.n_ris == 10 and all(not i for i in improving)
    criterion(7, "b", ok, f"N_RIS = {scene.n_ris}: improving single flips after optimization {improving} "
                          f"(checked in {elapsed:.1f} s)")
    assert ok


def test_criterion_7c_reverberant_dominance(criterion):
    scene = reverberant_ris_room().scene()
    t = time.perf_counter()
    ev, final, trace, cirs, distance = equalize(scene, "dominant_nlos", seed=0)
    elapsed = time.perf_counter() - t
    before = cirs[trace.best_initial]
    dom_before = target_tap_dominance_db(before, ev.window)
    dom = target_tap_dominance_db(ev.cir(final), ev.window)
    ok = dom >= 10 and ev.window.t0 > distance and strictly_increasing(trace)
    criterion(7, "c1", ok, f"N_RIS = {scene.n_ris}: target tap at t = {ev.window.t0:.2f} (LOS {distance:.2f}) "
                           f"dominates every other tap by {dom:.2f} dB (best random {dom_before:.2f} dB), "
                           f"C {trace.best_initial_cost:.3f} -> {trace.final_cost:.3f}, {elapsed / 60:.1f} min")
    assert ok


def test_criterion_7c_lossy_residual(criterion):
    scene = reverberant_ris_room(lossy=True).scene()
    t = time.perf_counter()
    ev, final, trace, cirs, distance = equalize(scene, "los", seed=0)
    elapsed = time.perf_counter() - t
    before, after = 1 - trace.best_initial_cost, 1 - trace.final_cost
    drop = 1 - after / before
    ok = drop >= 0.5 and strictly_increasing(trace)
    criterion(7, "c2", ok, f"lossy room, LOS tap at t = {distance:.2f}: NLOS residual {before:.3f} -> {after:.3f} "
                           f"({100 * drop:.0f}% decrease), {elapsed / 60:.1f} min")
    assert ok


# --- 8: determinism -----------------------------------------------------------------

def write_stirred_box(path):
    from dipolefade.builders import FenceSpec, StirrerSpec
    from dipolefade.scenefile import NONRESONANT_TRANSCEIVER, SceneDocument
    from dipolefade.types import Dipole, Role
    rng = np.random.default_rng(0)
    doc = SceneDocument(
        transmitters=[Dipole((0.7, 0.6 + 0.5 * i), NONRESONANT_TRANSCEIVER, Role.TRANSMITTER) for i in range(2)],
        receivers=[Dipole((3.4, 0.8 + 0.5 * i), NONRESONANT_TRANSCEIVER, Role.RECEIVER) for i in range(2)],
        fences=[FenceSpec(((0, 0), (4, 0), (4.3, 3.2), (0, 3.0), (0, 0)), 0.25)],
        stirrers=[StirrerSpec.random(c, 0.35, rng) for c in [(2.0, 1.0), (2.2, 2.2), (1.2, 2.3)]],
        frequency_grid=(1.0,))
    doc.save(path)
    return str(path)


def test_criterion_8_thread_independence(tmp_path, criterion):
    box = write_stirred_box(tmp_path / "box.json")
    commands = {
        "validate": ["validate", "--scene", "builtin:in-situ-ris-room", "--dump-expanded"],
        "channel": ["channel", "--scene", "builtin:reverberant-ris-room", "--random-ris", "--seed", "4",
                    "--freq-min", "0.9", "--freq-max", "1.1", "--freq-points", "9"],
        "fading-sweep": ["fading-sweep", "--scene", box, "--seed", "7", "--realizations", "40",
                         "--f-res-values", "10,100,1000", "--clouds"],
        "ris-characterize normal": ["ris-characterize", "--freq-min", "0.9", "--freq-max", "1.1",
                                    "--freq-points", "3", "--width", "8"],
        "ris-characterize in-situ": ["ris-characterize", "--mode", "in-situ", "--scene", "builtin:desk-ris-room",
                                     "--seed", "3", "--configs", "6", "--placements", "2",
                                     "--region", "0.5,0.5,2.8,0.6,2.8,2.0,0.5,2.0"],
        "cir": ["cir", "--scene", "builtin:irregular-enclosure"],
        "equalize": ["equalize", "--scene", "builtin:desk-ris-room", "--seed", "9", "--n-random", "8",
                     "--passes", "1", "--tap-width", "effective"],
        "field-map": ["field-map", "--scene", "builtin:in-situ-ris-room", "--seed", "2", "--random-ris",
                      "--bounds", "0.1,5.9,0.3,4.1", "--nx", "25", "--ny", "17"],
    }
    mismatched = []
    for name, argv in commands.items():
        outputs = []
        for threads in (1, 4, 8):
            out = tmp_path / f"{name.replace(' ', '-')}-{threads}"
            code = cli.main(argv + ["--threads", str(threads), "--out", str(out)])
            assert code == 0, name
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if not outputs[0] == outputs[1] == outputs[2]:
            mismatched.append(name)
    ok = not mismatched
    criterion(8, "", ok, f"{len(commands)} command runs byte-identical across threads 1/4/8"
              if ok else f"outputs differ for {mismatched}")
    assert ok
