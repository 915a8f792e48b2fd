"""RIS characterization: normal-incidence reflection coefficient from a
standing-wave fit, and in-situ standard-deviation spectroscopy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path

from .builders import METAL, RIS_ELEMENT, TRANSCEIVER, build_fence, build_ris_array, FenceSpec
from .channel import channel_matrix, single_threaded_blas
from .engine import (assemble_w, evaluate_field_map, greens_matrix, scene_dipole_size,
                     solve_dipole_moments, wavenumber)
from .types import (DEFAULT_ALPHABET, Dipole, PolarizabilityParams, RisConfiguration, Role, Scene)

MIN_SAMPLES = 8


@dataclass
class ReflectionFit:
    r: complex
    incident: complex
    residual: float


def fit_reflection_coefficient(x, field, f: float, reference_x: float = 0.0) -> ReflectionFit:
    """Least-squares fit of ``A exp(-jkx) + A R exp(+jkx)`` to samples on a
    line along the propagation axis. ``R`` is referenced to ``reference_x``.
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(field, dtype=complex)
    if x.size < MIN_SAMPLES or e.shape != x.shape:
        raise ValueError(f"need at least {MIN_SAMPLES} matching samples")
    k = float(wavenumber(f))
    if np.ptp(x) < 0.25 / f:
        raise ValueError("sample span below a quarter wavelength: fit basis is ill-conditioned")
    xr = x - reference_x
    basis = np.c_[np.exp(-1j * k * xr), np.exp(1j * k * xr)]
    coef, *_ = np.linalg.lstsq(basis, e, rcond=None)
    residual = float(np.linalg.norm(basis @ coef - e) / max(np.linalg.norm(e), 1e-300))
    if coef[0] == 0:
        raise ValueError("no incident wave in the samples")
    return ReflectionFit(complex(coef[1] / coef[0]), complex(coef[0]), residual)


@dataclass
class NormalIncidenceSetup:
    """Ground-plane fence along ``x = 0`` with an RIS line at ``x = -standoff``,
    illuminated by a plane wave travelling in ``+x``."""

    scene: Scene
    ris_plane_x: float
    width: float


def normal_incidence_setup(width: float = 24.0, ground_spacing: float = 0.25,
                           ground_params: PolarizabilityParams = METAL, ris_spacing: float = 0.25,
                           ris_params: PolarizabilityParams = RIS_ELEMENT, standoff: float = 0.25,
                           with_ris: bool = True) -> NormalIncidenceSetup:
    half = width / 2
    ground = build_fence(FenceSpec(((0.0, -half), (0.0, half)), ground_spacing, ground_params))
    ris: list[Dipole] = []
    if with_ris:
        n = int(round(width / ris_spacing)) + 1
        # left normal of a segment running in +y points towards -x
        ris = build_ris_array(np.array([[0.0, -half], [0.0, half]]), n, ris_spacing, ris_params,
                              standoff=standoff, existing=ground)
    return NormalIncidenceSetup(Scene.from_blocks(environment=ground, ris=ris), -standoff, width)


@dataclass
class ReflectionSpectrum:
    frequencies: np.ndarray
    r_on: np.ndarray
    r_off: np.ndarray
    residual_on: np.ndarray
    residual_off: np.ndarray

    @property
    def delta_phi(self) -> np.ndarray:
        """``arg R_ON - arg R_OFF`` wrapped to ``[0, 2*pi)``."""
        return np.mod(np.angle(self.r_on) - np.angle(self.r_off), 2 * np.pi)

    def at(self, f: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - f)))


def reflection_at(setup: NormalIncidenceSetup, ris: RisConfiguration | None, f: float,
                  n_samples: int = 64, span_wavelengths: float = 2.0,
                  gap_wavelengths: float = 1.0) -> ReflectionFit:
    """Reflection coefficient of one configuration at one frequency, fitted on
    a line through the array centre starting ``gap_wavelengths`` in front of
    the RIS plane."""
    scene = setup.scene
    lam = 1.0 / f
    k = float(wavenumber(f))
    w = assemble_w(scene, ris, f)
    e_ext = np.exp(-1j * k * scene.positions[:, 0])
    p = solve_dipole_moments(w, e_ext)
    near = setup.ris_plane_x - gap_wavelengths * lam
    xs = np.linspace(near - span_wavelengths * lam, near, n_samples)
    pts = np.c_[xs, np.zeros_like(xs)]
    fmap = evaluate_field_map(scene, ris, f, p, lambda q, _f: np.exp(-1j * k * q[:, 0]), pts)
    return fit_reflection_coefficient(xs, fmap.values, f, reference_x=setup.ris_plane_x)


def characterize_normal_incidence(setup: NormalIncidenceSetup, frequencies,
                                  alphabet=DEFAULT_ALPHABET) -> ReflectionSpectrum:
    """R(f) with every element ON (``alphabet[0]``) and every element OFF."""
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    n = setup.scene.n_ris
    on = RisConfiguration.uniform(n, alphabet[0], alphabet) if n else None
    off = RisConfiguration.uniform(n, alphabet[1], alphabet) if n else None
    fits_on, fits_off = [], []
    with single_threaded_blas():
        for f in freqs:
            fits_on.append(reflection_at(setup, on, f))
            fits_off.append(reflection_at(setup, off, f))
    return ReflectionSpectrum(
        freqs,
        np.array([r.r for r in fits_on]), np.array([r.r for r in fits_off]),
        np.array([r.residual for r in fits_on]), np.array([r.residual for r in fits_off]),
    )


@dataclass
class InSituSigmaSpectrum:
    frequencies: np.ndarray
    sigma: np.ndarray  # (n_placements, n_freq)
    placements: list

    @property
    def mean(self) -> np.ndarray:
        return self.sigma.mean(axis=0)

    @property
    def peak_frequency(self) -> float:
        return float(self.frequencies[np.argmax(self.mean)])


def siso_spectra(scene: Scene, configs, frequencies) -> np.ndarray:
    """``H_21(f)`` for each configuration, shape ``(n_configs, n_freq)``.

    Green's matrices are computed once per frequency and reused across
    configurations; this gives the same numbers as assembling W afresh.
    """
    freqs = np.asarray(frequencies, dtype=float)
    delta = scene_dipole_size(scene)
    out = np.empty((len(configs), freqs.size), dtype=complex)
    with single_threaded_blas():
        for j, f in enumerate(freqs):
            g = greens_matrix(scene.positions, f, delta)
            for i, cfg in enumerate(configs):
                out[i, j] = channel_matrix(scene, cfg, f, greens=g)[0, 0]
    return out


def _sample_placement(rng, region: Path, bounds, occupied: np.ndarray, clearance: float,
                      max_tries: int):
    lo, hi = bounds
    for _ in range(max_tries):
        pt = rng.uniform(lo, hi)
        if not region.contains_point(pt):
            continue
        if occupied.size and np.min(np.hypot(*(occupied - pt).T)) < clearance:
            continue
        return pt
    raise RuntimeError(f"no valid transceiver placement found in {max_tries} tries")


def characterize_in_situ(scene: Scene, n_random_configs: int, n_placements: int, seed: int,
                         region=None, frequencies=None, alphabet=DEFAULT_ALPHABET,
                         clearance: float = 0.5, transceiver: PolarizabilityParams = TRANSCEIVER,
                         configurations=None, max_tries: int = 1000) -> InSituSigmaSpectrum:
    """Standard deviation of the complex ``H_21(f)`` over random RIS
    configurations, for the scene's own transceivers (when ``region`` is
    None) or for ``n_placements`` random transceiver pairs drawn inside the
    polygon ``region``.
    """
    if n_random_configs < 2:
        raise ValueError("need at least two random configurations")
    freqs = scene.frequencies if frequencies is None else np.asarray(frequencies, dtype=float)
    rng = np.random.default_rng(seed)
    if configurations is None:
        configurations = [RisConfiguration.random(scene.n_ris, rng, alphabet) for _ in range(n_random_configs)]
    placements = []
    if region is None:
        if scene.n_tx != 1 or scene.n_rx != 1:
            raise ValueError("in-situ characterization needs a SISO scene")
        scenes = [scene]
        placements.append((scene.positions[0].tolist(), scene.positions[1].tolist()))
    else:
        poly = np.asarray(region, dtype=float)
        path = Path(poly)
        bounds = (poly.min(axis=0), poly.max(axis=0))
        static = np.vstack([scene.positions[scene.env_slice], scene.positions[scene.ris_slice]])
        scenes = []
        for _ in range(n_placements):
            tx = _sample_placement(rng, path, bounds, static, clearance, max_tries)
            rx = _sample_placement(rng, path, bounds, np.vstack([static, tx]), clearance, max_tries)
            placements.append((tx.tolist(), rx.tolist()))
            scenes.append(scene.replace(transmitters=[Dipole(tuple(tx), transceiver, Role.TRANSMITTER)],
                                        receivers=[Dipole(tuple(rx), transceiver, Role.RECEIVER)]))
    sigma = np.array([np.std(siso_spectra(s, configurations, freqs), axis=0) for s in scenes])
    return InSituSigmaSpectrum(freqs, sigma, placements)
