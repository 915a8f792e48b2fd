"""Stirred-ensemble channel statistics: Rician K-factor, distribution fits,
transparency sweeps and the effective rank of channel matrices."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, special, stats

from .builders import StirrerRealization, StirrerSpec, apply_realization, build_stirrer_ensemble
from .channel import channel_tensor, single_threaded_blas
from .engine import (COINCIDENT_TOL, SingularityError, SolverError, greens_matrix, greens_values,
                     inverse_polarizability_values, pairwise_distances, resonance_frequencies,
                     scene_dipole_size, solve_dipole_moments)
from .types import ChannelTensor, RisConfiguration, Scene

PER_QUADRATURE = "per_quadrature"
TOTAL = "total"
# sigma below this fraction of |mu| (or of 1 when mu = 0) counts as zero.
ZERO_SIGMA_RTOL = 1e-13


@dataclass
class KFactor:
    mu: np.ndarray
    sigma: np.ndarray
    k: np.ndarray
    undefined: np.ndarray

    @property
    def k_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.k)


def estimate_k_factor(samples, convention: str = PER_QUADRATURE, axis: int = 0) -> KFactor:
    """``K = |mu|^2 / (2 sigma^2)`` along ``axis``.

    With the default per-quadrature convention ``sigma^2 = E|H - mu|^2 / 2``,
    so K is the usual Rician ``nu^2 / (2 sigma_g^2)``. ``convention="total"``
    uses ``sigma^2 = E|H - mu|^2`` instead. Zero spread gives ``K = inf`` and
    sets ``undefined``.
    """
    h = np.moveaxis(np.asarray(samples, dtype=complex), axis, 0)
    if h.shape[0] < 2:
        raise ValueError("need at least two samples")
    constant = np.all(h == h[:1], axis=0)
    mu = np.where(constant, h[0], h.mean(axis=0))
    spread = np.mean(np.abs(h - mu) ** 2, axis=0)
    if convention == PER_QUADRATURE:
        var = spread / 2.0
    elif convention == TOTAL:
        var = spread
    else:
        raise ValueError(f"unknown sigma convention {convention!r}")
    sigma = np.where(constant, 0.0, np.sqrt(var))
    undefined = constant | (sigma <= ZERO_SIGMA_RTOL * np.maximum(np.abs(mu), 1e-300))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(undefined, np.inf, np.abs(mu) ** 2 / (2.0 * sigma ** 2))
    return KFactor(mu, sigma, k, undefined)


@dataclass
class EnsembleStatistics:
    frequency: float
    mu: np.ndarray
    sigma: np.ndarray
    k: np.ndarray
    undefined: np.ndarray
    n_samples: int

    @property
    def k_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.k)

    @classmethod
    def from_samples(cls, samples, frequency: float, convention: str = PER_QUADRATURE):
        est = estimate_k_factor(samples, convention)
        return cls(frequency, est.mu, est.sigma, est.k, est.undefined, len(samples))


def ensemble_channels(scene: Scene, ris: RisConfiguration | None, stirrers: Sequence[StirrerSpec],
                      realizations: Sequence[StirrerRealization], frequencies=None,
                      threads: int = 1) -> list[ChannelTensor]:
    """One channel tensor per stirrer realization."""
    if not realizations:
        raise ValueError("empty ensemble")
    out = []
    for real in realizations:
        try:
            out.append(channel_tensor(apply_realization(scene, stirrers, real), ris, frequencies,
                                      threads=threads, realization=real.index))
        except SolverError as exc:
            raise SolverError(f"realization {real.index}: {exc}", exc.condition, exc.frequency) from exc
    return out


def effective_rank(h) -> float:
    """Exponential of the Shannon entropy of the normalized singular values."""
    s = np.linalg.svd(np.asarray(h, dtype=complex), compute_uv=False)
    total = s.sum()
    if not total > 0:
        raise ValueError("effective rank of a zero matrix is undefined")
    q = s[s > 0] / total
    return float(np.exp(-np.sum(q * np.log(q))))


@dataclass
class FadingSetup:
    """Static scene (transceivers, enclosure, optional RIS) plus mode stirrers.

    In a transparency sweep every environment dipole, static or stirred,
    takes the swept resonance frequency.
    """

    scene: Scene
    stirrers: list[StirrerSpec] = field(default_factory=list)
    ris: RisConfiguration | None = None


@dataclass
class SweepResult:
    f_res_values: np.ndarray
    frequency: float
    samples: np.ndarray  # (n_realizations, n_values, n_rx, n_tx)
    statistics: list[EnsembleStatistics]
    effective_ranks: np.ndarray  # (n_realizations, n_values)

    @property
    def mean_effective_rank(self) -> np.ndarray:
        return self.effective_ranks.mean(axis=0)

    @property
    def mean_k_db(self) -> np.ndarray:
        """K in dB averaged over all channel coefficients, per swept value."""
        return np.array([np.mean(s.k_db) for s in self.statistics])


def realization_greens(setup: FadingSetup, realization: StirrerRealization, frequency: float,
                       static: np.ndarray | None = None) -> tuple[Scene, np.ndarray]:
    """Scene and Green's matrix of one realization.

    ``static`` is the Green's matrix of ``setup.scene`` at ``frequency``. When
    given, only the rows and columns of the stirrer dipoles are evaluated.
    """
    scene = apply_realization(setup.scene, setup.stirrers, realization)
    if static is None:
        return scene, greens_matrix(scene.positions, frequency, scene_dipole_size(scene))
    pos = scene.positions
    start = setup.scene.env_slice.stop
    stir = np.arange(start, start + scene.n - setup.scene.n)
    kept = np.setdiff1d(np.arange(scene.n), stir)
    g = np.zeros((scene.n, scene.n), dtype=complex)
    g[np.ix_(kept, kept)] = static
    if stir.size:
        d = pairwise_distances(pos[stir], pos)
        d[np.arange(stir.size), stir] = np.inf
        if np.any(d <= COINCIDENT_TOL):
            i, j = np.argwhere(d <= COINCIDENT_TOL)[0]
            raise SingularityError(f"dipoles {stir[i]} and {j} are coincident")
        rows = greens_values(np.where(np.isinf(d), 1.0, d), frequency, scene_dipole_size(scene))
        rows[np.arange(stir.size), stir] = 0.0
        g[stir, :] = rows
        g[:, stir] = rows.T
    return scene, g


def sweep_realization(setup: FadingSetup, f_res_values, realization: StirrerRealization,
                      frequency: float, static: np.ndarray | None = None) -> np.ndarray:
    """Channel matrices of one realization for every swept value, ``(n_values, n_rx, n_tx)``.

    The Green's matrix depends only on positions, so it is shared by all
    swept values.
    """
    scene, g = realization_greens(setup, realization, frequency, static)
    base_f_res = resonance_frequencies(scene, setup.ris)
    e = np.zeros((scene.n, scene.n_tx), dtype=complex)
    e[np.arange(scene.n_tx), np.arange(scene.n_tx)] = 1.0
    rx = scene.rx_slice
    out = np.empty((len(f_res_values), scene.n_rx, scene.n_tx), dtype=complex)
    for v, f_env in enumerate(f_res_values):
        f_res = base_f_res.copy()
        f_res[scene.env_slice] = f_env
        inv_alpha = inverse_polarizability_values(scene.chi_squared, f_res, scene.gamma_abs,
                                                  scene.dipole_size, frequency)
        w = -g
        w[np.diag_indices_from(w)] = inv_alpha
        p = solve_dipole_moments(w, e)
        out[v] = inv_alpha[rx][:, None] * p[rx, :]
    return out


def transparency_sweep(setup: FadingSetup, f_res_values, n_realizations: int, seed: int,
                       frequency: float = 1.0, convention: str = PER_QUADRATURE,
                       threads: int = 1) -> SweepResult:
    """Ensemble statistics at ``frequency`` for each environment resonance frequency.

    Realizations fan out over ``threads`` workers and are reduced in index
    order, so the result does not depend on the worker count.
    """
    values = np.asarray(f_res_values, dtype=float)
    if values.ndim != 1 or values.size == 0 or np.any(np.diff(values) <= 0):
        raise ValueError("f_res values must be strictly increasing")
    realizations = build_stirrer_ensemble(setup.stirrers, n_realizations, seed)
    static = greens_matrix(setup.scene.positions, frequency, scene_dipole_size(setup.scene))

    def one(real):
        try:
            return sweep_realization(setup, values, real, frequency, static)
        except SolverError as exc:
            raise SolverError(f"realization {real.index}: {exc}", exc.condition, exc.frequency) from exc

    with single_threaded_blas():
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                samples = np.stack(list(pool.map(one, realizations)))
        else:
            samples = np.stack([one(r) for r in realizations])
    stats_list = [EnsembleStatistics.from_samples(samples[:, v], frequency, convention)
                  for v in range(values.size)]
    ranks = np.array([[effective_rank(samples[k, v]) for v in range(values.size)]
                      for k in range(samples.shape[0])])
    return SweepResult(values, frequency, samples, stats_list, ranks)


# --- distribution fits -------------------------------------------------------

@dataclass
class GaussianFit:
    mean: float
    variance: float
    ks_statistic: float
    p_value: float


@dataclass
class RicianFit:
    nu: float
    sigma: float
    ks_statistic: float
    p_value: float


@dataclass
class DistributionFit:
    real: GaussianFit | None
    imag: GaussianFit | None
    magnitude: RicianFit | None
    degenerate: bool = False


def _laguerre_half(x):
    # L_{1/2}(x) for x <= 0, with exponentially scaled Bessel functions
    return np.exp(x / 2) * ((1 - x) * special.i0(-x / 2) - x * special.i1(-x / 2)) \
        if x > -500 else np.sqrt(-4 * x / np.pi)


def rician_moment_ratio(b: float) -> float:
    """``E[r]^2 / E[r^2]`` for a Rician variable with ``nu / sigma = b``."""
    mean = np.sqrt(np.pi / 2) * _laguerre_half(-b * b / 2)
    return float(mean ** 2 / (b * b + 2))


def fit_rician_moments(r) -> tuple[float, float]:
    """``(nu, sigma)`` matching the first two magnitude moments."""
    r = np.asarray(r, dtype=float)
    m1, m2 = r.mean(), np.mean(r ** 2)
    ratio = m1 * m1 / m2
    if ratio <= np.pi / 4:
        return 0.0, float(np.sqrt(m2 / 2))
    hi = 1.0
    while rician_moment_ratio(hi) < ratio and hi < 1e6:
        hi *= 2
    if rician_moment_ratio(hi) < ratio:
        return float(np.sqrt(m2)), 0.0
    b = optimize.brentq(lambda b: rician_moment_ratio(b) - ratio, 0.0, hi, xtol=1e-12)
    sigma = np.sqrt(m2 / (b * b + 2))
    return float(b * sigma), float(sigma)


def _gaussian_fit(x) -> GaussianFit:
    mean, std = float(np.mean(x)), float(np.std(x))
    ks = stats.kstest(x, stats.norm(mean, std).cdf)
    return GaussianFit(mean, std ** 2, float(ks.statistic), float(ks.pvalue))


def fit_distributions(samples) -> DistributionFit:
    """Gaussian fits to the real and imaginary parts, a moment-matched Rician
    fit to the magnitude, each with a Kolmogorov-Smirnov test."""
    h = np.asarray(samples, dtype=complex).ravel()
    if h.size < 100:
        raise ValueError("need at least 100 samples")
    if np.all(h == h[0]) or np.std(h) == 0:
        return DistributionFit(None, None, None, degenerate=True)
    mag = np.abs(h)
    nu, sigma = fit_rician_moments(mag)
    if sigma > 0:
        dist = stats.rice(nu / sigma, scale=sigma)
        ks = stats.kstest(mag, dist.cdf)
        rice = RicianFit(nu, sigma, float(ks.statistic), float(ks.pvalue))
    else:
        rice = RicianFit(nu, 0.0, 1.0, 0.0)
    return DistributionFit(_gaussian_fit(h.real), _gaussian_fit(h.imag), rice)
