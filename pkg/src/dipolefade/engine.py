"""Coupled-dipole engine: polarizabilities, 2D Green's function, the
interaction matrix and its solution, and field evaluation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .bessel import hankel2_0
from .types import PolarizabilityParams, RisConfiguration, Scene

EPSILON = 1.0
# Condition numbers above this are reported; above 1/eps the solve is refused.
COND_WARN = 1e12
COND_FAIL = 1.0 / np.finfo(float).eps
# Separations below this count as coincident.
COINCIDENT_TOL = 1e-12


class SingularityError(ValueError):
    """Green's function evaluated at zero separation."""


class SolverError(RuntimeError):
    def __init__(self, message: str, condition: float = np.inf, frequency: float | None = None):
        super().__init__(message)
        self.condition = condition
        self.frequency = frequency


class IllConditionedWarning(RuntimeWarning):
    pass


def wavenumber(f):
    return 2.0 * np.pi * np.asarray(f, dtype=float)


def coupling_prefactor(f, dipole_size):
    """k**2 / (4 * eps * delta), the passivity bound on Im(1/alpha)."""
    return wavenumber(f) ** 2 / (4.0 * EPSILON * np.asarray(dipole_size, dtype=float))


def inverse_polarizability_values(chi_squared, f_res, gamma_abs, dipole_size, f):
    """Vectorized ``1/alpha(f)``; radiation damping set so passivity is tight."""
    chi_squared = np.asarray(chi_squared, dtype=float)
    two_pi = 2.0 * np.pi
    real = (two_pi ** 2) * (np.asarray(f_res, dtype=float) ** 2 - f ** 2)
    gamma_r = chi_squared * coupling_prefactor(f, dipole_size)
    imag = gamma_r + two_pi * f * np.asarray(gamma_abs, dtype=float)
    return (real + 1j * imag) / chi_squared


def inverse_polarizability(params: PolarizabilityParams, f: float) -> complex:
    if not f > 0:
        raise ValueError("frequency must be > 0")
    return complex(inverse_polarizability_values(
        params.chi_squared, params.f_res, params.gamma_abs, params.dipole_size, f))


def polarizability(params: PolarizabilityParams, f: float) -> complex:
    """Lorentzian polarizability alpha(f) of one dipole."""
    return 1.0 / inverse_polarizability(params, f)


def greens_function(r_i, r_j, f: float, dipole_size: float = 0.5) -> complex:
    """2D free-space Green's function between two points."""
    d = float(np.hypot(r_i[0] - r_j[0], r_i[1] - r_j[1]))
    if d <= COINCIDENT_TOL:
        raise SingularityError(f"Green's function is singular at zero separation ({r_i}, {r_j})")
    if not f > 0:
        raise ValueError("frequency must be > 0")
    return complex(-1j * coupling_prefactor(f, dipole_size) * hankel2_0(wavenumber(f) * d))


def greens_values(distances, f, dipole_size):
    """Vectorized Green's function over an array of positive distances."""
    return -1j * coupling_prefactor(f, dipole_size) * hankel2_0(wavenumber(f) * distances)


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def scene_dipole_size(scene: Scene) -> float:
    sizes = np.unique(scene.dipole_size)
    if sizes.size > 1:
        raise ValueError("all dipoles in a scene must share one dipole_size")
    return float(sizes[0]) if sizes.size else 0.5


def greens_matrix(positions: np.ndarray, f: float, dipole_size: float) -> np.ndarray:
    """Symmetric matrix of G_ij with a zero diagonal."""
    n = len(positions)
    out = np.zeros((n, n), dtype=complex)
    if n < 2:
        return out
    iu, ju = np.triu_indices(n, k=1)
    d = np.hypot(*(positions[iu] - positions[ju]).T)
    if np.any(d <= COINCIDENT_TOL):
        bad = np.flatnonzero(d <= COINCIDENT_TOL)[0]
        raise SingularityError(f"dipoles {iu[bad]} and {ju[bad]} are coincident")
    g = greens_values(d, f, dipole_size)
    out[iu, ju] = g
    out[ju, iu] = g
    return out


def resonance_frequencies(scene: Scene, ris: RisConfiguration | None) -> np.ndarray:
    """Scene resonance frequencies with the RIS block overridden by ``ris``."""
    f_res = np.array(scene.f_res)
    if scene.n_ris:
        if ris is None:
            raise ValueError("scene has RIS elements but no configuration was given")
        if len(ris) != scene.n_ris:
            raise ValueError(f"RIS configuration has {len(ris)} states, scene has {scene.n_ris} elements")
        f_res[scene.ris_slice] = ris.states
    elif ris is not None and len(ris):
        raise ValueError("RIS configuration given for a scene without RIS elements")
    return f_res


def inverse_polarizabilities(scene: Scene, ris: RisConfiguration | None, f: float,
                             f_res: np.ndarray | None = None) -> np.ndarray:
    if f_res is None:
        f_res = resonance_frequencies(scene, ris)
    return inverse_polarizability_values(scene.chi_squared, f_res, scene.gamma_abs, scene.dipole_size, f)


@dataclass
class InteractionMatrix:
    entries: np.ndarray
    frequency: float


def assemble_w(scene: Scene, ris: RisConfiguration | None, f: float,
               greens: np.ndarray | None = None) -> InteractionMatrix:
    """Interaction matrix: 1/alpha_i on the diagonal, -G_ij off it.

    ``greens`` may pass a precomputed :func:`greens_matrix` for the same
    positions and frequency; the result is identical to recomputing it.
    """
    if not f > 0:
        raise ValueError("frequency must be > 0")
    if greens is None:
        greens = greens_matrix(scene.positions, f, scene_dipole_size(scene))
    w = -greens
    w[np.diag_indices_from(w)] = inverse_polarizabilities(scene, ris, f)
    return InteractionMatrix(w, float(f))


def solve_dipole_moments(w: InteractionMatrix | np.ndarray, e_ext: np.ndarray,
                         return_condition: bool = False):
    """Solve ``W p = E_ext`` by partial-pivoted LU (one or many right-hand sides).

    Raises :class:`SolverError` for singular or numerically rank-deficient W
    and warns with :class:`IllConditionedWarning` when cond(W) > 1e12.
    """
    if isinstance(w, InteractionMatrix):
        a, freq = w.entries, w.frequency
    else:
        a, freq = np.asarray(w), None
    b = np.asarray(e_ext, dtype=complex)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, W has {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise SolverError("W has non-finite entries", frequency=freq)
    anorm = np.linalg.norm(a, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    if np.any(np.diag(lu) == 0):
        raise SolverError("W is singular", frequency=freq)
    rcond, _ = lapack.zgecon(lu, anorm, norm="1")
    condition = np.inf if rcond == 0 else 1.0 / rcond
    if condition > COND_FAIL:
        raise SolverError(f"W is numerically rank-deficient (cond ~ {condition:.3g})", condition, freq)
    if condition > COND_WARN:
        warnings.warn(f"ill-conditioned interaction matrix (cond ~ {condition:.3g})",
                      IllConditionedWarning, stacklevel=2)
    p = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    if return_condition:
        return p, condition
    return p


@dataclass
class FieldMap:
    points: np.ndarray
    values: np.ndarray
    frequency: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


def evaluate_field_map(scene: Scene, ris: RisConfiguration | None, f: float, p: np.ndarray,
                       e_ext=None, grid=None) -> FieldMap:
    """Total field ``E_ext(r) + sum_j G(r, r_j) p_j`` at arbitrary points.

    ``e_ext`` is None (no external field), an array with one value per grid
    point, or a callable ``e_ext(points, f)``. ``ris`` is accepted for
    signature symmetry; the field depends on it only through ``p``.
    """
    points = np.asarray(grid, dtype=float).reshape(-1, 2)
    p = np.asarray(p, dtype=complex)
    if p.shape != (scene.n,):
        raise ValueError(f"expected {scene.n} dipole moments, got shape {p.shape}")
    if callable(e_ext):
        base = np.asarray(e_ext(points, f), dtype=complex)
    elif e_ext is None:
        base = np.zeros(len(points), dtype=complex)
    else:
        base = np.asarray(e_ext, dtype=complex).reshape(len(points))
    if scene.n == 0:
        return FieldMap(points, base, float(f))
    d = pairwise_distances(points, scene.positions)
    hit = np.argwhere(d <= COINCIDENT_TOL)
    if hit.size:
        i, j = hit[0]
        raise SingularityError(f"grid point ({points[i, 0]:g}, {points[i, 1]:g}) coincides with dipole {j}")
    g = greens_values(d, f, scene_dipole_size(scene))
    return FieldMap(points, base + g @ p, float(f))
