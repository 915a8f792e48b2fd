"""End-to-end channel extraction over a frequency grid."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .engine import (SolverError, greens_function, greens_matrix, inverse_polarizabilities,
                     polarizability, resonance_frequencies, scene_dipole_size, solve_dipole_moments,
                     assemble_w)
from .types import ChannelTensor, PolarizabilityParams, RisConfiguration, Scene


@contextmanager
def single_threaded_blas():
    """Pin BLAS to one thread so every per-frequency solve is reproducible
    regardless of how frequencies are scheduled across workers."""
    with threadpool_limits(limits=1, user_api="blas"):
        yield


@dataclass(frozen=True)
class TransceiverLoad:
    impedance: complex = 1.0 + 0.0j


def _transmitter_excitations(scene: Scene) -> np.ndarray:
    e = np.zeros((scene.n, scene.n_tx), dtype=complex)
    e[np.arange(scene.n_tx), np.arange(scene.n_tx)] = 1.0
    return e


def channel_matrix(scene: Scene, ris: RisConfiguration | None, f: float,
                   greens: np.ndarray | None = None) -> np.ndarray:
    """``N_R x N_T`` field-to-field channel at one frequency.

    Each transmitter is driven in turn by a unit external field; the received
    field is the receiver dipole moment times its inverse polarizability.
    """
    if scene.n_tx == 0 or scene.n_rx == 0:
        raise ValueError("scene needs at least one transmitter and one receiver")
    w = assemble_w(scene, ris, f, greens=greens)
    p = solve_dipole_moments(w, _transmitter_excitations(scene))
    rx = scene.rx_slice
    return np.diag(w.entries)[rx][:, None] * p[rx, :]


def channel_tensor(scene: Scene, ris: RisConfiguration | None, frequencies=None, threads: int = 1,
                   realization=None) -> ChannelTensor:
    """Channel matrices over the grid, assembled in grid order.

    Frequencies fan out over ``threads`` workers; the result does not depend
    on the worker count.
    """
    freqs = scene.frequencies if frequencies is None else np.atleast_1d(np.asarray(frequencies, float))
    if freqs.size == 0:
        raise ValueError("empty frequency grid")
    resonance_frequencies(scene, ris)  # validate the configuration up front

    def one(f):
        try:
            return channel_matrix(scene, ris, float(f))
        except SolverError as exc:
            raise SolverError(f"solve failed at f={f}: {exc}", exc.condition, float(f)) from exc

    with single_threaded_blas():
        if threads > 1 and freqs.size > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                mats = list(pool.map(one, freqs))
        else:
            mats = [one(f) for f in freqs]
    meta = {"ris": ris.digest() if ris is not None else None, "realization": realization}
    return ChannelTensor(np.stack(mats), freqs.copy(), meta)


def field_to_current_voltage(e_loc: complex, params: PolarizabilityParams, f: float,
                             load: TransceiverLoad) -> tuple[complex, complex]:
    """Current and voltage induced across a transceiver by its local field."""
    if not params.dipole_size > 0:
        raise ValueError("dipole_size must be > 0")
    omega = 2.0 * np.pi * f
    current = 1j * omega * polarizability(params, f) / params.dipole_size * e_loc
    return complex(current), complex(load.impedance * current)


def external_field_noninvasive_source(scene: Scene, r_t, strength: complex, f: float) -> np.ndarray:
    """External field at every dipole from a point source that does not scatter."""
    delta = scene_dipole_size(scene)
    return np.array([strength * greens_function(pos, r_t, f, delta) for pos in scene.positions],
                    dtype=complex)


def free_space_approx_channel(scene: Scene, ris: RisConfiguration | None, f: float) -> complex:
    """Single-bounce estimate of the received field for a SISO free-space scene
    with unit external field at the transmitter: LOS plus one scattering
    event per RIS element, with every mutual interaction beyond that dropped."""
    if scene.n_tx != 1 or scene.n_rx != 1:
        raise ValueError("free-space approximation needs exactly one transmitter and one receiver")
    if scene.n_env:
        raise ValueError("free-space approximation requires an empty scattering environment")
    alpha = 1.0 / inverse_polarizabilities(scene, ris, f)
    g = greens_matrix(scene.positions, f, scene_dipole_size(scene))
    t, r = 0, 1
    ris_idx = np.arange(scene.ris_slice.start, scene.n)
    bounce = np.sum(g[r, ris_idx] * alpha[ris_idx] * g[ris_idx, t])
    return complex((bounce + g[t, r]) * alpha[t])
