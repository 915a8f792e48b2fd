"""Domain types shared by every module.

Units: the central operating frequency, the permittivity and the permeability
are all 1, so ``c = 1``, the wavelength at ``f = 1`` is 1 and ``k = 2*pi*f``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DIPOLE_SIZE = 0.5
RIS_ON = 1.0
RIS_OFF = 5.0
DEFAULT_ALPHABET = (RIS_ON, RIS_OFF)

# Relative tolerance for the uniform-grid check.
GRID_RTOL = 1e-9


class Role(str, Enum):
    TRANSMITTER = "transmitter"
    RECEIVER = "receiver"
    ENVIRONMENT = "environment"
    RIS = "ris"


@dataclass(frozen=True)
class PolarizabilityParams:
    """Lorentzian polarizability parameters of one dipole.

    The radiation damping is not stored: it follows from the charge term,
    the frequency and the dipole size (see :func:`dipolefade.engine.polarizability`).
    """

    chi_squared: float
    f_res: float
    gamma_abs: float = 0.0
    dipole_size: float = DEFAULT_DIPOLE_SIZE

    @classmethod
    def from_chi(cls, chi: float, f_res: float, gamma_abs: float = 0.0,
                 dipole_size: float = DEFAULT_DIPOLE_SIZE) -> "PolarizabilityParams":
        return cls(float(chi) ** 2, float(f_res), float(gamma_abs), float(dipole_size))

    @property
    def chi(self) -> float:
        return math.sqrt(self.chi_squared)

    def with_f_res(self, f_res: float) -> "PolarizabilityParams":
        return PolarizabilityParams(self.chi_squared, float(f_res), self.gamma_abs, self.dipole_size)

    def to_dict(self) -> dict:
        return {"chi_squared": self.chi_squared, "f_res": self.f_res,
                "gamma_abs": self.gamma_abs, "dipole_size": self.dipole_size}


@dataclass(frozen=True)
class Dipole:
    position: tuple[float, float]
    params: PolarizabilityParams
    role: Role

    def __post_init__(self):
        x, y = self.position
        object.__setattr__(self, "position", (float(x), float(y)))
        object.__setattr__(self, "role", Role(self.role))

    def moved(self, position) -> "Dipole":
        return Dipole(tuple(position), self.params, self.role)

    def with_params(self, params: PolarizabilityParams) -> "Dipole":
        return Dipole(self.position, params, self.role)


def _as_grid(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class Scene:
    """Dipoles in canonical block order: TX, RX, environment, RIS.

    Construct with :meth:`from_blocks`; the block counts fix the partition.
    Array views (``positions``, ``chi_squared`` ...) are cached and read-only.
    """

    dipoles: tuple[Dipole, ...]
    n_tx: int
    n_rx: int
    n_env: int
    n_ris: int
    frequency_grid: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "dipoles", tuple(self.dipoles))
        object.__setattr__(self, "frequency_grid", _as_grid(self.frequency_grid))
        if self.n_tx + self.n_rx + self.n_env + self.n_ris != len(self.dipoles):
            raise ValueError(
                f"block counts {self.n_tx}+{self.n_rx}+{self.n_env}+{self.n_ris} "
                f"do not match {len(self.dipoles)} dipoles")

    @classmethod
    def from_blocks(cls, transmitters: Sequence[Dipole] = (), receivers: Sequence[Dipole] = (),
                    environment: Sequence[Dipole] = (), ris: Sequence[Dipole] = (),
                    frequency_grid=()) -> "Scene":
        def tagged(block, role):
            return [d if d.role == role else Dipole(d.position, d.params, role) for d in block]

        dipoles = (tagged(transmitters, Role.TRANSMITTER) + tagged(receivers, Role.RECEIVER)
                   + tagged(environment, Role.ENVIRONMENT) + tagged(ris, Role.RIS))
        return cls(tuple(dipoles), len(transmitters), len(receivers), len(environment), len(ris),
                   frequency_grid)

    @property
    def n(self) -> int:
        return len(self.dipoles)

    @property
    def transmitters(self) -> tuple[Dipole, ...]:
        return self.dipoles[:self.n_tx]

    @property
    def receivers(self) -> tuple[Dipole, ...]:
        return self.dipoles[self.n_tx:self.n_tx + self.n_rx]

    @property
    def environment(self) -> tuple[Dipole, ...]:
        start = self.n_tx + self.n_rx
        return self.dipoles[start:start + self.n_env]

    @property
    def ris(self) -> tuple[Dipole, ...]:
        return self.dipoles[self.n - self.n_ris:]

    @property
    def tx_slice(self) -> slice:
        return slice(0, self.n_tx)

    @property
    def rx_slice(self) -> slice:
        return slice(self.n_tx, self.n_tx + self.n_rx)

    @property
    def env_slice(self) -> slice:
        return slice(self.n_tx + self.n_rx, self.n_tx + self.n_rx + self.n_env)

    @property
    def ris_slice(self) -> slice:
        return slice(self.n - self.n_ris, self.n)

    @cached_property
    def positions(self) -> np.ndarray:
        return _frozen(np.array([d.position for d in self.dipoles], dtype=float).reshape(-1, 2))

    @cached_property
    def chi_squared(self) -> np.ndarray:
        return _frozen(np.array([d.params.chi_squared for d in self.dipoles], dtype=float))

    @cached_property
    def f_res(self) -> np.ndarray:
        return _frozen(np.array([d.params.f_res for d in self.dipoles], dtype=float))

    @cached_property
    def gamma_abs(self) -> np.ndarray:
        return _frozen(np.array([d.params.gamma_abs for d in self.dipoles], dtype=float))

    @cached_property
    def dipole_size(self) -> np.ndarray:
        return _frozen(np.array([d.params.dipole_size for d in self.dipoles], dtype=float))

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.frequency_grid, dtype=float)

    def replace(self, *, transmitters=None, receivers=None, environment=None, ris=None,
                frequency_grid=None) -> "Scene":
        return Scene.from_blocks(
            self.transmitters if transmitters is None else transmitters,
            self.receivers if receivers is None else receivers,
            self.environment if environment is None else environment,
            self.ris if ris is None else ris,
            self.frequency_grid if frequency_grid is None else frequency_grid,
        )

    def to_dict(self) -> dict:
        return {
            "blocks": {"n_tx": self.n_tx, "n_rx": self.n_rx, "n_env": self.n_env, "n_ris": self.n_ris},
            "dipoles": [{"position": list(d.position), "role": d.role.value, **d.params.to_dict()}
                        for d in self.dipoles],
            "frequency_grid": list(self.frequency_grid),
        }

    def digest(self) -> str:
        """SHA-256 of the expanded scene (positions, parameters, grid)."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RisConfiguration:
    """Resonance frequency of every RIS element, drawn from ``alphabet``."""

    states: tuple[float, ...]
    alphabet: tuple[float, ...] = DEFAULT_ALPHABET

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(float(s) for s in self.states))
        object.__setattr__(self, "alphabet", tuple(float(a) for a in self.alphabet))
        bad = [i for i, s in enumerate(self.states) if s not in self.alphabet]
        if bad:
            raise ValueError(f"RIS states at indices {bad} are not in alphabet {self.alphabet}")

    @classmethod
    def from_bits(cls, bits: Iterable[int], alphabet=DEFAULT_ALPHABET) -> "RisConfiguration":
        """Bit 1 selects ``alphabet[0]`` (ON), bit 0 selects ``alphabet[1]`` (OFF)."""
        return cls(tuple(alphabet[0] if b else alphabet[1] for b in bits), tuple(alphabet))

    @classmethod
    def uniform(cls, n: int, state: float = RIS_OFF, alphabet=DEFAULT_ALPHABET) -> "RisConfiguration":
        return cls((state,) * n, tuple(alphabet))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, alphabet=DEFAULT_ALPHABET) -> "RisConfiguration":
        idx = rng.integers(0, len(alphabet), size=n)
        return cls(tuple(alphabet[i] for i in idx), tuple(alphabet))

    def __len__(self) -> int:
        return len(self.states)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(int(s == self.alphabet[0]) for s in self.states)

    def flipped(self, index: int) -> "RisConfiguration":
        """Swap element ``index`` between the first two alphabet entries."""
        on, off = self.alphabet[0], self.alphabet[1]
        states = list(self.states)
        states[index] = off if states[index] == on else on
        return RisConfiguration(tuple(states), self.alphabet)

    def permuted(self, order: Sequence[int]) -> "RisConfiguration":
        return RisConfiguration(tuple(self.states[i] for i in order), self.alphabet)

    def digest(self) -> str:
        text = json.dumps({"states": list(self.states), "alphabet": list(self.alphabet)})
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class ChannelTensor:
    """Channel matrices over a frequency grid, shape ``(n_freq, n_rx, n_tx)``."""

    values: np.ndarray
    frequencies: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def siso(self) -> np.ndarray:
        """``H[:, 0, 0]`` as a 1D spectrum."""
        return self.values[:, 0, 0]


@dataclass
class Cir:
    """Real channel impulse response on a uniform time grid starting at 0."""

    samples: np.ndarray
    dt: float
    window_kind: str
    unambiguous_range: float
    band: tuple[float, float] = (float("nan"), float("nan"))
    source: ChannelTensor | None = None

    @property
    def time_grid(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt

    @property
    def bandwidth(self) -> float:
        return self.band[1] - self.band[0]

    @property
    def energy(self) -> float:
        return float(np.sum(self.samples ** 2) * self.dt)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    indices: tuple[int, ...] = ()


def grid_is_uniform(grid: Sequence[float]) -> bool:
    g = np.asarray(grid, dtype=float)
    if g.size < 3:
        return True
    steps = np.diff(g)
    return bool(np.all(np.abs(steps - steps.mean()) <= GRID_RTOL * abs(steps.mean()) + 1e-15))


def validate_scene(scene: Scene) -> list[Violation]:
    """Check every scene invariant and return one record per failure.

    Dipole sizes are checked against half a wavelength at the central
    frequency ``f = 1`` (inclusive), and must be uniform across the scene.
    """
    out: list[Violation] = []
    expected = ([Role.TRANSMITTER] * scene.n_tx + [Role.RECEIVER] * scene.n_rx
                + [Role.ENVIRONMENT] * scene.n_env + [Role.RIS] * scene.n_ris)
    misplaced = tuple(i for i, (d, r) in enumerate(zip(scene.dipoles, expected)) if d.role != r)
    if misplaced:
        out.append(Violation("block_order", "dipole roles do not follow TX, RX, ENV, RIS order", misplaced))

    for i, d in enumerate(scene.dipoles):
        p = d.params
        if not p.chi_squared > 0:
            out.append(Violation("params", f"chi_squared must be > 0, got {p.chi_squared}", (i,)))
        if not p.f_res > 0:
            out.append(Violation("params", f"f_res must be > 0, got {p.f_res}", (i,)))
        if not p.gamma_abs >= 0:
            out.append(Violation("params", f"gamma_abs must be >= 0, got {p.gamma_abs}", (i,)))
        if not 0 < p.dipole_size <= 0.5:
            out.append(Violation("params", f"dipole_size must lie in (0, 0.5], got {p.dipole_size}", (i,)))
        if not all(math.isfinite(c) for c in d.position):
            out.append(Violation("position", "non-finite position", (i,)))

    if scene.n and len(set(scene.dipole_size.tolist())) > 1:
        out.append(Violation("dipole_size", "dipole sizes differ within the scene", ()))

    seen: dict[tuple[float, float], int] = {}
    for i, d in enumerate(scene.dipoles):
        j = seen.setdefault(d.position, i)
        if j != i:
            out.append(Violation("coincident", f"dipoles {j} and {i} share position {d.position}", (j, i)))

    grid = scene.frequency_grid
    if any(not f > 0 for f in grid):
        out.append(Violation("grid", "frequencies must be > 0"))
    if any(b <= a for a, b in zip(grid, grid[1:])):
        out.append(Violation("grid", "grid not strictly increasing"))
    elif not grid_is_uniform(grid):
        out.append(Violation("grid", "grid not uniform"))
    return out
