"""Over-the-air equalization: tap-energy cost of a CIR and a greedy 1-bit RIS
optimizer that concentrates the CIR energy in one tap."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import channel_matrix, single_threaded_blas
from .engine import SolverError, greens_matrix, scene_dipole_size
from .timedomain import WindowSpec, cir_from_spectrum
from .types import DEFAULT_ALPHABET, Cir, RisConfiguration, Scene

# Green's matrices are cached across cost evaluations up to this many bytes.
GREENS_CACHE_LIMIT = 1 << 30


class DegenerateEnsembleWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class TapWindow:
    t0: float
    delta_t: float

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("tap width must be > 0")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.t0 - self.delta_t / 2, self.t0 + self.delta_t / 2

    def mask(self, t: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds
        return (t >= lo) & (t <= hi)

    def check(self, cir: Cir) -> None:
        lo, hi = self.bounds
        t = cir.time_grid
        if lo < t[0] - cir.dt / 2 or hi > t[-1] + cir.dt / 2:
            raise ValueError(f"tap window [{lo:g}, {hi:g}] outside the CIR time range")


def cost(cir: Cir, window: TapWindow) -> float:
    """Fraction of the CIR energy whose samples fall inside the tap window."""
    window.check(cir)
    e = cir.samples ** 2 * cir.dt
    total = e.sum()
    if not total > 0:
        raise ValueError("cost undefined for an all-zero CIR")
    return float(e[window.mask(cir.time_grid)].sum() / total)


def tap_intensities(cir: Cir, window: TapWindow) -> tuple[np.ndarray, np.ndarray]:
    """Energy per tap on the grid of taps ``t0 + k * delta_t`` covering the
    CIR. Returns ``(tap_centres, energies)``; the target tap has ``k = 0``."""
    t = cir.time_grid
    k = np.floor((t - window.t0) / window.delta_t + 0.5).astype(int)
    ks = np.arange(k.min(), k.max() + 1)
    energies = np.bincount(k - ks[0], weights=cir.samples ** 2 * cir.dt, minlength=ks.size)
    return window.t0 + ks * window.delta_t, energies


def target_tap_dominance_db(cir: Cir, window: TapWindow) -> float:
    """Target-tap energy over the strongest other tap, in dB."""
    centres, energies = tap_intensities(cir, window)
    target = int(np.argmin(np.abs(centres - window.t0)))
    others = np.delete(energies, target)
    return float(10 * np.log10(energies[target] / others.max()))


def effective_tap_width(frequencies, window: WindowSpec = WindowSpec()) -> float:
    """``1 / (B * mean(w))``: the tap width that matches the pulse a window
    actually produces (``2 / B`` for Hann, ``1 / B`` for rectangular)."""
    f = np.asarray(frequencies, dtype=float)
    if f.size < 2:
        raise ValueError("need at least two frequencies")
    b = f[-1] - f[0]
    return float(1.0 / (b * window.values(f.size).mean()))


def select_target_tap(cirs: Sequence[Cir], strategy: str = "dominant_nlos",
                      los_distance: float | None = None, delta_t: float | None = None,
                      c: float = 1.0) -> TapWindow:
    """Target tap from an ensemble of CIRs under random RIS configurations.

    ``los`` centres the tap on ``D / c``. ``dominant_nlos`` centres it on the
    sample with the largest standard deviation across the ensemble, which is
    the most RIS-controllable part of the response. The default width is the
    reciprocal of the simulated bandwidth.
    """
    if not cirs:
        raise ValueError("empty CIR ensemble")
    ref = cirs[0]
    if delta_t is None:
        lo, hi = ref.band
        if not np.isfinite(hi - lo):
            raise ValueError("CIR carries no band; pass delta_t")
        delta_t = 1.0 / (hi - lo)
    if strategy == "los":
        if los_distance is None:
            raise ValueError("los strategy needs the LOS distance")
        return TapWindow(los_distance / c, delta_t)
    if strategy != "dominant_nlos":
        raise ValueError(f"unknown strategy {strategy!r}")
    h = np.stack([x.samples for x in cirs])
    spread = h.std(axis=0)
    if not np.any(spread > 0):
        warnings.warn("CIR ensemble has zero variance; using the global |h| maximum",
                      DegenerateEnsembleWarning, stacklevel=2)
        idx = int(np.argmax(np.abs(h[0])))
    else:
        idx = int(np.argmax(spread))
    return TapWindow(float(ref.time_grid[idx]), delta_t)


class SpectrumEvaluator:
    """``H_{rx,tx}(f)`` for RIS configurations of a fixed scene.

    The Green's matrix of each frequency depends only on positions and is
    computed once; each evaluation then assembles and solves the system
    exactly as :func:`channel_matrix` does, so results are bit-identical to
    a fresh solve.
    """

    def __init__(self, scene: Scene, frequencies=None, rx: int = 0, tx: int = 0, threads: int = 1,
                 cache_limit: int = GREENS_CACHE_LIMIT):
        self.scene = scene
        self.frequencies = scene.frequencies if frequencies is None else np.asarray(frequencies, float)
        if not (0 <= rx < scene.n_rx and 0 <= tx < scene.n_tx):
            raise ValueError("receiver or transmitter index out of range")
        self.rx, self.tx, self.threads = rx, tx, max(1, int(threads))
        self.n_evaluations = 0
        self._greens: list[np.ndarray] | None = None
        if self.frequencies.size * scene.n ** 2 * 16 <= cache_limit:
            delta = scene_dipole_size(scene)
            self._greens = [greens_matrix(scene.positions, f, delta) for f in self.frequencies]

    def _one(self, ris: RisConfiguration, j: int) -> complex:
        f = float(self.frequencies[j])
        g = None if self._greens is None else self._greens[j]
        try:
            return channel_matrix(self.scene, ris, f, greens=g)[self.rx, self.tx]
        except SolverError as exc:
            raise SolverError(f"solve failed at f={f}: {exc}", exc.condition, f) from exc

    def __call__(self, ris: RisConfiguration) -> np.ndarray:
        self.n_evaluations += 1
        idx = range(self.frequencies.size)
        with single_threaded_blas():
            if self.threads > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    vals = list(pool.map(lambda j: self._one(ris, j), idx))
            else:
                vals = [self._one(ris, j) for j in idx]
        return np.array(vals, dtype=complex)


class CostEvaluator:
    """Configuration -> CIR -> tap-energy cost.

    CIRs are memoized per configuration, so re-evaluating a configuration
    (for instance under a different tap window) costs no solves.
    """

    def __init__(self, spectrum: Callable[[RisConfiguration], np.ndarray], frequencies,
                 window: TapWindow | None = None, cir_window: WindowSpec = WindowSpec(),
                 memo_size: int = 4096):
        self.spectrum = spectrum
        self.frequencies = np.asarray(frequencies, dtype=float)
        self.window = window
        self.cir_window = cir_window
        self.memo_size = memo_size
        self._memo: dict[tuple, Cir] = {}

    @classmethod
    def for_scene(cls, scene: Scene, window: TapWindow | None = None,
                  cir_window: WindowSpec = WindowSpec(), **kwargs) -> "CostEvaluator":
        ev = SpectrumEvaluator(scene, **kwargs)
        return cls(ev, ev.frequencies, window, cir_window)

    def cir(self, ris: RisConfiguration) -> Cir:
        key = (ris.states, ris.alphabet)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = cir_from_spectrum(self.frequencies, self.spectrum(ris), self.cir_window)
        if len(self._memo) < self.memo_size:
            self._memo[key] = out
        return out

    def __call__(self, ris: RisConfiguration) -> float:
        if self.window is None:
            raise ValueError("no tap window set")
        return cost(self.cir(ris), self.window)


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    element: int
    cost_before: float
    cost_after: float
    accepted: bool


@dataclass
class OptimizationTrace:
    initial_costs: list[float] = field(default_factory=list)
    initial_configurations: list[RisConfiguration] = field(default_factory=list)
    best_initial: int = -1
    steps: list[TraceStep] = field(default_factory=list)
    final: RisConfiguration | None = None
    final_cost: float = float("nan")

    @property
    def best_initial_cost(self) -> float:
        return self.initial_costs[self.best_initial]

    @property
    def accepted_costs(self) -> list[float]:
        """Cost after the initial selection and after every accepted flip."""
        return [self.best_initial_cost] + [s.cost_after for s in self.steps if s.accepted]

    @property
    def n_accepted(self) -> int:
        return sum(s.accepted for s in self.steps)

    def cost_history(self) -> np.ndarray:
        """Current cost after each iteration."""
        cur = self.best_initial_cost
        out = []
        for s in self.steps:
            if s.accepted:
                cur = s.cost_after
            out.append(cur)
        return np.array(out)


class OptimizationAborted(RuntimeError):
    def __init__(self, message: str, trace: OptimizationTrace):
        super().__init__(message)
        self.trace = trace


def optimize_ris(evaluate: Callable[[RisConfiguration], float], n_ris: int, n_random: int = 50,
                 n_passes: int = 5, seed: int = 0, alphabet=DEFAULT_ALPHABET,
                 initial: Sequence[RisConfiguration] | None = None) -> tuple[RisConfiguration, OptimizationTrace]:
    """Best of ``n_random`` random configurations, then ``n_passes`` cyclic
    sweeps of single-element flips, each kept only if the cost strictly rises.

    ``evaluate`` maps a configuration to its cost; a solver failure aborts
    with :class:`OptimizationAborted` carrying the trace so far.
    """
    if n_ris < 1:
        raise ValueError("need at least one RIS element")
    if len(alphabet) != 2:
        raise ValueError("the greedy optimizer works on a 1-bit alphabet")
    trace = OptimizationTrace()
    rng = np.random.default_rng(seed)
    configs = list(initial) if initial is not None else \
        [RisConfiguration.random(n_ris, rng, alphabet) for _ in range(n_random)]
    if not configs:
        raise ValueError("no initial configurations")

    def run(cfg):
        try:
            return evaluate(cfg)
        except (SolverError, np.linalg.LinAlgError) as exc:
            raise OptimizationAborted(f"cost evaluation failed: {exc}", trace) from exc

    for cfg in configs:
        trace.initial_configurations.append(cfg)
        trace.initial_costs.append(run(cfg))
    trace.best_initial = int(np.argmax(trace.initial_costs))
    current = configs[trace.best_initial]
    current_cost = trace.initial_costs[trace.best_initial]
    trace.final, trace.final_cost = current, current_cost
    for i in range(1, n_passes * n_ris + 1):
        element = (i - 1) % n_ris
        candidate = current.flipped(element)
        c_new = run(candidate)
        accepted = c_new > current_cost
        trace.steps.append(TraceStep(i, element, current_cost, c_new, bool(accepted)))
        if accepted:
            current, current_cost = candidate, c_new
            trace.final, trace.final_cost = current, current_cost
    return current, trace


def optimize_scene(scene: Scene, window: TapWindow, n_random: int = 50, n_passes: int = 5,
                   seed: int = 0, alphabet=DEFAULT_ALPHABET, cir_window: WindowSpec = WindowSpec(),
                   threads: int = 1, rx: int = 0, tx: int = 0) -> tuple[RisConfiguration, OptimizationTrace]:
    """:func:`optimize_ris` with the scene's channel, CIR and tap cost."""
    ev = CostEvaluator.for_scene(scene, window, cir_window, rx=rx, tx=tx, threads=threads)
    return optimize_ris(ev, scene.n_ris, n_random, n_passes, seed, alphabet)


def improving_flips(evaluate: Callable[[RisConfiguration], float], config: RisConfiguration) -> list[int]:
    """Elements whose single flip strictly increases the cost."""
    base = evaluate(config)
    return [i for i in range(len(config)) if evaluate(config.flipped(i)) > base]
