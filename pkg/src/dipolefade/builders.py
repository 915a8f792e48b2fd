"""Construction of fences, enclosures, mode stirrers, RIS arrays and
plane-wave excitations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import COINCIDENT_TOL, wavenumber
from .types import Dipole, PolarizabilityParams, Role, Scene

# Default parameters for metallic walls and obstacles.
METAL = PolarizabilityParams.from_chi(50.0, 10.0)
# Resonant transceiver and RIS element defaults.
TRANSCEIVER = PolarizabilityParams.from_chi(0.5, 1.0)
RIS_ELEMENT = PolarizabilityParams.from_chi(0.2, 1.0)

_DEDUP_TOL = 1e-9


def _as_vertices(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
        raise ValueError("a polyline needs at least two 2D vertices")
    return v


def _is_closed(v: np.ndarray) -> bool:
    return len(v) > 2 and np.hypot(*(v[0] - v[-1])) <= _DEDUP_TOL


def polyline_points(vertices, spacing: float) -> np.ndarray:
    """Points along a polyline, every segment split into equal steps no
    longer than ``spacing``. Shared vertices appear once; a closed polyline
    (last vertex equal to the first) does not repeat its start point."""
    if not spacing > 0:
        raise ValueError("spacing must be > 0")
    v = _as_vertices(vertices)
    lengths = np.hypot(*np.diff(v, axis=0).T)
    if lengths.sum() <= _DEDUP_TOL:
        raise ValueError("degenerate polyline (zero length)")
    pts = [v[0]]
    for a, b, length in zip(v[:-1], v[1:], lengths):
        if length <= _DEDUP_TOL:
            continue
        n = max(1, math.ceil(length / spacing - 1e-9))
        t = np.arange(1, n + 1) / n
        pts.extend(a + t[:, None] * (b - a))
    pts = np.array(pts)
    if _is_closed(v):
        pts = pts[:-1]
    return pts


@dataclass(frozen=True)
class FenceSpec:
    vertices: tuple[tuple[float, float], ...]
    spacing: float
    params: PolarizabilityParams = METAL

    def to_dict(self) -> dict:
        return {"vertices": [list(p) for p in self.vertices], "spacing": self.spacing,
                "params": self.params.to_dict()}


def build_fence(spec: FenceSpec, role: Role = Role.ENVIRONMENT) -> list[Dipole]:
    return [Dipole(tuple(p), spec.params, role) for p in polyline_points(spec.vertices, spec.spacing)]


def build_enclosure(outline, spacing: float, params: PolarizabilityParams = METAL) -> list[Dipole]:
    """Fence along a closed outline (first vertex repeated at the end)."""
    v = _as_vertices(outline)
    if not _is_closed(v):
        raise ValueError("enclosure outline must be closed (last vertex equal to the first)")
    return build_fence(FenceSpec(tuple(map(tuple, v)), spacing, params))


def random_star_polygon(rng: np.random.Generator, radius: float, n_min: int = 8, n_max: int = 16,
                        jitter: float = 0.4) -> np.ndarray:
    """Closed irregular star polygon around the origin (last vertex = first)."""
    n = int(rng.integers(n_min, n_max + 1))
    angles = np.sort(rng.uniform(0.0, 2 * np.pi, n))
    radii = radius * (1.0 + rng.uniform(-jitter, jitter, n))
    pts = np.c_[radii * np.cos(angles), radii * np.sin(angles)]
    return np.vstack([pts, pts[:1]])


@dataclass(frozen=True)
class StirrerSpec:
    """Irregular rigid scatterer rotated about ``centroid``.

    ``shape`` holds polygon vertices relative to the centroid.
    """

    centroid: tuple[float, float]
    shape: tuple[tuple[float, float], ...]
    spacing: float = 0.25
    params: PolarizabilityParams = METAL
    angle: float = 0.0

    @classmethod
    def random(cls, centroid, radius: float, rng: np.random.Generator, spacing: float = 0.25,
               params: PolarizabilityParams = METAL) -> "StirrerSpec":
        shape = random_star_polygon(rng, radius)
        return cls(tuple(map(float, centroid)), tuple(map(tuple, shape)), spacing, params)

    @property
    def outer_radius(self) -> float:
        return float(np.max(np.hypot(*np.asarray(self.shape).T)))

    def local_points(self) -> np.ndarray:
        return polyline_points(self.shape, self.spacing)

    def points(self, angle: float | None = None) -> np.ndarray:
        theta = self.angle if angle is None else angle
        c, s = math.cos(theta), math.sin(theta)
        local = self.local_points()
        rotated = local @ np.array([[c, s], [-s, c]])
        return rotated + np.asarray(self.centroid)

    def dipoles(self, angle: float | None = None) -> list[Dipole]:
        return [Dipole(tuple(p), self.params, Role.ENVIRONMENT) for p in self.points(angle)]

    def to_dict(self) -> dict:
        return {"centroid": list(self.centroid), "shape": [list(p) for p in self.shape],
                "spacing": self.spacing, "params": self.params.to_dict(), "angle": self.angle}


def realization_angles(seed: int, index: int, n_stirrers: int) -> np.ndarray:
    """Stirrer angles of realization ``index``, independent of any other index."""
    rng = np.random.default_rng([int(seed), int(index)])
    return rng.uniform(0.0, 2 * np.pi, n_stirrers)


@dataclass(frozen=True)
class StirrerRealization:
    index: int
    angles: tuple[float, ...]

    def dipoles(self, specs: Sequence[StirrerSpec]) -> list[Dipole]:
        out: list[Dipole] = []
        for spec, angle in zip(specs, self.angles):
            out.extend(spec.dipoles(angle))
        return out


def build_stirrer_ensemble(specs: Sequence[StirrerSpec], n_realizations: int,
                           seed: int) -> list[StirrerRealization]:
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    return [StirrerRealization(k, tuple(realization_angles(seed, k, len(specs)).tolist()))
            for k in range(n_realizations)]


def apply_realization(scene: Scene, specs: Sequence[StirrerSpec],
                      realization: StirrerRealization) -> Scene:
    """Append the rotated stirrers to the environment block of ``scene``."""
    return scene.replace(environment=list(scene.environment) + realization.dipoles(specs))


def _points_along(vertices: np.ndarray, n: int, spacing: float, standoff: float,
                  side: int) -> np.ndarray:
    seg = np.diff(vertices, axis=0)
    lengths = np.hypot(*seg.T)
    total = lengths.sum()
    span = (n - 1) * spacing
    if span > total + 1e-9:
        raise ValueError(f"{n} elements at spacing {spacing} do not fit on a polyline of length {total:.4g}")
    s_values = (total - span) / 2 + spacing * np.arange(n)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    out = np.empty((n, 2))
    for i, s in enumerate(s_values):
        k = int(np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(lengths) - 1))
        u = seg[k] / lengths[k]
        normal = side * np.array([-u[1], u[0]])
        out[i] = vertices[k] + (s - cum[k]) * u + standoff * normal
    return out


def build_ris_array(anchors, n_elements, spacing: float,
                    params: PolarizabilityParams = RIS_ELEMENT, standoff: float = 0.25,
                    side: int = 1, existing: Sequence[Dipole] = (),
                    min_separation: float = 1e-6) -> list[Dipole]:
    """RIS elements at uniform arc-length spacing along one or more anchor
    polylines, offset by ``standoff`` along the left (``side=1``) or right
    normal of each segment and centred on each polyline.

    ``n_elements`` is a count per anchor (or a single int for one anchor).
    """
    if isinstance(anchors, np.ndarray) and anchors.ndim == 2:
        anchors = [anchors]
    anchors = [_as_vertices(a) for a in anchors]
    if np.ndim(n_elements) == 0:
        if len(anchors) != 1:
            raise ValueError("give one element count per anchor polyline")
        counts = [int(n_elements)]
    else:
        counts = [int(c) for c in n_elements]
    if len(counts) != len(anchors) or any(c < 1 for c in counts):
        raise ValueError("need a positive element count for every anchor")
    pts = np.vstack([_points_along(a, c, spacing, standoff, side) for a, c in zip(anchors, counts)])
    others = np.array([d.position for d in existing], dtype=float).reshape(-1, 2)
    for group in (pts, others):
        if len(group) == 0:
            continue
        d = np.hypot(*(pts[:, None, :] - group[None, :, :]).transpose(2, 0, 1))
        if group is pts:
            d[np.diag_indices_from(d)] = np.inf
        if np.any(d < max(min_separation, COINCIDENT_TOL)):
            raise ValueError("RIS elements overlap with each other or with existing dipoles")
    return [Dipole(tuple(p), params, Role.RIS) for p in pts]


def plane_wave_external_field(scene: Scene, direction, f: float) -> np.ndarray:
    """Unit plane wave ``exp(-j k d.r)`` sampled at every dipole."""
    d = np.asarray(direction, dtype=float)
    if abs(np.hypot(*d) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return np.exp(-1j * wavenumber(f) * (scene.positions @ d))


def plane_wave(points, f: float, direction=(1.0, 0.0)) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.exp(-1j * wavenumber(f) * (pts @ np.asarray(direction, dtype=float)))
