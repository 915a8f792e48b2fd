"""Ready-made scene documents for the canonical geometries.

Each recipe returns a :class:`SceneDocument`; the same documents ship as
JSON under ``dipolefade/scenes`` and are reachable from the command line as
``--scene builtin:<name>``. Regenerate the bundled files with
``python -m dipolefade.recipes <directory>``.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from matplotlib.path import Path as Polygon

from .builders import METAL, RIS_ELEMENT, TRANSCEIVER, FenceSpec, StirrerSpec, polyline_points
from .scenefile import NONRESONANT_TRANSCEIVER, RisArraySpec, SceneDocument
from .types import Dipole, PolarizabilityParams, Role

WALL_SPACING = 0.25

# A metal post with absorption matched to its radiation damping: isolated, it
# absorbs as much as a single dipole can, so a sprinkling of posts lowers the
# quality factor of an enclosure without blocking it.
LOSSY_POST = PolarizabilityParams(METAL.chi_squared, METAL.f_res, 7854.0)


def _grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(np.linspace(lo, hi, n).tolist())


def _tx(*positions, params=TRANSCEIVER) -> list[Dipole]:
    return [Dipole(tuple(map(float, p)), params, Role.TRANSMITTER) for p in positions]


def _rx(*positions, params=TRANSCEIVER) -> list[Dipole]:
    return [Dipole(tuple(map(float, p)), params, Role.RECEIVER) for p in positions]


def _closed(outline) -> tuple[tuple[float, float], ...]:
    v = [tuple(map(float, p)) for p in np.asarray(outline, dtype=float)]
    return tuple(v + v[:1]) if v[0] != v[-1] else tuple(v)


def _segments(outline) -> list[tuple[tuple[float, float], ...]]:
    v = _closed(outline)
    return [(v[i], v[i + 1]) for i in range(len(v) - 1)]


def _split_by_length(segments, n: int) -> list[int]:
    lengths = np.array([np.hypot(b[0] - a[0], b[1] - a[1]) for a, b in segments])
    counts = np.floor(n * lengths / lengths.sum()).astype(int)
    counts[: n - counts.sum()] += 1
    return counts.tolist()


def _distributed_ris(outline, n: int, spacing: float = 0.25, standoff: float = 0.25,
                     side: int = 1) -> list[RisArraySpec]:
    """``n`` RIS elements spread over every wall of a closed outline in
    proportion to the wall lengths (``side=1`` is inward for a
    counter-clockwise outline)."""
    segs = _segments(outline)
    return [RisArraySpec(seg, c, spacing, standoff, side, RIS_ELEMENT)
            for seg, c in zip(segs, _split_by_length(segs, n)) if c > 0]


# --- free space and simple environments ---------------------------------------

def free_space_pair(distance: float = 4.0, resonant: bool = False,
                    grid: tuple[float, float, int] = (0.5, 1.5, 401)) -> SceneDocument:
    """Two transceivers ``distance`` apart and nothing else."""
    p = TRANSCEIVER if resonant else NONRESONANT_TRANSCEIVER
    return SceneDocument(transmitters=_tx((0.0, 0.0), params=p), receivers=_rx((distance, 0.0), params=p),
                         frequency_grid=_grid(*grid),
                         name="free-space-" + ("resonant" if resonant else "nonresonant"))


ROOM_OUTLINE = ((0.0, 0.0), (6.0, 0.4), (6.5, 4.6), (2.8, 5.3), (-0.5, 4.0))


def irregular_enclosure() -> SceneDocument:
    """Metallic irregular pentagon around two resonant transceivers."""
    return SceneDocument(transmitters=_tx((1.3, 1.4)), receivers=_rx((4.6, 3.1)),
                         fences=[FenceSpec(_closed(ROOM_OUTLINE), WALL_SPACING, METAL)],
                         frequency_grid=_grid(0.5, 1.5, 401), name="irregular-enclosure")


def obstacle_field() -> SceneDocument:
    """Open space with a handful of metal fence obstacles between and around
    the transceivers."""
    obstacles = [((1.5, -1.2), (1.9, 0.6)),
                 ((2.6, 1.0), (3.4, 1.6), (3.0, 2.2)),
                 ((2.4, -2.0), (3.6, -1.5)),
                 ((-1.0, 1.5), (0.2, 2.2)),
                 ((4.6, -0.6), (5.2, 0.9))]
    return SceneDocument(transmitters=_tx((0.0, 0.0)), receivers=_rx((4.0, 0.3)),
                         fences=[FenceSpec(o, WALL_SPACING, METAL) for o in obstacles],
                         frequency_grid=_grid(0.5, 1.5, 401), name="obstacle-field")


# --- RIS characterization ---------------------------------------------------

def in_situ_ris_room(n_ris: int = 45) -> SceneDocument:
    """The irregular room with a distributed conformal RIS on its walls."""
    return SceneDocument(transmitters=_tx((1.3, 1.4)), receivers=_rx((4.6, 3.1)),
                         fences=[FenceSpec(_closed(ROOM_OUTLINE), WALL_SPACING, METAL)],
                         ris_arrays=_distributed_ris(ROOM_OUTLINE, n_ris),
                         frequency_grid=_grid(0.5, 1.5, 101), name="in-situ-ris-room")


IN_SITU_REGION = ((0.8, 0.9), (5.4, 1.2), (5.8, 4.1), (2.8, 4.6), (0.3, 3.6))


# --- fading chamber ----------------------------------------------------------

CHAMBER_OUTLINE = ((0.0, 0.0), (21.0, 0.9), (22.2, 16.8), (10.5, 18.6), (-0.9, 15.6))


def fading_chamber(n_stirrers: int = 28, stirrer_radius: float = 0.6, n_posts: int = 80,
                   post_loss: float = 2000.0, seed: int = 7) -> SceneDocument:
    """3 x 4 MIMO link in a large irregular metal chamber with rotating
    stirrers and absorbing posts.

    The transceivers are non-resonant so that they barely perturb the field
    they sample; the two arrays face each other across the chamber centre.
    The posts (absorption rate ``post_loss``) damp the unstirred part of the
    field and lower the opaque K-factor.
    Stirrer and post positions are drawn from ``seed`` and frozen into the
    document.
    """
    rng = np.random.default_rng(seed)
    outline = np.array(_closed(CHAMBER_OUTLINE))
    wall = FenceSpec(tuple(map(tuple, outline)), 0.33, METAL)
    cx, cy = 10.8, 8.7
    tx = [(cx - 7.0 - 0.5 * i, cy) for i in range(4)]
    rx = [(cx + 7.0 + 0.5 * i, cy) for i in range(3)]
    trx = np.array(tx + rx)
    wall_pts = polyline_points(wall.vertices, wall.spacing)
    inside = Polygon(outline)
    lo, hi = outline.min(axis=0), outline.max(axis=0)

    def clear(c, pts, d):
        return len(pts) == 0 or np.min(np.hypot(*(np.asarray(pts) - c).T)) >= d

    centres: list[np.ndarray] = []
    for _ in range(100000):
        if len(centres) == n_stirrers:
            break
        c = rng.uniform(lo, hi)
        r = stirrer_radius * 1.5
        if inside.contains_point(c) and clear(c, wall_pts, r + 0.3) and clear(c, trx, r + 0.3) \
                and clear(c, centres, stirrer_radius * 3.2):
            centres.append(c)
    if len(centres) < n_stirrers:
        raise RuntimeError("could not place every stirrer")
    stirrers = [StirrerSpec.random(c, stirrer_radius, rng, 0.3) for c in centres]
    post = PolarizabilityParams(METAL.chi_squared, METAL.f_res, post_loss)
    posts: list[Dipole] = []
    while len(posts) < n_posts:
        c = rng.uniform(lo, hi)
        taken = np.vstack([wall_pts] + [[p.position] for p in posts])
        if inside.contains_point(c) and clear(c, taken, 0.5) and clear(c, trx, 0.8) \
                and clear(c, centres, stirrer_radius * 1.5 + 0.4):
            posts.append(Dipole(tuple(c), post, Role.ENVIRONMENT))
    return SceneDocument(transmitters=_tx(*tx, params=NONRESONANT_TRANSCEIVER),
                         receivers=_rx(*rx, params=NONRESONANT_TRANSCEIVER),
                         fences=[wall], environment_dipoles=posts, stirrers=stirrers,
                         frequency_grid=(1.0,), name="fading-chamber")


# --- equalization ------------------------------------------------------------

REVERB_OUTLINE = ((0.0, 0.0), (9.0, 0.4), (9.3, 6.8), (4.2, 7.4), (-0.4, 6.2))


def reverberant_ris_room(lossy: bool = False, n_ris: int = 114,
                         grid: tuple[float, float, int] = (0.8, 1.2, 101)) -> SceneDocument:
    """Closed metal room lined with a distributed RIS; the lossy variant adds
    absorbing posts that shorten the reverberation tail."""
    posts = []
    if lossy:
        rng = np.random.default_rng(3)
        inside = Polygon(np.array(_closed(REVERB_OUTLINE)))
        while len(posts) < 12:
            c = rng.uniform((0.8, 0.8), (8.5, 6.4))
            if inside.contains_point(c) and min(np.hypot(*(c - (2.5, 2.0))), np.hypot(*(c - (6.5, 4.5)))) > 1.0:
                posts.append(Dipole(tuple(c), LOSSY_POST, Role.ENVIRONMENT))
    return SceneDocument(transmitters=_tx((2.5, 2.0)), receivers=_rx((6.5, 4.5)),
                         fences=[FenceSpec(_closed(REVERB_OUTLINE), WALL_SPACING, METAL)],
                         environment_dipoles=posts,
                         ris_arrays=_distributed_ris(REVERB_OUTLINE, n_ris),
                         frequency_grid=_grid(*grid),
                         name="reverberant-ris-room" + ("-lossy" if lossy else ""))


DESK_OUTLINE = ((0.0, 0.0), (3.2, 0.2), (3.4, 2.6), (0.1, 2.4))


def desk_ris_room(n_ris: int = 10) -> SceneDocument:
    """Small metal enclosure with an RIS on one wall."""
    wall = ((0.0, 0.0), (3.2, 0.2))
    return SceneDocument(transmitters=_tx((0.8, 1.3)), receivers=_rx((2.5, 1.6)),
                         fences=[FenceSpec(_closed(DESK_OUTLINE), WALL_SPACING, METAL)],
                         ris_arrays=[RisArraySpec(wall, n_ris, 0.25, 0.25, 1, RIS_ELEMENT)],
                         frequency_grid=_grid(0.8, 1.2, 41), name="desk-ris-room")


RECIPES = {
    "free-space-nonresonant": lambda: free_space_pair(resonant=False),
    "free-space-resonant": lambda: free_space_pair(resonant=True),
    "irregular-enclosure": irregular_enclosure,
    "obstacle-field": obstacle_field,
    "in-situ-ris-room": in_situ_ris_room,
    "fading-chamber": fading_chamber,
    "reverberant-ris-room": reverberant_ris_room,
    "reverberant-ris-room-lossy": lambda: reverberant_ris_room(lossy=True),
    "desk-ris-room": desk_ris_room,
}


def write_scenes(directory) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, make in RECIPES.items():
        path = out / f"{name}.json"
        make().save(path)
        written.append(path)
    return written


if __name__ == "__main__":
    for p in write_scenes(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "scenes"):
        print(p)
