"""JSON scene documents.

A document stores builders declaratively (a fence is its vertices and
spacing, a stirrer its shape) and expands them into a :class:`Scene` on
demand::

    {
      "frequency_grid": {"min": 0.5, "max": 1.5, "points": 401},
      "transmitters": [{"position": [0, 0], "params": "transceiver"}],
      "receivers": [{"position": [4, 0], "params": "transceiver"}],
      "environment_fences": [{"vertices": [[...], ...], "spacing": 0.25, "params": "metal"}],
      "environment_dipoles": [{"position": [1, 2], "params": {...}}],
      "stirrers": [{"centroid": [...], "shape": [[...], ...], "spacing": 0.25}],
      "ris_arrays": [{"anchors": [[...], ...], "n_elements": 10, "spacing": 0.25}],
      "ris_alphabet": [1.0, 5.0],
      "ris_bits": "0101..."
    }

``params`` is a preset name (``metal``, ``transceiver``, ``ris_element``,
``nonresonant_transceiver``) or an object with ``chi`` or ``chi_squared``,
``f_res`` and optionally ``gamma_abs`` and ``dipole_size``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .builders import (METAL, RIS_ELEMENT, TRANSCEIVER, FenceSpec, StirrerSpec, build_fence,
                       build_ris_array)
from .types import DEFAULT_ALPHABET, Dipole, PolarizabilityParams, RisConfiguration, Role, Scene

FORMAT_VERSION = 1

NONRESONANT_TRANSCEIVER = PolarizabilityParams.from_chi(0.5, 10.0)
PRESETS = {
    "metal": METAL,
    "transceiver": TRANSCEIVER,
    "nonresonant_transceiver": NONRESONANT_TRANSCEIVER,
    "ris_element": RIS_ELEMENT,
}


class SceneFormatError(ValueError):
    pass


def parse_params(value, default: PolarizabilityParams) -> PolarizabilityParams:
    if value is None:
        return default
    if isinstance(value, str):
        try:
            return PRESETS[value]
        except KeyError:
            raise SceneFormatError(f"unknown parameter preset {value!r}") from None
    if not isinstance(value, dict):
        raise SceneFormatError("params must be a preset name or an object")
    known = {"chi", "chi_squared", "f_res", "gamma_abs", "dipole_size"}
    extra = set(value) - known
    if extra:
        raise SceneFormatError(f"unknown params keys {sorted(extra)}")
    if ("chi" in value) == ("chi_squared" in value):
        raise SceneFormatError("params need exactly one of chi and chi_squared")
    chi2 = float(value["chi"]) ** 2 if "chi" in value else float(value["chi_squared"])
    if "f_res" not in value:
        raise SceneFormatError("params need f_res")
    return PolarizabilityParams(chi2, float(value["f_res"]), float(value.get("gamma_abs", 0.0)),
                                float(value.get("dipole_size", default.dipole_size)))


def params_to_json(p: PolarizabilityParams):
    for name, preset in PRESETS.items():
        if p == preset:
            return name
    return p.to_dict()


def parse_grid(value) -> tuple[float, ...]:
    if value is None:
        return ()
    if isinstance(value, dict):
        if "values" in value:
            return tuple(float(v) for v in value["values"])
        try:
            lo, hi, n = float(value["min"]), float(value["max"]), int(value["points"])
        except KeyError as exc:
            raise SceneFormatError(f"frequency_grid needs min, max and points ({exc})") from None
        return tuple(np.linspace(lo, hi, n).tolist())
    return tuple(float(v) for v in value)


@dataclass(frozen=True)
class RisArraySpec:
    anchors: tuple[tuple[float, float], ...]
    n_elements: int
    spacing: float = 0.25
    standoff: float = 0.25
    side: int = 1
    params: PolarizabilityParams = RIS_ELEMENT

    def to_dict(self) -> dict:
        return {"anchors": [list(p) for p in self.anchors], "n_elements": self.n_elements,
                "spacing": self.spacing, "standoff": self.standoff, "side": self.side,
                "params": params_to_json(self.params)}


@dataclass
class SceneDocument:
    transmitters: list[Dipole] = field(default_factory=list)
    receivers: list[Dipole] = field(default_factory=list)
    fences: list[FenceSpec] = field(default_factory=list)
    environment_dipoles: list[Dipole] = field(default_factory=list)
    stirrers: list[StirrerSpec] = field(default_factory=list)
    ris_arrays: list[RisArraySpec] = field(default_factory=list)
    frequency_grid: tuple[float, ...] = ()
    ris_alphabet: tuple[float, ...] = DEFAULT_ALPHABET
    ris_bits: str | None = None
    name: str = ""
    notes: dict = field(default_factory=dict)

    # --- expansion -----------------------------------------------------------

    def static_environment(self) -> list[Dipole]:
        env = [d for spec in self.fences for d in build_fence(spec)]
        return env + list(self.environment_dipoles)

    def ris_dipoles(self, environment: list[Dipole]) -> list[Dipole]:
        out: list[Dipole] = []
        for spec in self.ris_arrays:
            out += build_ris_array(np.asarray(spec.anchors, dtype=float), spec.n_elements, spec.spacing,
                                   spec.params, spec.standoff, spec.side,
                                   existing=environment + out)
        return out

    def scene(self, include_stirrers: bool = True, frequency_grid=None) -> Scene:
        """Expanded scene; stirrers sit at their stored angles when included."""
        env = self.static_environment()
        if include_stirrers:
            env += [d for s in self.stirrers for d in s.dipoles()]
        grid = self.frequency_grid if frequency_grid is None else frequency_grid
        return Scene.from_blocks(self.transmitters, self.receivers, env, self.ris_dipoles(env), grid)

    def ris_configuration(self) -> RisConfiguration | None:
        n = sum(s.n_elements for s in self.ris_arrays)
        if n == 0:
            return None
        if self.ris_bits is None:
            return RisConfiguration.uniform(n, self.ris_alphabet[1], self.ris_alphabet)
        if len(self.ris_bits) != n or set(self.ris_bits) - {"0", "1"}:
            raise SceneFormatError(f"ris_bits must be {n} characters of 0/1")
        bits = [int(b) for b in self.ris_bits]
        return RisConfiguration.from_bits(bits, self.ris_alphabet)

    @property
    def n_ris(self) -> int:
        return sum(s.n_elements for s in self.ris_arrays)

    # --- serialization -------------------------------------------------------

    def to_dict(self, expanded: bool = False) -> dict:
        def dip(d: Dipole):
            return {"position": list(d.position), "params": params_to_json(d.params)}

        out: dict[str, Any] = {"format_version": FORMAT_VERSION}
        if self.name:
            out["name"] = self.name
        if self.frequency_grid:
            out["frequency_grid"] = {"values": list(self.frequency_grid)}
        out["transmitters"] = [dip(d) for d in self.transmitters]
        out["receivers"] = [dip(d) for d in self.receivers]
        out["environment_fences"] = [{"vertices": [list(v) for v in f.vertices], "spacing": f.spacing,
                                      "params": params_to_json(f.params)} for f in self.fences]
        out["environment_dipoles"] = [dip(d) for d in self.environment_dipoles]
        out["stirrers"] = [{"centroid": list(s.centroid), "shape": [list(v) for v in s.shape],
                            "spacing": s.spacing, "params": params_to_json(s.params),
                            "angle": s.angle} for s in self.stirrers]
        out["ris_arrays"] = [s.to_dict() for s in self.ris_arrays]
        out["ris_alphabet"] = list(self.ris_alphabet)
        if self.ris_bits is not None:
            out["ris_bits"] = self.ris_bits
        if self.notes:
            out["notes"] = self.notes
        if expanded:
            out["expanded"] = self.scene().to_dict()
        return out

    def dumps(self, expanded: bool = False) -> str:
        return json.dumps(self.to_dict(expanded), indent=1, sort_keys=True)

    def save(self, path, expanded: bool = False) -> None:
        Path(path).write_text(self.dumps(expanded) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "SceneDocument":
        if not isinstance(data, dict):
            raise SceneFormatError("scene document must be a JSON object")
        version = data.get("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise SceneFormatError(f"unsupported format_version {version}")
        known = {"format_version", "name", "frequency_grid", "transmitters", "receivers",
                 "environment_fences", "environment_dipoles", "stirrers", "ris_arrays",
                 "ris_alphabet", "ris_bits", "notes", "expanded"}
        extra = set(data) - known
        if extra:
            raise SceneFormatError(f"unknown scene keys {sorted(extra)}")
        try:
            return cls._parse(data)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SceneFormatError):
                raise
            raise SceneFormatError(f"malformed scene: {exc!r}") from exc

    @classmethod
    def _parse(cls, data: dict) -> "SceneDocument":
        def dipoles(key, role, default):
            return [Dipole(tuple(map(float, d["position"])), parse_params(d.get("params"), default), role)
                    for d in data.get(key, [])]

        fences = [FenceSpec(tuple(tuple(map(float, v)) for v in f["vertices"]), float(f.get("spacing", 0.25)),
                            parse_params(f.get("params"), METAL))
                  for f in data.get("environment_fences", [])]
        stirrers = [StirrerSpec(tuple(map(float, s["centroid"])), tuple(tuple(map(float, v)) for v in s["shape"]),
                                float(s.get("spacing", 0.25)), parse_params(s.get("params"), METAL),
                                float(s.get("angle", 0.0)))
                    for s in data.get("stirrers", [])]
        arrays = [RisArraySpec(tuple(tuple(map(float, v)) for v in a["anchors"]), int(a["n_elements"]),
                               float(a.get("spacing", 0.25)), float(a.get("standoff", 0.25)),
                               int(a.get("side", 1)), parse_params(a.get("params"), RIS_ELEMENT))
                  for a in data.get("ris_arrays", [])]
        bits = data.get("ris_bits")
        return cls(
            transmitters=dipoles("transmitters", Role.TRANSMITTER, TRANSCEIVER),
            receivers=dipoles("receivers", Role.RECEIVER, TRANSCEIVER),
            fences=fences,
            environment_dipoles=dipoles("environment_dipoles", Role.ENVIRONMENT, METAL),
            stirrers=stirrers,
            ris_arrays=arrays,
            frequency_grid=parse_grid(data.get("frequency_grid")),
            ris_alphabet=tuple(float(a) for a in data.get("ris_alphabet", DEFAULT_ALPHABET)),
            ris_bits=None if bits is None else str(bits),
            name=str(data.get("name", "")),
            notes=dict(data.get("notes", {})),
        )

    @classmethod
    def loads(cls, text: str) -> "SceneDocument":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "SceneDocument":
        p = Path(path)
        if not p.is_file():
            raise SceneFormatError(f"scene file not found: {path}")
        return cls.loads(p.read_text())
