"""Coupled-dipole wireless channel simulator (command line).

Every command reads a JSON scene document, writes CSV tables with full
double precision plus a JSON sidecar (scene hash, seed, tool version,
parameters, output list) into the output directory. Exit codes: 0 success,
2 invalid input or scene, 3 solver failure; errors are also written to
stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .engine import SolverError, evaluate_field_map, assemble_w, solve_dipole_moments
from .equalization import (CostEvaluator, OptimizationAborted, effective_tap_width, optimize_ris,
                           select_target_tap, target_tap_dominance_db)
from .fading import FadingSetup, PER_QUADRATURE, TOTAL, transparency_sweep
from .channel import channel_tensor, single_threaded_blas
from .ris import characterize_in_situ, characterize_normal_incidence, normal_incidence_setup
from .scenefile import SceneDocument, SceneFormatError
from .timedomain import WindowSpec, causality_check, cir_from_spectrum
from .types import RisConfiguration, Scene, validate_scene

OUT_ENV = "DIPOLEFADE_OUT"
DEFAULT_OUT = "dipolefade-out"

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3


class InputError(ValueError):
    def __init__(self, message: str, violations: Sequence[dict] = ()):
        super().__init__(message)
        self.violations = list(violations)


# --- output helpers ----------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


class Output:
    def __init__(self, directory: Path, command: str):
        self.dir = directory
        self.command = command
        self.files: list[str] = []
        self.dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
        (self.dir / name).write_text("\n".join(lines) + "\n")
        self.files.append(name)

    def json(self, name: str, payload: dict) -> None:
        (self.dir / name).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        self.files.append(name)

    def sidecar(self, scene: Scene | None, seed, parameters: dict, summary: dict | None = None) -> None:
        payload = {
            "command": self.command,
            "tool": "dipolefade",
            "version": __version__,
            "scene_hash": scene.digest() if scene is not None else None,
            "seed": seed,
            "parameters": parameters,
            "outputs": sorted(self.files),
        }
        if summary:
            payload["summary"] = summary
        (self.dir / f"{self.command}.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def output_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


# --- input helpers -----------------------------------------------------------

BUILTIN_PREFIX = "builtin:"


def builtin_scenes() -> list[str]:
    root = resources.files("dipolefade") / "scenes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_document(args) -> SceneDocument:
    if not args.scene:
        raise InputError("--scene is required")
    try:
        if args.scene.startswith(BUILTIN_PREFIX):
            name = args.scene[len(BUILTIN_PREFIX):]
            if name not in builtin_scenes():
                raise InputError(f"unknown builtin scene {name!r}; available: {', '.join(builtin_scenes())}")
            text = (resources.files("dipolefade") / "scenes" / f"{name}.json").read_text()
            return SceneDocument.loads(text)
        return SceneDocument.load(args.scene)
    except SceneFormatError as exc:
        raise InputError(str(exc)) from exc


def frequency_grid(args, doc: SceneDocument | None) -> tuple[float, ...]:
    given = [args.freq_min, args.freq_max, args.freq_points]
    if any(v is not None for v in given):
        if any(v is None for v in given):
            raise InputError("--freq-min, --freq-max and --freq-points go together")
        if args.freq_points < 1:
            raise InputError("--freq-points must be >= 1")
        return tuple(np.linspace(args.freq_min, args.freq_max, args.freq_points).tolist())
    if doc is not None and doc.frequency_grid:
        return doc.frequency_grid
    raise InputError("no frequency grid: give --freq-min/--freq-max/--freq-points or set it in the scene")


def checked_scene(scene: Scene) -> Scene:
    violations = validate_scene(scene)
    if violations:
        raise InputError("scene validation failed",
                         [{"kind": v.kind, "message": v.message, "indices": list(v.indices)} for v in violations])
    return scene


def require_seed(args) -> int:
    if args.seed is None:
        raise InputError(f"--seed is required for {args.command}")
    return int(args.seed)


def ris_configuration(args, doc: SceneDocument, seed: int | None = None) -> RisConfiguration | None:
    if getattr(args, "ris_bits", None):
        doc.ris_bits = args.ris_bits
    if getattr(args, "random_ris", False):
        if seed is None:
            raise InputError("--random-ris needs --seed")
        if doc.n_ris == 0:
            return None
        return RisConfiguration.random(doc.n_ris, np.random.default_rng(seed), doc.ris_alphabet)
    try:
        return doc.ris_configuration()
    except SceneFormatError as exc:
        raise InputError(str(exc)) from exc


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse number list {text!r}") from exc


def parse_window(text: str) -> WindowSpec:
    try:
        w = WindowSpec.parse(text)
        w.values(3)
        return w
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# --- commands ----------------------------------------------------------------

def cmd_validate(args) -> int:
    doc = load_document(args)
    scene = doc.scene(frequency_grid=doc.frequency_grid)
    violations = validate_scene(scene)
    report = {"valid": not violations, "n_dipoles": scene.n, "scene_hash": scene.digest(),
              "violations": [{"kind": v.kind, "message": v.message, "indices": list(v.indices)}
                             for v in violations]}
    if args.dump_expanded:
        out = Output(output_dir(args), "validate")
        (out.dir / "scene_expanded.json").write_text(doc.dumps(expanded=True) + "\n")
        out.files.append("scene_expanded.json")
        out.sidecar(scene, None, {"scene": str(args.scene)}, report)
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_OK if not violations else EXIT_INPUT


def cmd_channel(args) -> int:
    doc = load_document(args)
    grid = frequency_grid(args, doc)
    scene = checked_scene(doc.scene(frequency_grid=grid))
    ris = ris_configuration(args, doc, args.seed)
    tensor = channel_tensor(scene, ris, threads=args.threads)
    out = Output(output_dir(args), "channel")
    rows = ((f, r, t, h.real, h.imag) for f, mat in zip(tensor.frequencies, tensor.values)
            for r, row in enumerate(mat) for t, h in enumerate(row))
    out.csv("channel.csv", ["f", "rx", "tx", "re_h", "im_h"], rows)
    out.sidecar(scene, args.seed, {"ris_bits": "".join(map(str, ris.bits)) if ris else None,
                                   "n_freq": len(grid)})
    return EXIT_OK


def _f_res_values(args) -> np.ndarray:
    if args.f_res_values:
        return np.array(parse_floats(args.f_res_values))
    return np.logspace(np.log10(args.f_res_min), np.log10(args.f_res_max), args.f_res_points)


def cmd_fading_sweep(args) -> int:
    seed = require_seed(args)
    doc = load_document(args)
    if not doc.stirrers:
        raise InputError("fading-sweep needs stirrers in the scene")
    static = doc.scene(include_stirrers=False, frequency_grid=(args.frequency,))
    checked_scene(doc.scene(frequency_grid=(args.frequency,)))
    values = _f_res_values(args)
    if values.size == 0 or np.any(np.diff(values) <= 0):
        raise InputError("f_res values must be strictly increasing")
    setup = FadingSetup(static, list(doc.stirrers), ris_configuration(args, doc))
    result = transparency_sweep(setup, values, args.realizations, seed, args.frequency,
                                args.sigma_convention, threads=args.threads)
    out = Output(output_dir(args), "fading-sweep")
    rows = []
    for v, st in zip(values, result.statistics):
        for r in range(st.mu.shape[0]):
            for t in range(st.mu.shape[1]):
                rows.append((v, args.frequency, r, t, st.mu[r, t].real, st.mu[r, t].imag,
                             abs(st.mu[r, t]), st.sigma[r, t], st.k[r, t], st.k_db[r, t],
                             bool(st.undefined[r, t])))
    out.csv("fading.csv", ["f_res_env", "f", "rx", "tx", "re_mu", "im_mu", "abs_mu", "sigma", "k", "k_db",
                           "k_undefined"], rows)
    out.csv("effective_rank.csv", ["f_res_env", "f", "mean_r_eff", "mean_k_db"],
            zip(values, [args.frequency] * values.size, result.mean_effective_rank, result.mean_k_db))
    if args.clouds:
        s = result.samples
        out.csv("clouds.csv", ["realization", "f_res_env", "rx", "tx", "re_h", "im_h"],
                ((k, values[v], r, t, s[k, v, r, t].real, s[k, v, r, t].imag)
                 for k in range(s.shape[0]) for v in range(s.shape[1])
                 for r in range(s.shape[2]) for t in range(s.shape[3])))
    out.sidecar(static, seed, {"realizations": args.realizations, "frequency": args.frequency,
                               "f_res_env": values.tolist(), "sigma_convention": args.sigma_convention,
                               "n_stirrers": len(doc.stirrers)})
    return EXIT_OK


def cmd_ris_characterize(args) -> int:
    out = Output(output_dir(args), "ris-characterize")
    if args.mode == "normal":
        grid = frequency_grid(args, None)
        setup = normal_incidence_setup(width=args.width, ground_spacing=args.ground_spacing)
        checked_scene(setup.scene)
        spec = characterize_normal_incidence(setup, grid)
        out.csv("reflection.csv", ["f", "re_r_on", "im_r_on", "re_r_off", "im_r_off", "abs_r_on", "abs_r_off",
                                   "delta_phi", "residual_on", "residual_off"],
                zip(spec.frequencies, spec.r_on.real, spec.r_on.imag, spec.r_off.real, spec.r_off.imag,
                    np.abs(spec.r_on), np.abs(spec.r_off), spec.delta_phi, spec.residual_on,
                    spec.residual_off))
        out.sidecar(setup.scene, None, {"mode": "normal", "width": args.width,
                                        "ground_spacing": args.ground_spacing, "n_freq": len(grid)})
        return EXIT_OK
    seed = require_seed(args)
    doc = load_document(args)
    grid = frequency_grid(args, doc)
    scene = checked_scene(doc.scene(frequency_grid=grid))
    region = parse_floats(args.region) if args.region else None
    if region is not None:
        if len(region) < 6 or len(region) % 2:
            raise InputError("--region needs x,y pairs of at least three vertices")
        region = np.array(region).reshape(-1, 2)
    spec = characterize_in_situ(scene, args.configs, args.placements, seed, region=region,
                                alphabet=doc.ris_alphabet)
    header = ["f", "mean_sigma"] + [f"sigma_{i}" for i in range(spec.sigma.shape[0])]
    out.csv("in_situ_sigma.csv", header, (
        [f, m] + list(col) for f, m, col in zip(spec.frequencies, spec.mean, spec.sigma.T)))
    out.sidecar(scene, seed, {"mode": "in-situ", "configs": args.configs, "placements": args.placements},
                {"peak_frequency": spec.peak_frequency, "placements": spec.placements})
    return EXIT_OK


def cmd_cir(args) -> int:
    doc = load_document(args)
    grid = frequency_grid(args, doc)
    scene = checked_scene(doc.scene(frequency_grid=grid))
    ris = ris_configuration(args, doc, args.seed)
    tensor = channel_tensor(scene, ris, threads=args.threads)
    if not (0 <= args.rx < scene.n_rx and 0 <= args.tx < scene.n_tx):
        raise InputError("--rx/--tx out of range")
    window = parse_window(args.window)
    try:
        cir = cir_from_spectrum(tensor.frequencies, tensor.values[:, args.rx, args.tx], window)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = Output(output_dir(args), "cir")
    out.csv("cir.csv", ["t", "h"], zip(cir.time_grid, cir.samples))
    summary = {"dt": cir.dt, "unambiguous_range": cir.unambiguous_range, "window": cir.window_kind}
    distance = args.distance
    if distance is None:
        distance = float(np.hypot(*(scene.positions[scene.n_tx + args.rx] - scene.positions[args.tx])))
    rep = causality_check(cir, distance)
    summary.update({"distance": distance, "peak_time": rep.peak_time, "sample_peak_time": rep.sample_peak_time,
                    "leakage_db": rep.leakage_db, "envelope_leakage_db": rep.envelope_leakage_db, "aliased": bool(rep.aliased)})
    out.sidecar(scene, args.seed, {"rx": args.rx, "tx": args.tx, "window": window.label(),
                                   "n_freq": len(grid)}, summary)
    return EXIT_OK


def cmd_equalize(args) -> int:
    seed = require_seed(args)
    doc = load_document(args)
    grid = frequency_grid(args, doc)
    scene = checked_scene(doc.scene(frequency_grid=grid))
    if scene.n_ris == 0:
        raise InputError("equalize needs an RIS in the scene")
    window = parse_window(args.window)
    ev = CostEvaluator.for_scene(scene, None, window, rx=args.rx, tx=args.tx, threads=args.threads)
    rng = np.random.default_rng(seed)
    initial = [RisConfiguration.random(scene.n_ris, rng, doc.ris_alphabet) for _ in range(args.n_random)]
    distance = args.los_distance
    if distance is None:
        distance = float(np.hypot(*(scene.positions[scene.n_tx + args.rx] - scene.positions[args.tx])))
    cirs = [ev.cir(c) for c in initial]
    delta_t = args.delta_t
    if delta_t is None and args.tap_width == "effective":
        delta_t = effective_tap_width(grid, window)
    tap = select_target_tap(cirs, args.strategy, los_distance=distance, delta_t=delta_t)
    ev.window = tap
    final, trace = optimize_ris(ev, scene.n_ris, n_passes=args.passes, alphabet=doc.ris_alphabet,
                                initial=initial)
    out = Output(output_dir(args), "equalize")
    out.csv("trace.csv", ["iteration", "element", "cost_before", "cost_after", "accepted"],
            ((s.iteration, s.element, s.cost_before, s.cost_after, s.accepted) for s in trace.steps))
    out.csv("initial_costs.csv", ["index", "cost"], enumerate(trace.initial_costs))
    before = cirs[trace.best_initial]
    after = ev.cir(final)
    out.csv("cir_before.csv", ["t", "h"], zip(before.time_grid, before.samples))
    out.csv("cir_after.csv", ["t", "h"], zip(after.time_grid, after.samples))
    out.json("final_configuration.json", {"bits": "".join(map(str, final.bits)),
                                          "states": list(final.states), "alphabet": list(final.alphabet)})
    summary = {"t0": tap.t0, "delta_t": tap.delta_t, "best_initial_cost": trace.best_initial_cost,
               "final_cost": trace.final_cost, "accepted_flips": trace.n_accepted,
               "dominance_db_before": target_tap_dominance_db(before, tap),
               "dominance_db_after": target_tap_dominance_db(after, tap)}
    out.sidecar(scene, seed, {"strategy": args.strategy, "n_random": args.n_random, "passes": args.passes,
                              "tap_width": args.tap_width,
                              "window": window.label(), "los_distance": distance, "rx": args.rx,
                              "tx": args.tx, "n_freq": len(grid)}, summary)
    return EXIT_OK


def cmd_field_map(args) -> int:
    doc = load_document(args)
    scene = checked_scene(doc.scene(frequency_grid=(args.frequency,)))
    ris = ris_configuration(args, doc, args.seed)
    if not 0 <= args.tx < scene.n_tx:
        raise InputError("--tx out of range")
    box = parse_floats(args.bounds)
    if len(box) != 4 or box[0] >= box[1] or box[2] >= box[3]:
        raise InputError("--bounds must be xmin,xmax,ymin,ymax")
    xs = np.linspace(box[0], box[1], args.nx)
    ys = np.linspace(box[2], box[3], args.ny)
    pts = np.array([(x, y) for y in ys for x in xs])
    e_ext = np.zeros(scene.n, dtype=complex)
    e_ext[args.tx] = 1.0
    with single_threaded_blas():
        w = assemble_w(scene, ris, args.frequency)
        p = solve_dipole_moments(w, e_ext)
        fmap = evaluate_field_map(scene, ris, args.frequency, p, None, pts)
    out = Output(output_dir(args), "field-map")
    out.csv("field.csv", ["x", "y", "re_e", "im_e", "abs_e"],
            zip(pts[:, 0], pts[:, 1], fmap.values.real, fmap.values.imag, np.abs(fmap.values)))
    out.csv("dipoles.csv", ["index", "x", "y", "role"],
            ((i, d.position[0], d.position[1], ["transmitter", "receiver", "environment", "ris"].index(d.role.value))
             for i, d in enumerate(scene.dipoles)))
    out.sidecar(scene, args.seed, {"frequency": args.frequency, "tx": args.tx, "bounds": box,
                                   "nx": args.nx, "ny": args.ny})
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dipolefade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dipolefade {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scene", help="scene JSON document, or builtin:NAME for a bundled scene")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--seed", type=int, help="seed for every random draw")
        p.add_argument("--threads", type=int, default=1, help="worker threads; outputs do not depend on it")
        p.add_argument("--freq-min", type=float)
        p.add_argument("--freq-max", type=float)
        p.add_argument("--freq-points", type=int)
        p.add_argument("--window", default="hann", help="hann, rectangular or tukey(<fraction>)")
        return p

    def ris_flags(p):
        p.add_argument("--ris-bits", help="RIS configuration as a 0/1 string (1 = ON)")
        p.add_argument("--random-ris", action="store_true", help="draw a random RIS configuration from --seed")

    p = common(sub.add_parser("validate", help="check a scene document"))
    p.add_argument("--dump-expanded", action="store_true", help="also write the expanded dipole list")
    p.set_defaults(func=cmd_validate)

    p = common(sub.add_parser("channel", help="channel tensor over the frequency grid"))
    ris_flags(p)
    p.set_defaults(func=cmd_channel)

    p = common(sub.add_parser("fading-sweep", help="K-factor and effective rank versus environment f_res"))
    p.add_argument("--realizations", type=int, default=2000)
    p.add_argument("--frequency", type=float, default=1.0)
    p.add_argument("--f-res-values", help="comma-separated increasing values")
    p.add_argument("--f-res-min", type=float, default=10.0)
    p.add_argument("--f-res-max", type=float, default=1e4)
    p.add_argument("--f-res-points", type=int, default=13)
    p.add_argument("--sigma-convention", choices=[PER_QUADRATURE, TOTAL], default=PER_QUADRATURE)
    p.add_argument("--clouds", action="store_true", help="dump every channel sample")
    ris_flags(p)
    p.set_defaults(func=cmd_fading_sweep)

    p = common(sub.add_parser("ris-characterize", help="RIS reflection spectrum or in-situ sigma"))
    p.add_argument("--mode", choices=["normal", "in-situ"], default="normal")
    p.add_argument("--width", type=float, default=24.0, help="array width for normal incidence")
    p.add_argument("--ground-spacing", type=float, default=0.25)
    p.add_argument("--configs", type=int, default=100, help="random configurations (in-situ)")
    p.add_argument("--placements", type=int, default=10, help="random transceiver placements (in-situ)")
    p.add_argument("--region", help="x1,y1,x2,y2,... polygon for random placements (in-situ)")
    p.set_defaults(func=cmd_ris_characterize)

    p = common(sub.add_parser("cir", help="channel impulse response"))
    p.add_argument("--rx", type=int, default=0)
    p.add_argument("--tx", type=int, default=0)
    p.add_argument("--distance", type=float, help="LOS distance for the causality report")
    ris_flags(p)
    p.set_defaults(func=cmd_cir)

    p = common(sub.add_parser("equalize", help="greedy RIS optimization of one CIR tap"))
    p.add_argument("--strategy", choices=["dominant_nlos", "los"], default="dominant_nlos")
    p.add_argument("--los-distance", type=float)
    p.add_argument("--delta-t", type=float, help="tap width; overrides --tap-width")
    p.add_argument("--tap-width", choices=["bandwidth", "effective"], default="bandwidth",
                   help="tap width 1/B, or 1/(B * mean window weight) which matches the windowed pulse")
    p.add_argument("--n-random", type=int, default=50)
    p.add_argument("--passes", type=int, default=5)
    p.add_argument("--rx", type=int, default=0)
    p.add_argument("--tx", type=int, default=0)
    p.set_defaults(func=cmd_equalize)

    p = common(sub.add_parser("field-map", help="field magnitude on a grid"))
    p.add_argument("--frequency", type=float, default=1.0)
    p.add_argument("--tx", type=int, default=0)
    p.add_argument("--bounds", required=True, help="xmin,xmax,ymin,ymax (write --bounds=-1,... for a negative first value)")
    p.add_argument("--nx", type=int, default=101)
    p.add_argument("--ny", type=int, default=101)
    ris_flags(p)
    p.set_defaults(func=cmd_field_map)
    return parser


def error(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        error("input", "--threads must be >= 1")
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        error("validation", str(exc), violations=exc.violations)
        return EXIT_INPUT
    except SceneFormatError as exc:
        error("validation", str(exc))
        return EXIT_INPUT
    except OptimizationAborted as exc:
        error("solver", str(exc), completed_iterations=len(exc.trace.steps))
        return EXIT_SOLVER
    except SolverError as exc:
        error("solver", str(exc), frequency=exc.frequency,
              condition=None if not np.isfinite(exc.condition) else exc.condition)
        return EXIT_SOLVER
    except ValueError as exc:
        error("validation", str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
