"""Command-line entry point: surface catalog, dispatch, serialization.

Commands: energy, beta, model {orthogonal|tangent|cone}, sweep, flow,
invariance, validate. Configuration comes from flags with an optional JSON
config file (flags override the file). All floats are printed with 17
significant digits so outputs round-trip losslessly and identical configs
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, NumericalError, PreconditionError,
                     RieszLabError, UnsupportedInputError)
from .geometry import (PatchClassParams, icosphere, make_circle,
                       make_cylinder_patch, make_disjoint_union,
                       make_ellipsoid, make_saddle_surface, make_sphere,
                       make_torus, mesh_disjoint_union, polygon_circle,
                       read_obj, read_off, torus_mesh, validate_patch_class,
                       write_off)
from .flow import (EnergySelector, FlowState, contact_monitor, run_flow,
                   write_trajectory_csv)
from .models import (cone_model_scan, orthogonal_model_integral,
                     tangent_model_scan, two_body_sweep)
from .moebius import MoebiusMap, as_energy, ks_energy, moebius_invariance_check
from .riesz import QuadratureConfig, beta_oracle, riesz_energy

__all__ = ["RunConfig", "run", "main"]

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_UNSUPPORTED = 4


def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def dump_json(obj, indent=0) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = sorted(obj.items())
        inner = ", ".join(f"{json.dumps(str(k))}: {dump_json(v)}"
                          for k, v in items)
        return pad + "{" + inner + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dump_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if x != x:
            return "NaN"
        if x in (float("inf"), float("-inf")):
            return "Infinity" if x > 0 else "-Infinity"
        return _fmt_float(x)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(obj)


def _parse_kv(spec: str):
    """'name:key=val,key=val' -> (name, {key: val})."""
    if ":" in spec:
        name, rest = spec.split(":", 1)
        kv = {}
        for part in rest.split(","):
            if not part:
                continue
            if "=" not in part:
                raise ConfigError(f"malformed parameter {part!r} in {spec!r}")
            k, v = part.split("=", 1)
            try:
                kv[k] = float(v) if "." in v or "e" in v.lower() or v.lstrip("-").isdigit() is False else int(v)
            except ValueError:
                kv[k] = v
        return name, kv
    return spec, {}


def parse_surface(spec: str):
    """Build a catalog surface or load a mesh from an OFF/OBJ path."""
    if spec.endswith(".off"):
        return read_off(spec)
    if spec.endswith(".obj"):
        return read_obj(spec)
    name, kv = _parse_kv(spec)
    name = name.lower()
    try:
        if name == "circle":
            return make_circle(kv.get("r", 1.0))
        if name == "sphere":
            return make_sphere(kv.get("r", 1.0),
                               (kv.get("cx", 0.0), kv.get("cy", 0.0),
                                kv.get("cz", 0.0)))
        if name == "ellipsoid":
            return make_ellipsoid(kv.get("a", 1.0), kv.get("b", 1.0),
                                  kv.get("c", 1.2))
        if name == "torus":
            return make_torus(kv.get("R", 2.0), kv.get("r", 0.5))
        if name == "cylinder":
            return make_cylinder_patch(kv.get("r", 1.0), kv.get("L", 1.0))
        if name == "saddle":
            return make_saddle_surface(kv.get("extent", 1.0))
        if name == "two-spheres":
            gap = kv.get("gap", 0.5)
            r = kv.get("r", 1.0)
            a = make_sphere(r, (-(r + gap / 2.0), 0.0, 0.0))
            b = make_sphere(r, (r + gap / 2.0, 0.0, 0.0), component=1)
            return make_disjoint_union(a, b)
        if name == "icosphere":
            return icosphere(int(kv.get("subdiv", 1)), kv.get("r", 1.0),
                             (kv.get("cx", 0.0), kv.get("cy", 0.0),
                              kv.get("cz", 0.0)))
        if name == "torusmesh":
            return torus_mesh(int(kv.get("nu", 24)), int(kv.get("nv", 48)),
                              kv.get("R", 2.0), kv.get("r", 0.5))
        if name == "polygon":
            return polygon_circle(int(kv.get("n", 64)), kv.get("r", 1.0))
        if name == "dumbbell":
            gap = kv.get("gap", 0.5)
            r = kv.get("r", 1.0)
            sub = int(kv.get("subdiv", 1))
            a = icosphere(sub, r, (-(r + gap / 2.0), 0.0, 0.0))
            b = icosphere(sub, r, (r + gap / 2.0, 0.0, 0.0))
            return mesh_disjoint_union(a, b)
        if name == "mesh":
            path = kv.get("path")
            if not path or not os.path.exists(str(path)):
                raise ConfigError(f"mesh path {path!r} does not exist")
            path = str(path)
            return read_off(path) if path.endswith(".off") else read_obj(path)
    except RieszLabError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad surface spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown surface {name!r}")


def parse_map(spec: str) -> MoebiusMap:
    name, kv = _parse_kv(spec)
    if name == "inversion":
        return MoebiusMap("inversion",
                          center=(kv.get("cx", 0.0), kv.get("cy", 0.0),
                                  kv.get("cz", 0.0)),
                          radius=kv.get("r", 1.0))
    if name == "similarity":
        return MoebiusMap("similarity",
                          center=(kv.get("cx", 0.0), kv.get("cy", 0.0),
                                  kv.get("cz", 0.0)),
                          scale=kv.get("scale", 2.0))
    raise ConfigError(f"unknown map {name!r}")


@dataclass
class RunConfig:
    """Parsed run configuration (flags merged over an optional JSON file)."""

    command: str
    surface: str | None = None
    alpha: float | None = None
    energy: str = "riesz"        # riesz | ks | as
    s: float = 0.0
    z: float | None = None
    radius: float = 1.0
    rho: float = 1.0
    extent: float = 0.5
    model: str | None = None
    m: int = 2
    gaps: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    steps: int = 50
    step_size: float = 1e-2
    map_spec: str | None = None
    eps0: float | None = None
    outer_scale: float | None = None
    inner_scale: float | None = None
    seed: int = 0
    threads: int = 1
    output: str | None = None
    csv: str | None = None
    data: str | None = None
    trajectory: str | None = None
    mesh_out: str | None = None
    k: int = 3
    b: float = 10.0
    volume_bound: float = 100.0

    def quad_config(self) -> QuadratureConfig:
        cfg = QuadratureConfig(threads=self.threads)
        if self.outer_scale is not None:
            cfg.outer_scale = self.outer_scale
        if self.inner_scale is not None:
            cfg.inner_scale = self.inner_scale
        if self.eps0 is not None:
            cfg.patch_radius = self.eps0
        return cfg


def _emit(config: RunConfig, payload: dict) -> None:
    text = dump_json(payload)
    print(text)
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(text + "\n")
    if config.data and "columns" in payload:
        cols = payload["columns"]
        with open(config.data, "w") as fh:
            for row in zip(*cols.values()):
                fh.write(" ".join(_fmt_float(v) for v in row) + "\n")


def _cmd_energy(config: RunConfig) -> dict:
    surface = parse_surface(config.surface)
    qc = config.quad_config()
    if config.energy == "ks":
        rep = ks_energy(surface, qc)
    elif config.energy == "as":
        rep = as_energy(surface, config.s, qc)
    else:
        if config.alpha is None:
            raise ConfigError("energy command needs --alpha (or --energy ks/as)")
        rep = riesz_energy(surface, config.alpha, config=qc)
    return {"command": "energy", "surface": config.surface,
            "energy": config.energy, "alpha": config.alpha,
            "report": rep.as_dict()}


def _cmd_beta(config: RunConfig) -> dict:
    if config.surface not in ("circle", "sphere"):
        raise ConfigError("beta oracle supports --surface circle|sphere")
    if config.z is None:
        raise ConfigError("beta command needs --z")
    value = beta_oracle(config.surface, config.radius, config.z)
    return {"command": "beta", "surface": config.surface,
            "radius": config.radius, "z": config.z, "value": value}


def _cmd_model(config: RunConfig) -> dict:
    kind = config.model
    if kind == "orthogonal":
        res = orthogonal_model_integral(config.alpha, config.rho)
        out = {"value": res.value, "diverged": res.diverged}
        if res.cutoff_fit is not None:
            out["cutoff_fit"] = res.cutoff_fit.as_dict()
        return {"command": "model", "model": kind, "alpha": config.alpha,
                "rho": config.rho, "result": out}
    if kind == "tangent":
        fit = tangent_model_scan(config.alpha, config.extent)
    elif kind == "cone":
        fit = cone_model_scan(config.alpha)
    else:
        raise ConfigError("model kind must be orthogonal, tangent or cone")
    return {"command": "model", "model": kind, "alpha": config.alpha,
            "result": fit.as_dict()}


def _cmd_sweep(config: RunConfig) -> dict:
    if config.alpha is None:
        raise ConfigError("sweep needs --alpha")
    res = two_body_sweep(config.m, config.alpha, config.radius, config.gaps)
    if config.csv:
        with open(config.csv, "w") as fh:
            fh.write("alpha,delta,energy,lambda_bound_sum\n")
            for g, e, l in zip(res.gaps, res.energies, res.lambda_sums):
                fh.write(",".join(_fmt_float(v)
                                  for v in (config.alpha, g, e, l)) + "\n")
    out = res.as_dict()
    out["columns"] = {"delta": list(res.gaps), "energy": list(res.energies)}
    return {"command": "sweep", "result": out,
            "columns": {"delta": list(res.gaps), "energy": list(res.energies)}}


def _cmd_flow(config: RunConfig) -> dict:
    mesh = parse_surface(config.surface)
    if not hasattr(mesh, "vertices"):
        raise UnsupportedInputError("flow needs a mesh surface "
                                    "(icosphere, polygon, dumbbell, file)")
    if config.energy == "ks":
        selector = EnergySelector("ks")
    elif config.energy == "as":
        selector = EnergySelector("as", s=config.s)
    else:
        if config.alpha is None:
            raise ConfigError("riesz flow needs --alpha")
        selector = EnergySelector("riesz", alpha=config.alpha)
    state = FlowState(mesh=mesh, selector=selector,
                      step_size=config.step_size, config=config.quad_config())
    initial_mesh = state.mesh
    state = run_flow(state, config.steps)
    if config.trajectory:
        write_trajectory_csv(state, config.trajectory)
    if config.mesh_out:
        write_off(state.mesh, config.mesh_out)
        stem, dot, ext = config.mesh_out.rpartition(".")
        write_off(initial_mesh, (stem or ext) + ".initial.off")
    monitor = contact_monitor(state)
    return {"command": "flow", "selector": selector.label(),
            "iterations": state.iteration, "stationary": state.stationary,
            "energy_initial": state.trajectory[0].energy,
            "energy_final": state.trajectory[-1].energy,
            "monitor": monitor.as_dict()}


def _cmd_invariance(config: RunConfig) -> dict:
    surface = parse_surface(config.surface)
    mmap = parse_map(config.map_spec or "inversion:cx=3.0,r=2.0")
    selector = "as" if config.energy == "as" else "ks"
    rep = moebius_invariance_check(surface, mmap, selector, config.s,
                                   config.quad_config())
    return {"command": "invariance", "report": rep.as_dict()}


def _cmd_validate(config: RunConfig) -> dict:
    surface = parse_surface(config.surface)
    params = PatchClassParams(k=config.k, radius=config.eps0 or 0.1,
                              derivative_bound=config.b,
                              volume_bound=config.volume_bound)
    report = validate_patch_class(surface, params)
    return {"command": "validate", "report": report.as_dict()}


_COMMANDS = {
    "energy": _cmd_energy,
    "beta": _cmd_beta,
    "model": _cmd_model,
    "sweep": _cmd_sweep,
    "flow": _cmd_flow,
    "invariance": _cmd_invariance,
    "validate": _cmd_validate,
}


def run(config: RunConfig) -> int:
    """Dispatch a parsed configuration; returns the process exit status."""
    np.random.seed(config.seed % (2 ** 32))
    try:
        handler = _COMMANDS.get(config.command)
        if handler is None:
            raise ConfigError(f"unknown command {config.command!r}")
        payload = handler(config)
        _emit(config, payload)
        return 0
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except UnsupportedInputError as exc:
        _emit_error(exc)
        return EXIT_UNSUPPORTED
    except (NumericalError, PreconditionError, RieszLabError) as exc:
        _emit_error(exc)
        return EXIT_NUMERICAL


def _emit_error(exc: Exception) -> None:
    sys.stderr.write(dump_json({"error": type(exc).__name__,
                                "message": str(exc)}) + "\n")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override it)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int,
                        default=int(os.environ.get("RIESZ_LAB_THREADS", "1")))
    p = argparse.ArgumentParser(
        prog="rieszlab", parents=[common],
        description="Regularized Riesz, Kusner-Sullivan and Auckly-Sadun "
                    "energies of closed curves and surfaces")
    sub = p.add_subparsers(dest="command", parser_class=lambda **kw:
                           argparse.ArgumentParser(parents=[common], **kw))

    def add_common(sp):
        sp.add_argument("--surface")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--energy", default="riesz",
                        choices=["riesz", "ks", "as"])
        sp.add_argument("--s", type=float, default=0.0)
        sp.add_argument("--eps0", type=float)
        sp.add_argument("--outer-scale", type=float, dest="outer_scale")
        sp.add_argument("--inner-scale", type=float, dest="inner_scale")
        sp.add_argument("--output", "-o")
        sp.add_argument("--data", help="gnuplot two-column output file")

    sp = sub.add_parser("energy", help="Riesz/KS/AS energy of a surface")
    add_common(sp)

    sp = sub.add_parser("beta", help="closed-form beta oracle")
    sp.add_argument("--surface", choices=["circle", "sphere"], required=True)
    sp.add_argument("--z", type=float, required=True)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--output", "-o")
    sp.add_argument("--data")

    sp = sub.add_parser("model", help="double-point model integrals")
    sp.add_argument("model", choices=["orthogonal", "tangent", "cone"])
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--rho", type=float, default=1.0)
    sp.add_argument("--extent", type=float, default=0.5)
    sp.add_argument("--output", "-o")
    sp.add_argument("--data")

    sp = sub.add_parser("sweep", help="two-body blow-up sweep")
    sp.add_argument("--m", type=int, default=2, choices=[1, 2])
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--gaps", type=lambda s: [float(x) for x in s.split(",")],
                    default=[0.1, 0.05, 0.025, 0.0125])
    sp.add_argument("--csv")
    sp.add_argument("--output", "-o")
    sp.add_argument("--data")

    sp = sub.add_parser("flow", help="gradient descent of a mesh embedding")
    add_common(sp)
    sp.add_argument("--steps", type=int, default=50)
    sp.add_argument("--step-size", type=float, default=1e-2,
                    dest="step_size")
    sp.add_argument("--trajectory", help="trajectory CSV path")
    sp.add_argument("--mesh-out", dest="mesh_out", help="final mesh OFF path")

    sp = sub.add_parser("invariance", help="Moebius invariance check")
    add_common(sp)
    sp.add_argument("--map", dest="map_spec",
                    help="inversion:cx=..,cy=..,cz=..,r=.. or "
                         "similarity:scale=..")

    sp = sub.add_parser("validate", help="uniform patch-class validation")
    sp.add_argument("--surface", required=True)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--eps0", type=float, default=0.1)
    sp.add_argument("--b", type=float, default=10.0)
    sp.add_argument("--V", type=float, default=100.0, dest="volume_bound")
    sp.add_argument("--output", "-o")
    sp.add_argument("--data")
    return p


def parse_args(argv=None) -> RunConfig:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_help()
        raise ConfigError("no command given")
    merged = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                merged.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for key, val in vars(ns).items():
        if key == "config" or val is None:
            continue
        merged[key] = val
    merged.setdefault("command", ns.command)
    fields = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(merged) - fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**merged)


def main(argv=None) -> int:
    try:
        config = parse_args(argv)
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except SystemExit as exc:   # argparse errors
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
