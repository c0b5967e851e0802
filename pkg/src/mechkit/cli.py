"""
Command-line front end.

Every subcommand prints a JSON report on stdout (or writes it with
``--report``). The exit status is 0 exactly when every expectation in the
report passes; 2 signals an input or evaluation error, in which case the
report carries the message.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analysis, registry, riemann, symplectic, unified
from .expr import ExprError, parse
from .integrate import IntegrationError, IntegratorConfig
from .phase import OffConstraint, SingularLagrangian
from .symmetry import Dynamics, GeneratorField, dynamical_symmetry_residual, noether_check
from .system import SystemError, SystemSpec, load, point_from

log = logging.getLogger("mechkit")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class UsageError(ValueError):
    pass


def setup_logging() -> None:
    level = os.environ.get("MECHKIT_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


# ----------------------------------------------------------------------------
# argument helpers

def resolve_system(ref: str) -> SystemSpec:
    """Registry id or path to a JSON system file."""
    if ref in registry.ids():
        return registry.get(ref)
    if Path(ref).exists():
        return load(ref)
    raise UsageError(f"{ref!r} is neither a registered system nor a readable file")


def parse_point(text: str | None) -> dict[str, float]:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"point entries look like name=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"not a number in point entry {item!r}") from None
    return out


def parse_span(text: str | None) -> tuple[float, float] | None:
    if text is None:
        return None
    try:
        a, b = (float(s) for s in text.split(","))
    except ValueError:
        raise UsageError(f"--tspan expects a,b; got {text!r}") from None
    if not b > a:
        raise UsageError(f"--tspan must be increasing, got {a},{b}")
    return a, b


def integrator_config(args) -> IntegratorConfig:
    tol = args.tol if getattr(args, "tol", None) else 1e-10
    if getattr(args, "method", "dopri5") == "rk4":
        if not args.dt:
            raise UsageError("--method rk4 needs --dt")
        return IntegratorConfig("rk4", dt=args.dt)
    return IntegratorConfig(rtol=tol, atol=tol)


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def finish(body: dict, args, wall: float) -> int:
    """Emit the report; the digest covers everything except timing."""
    body = _clean(body)
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    report = {"report": body, "digest": hashlib.sha256(canonical.encode()).hexdigest(),
              "timing": {"wall_seconds": round(wall, 6)}}
    text = json.dumps(report, indent=2, sort_keys=True)
    if getattr(args, "report", None):
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    if "error" in body:
        return EXIT_ERROR
    return EXIT_OK if body.get("passed", True) else EXIT_FAIL


def expectations(items: list[dict]) -> bool:
    return all(i["passed"] for i in items)


# ----------------------------------------------------------------------------
# subcommands

def cmd_derive(args) -> dict:
    spec = resolve_system(args.system)
    pt = parse_point(args.point)
    side = args.side or spec.default_side()
    fam, ch, P = spec.family, spec.chart, spec.params
    lay = spec.layout(side)
    values = dict(pt)
    if spec.has_time:
        values.setdefault(ch.time, 0.0)
    if spec.has_action:
        values.setdefault(ch.action, 0.0)
    if side == "unified" and not any(p in values for p in ch.momenta):
        tl = spec.layout("tangent")
        xu = unified.lift(spec.L, ch, point_from(values, tl, spec.id), P, spec.flavor)
    else:
        xu = None
    x = xu if xu is not None else point_from(values, lay, spec.id)
    res: dict[str, Any] = {"side": side, "point": dict(zip(lay.names, x))}
    res["field"] = dict(zip(lay.names, analysis.field_function(spec, side)(x)))
    if fam == "riemann":
        n = spec.n
        res["christoffel"] = riemann.christoffel(spec.metric_field, x[:n], P)
        res["scalar_curvature"] = riemann.curvature(spec.metric_field, x[:n], P).scalar
    elif side == "tangent":
        from .phase import lagrangian_jet
        d = lagrangian_jet(spec.L, ch, x, P, lay)
        res["energy"] = d.energy
        res["lagrangian"] = d.value
        res["legendre"] = dict(zip(ch.momenta, d.p))
        if fam == "cosymplectic":
            from .cosymplectic import lagrangian_reeb
            R = lagrangian_reeb(spec.L, ch, x, P)
            res["reeb"] = R.as_dict()
            res["reeb_energy"] = R.extras["reeb_energy"]
        elif fam == "contact":
            from .contact import contact_reeb_lagrangian
            R = contact_reeb_lagrangian(spec.L, ch, x, P)
            res["reeb"] = R.as_dict()
            res["reeb_energy"] = R.extras["reeb_energy"]
    elif side == "cotangent":
        from .expr import evaluate
        res["hamiltonian"] = evaluate(spec.h, lay, x, P)
    else:
        res["unified_hamiltonian"] = unified.unified_hamiltonian(spec.L, ch, x, P, spec.flavor)
        res["constraint"] = unified.constraint_residuals(spec.L, ch, x, P, spec.flavor)
    return {"command": "derive", "system": spec.id, "results": res, "passed": True}


def write_trajectory(traj, path: str | None, fmt: str, spec: SystemSpec) -> str:
    names = [n for n in traj.names if n != spec.chart.time or not spec.has_time]
    cols = [traj.names.index(n) for n in names]
    mons = list(traj.monitors)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + names + mons)
        for i, t in enumerate(traj.times):
            w.writerow([fmt17(t)] + [fmt17(traj.states[i, c]) for c in cols]
                       + [fmt17(traj.monitors[m][i]) for m in mons])
        text = buf.getvalue()
    else:
        doc = {"system": spec.id, "columns": ["t"] + names + mons,
               "t": [float(t) for t in traj.times],
               "states": {n: traj.states[:, c].tolist() for n, c in zip(names, cols)},
               "monitors": {m: traj.monitors[m].tolist() for m in mons}}
        text = json.dumps(_clean(doc), indent=1) + "\n"
    if path:
        Path(path).write_text(text)
    return text


def cmd_simulate(args) -> dict:
    spec = resolve_system(args.system)
    side = args.side or spec.default_side()
    span = parse_span(args.tspan) or tuple(spec.t_span)
    cfg = integrator_config(args)
    samples = None
    if args.dt:
        k = int(round((span[1] - span[0]) / args.dt))
        samples = np.linspace(span[0], span[1], k + 1)
    traj = analysis.simulate(spec, side, span, cfg, samples, parse_point(args.point))
    text = write_trajectory(traj, args.out, args.format, spec)
    if not args.out:
        sys.stderr.write(text)
    checks = []
    for q in spec.quantities:
        s = analysis.quantity_summary(spec, q, traj)
        if s is not None:
            checks.append(s)
    if side == "unified":
        drift = float(np.max(traj.monitors["constraint"]))
        checks.append({"quantity": "constraint", "max_drift": drift,
                       "tolerance": analysis.CONSTRAINT_DRIFT_TOL,
                       "passed": drift <= analysis.CONSTRAINT_DRIFT_TOL})
    graded = [c for c in checks if "passed" in c]
    return {"command": "simulate", "system": spec.id, "side": side,
            "config": traj.metadata["config"], "t_span": list(span),
            "steps": traj.metadata["steps"], "samples": len(traj),
            "output": args.out, "format": args.format,
            "results": checks, "passed": expectations(graded)}


def _check_one(ref: str, samples: int, seed: int) -> dict:
    spec = resolve_system(ref)
    try:
        res = analysis.run_checks(spec, samples=samples, seed=seed)
    except (SingularLagrangian, IntegrationError, ExprError, ArithmeticError, SystemError) as exc:
        return {"system": spec.id, "error": f"{type(exc).__name__}: {exc}", "passed": False,
                "checks": []}
    return {"system": spec.id, "checks": [r.as_dict() for r in res],
            "passed": all(r.passed for r in res)}


def cmd_check(args) -> dict:
    if args.all:
        refs = registry.ids()
    elif args.system:
        refs = [args.system]
    else:
        raise UsageError("check needs --system or --all")
    if args.all and args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            reports = list(ex.map(_check_one, refs, [args.samples] * len(refs),
                                  [args.seed] * len(refs)))
    else:
        reports = [_check_one(r, args.samples, args.seed) for r in refs]
    return {"command": "check", "samples": args.samples, "seed": args.seed,
            "systems": reports, "passed": all(r["passed"] for r in reports)}


def cmd_symmetry(args) -> dict:
    spec = resolve_system(args.system)
    if spec.L is None:
        raise UsageError(f"{spec.id}: symmetry checks need a lagrangian")
    comps = [c.strip() for c in args.generator.split(",")]
    lay = spec.layout("tangent")
    lift = "tangent" if len(comps) == spec.n else "none"
    Y = GeneratorField.parse(spec.chart, lay, comps, lift, spec.params)
    pts = analysis.sample_points(spec, "tangent", args.samples, args.seed)
    rep = noether_check(Y, spec.L, spec.chart, pts, spec.params, spec.family)
    dyn = dynamical_symmetry_residual(Y, Dynamics(spec.chart, spec.L, "tangent", spec.family,
                                                  spec.params), pts)
    worst = max(rep.form_residual, rep.energy_residual, rep.time_component_residual)
    res = {"generator": comps, "lift": lift, "form_residual": rep.form_residual,
           "energy_residual": rep.energy_residual, "dynamical_residual": dyn.residual,
           "f_at_samples": rep.f_values, "samples": pts}
    if dyn.conformal_factor is not None:
        res["conformal_factor"] = dyn.conformal_factor
    noether = worst <= analysis.POINTWISE_TOL
    res["noether"] = noether
    passed = noether if args.expect == "noether" else (not noether if args.expect == "none" else True)
    return {"command": "symmetry", "system": spec.id, "results": res, "passed": passed}


def _grid(text: str, names: Sequence[str]) -> np.ndarray:
    """``q=a:b:n[,r=a:b:n]`` -> cartesian product of linspaces."""
    axes = {}
    for item in text.split(","):
        k, rng = item.split("=")
        a, b, n = rng.split(":")
        axes[k.strip()] = np.linspace(float(a), float(b), int(n))
    missing = [n for n in names if n not in axes]
    if missing:
        raise UsageError(f"grid lacks coordinate(s): {', '.join(missing)}")
    mesh = np.meshgrid(*[axes[n] for n in names], indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def cmd_hj(args) -> dict:
    spec = resolve_system(args.system)
    if spec.family != "symplectic" or spec.h is None:
        raise UsageError("hj needs an autonomous system with a hamiltonian")
    q = spec.coordinates
    P = dict(spec.params)
    P.update(parse_point(args.param))
    if args.S:
        S = parse(args.S, q)
    elif args.dS:
        S = [parse(t, q) for t in args.dS.split(";")]
    else:
        raise UsageError("hj needs --S or --dS")
    pts = _grid(args.grid, q)
    dev, X = symplectic.hj_residual(spec.h, S, spec.chart, pts, P)
    passed = dev <= args.tol_hj
    return {"command": "hj", "system": spec.id,
            "results": {"deviation": dev, "tolerance": args.tol_hj, "points": len(pts),
                        "field_first": X[0], "field_last": X[-1]},
            "passed": passed}


def cmd_geodesic(args) -> dict:
    spec = resolve_system(args.system)
    if spec.family != "riemann":
        raise UsageError(f"{spec.id} is not a riemann-newton system")
    span = parse_span(args.tspan) or tuple(spec.t_span)
    cfg = integrator_config(args)
    traj = analysis.simulate(spec, "tangent", span, cfg, None, parse_point(args.point))
    n = spec.n
    g = spec.metric_field
    speed = np.array([riemann.kinetic_norm(g, x[:n], x[n:], spec.params) for x in traj.states])
    drift = float(np.max(np.abs(speed - speed[0])))
    checks = [{"quantity": "speed", "max_drift": drift, "tolerance": args.tol_speed,
               "passed": drift <= args.tol_speed or spec.force is not None
               or spec.potential is not None}]
    for q in spec.quantities:
        s = analysis.quantity_summary(spec, q, traj)
        if s is not None:
            checks.append(s)
    if args.out:
        write_trajectory(traj, args.out, args.format, spec)
    return {"command": "geodesic", "system": spec.id, "t_span": list(span),
            "final_state": dict(zip(traj.names, traj.states[-1])),
            "results": checks, "passed": expectations([c for c in checks if "passed" in c])}


def cmd_validate(args) -> dict:
    spec = load(args.file)
    return {"command": "validate", "file": str(args.file), "system": spec.id,
            "formalism": spec.formalism, "n": spec.n, "passed": True}


def cmd_list(args) -> dict:
    items = [{"id": i, "formalism": f} for i, f in registry.list_systems()]
    return {"command": "list", "systems": items, "passed": True}


def cmd_export(args) -> dict:
    doc = registry.export(args.id)
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    return {"command": "export", "system": args.id, "document": doc, "passed": True}


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mechkit", description=__doc__.strip().splitlines()[0])
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, point=True):
        sp.add_argument("--system", required=True, help="registry id or JSON file")
        if point:
            sp.add_argument("--point", help="name=value,... coordinates")

    sp = sub.add_parser("derive", help="field components and derived data at a point")
    common(sp)
    sp.add_argument("--side", choices=("tangent", "cotangent", "unified"))
    sp.set_defaults(func=cmd_derive)

    sp = sub.add_parser("simulate", help="integrate a trajectory and write it")
    common(sp)
    sp.add_argument("--side", choices=("tangent", "cotangent", "unified"))
    sp.add_argument("--tspan")
    sp.add_argument("--dt", type=float, help="output spacing (and step for rk4)")
    sp.add_argument("--tol", type=float, help="integrator rtol = atol")
    sp.add_argument("--method", choices=("dopri5", "rk4"), default="dopri5")
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("check", help="run the structural check battery")
    sp.add_argument("--system")
    sp.add_argument("--all", action="store_true")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("symmetry", help="Noether / dynamical symmetry check of a generator")
    common(sp, point=False)
    sp.add_argument("--generator", required=True,
                    help="comma-separated components (configuration field or full phase field)")
    sp.add_argument("--expect", choices=("noether", "none", "any"), default="any")
    sp.add_argument("--samples", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_symmetry)

    sp = sub.add_parser("hj", help="Hamilton-Jacobi residual of a generating function")
    common(sp, point=False)
    sp.add_argument("--S", help="generating function S(q)")
    sp.add_argument("--dS", help="';'-separated partial derivatives of S")
    sp.add_argument("--param", help="extra parameters name=value,...")
    sp.add_argument("--grid", required=True, help="q=a:b:n[,...]")
    sp.add_argument("--tol-hj", dest="tol_hj", type=float, default=1e-8)
    sp.set_defaults(func=cmd_hj)

    sp = sub.add_parser("geodesic", help="integrate a Newtonian/geodesic system")
    common(sp)
    sp.add_argument("--tspan")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--method", choices=("dopri5", "rk4"), default="dopri5")
    sp.add_argument("--tol-speed", dest="tol_speed", type=float, default=1e-8)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_geodesic)

    sp = sub.add_parser("validate", help="validate a system file against the schema")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("list", help="list registered systems")
    sp.set_defaults(func=cmd_list)

    sp = sub.add_parser("export", help="export a registered system as JSON")
    sp.add_argument("id")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_export)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        body = args.func(args)
    except (UsageError, SystemError, ExprError, SingularLagrangian, OffConstraint,
            IntegrationError, ArithmeticError, OSError, ValueError) as exc:
        log.error("%s", exc)
        body = {"command": args.command, "error": f"{type(exc).__name__}: {exc}",
                "passed": False}
    return finish(body, args, time.perf_counter() - t0)


if __name__ == "__main__":
    sys.exit(main())
