"""Command-line entry point.

Subcommands: ``catalogue``, ``verify``, ``propagate`` and ``contour``.
Every run that produces residuals exits 0 exactly when all of them are
within tolerance, 1 when a check fails and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import catalogue
from .beltrami import BeltramiData, beltrami_build, beltrami_frame
from .contour import AliasingWarning
from .curvature4 import ricci_from_jet, tensor_norm, weyl_asd_norm
from .expr import ExprError, parse_expr
from .exterior3 import hodge_laplacian, hodge_star, norm_values
from .gibbons_hawking import GHData, gh_build, gh_frame
from .report import dumps, make_report
from .sampling import DEFAULT_SEED, lattice, parse_box, total_samples
from .series_engine import FlowSeries, einstein_and_selfdual_criteria, gh_constraint_residuals, gh_propagate
from .soliton_check import SolitonCandidate, report, ricci_structure_check, twistoriality_check

GUARD_LATTICE = 9

CHECKS = {
    # name: (applies to, default tolerance)
    "ricci-flat": ("any", 1e-8),
    "self-dual": ("any", 1e-6),
    "monopole": ("gibbons-hawking", 1e-8),
    "beltrami-eq": ("beltrami", 1e-10),
    "hodge-laplace": ("beltrami", 1e-6),
    "twistoriality": ("any", 1e-10),
    "ricci-structure": ("any", 1e-7),
}

DEFAULTS = {"seed": DEFAULT_SEED, "tol": None, "box": None, "fiber": None, "json": None}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def _interval(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    (iv,) = parse_box(text)
    return iv


def _box(value):
    if value is None:
        return None
    if isinstance(value, str):
        return parse_box(value)
    return tuple((float(lo), float(hi)) for lo, hi in value)


def resolve(args, keys) -> dict:
    """Merge flags over a JSON config file over defaults."""
    cfg = {k: DEFAULTS.get(k) for k in keys}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(loaded) - set(keys)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def load_example(example_id, box, fiber):
    """Example data on the requested box, with the box checked against singular loci."""
    try:
        entry = catalogue.CATALOGUE[example_id]
    except KeyError:
        raise UsageError(f"unknown example {example_id!r}; known: {', '.join(catalogue.CATALOGUE)}") from None
    box = box or entry.box
    fiber = fiber or entry.fiber
    if len(box) != 3:
        raise UsageError("the box needs three intervals")
    data = catalogue.get(example_id, box, fiber)
    try:
        data.chart.guard(lattice(box, GUARD_LATTICE))
    except ExprError as exc:
        raise UsageError(f"box rejected for {example_id}: {exc}") from None
    if isinstance(data, BeltramiData) and not fiber[0] > 0:
        raise UsageError("the rho-interval must stay away from 0")
    return entry, data, tuple(box), tuple(fiber)


def _emit(rep, path):
    text = dumps(rep)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# verify


def run_check(name, data, samples, tol):
    """Residual summary for one named check on 4-dimensional ``samples``."""
    kind = "beltrami" if isinstance(data, BeltramiData) else "gibbons-hawking"
    base = samples[:, :3]
    h = data.h
    if name == "monopole":
        mono = data.du - hodge_star(data.dA, h)
        return report(name, norm_values(mono, h, base), tol)
    if name == "beltrami-eq":
        return report(name, norm_values(data.dA + hodge_star(data.A, h).scale(2), h, base), tol)
    if name == "hodge-laplace":
        return report(name, norm_values(hodge_laplacian(data.A, h) - data.A.scale(4), h, base), tol)
    g = beltrami_build(data, samples) if kind == "beltrami" else gh_build(data, samples)
    frame = beltrami_frame(data, samples) if kind == "beltrami" else gh_frame(data, samples)
    if name == "ricci-flat":
        jet = g.jet(samples)
        return report(name, tensor_norm(ricci_from_jet(jet), jet.ginv), tol)
    if name == "self-dual":
        return report(name, weyl_asd_norm(g, samples), tol)
    if name == "twistoriality":
        return twistoriality_check(g, frame, samples, tol)
    if name == "ricci-structure":
        rep = ricci_structure_check(g, h, g.c, samples, frame, tol)
        rep.pop("horizontal_tensor")
        rep.pop("ricci")
        return rep
    raise UsageError(f"unknown check {name!r}")


def cmd_verify(args) -> int:
    cfg = resolve(args, ["example", "check", "box", "fiber", "tol", "seed", "json"])
    if not cfg.get("example") or not cfg.get("check"):
        raise UsageError("verify needs --example and --check")
    if cfg["check"] not in CHECKS:
        raise UsageError(f"unknown check {cfg['check']!r}; known: {', '.join(CHECKS)}")
    applies, default_tol = CHECKS[cfg["check"]]
    entry, data, box, fiber = load_example(cfg["example"], _box(cfg["box"]), _interval(cfg["fiber"]))
    if applies != "any" and entry.kind != applies:
        raise UsageError(f"check {cfg['check']} applies to {applies} examples only")
    tol = float(cfg["tol"]) if cfg["tol"] is not None else default_tol
    seed = int(cfg["seed"])
    samples = total_samples(box, fiber, seed)
    rep = run_check(cfg["check"], data, samples, tol)
    out = make_report(entry.id, cfg["check"], box, fiber, rep["samples"], seed,
                      rep["max_abs_residual"], rep["mean_abs_residual"], tol, rep["pass"])
    _emit(out, cfg["json"])
    return 0 if out["pass"] else 1


# ---------------------------------------------------------------------------
# propagate


def cmd_propagate(args) -> int:
    cfg = resolve(args, ["example", "box", "fiber", "seed", "json", "tol"])
    entry, data, box, fiber = load_example(cfg["example"], _box(cfg["box"]), _interval(cfg["fiber"]))
    if not isinstance(data, GHData):
        raise UsageError("propagate applies to gibbons-hawking examples")
    try:
        section = FlowSeries.from_text(Path(args.section).read_text(), data.chart, data.fiber)
    except OSError as exc:
        raise UsageError(f"cannot read section file: {exc}") from None
    if section.kind != "taylor" or any(j != 0 for j in section.coeffs):
        raise UsageError("a section file holds 'kind taylor' and order-0 lines only")
    tol = float(cfg["tol"]) if cfg["tol"] is not None else 1e-8
    seed = int(cfg["seed"])
    samples = total_samples(box, fiber, seed)
    frame = gh_frame(data, samples)
    series = gh_propagate(data, *(section.get(0, k) for k in ("f", "x", "y", "z")), section.a, args.order, frame)
    if args.out:
        Path(args.out).write_text(series.to_text())
    else:
        sys.stderr.write(series.to_text())
    cons = gh_constraint_residuals(data, series, samples[:, :3], frame, tol)
    orders = {str(j): r["max_abs_residual"] for j, r in cons["orders"].items()}
    vals = [r["max_abs_residual"] for r in cons["orders"].values()]
    means = [r["mean_abs_residual"] for r in cons["orders"].values()]
    out = make_report(entry.id, "propagate", box, fiber, len(samples), seed,
                      max(vals, default=0.0), float(np.mean(means)) if means else 0.0, tol, cons["pass"],
                      details={"order": args.order, "per_order_max": orders})
    _emit(out, cfg["json"])
    return 0 if out["pass"] else 1


# ---------------------------------------------------------------------------
# contour


def read_flow(text, chart4, fiber):
    """A Laurent flow file; ``*`` in the index column marks a closed-form coefficient."""
    laurent_lines, closed = [], {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line.startswith("*"):
            _, name, expr = line.split(None, 2)
            if name not in ("f", "x", "y", "z"):
                raise UsageError(f"closed-form coefficient must be f, x, y or z, got {name!r}")
            closed[name] = parse_expr(expr, chart4)
        else:
            laurent_lines.append(raw)
    series = FlowSeries.from_text("\n".join(laurent_lines), chart4, fiber)
    if series.kind != "laurent":
        raise UsageError("a flow file holds a Laurent series ('kind laurent')")
    cand = series.partial_sum()
    parts = {k: getattr(cand, k) for k in ("f", "x", "y", "z")}
    for k, e in closed.items():
        parts[k] = e if parts[k].is_zero() else parts[k] + e
    span = None if closed else (series.j_max - series.j_min + 2 if series.coeffs else 0)
    return SolitonCandidate(*(parts[k] for k in ("f", "x", "y", "z")), series.a), span


def cmd_contour(args) -> int:
    cfg = resolve(args, ["example", "box", "fiber", "seed", "json", "tol"])
    entry, data, box, fiber = load_example(cfg["example"], _box(cfg["box"]), _interval(cfg["fiber"]))
    if not isinstance(data, BeltramiData):
        raise UsageError("contour applies to beltrami examples")
    chart4 = data.chart.extend(data.fiber)
    try:
        cand, span = read_flow(Path(args.flow).read_text(), chart4, data.fiber)
    except OSError as exc:
        raise UsageError(f"cannot read flow file: {exc}") from None
    tol = float(cfg["tol"]) if cfg["tol"] is not None else 1e-8
    seed = int(cfg["seed"])
    samples = total_samples(box, fiber, seed)
    base = samples[:, :3]
    moments = sorted({args.m, 1})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AliasingWarning)
        crit = einstein_and_selfdual_criteria(data, cand, base, args.radius, args.nodes, tol=tol,
                                              metric_points=samples, moments=moments, degree_span=span)
    aliasing = any(issubclass(w.category, AliasingWarning) for w in caught)
    for msg in dict.fromkeys(str(w.message) for w in caught):
        sys.stderr.write(f"warning: {msg}\n")
    hinv = data.h.numeric(base)[1]
    M = crit["M"][args.m]
    m_norm = np.sqrt(np.abs(np.einsum("nij,nik,njl,nkl->n", M, hinv, hinv, np.conj(M))))
    obstruction = crit["obstruction"]
    o_norm = np.sqrt(np.abs(np.einsum("nij,nik,njl,nkl->n", obstruction, hinv, hinv, np.conj(obstruction))))
    details = {
        "m": args.m, "radius": args.radius, "nodes": args.nodes, "aliasing": aliasing,
        "moment_max_norm": float(np.max(m_norm)),
        "moment_trace_free_max": crit["trace_free_moments"][args.m],
        "einstein": crit["einstein_contour"], "self_dual": crit["selfdual_contour"],
        "einstein_metric": crit["einstein_metric"], "self_dual_metric": crit["selfdual_metric"],
        "verdicts_agree": crit["verdicts_agree"], "obstruction_gap": crit["obstruction_gap"],
    }
    passed = bool(crit["einstein_contour"] and crit["verdicts_agree"])
    out = make_report(entry.id, "contour-einstein", box, fiber, len(base), seed,
                      float(np.max(o_norm)), float(np.mean(o_norm)), tol, passed, details=details)
    _emit(out, cfg["json"])
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# catalogue


def cmd_catalogue(args) -> int:
    rows = catalogue.listing(args.kind)
    if args.json:
        sys.stdout.write(dumps(rows))
    else:
        for r in rows:
            sys.stdout.write(f"{r['id']:<12} {r['kind']:<16} {r['description']}  [singular: {r['singular']}]\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twistorial", description="Twistorial metrics and Ricci-soliton checks.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalogue", help="list the built-in examples")
    c.add_argument("--json", action="store_true", help="print a JSON array")
    c.add_argument("--kind", help="filter by construction kind (gibbons-hawking or beltrami)")
    c.set_defaults(func=cmd_catalogue)

    def common(q):
        q.add_argument("--example", help="catalogue id")
        q.add_argument("--box", help='sample box, e.g. "-1:1,-1:1,0.5:1.5"')
        q.add_argument("--fiber", help='fibre interval, e.g. "0:1"')
        q.add_argument("--tol", type=float)
        q.add_argument("--seed", type=int)
        q.add_argument("--json", help="write the report to this path instead of stdout")
        q.add_argument("--config", help="JSON config file; flags take precedence")

    v = sub.add_parser("verify", help="run one structural check on an example")
    common(v)
    v.add_argument("--check", help=", ".join(CHECKS))
    v.set_defaults(func=cmd_verify)

    pr = sub.add_parser("propagate", help="propagate section data to a Taylor series")
    common(pr)
    pr.add_argument("--section", required=True, help="section file (kind taylor, order-0 lines)")
    pr.add_argument("--order", type=int, default=4)
    pr.add_argument("--out", help="write the propagated series here (default: stderr)")
    pr.set_defaults(func=cmd_propagate)

    co = sub.add_parser("contour", help="contour moments and Einstein/self-dual verdicts")
    common(co)
    co.add_argument("--flow", required=True, help="flow file (kind laurent; '*' lines for closed forms)")
    co.add_argument("--m", type=int, default=1)
    co.add_argument("--radius", type=float, default=1.0)
    co.add_argument("--nodes", type=int, default=64)
    co.set_defaults(func=cmd_contour)
    return p


def _attach_values(argv):
    """Glue ``--box -1:1,...`` into ``--box=-1:1,...`` so a leading minus is not read as a flag."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--box", "--fiber"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_attach_values(argv))
    try:
        return args.func(args)
    except (UsageError, ExprError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"error: {msg}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
