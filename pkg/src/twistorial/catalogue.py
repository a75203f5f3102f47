"""Named example data for both constructions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .beltrami import BeltramiData
from .expr import Chart, Locus
from .exterior3 import Metric3
from .gibbons_hawking import GHData

COORDS = ("x", "y", "z")

# Dirac-type potential of a unit-charge pole at height c: the monopole
# partner of 1/(2 r) in the gauge singular along the whole z-axis.
_POLE_U = "1/(2*sqrt(x^2 + y^2 + (z - {c})^2))"
_POLE_A = "((z - {c})/(2*sqrt(x^2 + y^2 + (z - {c})^2)))*({s})/(x^2 + y^2)"

ABC_CONSTANTS = (1.0, 0.7, 0.4)


def _axis_distance(env):
    return np.sqrt(env["x"] ** 2 + env["y"] ** 2)


def _pole_distance(c):
    def dist(env):
        return np.sqrt(env["x"] ** 2 + env["y"] ** 2 + (env["z"] - c) ** 2)

    return dist


@dataclass(frozen=True)
class Entry:
    id: str
    kind: str
    description: str
    singular: str
    box: tuple
    fiber: tuple
    make: Callable


def _gh_linear(box=None, fiber=None):
    e = CATALOGUE["gh.linear"]
    chart = Chart(COORDS, box or e.box, (Locus("u = z vanishes on z = 0", lambda env: env["z"], 1e-6),))
    return GHData(Metric3.euclidean(chart), "z", ("0", "x", "0"), "t", fiber or e.fiber, e.id)


def _pole_terms(centres):
    u = " + ".join(["1"] + [_POLE_U.format(c=c) for c in centres])
    ax = " + ".join(_POLE_A.format(c=c, s="-y") for c in centres)
    ay = " + ".join(_POLE_A.format(c=c, s="x") for c in centres)
    return u, (ax, ay, "0")


def _gh_poles(entry_id, centres):
    def make(box=None, fiber=None):
        e = CATALOGUE[entry_id]
        loci = [Locus("z-axis (Dirac string of A)", _axis_distance, 1e-3)]
        loci += [Locus(f"pole at (0, 0, {c})", _pole_distance(c), 1e-3) for c in centres]
        chart = Chart(COORDS, box or e.box, loci)
        u, A = _pole_terms(centres)
        return GHData(Metric3.euclidean(chart), u, A, "t", fiber or e.fiber, e.id)

    return make


def _bel_planar(box=None, fiber=None):
    e = CATALOGUE["bel.planar"]
    chart = Chart(COORDS, box or e.box)
    return BeltramiData(Metric3.euclidean(chart), ("cos(2*z)", "sin(2*z)", "0"), "rho", fiber or e.fiber, e.id)


def abc_one_form(a=ABC_CONSTANTS[0], b=ABC_CONSTANTS[1], c=ABC_CONSTANTS[2]):
    """Components of ``v(-2p)`` for the ABC field ``v`` with ``curl v = v``."""
    return (
        f"-{a}*sin(2*z) + {c}*cos(2*y)",
        f"-{b}*sin(2*x) + {a}*cos(2*z)",
        f"-{c}*sin(2*y) + {b}*cos(2*x)",
    )


def _bel_abc(box=None, fiber=None):
    e = CATALOGUE["bel.abc"]
    chart = Chart(COORDS, box or e.box)
    return BeltramiData(Metric3.euclidean(chart), abc_one_form(), "rho", fiber or e.fiber, e.id)


CATALOGUE = {
    e.id: e
    for e in [
        Entry("gh.linear", "gibbons-hawking", "u = z, A = x dy over flat space", "u vanishes on z = 0",
              ((-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5)), (0.0, 1.0), _gh_linear),
        Entry("gh.pole1", "gibbons-hawking", "u = 1 + 1/(2r), Dirac-type A", "pole at the origin; A singular on the z-axis",
              ((0.5, 1.5), (-0.5, 0.5), (-0.5, 0.5)), (0.0, 1.0), _gh_poles("gh.pole1", (0.0,))),
        Entry("gh.pole2", "gibbons-hawking", "two poles at z = +-1/2", "poles at (0, 0, +-1/2); A singular on the z-axis",
              ((0.5, 1.5), (-0.5, 0.5), (-0.5, 0.5)), (0.0, 1.0), _gh_poles("gh.pole2", (0.5, -0.5))),
        Entry("bel.planar", "beltrami", "A = cos(2z) dx + sin(2z) dy, |A| = 1", "none",
              ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)), (0.5, 2.0), _bel_planar),
        Entry("bel.abc", "beltrami", "ABC field (1, 0.7, 0.4) composed with p -> -2p",
              "|A| kept above floor only on the default box",
              ((-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)), (0.5, 2.0), _bel_abc),
    ]
}


def get(example_id: str, box=None, fiber=None):
    """Data object for ``example_id`` on its default (or the given) box."""
    try:
        entry = CATALOGUE[example_id]
    except KeyError:
        raise KeyError(f"unknown example {example_id!r}; known: {', '.join(CATALOGUE)}") from None
    return entry.make(box, fiber)


def listing(kind: str | None = None):
    rows = []
    for e in CATALOGUE.values():
        if kind is not None and not e.kind.startswith(kind):
            continue
        rows.append({"id": e.id, "kind": e.kind, "description": e.description, "singular": e.singular,
                     "box": [list(b) for b in e.box], "fiber": list(e.fiber)})
    return rows
