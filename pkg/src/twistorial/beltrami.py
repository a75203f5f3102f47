"""Beltrami-field metrics ``g = rho^2 h + rho^-2 (rho drho + A)^2``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature4 import Metric4, MetricError, assemble_twistorial_metric
from .expr import Chart, Expr, ExprError, parse_expr, var
from .exterior3 import (
    Frame3,
    Metric3,
    OneForm3,
    adapted_frame,
    exterior_derivative,
    hodge_laplacian,
    hodge_star,
    norm,
    norm_values,
)
from .gibbons_hawking import box_center

NORM_FLOOR = 1e-6
BELTRAMI_TOL = 1e-8
LAPLACE_TOL = 1e-6


class BeltramiDataError(ExprError):
    pass


@dataclass
class BeltramiData:
    """A 1-form ``A`` with ``dA + 2*A = 0`` on ``(N, h)``; fibre coordinate ``rho``."""

    h: Metric3
    A: OneForm3
    fiber: str = "rho"
    fiber_interval: tuple = (0.5, 2.0)
    name: str = "bel"

    def __post_init__(self):
        chart = self.h.chart
        if not isinstance(self.A, OneForm3):
            self.A = OneForm3(tuple(parse_expr(c, chart) if isinstance(c, str) else c for c in self.A), chart.coords)

    @property
    def chart(self) -> Chart:
        return self.h.chart

    @property
    def A_norm(self) -> Expr:
        return norm(self.A, self.h)

    @property
    def dA(self):
        return exterior_derivative(self.A)


def verify_beltrami(data: BeltramiData, points) -> dict:
    """``max |dA + 2*A|``, ``max |Delta A - 4A|`` and ``min |A|`` at ``points``."""
    h = data.h
    data.chart.guard(points)
    bel = data.dA + hodge_star(data.A, h).scale(2)
    lap = hodge_laplacian(data.A, h) - data.A.scale(4)
    return {
        "beltrami": float(np.max(norm_values(bel, h, points))),
        "hodge_laplace": float(np.max(norm_values(lap, h, points))),
        "min_A": float(np.min(norm_values(data.A, h, points))),
    }


def validate(data: BeltramiData, points) -> dict:
    rep = verify_beltrami(data, points)
    if rep["beltrami"] > BELTRAMI_TOL:
        raise BeltramiDataError(f"Beltrami equation fails: residual {rep['beltrami']:.3g}")
    if rep["hodge_laplace"] > LAPLACE_TOL:
        raise BeltramiDataError(f"Hodge-Laplace eigen-equation fails: residual {rep['hodge_laplace']:.3g}")
    if rep["min_A"] < NORM_FLOOR:
        raise BeltramiDataError("|A| below floor at a sample point")
    return rep


def beltrami_build(data: BeltramiData, samples=None, check=True) -> Metric4:
    """Assemble the metric with ``lam^-2 = rho^2`` and ``theta = rho drho + A`` (so ``c = 2``)."""
    lo, hi = data.fiber_interval
    if not lo > 0:
        raise MetricError("the rho-interval must stay away from 0")
    if samples is not None and check:
        validate(data, np.asarray(samples)[:, :3])
    rho = var(data.fiber)
    theta = list(data.A.comps) + [rho]
    return assemble_twistorial_metric(
        data.h, rho**2, theta, data.fiber, data.fiber_interval, samples=samples, kind="beltrami"
    )


def beltrami_frame(data: BeltramiData, samples=None, center=None) -> Frame3:
    """Frame with ``Z = A# / |A|``; ``A(X) = A(Y) = 0``."""
    if samples is not None:
        an = norm_values(data.A, data.h, np.asarray(samples)[:, :3])
        if np.min(an) < NORM_FLOOR:
            raise BeltramiDataError("|A| below floor; frame undefined")
    return adapted_frame(data.A, data.h, box_center(data.chart) if center is None else center)
