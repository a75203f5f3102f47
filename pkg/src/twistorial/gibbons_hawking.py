"""Gibbons-Hawking metrics ``g = u h + u^-1 (dt + A)^2`` from monopole data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature4 import Metric4, MetricError, assemble_twistorial_metric
from .expr import Chart, Expr, ExprError, as_expr, parse_expr
from .exterior3 import (
    Frame3,
    Metric3,
    OneForm3,
    adapted_frame,
    codifferential,
    exterior_derivative,
    hessian,
    hodge_star,
    norm,
    norm_values,
    ricci3,
    scalar_curvature3,
    sym_matrix_values,
    values,
)

GRADIENT_FLOOR = 1e-6
CURVATURE_FLOOR = 1e-6
MONOPOLE_TOL = 1e-8


class GHDataError(ExprError):
    pass


@dataclass
class GHData:
    """Monopole data ``(u, A)`` on ``(N, h)`` with fibre coordinate ``t``."""

    h: Metric3
    u: Expr
    A: OneForm3
    fiber: str = "t"
    fiber_interval: tuple = (0.0, 1.0)
    name: str = "gh"

    def __post_init__(self):
        chart = self.h.chart
        if isinstance(self.u, str):
            self.u = parse_expr(self.u, chart)
        self.u = as_expr(self.u)
        if not isinstance(self.A, OneForm3):
            self.A = OneForm3(tuple(parse_expr(c, chart) if isinstance(c, str) else c for c in self.A), chart.coords)

    @property
    def chart(self) -> Chart:
        return self.h.chart

    @property
    def du(self) -> OneForm3:
        return exterior_derivative(self.u, self.chart)

    @property
    def du_norm(self) -> Expr:
        return norm(self.du, self.h)

    @property
    def dA(self):
        return exterior_derivative(self.A)


def verify_monopole(data: GHData, points) -> dict:
    """Residuals ``max |du - *dA|`` and ``max |d*du|``, plus the standing-assumption margins."""
    h = data.h
    chart = data.chart
    chart.guard(points)
    mono = data.du - hodge_star(data.dA, h)
    lap = codifferential(data.du, h)
    u = values(data.u, chart, points)
    return {
        "monopole": float(np.max(norm_values(mono, h, points))),
        "harmonic": float(np.max(np.abs(values(lap, chart, points)))),
        "min_u": float(np.min(u)),
        "min_dA": float(np.min(norm_values(data.dA, h, points))),
    }


def validate(data: GHData, points, tol: float = MONOPOLE_TOL) -> dict:
    """Raise :class:`GHDataError` unless the data satisfy every invariant at ``points``."""
    rep = verify_monopole(data, points)
    if rep["min_u"] <= 0:
        raise GHDataError("u must be positive on the sampled domain")
    if rep["monopole"] > tol:
        raise GHDataError(f"monopole equation fails: residual {rep['monopole']:.3g}")
    if rep["harmonic"] > tol:
        raise GHDataError(f"u is not harmonic: residual {rep['harmonic']:.3g}")
    if rep["min_dA"] < CURVATURE_FLOOR:
        raise GHDataError("dA vanishes at a sample point")
    return rep


def gh_build(data: GHData, samples=None, check=True) -> Metric4:
    """Assemble the Gibbons-Hawking metric with ``lam^-2 = u`` and ``theta = dt + A``.

    ``samples`` are 4-dimensional points; when given (and ``check``) the
    data are validated on their base projection first.
    """
    if samples is not None:
        base = np.asarray(samples)[:, :3]
        if check:
            validate(data, base)
        elif np.any(values(data.u, data.chart, base) <= 0):
            raise MetricError("u must be positive on the sampled domain")
    theta = list(data.A.comps) + [1]
    g = assemble_twistorial_metric(
        data.h, data.u, theta, data.fiber, data.fiber_interval, samples=samples, kind="gibbons-hawking"
    )
    if samples is None:
        g.c = 0.0
    return g


def box_center(chart: Chart):
    if chart.box is None or any(b is None for b in chart.box):
        raise GHDataError("a bounded box is needed to seed the frame")
    return [0.5 * (lo + hi) for lo, hi in chart.box]


def gh_frame(data: GHData, samples=None, center=None) -> Frame3:
    """Frame with ``Z = grad u / |du|``; ``X(u) = Y(u) = 0``."""
    if samples is not None:
        dn = norm_values(data.du, data.h, np.asarray(samples)[:, :3])
        if np.min(dn) < GRADIENT_FLOOR:
            raise GHDataError("|du| below floor; frame undefined")
    return adapted_frame(data.du, data.h, box_center(data.chart) if center is None else center)


def fiber_diagnostic(data: GHData, points) -> dict:
    """Second fundamental form and intrinsic curvature of the level sets of ``u``.

    With unit normal ``grad u / |du|`` the second fundamental form is
    ``Hess u / |du|`` on the tangent plane; the intrinsic curvature follows
    from the Gauss equation using the ambient sectional curvature of the
    tangent plane.
    """
    h, chart = data.h, data.chart
    points = np.asarray(points)
    dn = norm_values(data.du, h, points)
    if np.min(dn) < GRADIENT_FLOOR:
        raise GHDataError("|du| below floor")
    fr = gh_frame(data)
    F = fr.values(chart, points)
    H = sym_matrix_values(hessian(data.u, h), chart, points)
    T = F[:, :2]
    II = np.einsum("nia,nab,njb->nij", T, H, T) / dn[:, None, None]
    # sectional curvature of span(X, Y) in dimension three: P(X,X) + P(Y,Y), P = Ric - s h / 4
    Ric = sym_matrix_values(ricci3(h), chart, points)
    s = values(scalar_curvature3(h), chart, points)
    hh, _ = h.numeric(points)
    P = Ric - 0.25 * s[:, None, None] * hh
    sec = np.einsum("na,nab,nb->n", T[:, 0], P, T[:, 0]) + np.einsum("na,nab,nb->n", T[:, 1], P, T[:, 1])
    gauss = sec + np.linalg.det(II)
    ii_norm = np.sqrt(np.einsum("nij,nij->n", II, II))
    return {
        "second_fundamental_form": float(np.max(ii_norm)),
        "induced_curvature": float(np.max(np.abs(gauss))),
        "argmax_second_fundamental_form": points[int(np.argmax(ii_norm))].tolist(),
    }
