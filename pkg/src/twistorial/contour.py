"""Laurent-coefficient extraction by trapezoid quadrature on a circle.

``(1/2 pi i) \\oint rho^m T d rho`` over ``|rho| = r`` becomes, with nodes
``rho_k = r exp(2 pi i k / K)``, the sum ``(1/K) sum_k rho_k^(m+1) T(rho_k)``.
For a finite Laurent polynomial whose degree span is below ``K`` the result
is exactly the coefficient of ``rho^(-m-1)``.
"""

from __future__ import annotations

import warnings

import numpy as np

from .expr import Chart, Expr, add, as_expr, const, mul, subs


class AliasingWarning(UserWarning):
    pass


def nodes(radius: float, K: int) -> np.ndarray:
    if K < 1:
        raise ValueError("need at least one quadrature node")
    if not radius > 0:
        raise ValueError("radius must be positive")
    return radius * np.exp(2j * np.pi * np.arange(K) / K)


def check_aliasing(degree_span: int | None, K: int) -> bool:
    """Warn when a Laurent degree span exceeds ``K/2 - 1``; returns True if it did."""
    if degree_span is not None and degree_span > K / 2 - 1:
        warnings.warn(
            f"Laurent degree span {degree_span} exceeds K/2 - 1 = {K / 2 - 1:g}; coefficients may alias",
            AliasingWarning,
            stacklevel=3,
        )
        return True
    return False


def contour_moment(T, m: int, radius: float = 1.0, K: int = 64, *, fiber: str = "rho",
                   chart: Chart | None = None, points=None, degree_span: int | None = None):
    """``(1/2 pi i) \\oint rho^m T d rho`` on ``|rho| = radius`` with ``K`` nodes.

    ``T`` is an expression or a sequence of expressions (e.g. tensor
    components) in the fibre variable and, optionally, base coordinates.
    Returns a complex array of shape ``(len(T), n)`` (or ``(n,)`` for a
    single expression) evaluated at the base ``points`` of ``chart``; with
    no chart the expressions must depend on the fibre variable only and a
    scalar (or 1-d array) is returned.
    """
    single = isinstance(T, Expr) or not hasattr(T, "__iter__")
    exprs = [as_expr(T)] if single else [as_expr(e) for e in T]
    check_aliasing(degree_span, K)
    rk = nodes(radius, K)
    w = rk ** (m + 1) / K
    if chart is None:
        from .expr import evaluate

        vals = np.array(evaluate(exprs, {fiber: rk}))  # (len, K)
        out = vals @ w
        return out[0] if single else out
    pts = np.asarray(points, dtype=float)
    chart.guard(pts)
    n = len(pts)
    env = {c: pts[:, i][:, None] for i, c in enumerate(chart.coords)}
    env[fiber] = rk[None, :]
    from .expr import evaluate

    vals = np.array(evaluate(exprs, env))  # (len, n, K)
    out = vals @ w
    return out[0] if single else out.reshape(len(exprs), n)


def moment_expr(T, m: int, radius: float = 1.0, K: int = 64, fiber: str = "rho") -> Expr:
    """Symbolic form of the quadrature: ``(1/K) sum_k rho_k^(m+1) T(rho_k)``.

    Each node is substituted into ``T``, so the result is an expression in
    the remaining (base) coordinates that can be differentiated exactly.
    """
    rk = nodes(radius, K)
    terms = [mul(const(complex(r ** (m + 1) / K)), subs(T, {fiber: const(complex(r))})) for r in rk]
    return add(*terms)
