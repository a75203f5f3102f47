"""Exterior and Riemannian calculus on an oriented 3-dimensional chart.

All operations are symbolic: components are :class:`~twistorial.expr.Expr`
trees and results are exact up to the light simplification of the
expression engine. Numeric checks go through :func:`values`.

Conventions
-----------
* A 2-form is stored by its components on ``(dy^dz, dz^dx, dx^dy)``.
* ``*`` uses the volume form ``orientation * sqrt(det h) dx^dy^dz``;
  on Euclidean space ``*dz = dx^dy``.
* ``d*`` is the formal adjoint of ``d``: ``-*d*`` on 1-forms and ``*d*`` on
  2-forms in dimension three, so ``d*(x dx) = -1`` on Euclidean space.
* ``a x b = *(a ^ b)`` for 1-forms and ``a . b = (a(x)b + b(x)a)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .expr import (
    ZERO,
    Chart,
    Expr,
    ExprError,
    add,
    as_expr,
    div,
    mul,
    neg,
    parse_expr,
    sqrt,
)

HALF = Fraction(1, 2)


class SingularMetricError(ExprError):
    pass


def _e(x):
    return as_expr(x)


def _diff(e, c):
    return _e(e).diff(c)


@dataclass(frozen=True)
class _Comps:
    comps: tuple
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(_e(c) for c in self.comps))
        object.__setattr__(self, "coords", tuple(self.coords))
        if len(self.comps) != self._n:
            raise ExprError(f"{type(self).__name__} needs {self._n} components")

    def __getitem__(self, i):
        return self.comps[i]

    def __iter__(self):
        return iter(self.comps)

    def _same(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} and {type(other).__name__}")
        return other

    def __add__(self, other):
        other = self._same(other)
        return type(self)(tuple(add(a, b) for a, b in zip(self, other)), self.coords)

    def __sub__(self, other):
        other = self._same(other)
        return type(self)(tuple(add(a, neg(b)) for a, b in zip(self, other)), self.coords)

    def __neg__(self):
        return type(self)(tuple(neg(a) for a in self), self.coords)

    def scale(self, f):
        f = _e(f)
        return type(self)(tuple(mul(f, a) for a in self), self.coords)

    __mul__ = scale
    __rmul__ = scale

    def map(self, fn):
        return type(self)(tuple(fn(a) for a in self), self.coords)


class OneForm3(_Comps):
    _n = 3


class Vector3(_Comps):
    _n = 3

    def __call__(self, f):
        """Directional derivative of a scalar."""
        return add(*[mul(self[i], _diff(f, c)) for i, c in enumerate(self.coords)])


class TwoForm3(_Comps):
    """Components on ``(dy^dz, dz^dx, dx^dy)``."""

    _n = 3

    def __call__(self, X, Y):
        # w(X, Y) with w = sum_i c_i *e_i, i.e. the triple product c . (X x Y)
        cr = _cross_tuple(X.comps, Y.comps)
        return add(*[mul(a, b) for a, b in zip(self.comps, cr)])


class ThreeForm3(_Comps):
    """Coefficient of ``dx^dy^dz``."""

    _n = 1


_SYM_INDEX = {(0, 0): 0, (0, 1): 1, (0, 2): 2, (1, 1): 3, (1, 2): 4, (2, 2): 5}


def _sym_idx(i, j):
    return _SYM_INDEX[(i, j) if i <= j else (j, i)]


class SymTensor3(_Comps):
    """Symmetric 2-tensor stored as ``(xx, xy, xz, yy, yz, zz)``."""

    _n = 6

    @classmethod
    def from_matrix(cls, m, coords):
        return cls(tuple(m[i][j] for (i, j) in _SYM_INDEX), coords)

    def __getitem__(self, ij):
        if isinstance(ij, tuple):
            return self.comps[_sym_idx(*ij)]
        return self.comps[ij]

    def matrix(self):
        return [[self[i, j] for j in range(3)] for i in range(3)]

    def __call__(self, X, Y=None):
        """``T(X, Y)``, or the 1-form ``T(X, .)`` when ``Y`` is omitted."""
        if Y is None:
            return OneForm3(
                tuple(add(*[mul(X[i], self[i, j]) for i in range(3)]) for j in range(3)),
                self.coords,
            )
        return add(*[mul(X[i], Y[j], self[i, j]) for i in range(3) for j in range(3)])


def _cross_tuple(a, b):
    return (
        add(mul(a[1], b[2]), neg(mul(a[2], b[1]))),
        add(mul(a[2], b[0]), neg(mul(a[0], b[2]))),
        add(mul(a[0], b[1]), neg(mul(a[1], b[0]))),
    )


# ---------------------------------------------------------------------------
# metric


class Metric3:
    """A Riemannian metric on a 3-dimensional chart.

    Parameters
    ----------
    comps : 3x3 nested sequence
        Components ``h_ij``; strings are parsed over ``chart``. Only the
        upper triangle is read, so the result is symmetric by construction.
    chart : Chart
        Chart on N; its coordinate names drive differentiation.
    orientation : {+1, -1}
        Sign of ``dx^dy^dz`` relative to the Riemannian volume form.
    """

    def __init__(self, comps, chart: Chart, orientation: int = 1):
        if chart.dim != 3:
            raise ExprError("Metric3 needs a 3-dimensional chart")
        if orientation not in (1, -1):
            raise ExprError("orientation must be +1 or -1")
        self.chart = chart
        self.coords = chart.coords
        self.orientation = orientation

        def conv(c):
            return parse_expr(c, chart) if isinstance(c, str) else _e(c)

        m = [[None] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(i, 3):
                m[i][j] = m[j][i] = conv(comps[i][j])
        self.matrix = tuple(tuple(r) for r in m)
        self._inv = None
        self._christoffel = None
        self._ricci = None

    @classmethod
    def euclidean(cls, chart: Chart):
        return cls([[1, 0, 0], [0, 1, 0], [0, 0, 1]], chart)

    @classmethod
    def diagonal(cls, entries, chart: Chart):
        a, b, c = entries
        return cls([[a, 0, 0], [0, b, 0], [0, 0, c]], chart)

    def __getitem__(self, ij):
        i, j = ij
        return self.matrix[i][j]

    def as_tensor(self):
        return SymTensor3.from_matrix(self.matrix, self.coords)

    @property
    def det(self):
        m = self.matrix
        return add(
            mul(m[0][0], add(mul(m[1][1], m[2][2]), neg(mul(m[1][2], m[2][1])))),
            neg(mul(m[0][1], add(mul(m[1][0], m[2][2]), neg(mul(m[1][2], m[2][0]))))),
            mul(m[0][2], add(mul(m[1][0], m[2][1]), neg(mul(m[1][1], m[2][0])))),
        )

    @property
    def sqrt_det(self):
        return sqrt(self.det)

    @property
    def inverse(self):
        if self._inv is None:
            m = self.matrix
            det = self.det
            if det.is_zero():
                raise SingularMetricError("metric determinant vanishes identically")
            inv = [[None] * 3 for _ in range(3)]
            for i in range(3):
                for j in range(3):
                    r = [k for k in range(3) if k != j]
                    c = [k for k in range(3) if k != i]
                    minor = add(mul(m[r[0]][c[0]], m[r[1]][c[1]]), neg(mul(m[r[0]][c[1]], m[r[1]][c[0]])))
                    sign = 1 if (i + j) % 2 == 0 else -1
                    inv[i][j] = div(mul(sign, minor), det)
            self._inv = tuple(tuple(r) for r in inv)
        return self._inv

    def check_positive(self, points):
        """Raise unless the leading principal minors are positive at every point."""
        vals = self.chart.evaluate([e for row in self.matrix for e in row], points)
        mats = vals.T.reshape(-1, 3, 3)
        minors = [mats[:, 0, 0], np.linalg.det(mats[:, :2, :2]), np.linalg.det(mats)]
        for k, mnr in enumerate(minors, 1):
            if np.any(mnr <= 0):
                raise SingularMetricError(f"leading minor {k} not positive at a sample point")
        return True

    def numeric(self, points):
        """Arrays ``h`` and ``h^-1`` of shape ``(n, 3, 3)``."""
        vals = self.chart.evaluate([e for row in self.matrix for e in row], points)
        h = vals.T.reshape(-1, 3, 3)
        return h, np.linalg.inv(h)


# ---------------------------------------------------------------------------
# musical isomorphisms, inner products


def sharp(alpha: OneForm3, h: Metric3) -> Vector3:
    g = h.inverse
    return Vector3(tuple(add(*[mul(g[i][j], alpha[j]) for j in range(3)]) for i in range(3)), h.coords)


def flat(X: Vector3, h: Metric3) -> OneForm3:
    return OneForm3(tuple(add(*[mul(h[i, j], X[j]) for j in range(3)]) for i in range(3)), h.coords)


def inner(alpha: OneForm3, beta: OneForm3, h: Metric3) -> Expr:
    b = sharp(beta, h)
    return pair(alpha, b)


def inner_vectors(X: Vector3, Y: Vector3, h: Metric3) -> Expr:
    return add(*[mul(h[i, j], X[i], Y[j]) for i in range(3) for j in range(3)])


def pair(alpha: OneForm3, X: Vector3) -> Expr:
    """``alpha(X)``."""
    return add(*[mul(a, x) for a, x in zip(alpha, X)])


def norm(alpha: OneForm3, h: Metric3) -> Expr:
    return sqrt(inner(alpha, alpha, h))


def gradient(f, h: Metric3) -> Vector3:
    return sharp(exterior_derivative(f, h.coords), h)


# ---------------------------------------------------------------------------
# exterior algebra


def exterior_derivative(w, coords=None):
    """``d`` on 0-, 1- and 2-forms.

    A 0-form is a bare expression and then ``coords`` is required.
    """
    if isinstance(w, OneForm3):
        c = w.coords
        a = w.comps
        return TwoForm3(
            (
                add(_diff(a[2], c[1]), neg(_diff(a[1], c[2]))),
                add(_diff(a[0], c[2]), neg(_diff(a[2], c[0]))),
                add(_diff(a[1], c[0]), neg(_diff(a[0], c[1]))),
            ),
            c,
        )
    if isinstance(w, TwoForm3):
        c = w.coords
        return ThreeForm3((add(*[_diff(w[i], c[i]) for i in range(3)]),), c)
    if isinstance(w, ThreeForm3):
        raise ExprError("d of a 3-form is zero in dimension three; no 4-forms are modelled")
    if coords is None:
        raise ExprError("coordinates are needed to differentiate a function")
    coords = tuple(coords.coords if isinstance(coords, Chart) else coords)
    return OneForm3(tuple(_diff(w, c) for c in coords), coords)


def wedge(alpha, beta):
    """Wedge product of forms (degrees adding up to at most three)."""
    if isinstance(alpha, OneForm3) and isinstance(beta, OneForm3):
        return TwoForm3(_cross_tuple(alpha.comps, beta.comps), alpha.coords)
    if isinstance(alpha, OneForm3) and isinstance(beta, TwoForm3):
        return ThreeForm3((add(*[mul(a, b) for a, b in zip(alpha, beta)]),), alpha.coords)
    if isinstance(alpha, TwoForm3) and isinstance(beta, OneForm3):
        return wedge(beta, alpha)
    if isinstance(alpha, Expr) or not isinstance(alpha, _Comps):
        return beta.scale(alpha)
    if isinstance(beta, Expr) or not isinstance(beta, _Comps):
        return alpha.scale(beta)
    raise ExprError("wedge product of these degrees is not modelled")


def hodge_star(w, h: Metric3):
    """Hodge star for the metric ``h`` and its orientation; ``** = 1``.

    A bare expression is treated as a 0-form.
    """
    o = h.orientation
    s = h.sqrt_det
    if isinstance(w, OneForm3):
        v = sharp(w, h)
        return TwoForm3(tuple(mul(o, s, c) for c in v), h.coords)
    if isinstance(w, TwoForm3):
        lowered = flat(Vector3(w.comps, h.coords), h)
        return OneForm3(tuple(div(mul(o, c), s) for c in lowered), h.coords)
    if isinstance(w, ThreeForm3):
        return div(mul(o, w[0]), s)
    return ThreeForm3((mul(o, s, w),), h.coords)


def codifferential(w, h: Metric3):
    """Formal adjoint of ``d``: a function for 1-forms, a 1-form for 2-forms."""
    if isinstance(w, OneForm3):
        return neg(hodge_star(exterior_derivative(hodge_star(w, h)), h))
    if isinstance(w, TwoForm3):
        return hodge_star(exterior_derivative(hodge_star(w, h)), h)
    raise ExprError("codifferential is modelled on 1- and 2-forms")


def cross_1forms(alpha: OneForm3, beta: OneForm3, h: Metric3) -> OneForm3:
    return hodge_star(wedge(alpha, beta), h)


def cross_vectors(X: Vector3, Y: Vector3, h: Metric3) -> Vector3:
    return sharp(cross_1forms(flat(X, h), flat(Y, h), h), h)


def hodge_laplacian(alpha: OneForm3, h: Metric3) -> OneForm3:
    """``(d d* + d* d) alpha``."""
    one = exterior_derivative(codifferential(alpha, h), h.coords)
    two = codifferential(exterior_derivative(alpha), h)
    return one + two


def laplacian(f, h: Metric3) -> Expr:
    """``d* d f`` (non-negative spectrum convention)."""
    return codifferential(exterior_derivative(f, h.coords), h)


# ---------------------------------------------------------------------------
# vector fields and connection


def lie_bracket(X: Vector3, Y: Vector3) -> Vector3:
    return Vector3(tuple(add(X(Y[k]), neg(Y(X[k]))) for k in range(3)), X.coords)


def lie_derivative_sym(X: Vector3, T) -> SymTensor3:
    """Lie derivative of a symmetric 2-tensor (``Metric3`` accepted)."""
    if isinstance(T, Metric3):
        T = T.as_tensor()
    c = X.coords
    m = {}
    for (i, j) in _SYM_INDEX:
        m[i, j] = add(
            X(T[i, j]),
            *[mul(T[k, j], _diff(X[k], c[i])) for k in range(3)],
            *[mul(T[i, k], _diff(X[k], c[j])) for k in range(3)],
        )
    return SymTensor3(tuple(m[k] for k in _SYM_INDEX), c)


def lie_derivative_metric(X: Vector3, h: Metric3) -> SymTensor3:
    return lie_derivative_sym(X, h.as_tensor())


def sym_product(alpha: OneForm3, beta: OneForm3) -> SymTensor3:
    """``(alpha (x) beta + beta (x) alpha) / 2``."""
    return SymTensor3(
        tuple(mul(HALF, add(mul(alpha[i], beta[j]), mul(beta[i], alpha[j]))) for (i, j) in _SYM_INDEX),
        alpha.coords,
    )


def christoffel3(h: Metric3):
    """Symbols ``G[k][i][j]`` of the Levi-Civita connection."""
    if h._christoffel is None:
        c = h.coords
        g = h.inverse
        dh = [[[_diff(h[i, j], c[k]) for j in range(3)] for i in range(3)] for k in range(3)]
        first = [
            [[mul(HALF, add(dh[i][l][j], dh[j][l][i], neg(dh[l][i][j]))) for j in range(3)] for i in range(3)]
            for l in range(3)
        ]
        G = [
            [[add(*[mul(g[k][l], first[l][i][j]) for l in range(3)]) for j in range(3)] for i in range(3)]
            for k in range(3)
        ]
        h._christoffel = G
    return h._christoffel


def covariant_derivative_1form(alpha: OneForm3, h: Metric3):
    """``(nabla alpha)_{ij} = d_i alpha_j - G^k_ij alpha_k`` as a 3x3 list."""
    c = h.coords
    G = christoffel3(h)
    return [
        [add(_diff(alpha[j], c[i]), neg(add(*[mul(G[k][i][j], alpha[k]) for k in range(3)]))) for j in range(3)]
        for i in range(3)
    ]


def covariant_derivative_along(X: Vector3, alpha: OneForm3, h: Metric3) -> OneForm3:
    """``nabla_X alpha``."""
    D = covariant_derivative_1form(alpha, h)
    return OneForm3(tuple(add(*[mul(X[i], D[i][j]) for i in range(3)]) for j in range(3)), h.coords)


def hessian(w, h: Metric3) -> SymTensor3:
    """``nabla d w``."""
    D = covariant_derivative_1form(exterior_derivative(w, h.coords), h)
    return SymTensor3.from_matrix(D, h.coords)


def ricci3(h: Metric3) -> SymTensor3:
    """Ricci tensor ``R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik``."""
    if h._ricci is None:
        c = h.coords
        G = christoffel3(h)
        m = {}
        for (i, j) in _SYM_INDEX:
            terms = []
            for k in range(3):
                terms.append(_diff(G[k][i][j], c[k]))
                terms.append(neg(_diff(G[k][i][k], c[j])))
                for l in range(3):
                    terms.append(mul(G[k][k][l], G[l][i][j]))
                    terms.append(neg(mul(G[k][j][l], G[l][i][k])))
            m[i, j] = add(*terms)
        h._ricci = SymTensor3(tuple(m[k] for k in _SYM_INDEX), c)
    return h._ricci


def scalar_curvature3(h: Metric3) -> Expr:
    R = ricci3(h)
    g = h.inverse
    return add(*[mul(g[i][j], R[i, j]) for i in range(3) for j in range(3)])


# ---------------------------------------------------------------------------
# numeric helpers


def values(obj, chart: Chart, points) -> np.ndarray:
    """Evaluate a field at ``points``; returns shape ``(n,)`` or ``(n, k)``."""
    if isinstance(obj, _Comps):
        return chart.evaluate(obj.comps, points).T
    return chart.evaluate([obj], points)[0]


def sym_matrix_values(T, chart: Chart, points) -> np.ndarray:
    """Evaluate a :class:`SymTensor3` (or :class:`Metric3`) as ``(n, 3, 3)``."""
    if isinstance(T, Metric3):
        T = T.as_tensor()
    v = chart.evaluate(T.comps, points)
    n = v.shape[1]
    out = np.empty((n, 3, 3), dtype=v.dtype)
    for (i, j), k in _SYM_INDEX.items():
        out[:, i, j] = out[:, j, i] = v[k]
    return out


def norm_values(obj, h: Metric3, points) -> np.ndarray:
    """Pointwise ``h``-norm of a 1-form, 2-form, 3-form or symmetric tensor."""
    chart = h.chart
    hh, hinv = h.numeric(points)
    if isinstance(obj, OneForm3):
        a = values(obj, chart, points)
        return np.sqrt(np.abs(np.einsum("ni,nij,nj->n", a, hinv, np.conj(a))))
    if isinstance(obj, Vector3):
        a = values(obj, chart, points)
        return np.sqrt(np.abs(np.einsum("ni,nij,nj->n", a, hh, np.conj(a))))
    if isinstance(obj, TwoForm3):
        # |w| = |*w|; *w has components h c / sqrt(det h)
        c = values(obj, chart, points)
        det = np.linalg.det(hh)
        return np.sqrt(np.abs(np.einsum("ni,nij,nj->n", c, hh, np.conj(c)) / det))
    if isinstance(obj, ThreeForm3):
        c = values(obj, chart, points)[:, 0]
        return np.abs(c) / np.sqrt(np.linalg.det(hh))
    if isinstance(obj, SymTensor3):
        T = sym_matrix_values(obj, chart, points)
        return np.sqrt(np.abs(np.einsum("nij,nik,njl,nkl->n", T, hinv, hinv, np.conj(T))))
    v = values(obj, chart, points)
    return np.abs(v)


# ---------------------------------------------------------------------------
# adapted frames


class FrameError(ExprError):
    pass


@dataclass(frozen=True)
class Frame3:
    """A positive ``h``-orthonormal frame ``(X, Y, Z)`` of symbolic fields."""

    X: Vector3
    Y: Vector3
    Z: Vector3

    def __iter__(self):
        return iter((self.X, self.Y, self.Z))

    def rotated(self, angle: float) -> "Frame3":
        """Rotate ``(X, Y)`` by ``angle`` about ``Z``."""
        c, s = np.cos(angle), np.sin(angle)
        X = self.X.scale(c) + self.Y.scale(s)
        Y = self.Y.scale(c) - self.X.scale(s)
        return Frame3(X, Y, self.Z)

    def values(self, chart: Chart, points) -> np.ndarray:
        """Array ``F[n, i, :]`` with rows X, Y, Z."""
        v = chart.evaluate([c for S in self for c in S], points)
        return v.T.reshape(-1, 3, 3)


def adapted_frame(direction: OneForm3, h: Metric3, center) -> Frame3:
    """Frame with ``Z`` along ``direction``, built by Gram-Schmidt.

    The seed is the coordinate field ``e_i`` minimising
    ``|<e_i, Z>| / |e_i|`` at ``center`` (ties go to the earlier coordinate);
    ``X`` is the normalised seed minus its ``Z`` part and ``Y = Z x X``, so
    ``(X, Y, Z)`` is positive.
    """
    coords = h.coords
    Zs = sharp(direction, h)
    Z = Zs.scale(div(1, norm(direction, h)))
    Zf = flat(Z, h)
    pt = np.asarray(center, dtype=float)[None, :]
    hv = np.array([[values(h[i, i], h.chart, pt)[0] for i in range(3)]])[0]
    zf = np.array([values(Zf[i], h.chart, pt)[0] for i in range(3)])
    score = np.abs(zf) / np.sqrt(hv)
    i = int(np.argmin(np.round(score, 12)))
    comps = [ZERO, ZERO, ZERO]
    comps[i] = as_expr(1)
    X0 = Vector3(tuple(comps), coords) - Z.scale(Zf[i])
    X = X0.scale(div(1, sqrt(inner_vectors(X0, X0, h))))
    Y = cross_vectors(Z, X, h)
    return Frame3(X, Y, Z)
