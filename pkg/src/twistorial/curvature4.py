"""Twistorial 4-metrics in block form and their curvature.

The metric components are symbolic; their first and second coordinate
derivatives are taken exactly and then evaluated, and the Christoffel,
Riemann, Ricci and Weyl tensors are assembled numerically per sample point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import ZERO, Chart, ExprError, add, as_expr, div, mul, parse_expr
from .exterior3 import Metric3

C_CONSTANT_TOL = 1e-10


class MetricError(ExprError):
    pass


def _inv(g):
    return np.linalg.inv(g)


# ---------------------------------------------------------------------------
# vector fields on M


class VectorField4:
    """A vector field on a 4-dimensional chart with symbolic components."""

    def __init__(self, comps, chart: Chart):
        if len(comps) != chart.dim:
            raise ExprError("one component per coordinate is required")
        self.chart = chart
        self.comps = tuple(parse_expr(c, chart) if isinstance(c, str) else as_expr(c) for c in comps)
        self._dcomps = None

    def jet(self, points):
        """``(E, dE)`` with ``E[n, c]`` and ``dE[n, a, c] = d_a E^c``."""
        coords = self.chart.coords
        if self._dcomps is None:
            self._dcomps = [e.diff(a) for a in coords for e in self.comps]
        d = self.chart.dim
        vals = self.chart.evaluate(list(self.comps) + self._dcomps, points)
        E = vals[:d].T
        dE = vals[d:].T.reshape(-1, d, d)
        return E, dE

    def __call__(self, f):
        """Directional derivative of a scalar expression."""
        return add(*[mul(c, f.diff(a)) for c, a in zip(self.comps, self.chart.coords)])

    def __add__(self, other):
        return VectorField4([add(a, b) for a, b in zip(self.comps, other.comps)], self.chart)

    def scale(self, f):
        f = as_expr(f)
        return VectorField4([mul(f, c) for c in self.comps], self.chart)


class SumField4:
    """Sum of vector-field providers exposing ``jet``."""

    def __init__(self, *parts):
        self.parts = parts

    def jet(self, points):
        Es, dEs = zip(*(p.jet(points) for p in self.parts))
        return sum(Es), sum(dEs)


# ---------------------------------------------------------------------------
# the metric


@dataclass
class Jet:
    """Metric values at sample points: ``g``, ``g^-1``, ``dg[n,k,a,b] = d_k g_ab``
    and ``ddg[n,k,l,a,b]``."""

    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray | None


class Metric4:
    """A Riemannian 4-metric on a chart ``(x, y, z, fiber)``.

    Block metadata (``h``, ``lam_inv2``, ``theta``, ``V``, ``c``) is present
    for metrics assembled in twistorial form and ``None`` otherwise.
    """

    def __init__(self, comps, chart: Chart, *, h: Metric3 | None = None, lam_inv2=None,
                 theta=None, V=None, c=None, kind="raw"):
        if chart.dim != 4:
            raise MetricError("Metric4 needs a 4-dimensional chart")
        self.chart = chart
        self.coords = chart.coords
        self.fiber = chart.coords[3]
        m = [[None] * 4 for _ in range(4)]
        for i in range(4):
            for j in range(i, 4):
                v = comps[i][j]
                m[i][j] = m[j][i] = parse_expr(v, chart) if isinstance(v, str) else as_expr(v)
        self.matrix = tuple(tuple(r) for r in m)
        self.h = h
        self.lam_inv2 = lam_inv2
        self.theta = theta
        self.V = V
        self.c = c
        self.kind = kind
        self._d1 = None
        self._d2 = None

    def __getitem__(self, ij):
        i, j = ij
        return self.matrix[i][j]

    @property
    def base_chart(self) -> Chart:
        return self.chart.restrict(self.fiber)

    # -- numeric jets -------------------------------------------------------
    def _flat(self):
        return [self.matrix[a][b] for a in range(4) for b in range(4)]

    def numeric(self, points):
        vals = self.chart.evaluate(self._flat(), points)
        return vals.T.reshape(-1, 4, 4)

    def jet(self, points, second=True) -> Jet:
        coords = self.coords
        flat = self._flat()
        if self._d1 is None:
            self._d1 = [e.diff(k) for k in coords for e in flat]
        exprs = flat + self._d1
        if second:
            if self._d2 is None:
                self._d2 = [e.diff(l) for e in self._d1 for l in coords]
            exprs = exprs + self._d2
        vals = self.chart.evaluate(exprs, points)
        n = vals.shape[1]
        g = vals[:16].T.reshape(n, 4, 4)
        dg = vals[16:80].T.reshape(n, 4, 4, 4)
        ddg = None
        if second:
            # _d2 is ordered (k, a, b, l); reorder to (k, l, a, b)
            ddg = vals[80:].T.reshape(n, 4, 4, 4, 4).transpose(0, 1, 4, 2, 3)
        ginv = _inv(g)
        return Jet(g, ginv, dg, ddg)

    def check_positive(self, points):
        g = self.numeric(points)
        w = np.linalg.eigvalsh(g)
        if np.any(w <= 0):
            raise MetricError("metric is not positive definite at a sample point")
        return True

    # -- block structure -----------------------------------------------------
    def assembled_from_blocks(self, points) -> float:
        """Max deviation of ``g`` from ``lam^-2 h + lam^2 theta^2``."""
        if self.h is None:
            raise MetricError("no block metadata on this metric")
        g = self.numeric(points)
        L = self.chart.evaluate([self.lam_inv2], points)[0]
        th = self.chart.evaluate(list(self.theta), points).T
        hh = np.zeros_like(g)
        hh[:, :3, :3] = self.chart.evaluate([e for r in self.h.matrix for e in r], points).T.reshape(-1, 3, 3)
        rebuilt = L[:, None, None] * hh + (1.0 / L)[:, None, None] * th[:, :, None] * th[:, None, :]
        return float(np.max(np.abs(g - rebuilt)))

    def vertical_checks(self, points) -> dict:
        """``theta(V) - 1``, ``theta`` on horizontal lifts, and the spread of ``V(lam^-2)``."""
        if self.h is None:
            raise MetricError("no block metadata on this metric")
        th = self.chart.evaluate(list(self.theta), points).T
        Vv = self.chart.evaluate(list(self.V.comps), points).T
        thV = np.einsum("na,na->n", th, Vv)
        lifts = self.horizontal_lifts(np.eye(3)[None].repeat(len(th), 0), points)
        th_h = np.einsum("na,nia->ni", th, lifts)
        cval = self.chart.evaluate([self.V(self.lam_inv2)], points)[0]
        return {
            "theta_V": float(np.max(np.abs(thV - 1.0))),
            "theta_horizontal": float(np.max(np.abs(th_h))),
            "c_spread": float(np.max(np.abs(cval - self.c))),
        }

    def horizontal_lifts(self, S, points) -> np.ndarray:
        """Lift base vectors ``S[n, i, :3]`` to ``S - theta(S) V``; shape ``(n, m, 4)``."""
        th = self.chart.evaluate(list(self.theta), points).T
        Vv = self.chart.evaluate(list(self.V.comps), points).T
        S = np.asarray(S, dtype=float)
        n, m = S.shape[:2]
        out = np.zeros((n, m, 4))
        out[:, :, :3] = S
        tS = np.einsum("na,nia->ni", th[:, :3], S)
        return out - tS[:, :, None] * Vv[:, None, :]


def assemble_twistorial_metric(h: Metric3, lam_inv2, theta, fiber: str, fiber_interval=None,
                               excluded=(), samples=None, kind="twistorial") -> Metric4:
    """Build ``g = lam^-2 h + lam^2 theta (x) theta`` on ``N x fiber``.

    ``theta`` lists four components on ``(dx, dy, dz, d fiber)``. The vertical
    field is ``V = d/d fiber / theta_fiber``, so ``theta(V) = 1`` and ``V`` is
    ``g``-orthogonal to the horizontal lifts. ``c = V(lam^-2)`` must be
    constant; it is read off at a sample point and then checked at all of
    ``samples`` (when given) together with ``lam^-2 > 0``.
    """
    chart = h.chart.extend(fiber, fiber_interval, excluded)

    def conv(e):
        return parse_expr(e, chart) if isinstance(e, str) else as_expr(e)

    L = conv(lam_inv2)
    th = [conv(e) for e in theta]
    if len(th) != 4:
        raise MetricError("theta needs four components")
    if L.is_const and not (L.is_complex is False and L.value > 0):
        raise MetricError("lambda^-2 must be positive")
    lam2 = div(1, L)
    m = [[None] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(4):
            hij = h[i, j] if i < 3 and j < 3 else ZERO
            m[i][j] = add(mul(L, hij), mul(lam2, th[i], th[j]))
    if th[3].is_zero():
        raise MetricError("theta must pair nontrivially with the fibre direction")
    V = VectorField4([ZERO, ZERO, ZERO, div(1, th[3])], chart)
    c_expr = V(L)
    g = Metric4(m, chart, h=h, lam_inv2=L, theta=tuple(th), V=V, c=None, kind=kind)
    if samples is not None:
        Lv = chart.evaluate([L], samples)[0]
        if np.any(Lv <= 0):
            raise MetricError("lambda^-2 must be positive on the sampled domain")
        cv = chart.evaluate([c_expr], samples)[0]
        c = float(cv[0])
        if np.max(np.abs(cv - c)) > C_CONSTANT_TOL:
            raise MetricError("V(lambda^-2) is not constant on the sampled domain")
        g.c = c
    elif c_expr.is_const:
        g.c = float(c_expr.value)
    else:
        raise MetricError("samples are needed to confirm that V(lambda^-2) is constant")
    return g


# ---------------------------------------------------------------------------
# curvature (numeric, per point)


def christoffel(jet: Jet):
    """``G[n, k, i, j]`` (upper index first) and ``dG[n, m, k, i, j] = d_m G^k_ij``."""
    dg, ginv = jet.dg, jet.ginv
    # first kind: Gamma_{l i j} = (d_i g_lj + d_j g_li - d_l g_ij) / 2
    first = 0.5 * (dg.transpose(0, 2, 1, 3) + dg.transpose(0, 2, 3, 1) - dg)
    # dg[n,k,a,b] = d_k g_ab; first[n,l,i,j] uses d_i g_lj = dg[n,i,l,j]
    G = np.einsum("nkl,nlij->nkij", ginv, first)
    dG = None
    if jet.ddg is not None:
        ddg = jet.ddg  # [n, m, k, a, b] = d_m d_k g_ab
        dfirst = 0.5 * (ddg.transpose(0, 1, 3, 2, 4) + ddg.transpose(0, 1, 3, 4, 2) - ddg)
        dginv = -np.einsum("nka,nmab,nbl->nmkl", ginv, dg, ginv)
        dG = np.einsum("nmkl,nlij->nmkij", dginv, first) + np.einsum("nkl,nmlij->nmkij", ginv, dfirst)
    return G, dG


def riemann(jet: Jet):
    """``R[n, a, b, c, d] = R^a_{bcd}`` with ``R(X,Y)Z = nabla_X nabla_Y Z - ...``."""
    G, dG = christoffel(jet)
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    R = (
        np.einsum("ncadb->nabcd", dG)
        - np.einsum("ndacb->nabcd", dG)
        + np.einsum("nace,nedb->nabcd", G, G)
        - np.einsum("nade,necb->nabcd", G, G)
    )
    return R


def ricci_from_jet(jet: Jet) -> np.ndarray:
    R = riemann(jet)
    return np.einsum("nabad->nbd", R)


def ricci4(g: Metric4, points) -> np.ndarray:
    """Ricci tensor ``Ric[n, a, b]`` at ``points`` (shape ``(n, 4)``)."""
    return ricci_from_jet(g.jet(points))


def scalar_curvature(jet: Jet, ric=None):
    if ric is None:
        ric = ricci_from_jet(jet)
    return np.einsum("nab,nab->n", jet.ginv, ric)


def tensor_norm(T, ginv) -> np.ndarray:
    """Pointwise norm of a covariant 2-tensor ``T[n, a, b]`` in the metric."""
    return np.sqrt(np.abs(np.einsum("nab,nac,nbd,ncd->n", T, ginv, ginv, T)))


def weyl_tensor(jet: Jet):
    """Fully covariant Weyl tensor ``C[n, a, b, c, d]``."""
    g = jet.g
    R = riemann(jet)
    Rl = np.einsum("nae,nebcd->nabcd", g, R)
    ric = np.einsum("nabad->nbd", R)
    s = np.einsum("nab,nab->n", jet.ginv, ric)
    # Schouten P = (Ric - s g / 6) / 2 in dimension four
    P = 0.5 * (ric - s[:, None, None] * g / 6.0)
    kn = (
        np.einsum("nac,nbd->nabcd", g, P)
        + np.einsum("nbd,nac->nabcd", g, P)
        - np.einsum("nad,nbc->nabcd", g, P)
        - np.einsum("nbc,nad->nabcd", g, P)
    )
    return Rl - kn


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Gram-Schmidt on ``(d_fiber, d_x, d_y, d_z)``; rows of ``e[n, i, :]`` are vectors.

    The order makes the frame vertical-first and preserves the coordinate
    orientation ``(fiber, x, y, z)``.
    """
    n = g.shape[0]
    seeds = np.eye(4)[[3, 0, 1, 2]]
    e = np.zeros((n, 4, 4))
    for i in range(4):
        v = np.broadcast_to(seeds[i], (n, 4)).copy()
        for j in range(i):
            v -= np.einsum("na,nab,nb->n", v, g, e[:, j])[:, None] * e[:, j]
        nv = np.sqrt(np.einsum("na,nab,nb->n", v, g, v))
        e[:, i] = v / nv[:, None]
    return e


_PAIRS = (((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2)))


def weyl_halves(jet: Jet):
    """Frobenius norms of the two 3x3 Weyl blocks on ``e0^ei + e_jk`` and ``e0^ei - e_jk``.

    Returns ``(plus, minus, full)`` where ``full`` is ``|C|``.
    """
    C = weyl_tensor(jet)
    e = orthonormal_frame(jet.g)
    Cf = np.einsum("nabcd,nia,njb,nkc,nld->nijkl", C, e, e, e, e)
    full = np.sqrt(np.einsum("nijkl,nijkl->n", Cf, Cf))
    out = []
    for s in (1.0, -1.0):
        W = np.zeros((len(Cf), 3, 3))
        for m, (p1, q1) in enumerate(_PAIRS):
            for k, (p2, q2) in enumerate(_PAIRS):
                W[:, m, k] = 0.5 * (
                    Cf[:, p1[0], p1[1], p2[0], p2[1]]
                    + s * Cf[:, q1[0], q1[1], p2[0], p2[1]]
                    + s * Cf[:, p1[0], p1[1], q2[0], q2[1]]
                    + Cf[:, q1[0], q1[1], q2[0], q2[1]]
                )
        out.append(np.sqrt(np.einsum("nij,nij->n", W, W)))
    return out[0], out[1], full


# The vertical-first orientation (V, X, Y, Z); with this flag the block that
# vanishes on Gibbons-Hawking metrics over flat space is returned.
PINNED_ORIENTATION = 1


def weyl_asd_norm(g: Metric4, points, orientation: int = PINNED_ORIENTATION, relative=True):
    """Norm of the anti-self-dual Weyl block at ``points``.

    ``orientation=+1`` is the vertical-first orientation ``(V, X, Y, Z)``;
    ``-1`` is the opposite one, which exchanges the two blocks. With
    ``relative`` the value is divided by ``max(|C|, 1)``.
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    plus, minus, full = weyl_halves(g.jet(points))
    asd = minus if orientation == 1 else plus
    if relative:
        return asd / np.maximum(full, 1.0)
    return asd


def lie_derivative_numeric(jet: Jet, E, dE) -> np.ndarray:
    """``(L_E g)_ab = E^c d_c g_ab + g_cb d_a E^c + g_ac d_b E^c``."""
    return (
        np.einsum("nc,ncab->nab", E, jet.dg)
        + np.einsum("ncb,nac->nab", jet.g, dE)
        + np.einsum("nac,nbc->nab", jet.g, dE)
    )
