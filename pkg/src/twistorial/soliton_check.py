"""Ricci-soliton residuals and the equivalent five-relation systems.

A candidate flow is written ``E = f V + x X~ + y Y~ + z Z~`` where ``X~, Y~,
Z~`` are horizontal lifts of an adapted frame on ``N``. The soliton residual
is the ``g``-norm of ``Ric + a g + (1/2) L_E g``; the five relations split
that tensor equation into its vertical, mixed and horizontal blocks, and
each construction has its own explicit form of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature4 import (
    Metric4,
    MetricError,
    VectorField4,
    lie_derivative_numeric,
    ricci_from_jet,
    scalar_curvature,
    tensor_norm,
)
from .expr import ZERO, Chart, Expr, ExprError, add, as_expr, div, mul, neg, parse_expr, power
from .exterior3 import (
    Frame3,
    Metric3,
    Vector3,
    flat,
    inner_vectors,
    lie_derivative_sym,
    pair,
    ricci3,
    sym_matrix_values,
    sym_product,
)

OMEGA_FLOOR = 1e-6
PASS_TOL = 1e-8
FAIL_TOL = 1e-4


class CheckError(ExprError):
    pass


def report(check, values_, tol, **extra) -> dict:
    """Summary record of pointwise residual magnitudes."""
    v = np.abs(np.asarray(values_, dtype=float)).ravel()
    out = {
        "check": check,
        "samples": int(v.size),
        "max_abs_residual": float(np.max(v)) if v.size else 0.0,
        "mean_abs_residual": float(np.mean(v)) if v.size else 0.0,
        "tolerance": float(tol),
    }
    out["pass"] = bool(out["max_abs_residual"] <= tol)
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# horizontal lifts


def lift(g: Metric4, S: Vector3) -> VectorField4:
    """Horizontal lift ``S - theta(S) V`` of a base field."""
    if g.theta is None:
        raise MetricError("horizontal lifts need block metadata")
    th = pair_theta(g, S)
    comps = [add(S[i], neg(mul(th, g.V.comps[i]))) for i in range(3)]
    comps.append(neg(mul(th, g.V.comps[3])))
    return VectorField4(comps, g.chart)


def pair_theta(g: Metric4, S: Vector3) -> Expr:
    return add(*[mul(g.theta[i], S[i]) for i in range(3)])


def _lam(g: Metric4) -> Expr:
    return power(g.lam_inv2, -0.5)


def omega_xy(g: Metric4, frame: Frame3) -> Expr:
    """``d theta(X~, Y~) = sum_{a != b} (d_a theta_b - d_b theta_a) X^a Y^b``."""
    X, Y = lift(g, frame.X), lift(g, frame.Y)
    coords = g.coords
    terms = []
    for a in range(4):
        for b in range(4):
            if a == b:
                continue
            dth = add(g.theta[b].diff(coords[a]), neg(g.theta[a].diff(coords[b])))
            if dth.is_zero():
                continue
            terms.append(mul(dth, X.comps[a], Y.comps[b]))
    return add(*terms)


# ---------------------------------------------------------------------------
# candidates


@dataclass
class SolitonCandidate:
    """``E = f V + x X~ + y Y~ + z Z~`` with soliton constant ``a``."""

    f: Expr
    x: Expr
    y: Expr
    z: Expr
    a: float

    def __post_init__(self):
        for k in ("f", "x", "y", "z"):
            setattr(self, k, as_expr(getattr(self, k)))
        self.a = float(self.a)

    @classmethod
    def parse(cls, chart: Chart, f="0", x="0", y="0", z="0", a=0.0):
        return cls(*(parse_expr(s, chart) if isinstance(s, str) else s for s in (f, x, y, z)), a)

    @property
    def classification(self) -> str:
        if self.a < 0:
            return "shrinking"
        if self.a > 0:
            return "expanding"
        return "steady"

    def horizontal_base(self, frame: Frame3) -> Vector3:
        """``F = x X + y Y + z Z`` as a (fibre-dependent) field on ``N``."""
        return frame.X.scale(self.x) + frame.Y.scale(self.y) + frame.Z.scale(self.z)

    def vector_field(self, g: Metric4, frame: Frame3) -> VectorField4:
        F = self.horizontal_base(frame)
        return g.V.scale(self.f) + lift(g, F)

    @classmethod
    def from_vector(cls, g: Metric4, frame: Frame3, comps, a) -> "SolitonCandidate":
        """Decompose a vector field on ``M`` (4 components) against ``V`` and the lifted frame."""
        comps = [parse_expr(c, g.chart) if isinstance(c, str) else as_expr(c) for c in comps]
        f = add(*[mul(g.theta[i], comps[i]) for i in range(4)])
        base = Vector3(tuple(comps[:3]), g.h.coords)
        h = g.h
        return cls(f, inner_vectors(base, frame.X, h), inner_vectors(base, frame.Y, h),
                   inner_vectors(base, frame.Z, h), a)

    def rotated(self, angle: float) -> "SolitonCandidate":
        """Coefficients of the same flow against the frame rotated by ``angle``."""
        c, s = float(np.cos(angle)), float(np.sin(angle))
        return SolitonCandidate(self.f, add(mul(c, self.x), mul(s, self.y)),
                                add(mul(-s, self.x), mul(c, self.y)), self.z, self.a)


# ---------------------------------------------------------------------------
# the soliton equation


def soliton_tensor(g: Metric4, field, a: float, points) -> tuple:
    """``Ric + a g + (1/2) L_E g`` at ``points`` and the metric jet used.

    ``field`` is anything with ``jet(points) -> (E, dE)``, or ``None`` for
    ``E = 0``.
    """
    jet = g.jet(points)
    T = ricci_from_jet(jet) + a * jet.g
    if field is not None:
        E, dE = field.jet(points)
        T = T + 0.5 * lie_derivative_numeric(jet, E, dE)
    return T, jet


def soliton_residual(g: Metric4, field, a: float, points, tol: float = PASS_TOL) -> dict:
    """Max and mean over ``points`` of ``|Ric + a g + (1/2) L_E g|_g``."""
    if isinstance(field, SolitonCandidate):
        raise TypeError("pass cand.vector_field(g, frame) or use candidate_residual")
    T, jet = soliton_tensor(g, field, a, points)
    return report("soliton", tensor_norm(T, jet.ginv), tol)


def candidate_residual(g: Metric4, frame: Frame3, cand: SolitonCandidate, points, tol=PASS_TOL) -> dict:
    return soliton_residual(g, cand.vector_field(g, frame), cand.a, points, tol)


# ---------------------------------------------------------------------------
# five-relation systems


def _lie_pullback_on_lifts(g: Metric4, F4: VectorField4, lifts4, points) -> np.ndarray:
    """``(L_F phi*h)(S~_i, S~_j)`` for the lifted frame, numerically on ``M``."""
    h = g.h
    chart = g.chart
    hcomps = [h[i, j] if i < 3 and j < 3 else ZERO for i in range(4) for j in range(4)]
    dh = [e.diff(k) for k in g.coords for e in hcomps]
    vals = chart.evaluate(hcomps + dh, points)
    n = vals.shape[1]
    H = vals[:16].T.reshape(n, 4, 4)
    dH = vals[16:].T.reshape(n, 4, 4, 4)
    E, dE = F4.jet(points)
    L = (np.einsum("nc,ncab->nab", E, dH) + np.einsum("ncb,nac->nab", H, dE)
         + np.einsum("nac,nbc->nab", H, dE))
    return np.einsum("nia,nab,njb->nij", lifts4, L, lifts4)


def _lift_values(g: Metric4, frame: Frame3, points) -> np.ndarray:
    lifts = [lift(g, S) for S in frame]
    v = g.chart.evaluate([c for L in lifts for c in L.comps], points)
    return v.T.reshape(-1, 3, 4)


def _frame_sym(T, frame_vals) -> np.ndarray:
    return np.einsum("nia,nab,njb->nij", frame_vals, T, frame_vals)


def five_relations_generic(g: Metric4, frame: Frame3, cand: SolitonCandidate, points) -> dict:
    """The five relations in twistorial form: ``V``, lifted frame, ``lam``, ``c`` and ``Omega``."""
    if g.h is None:
        raise MetricError("five relations need a metric in twistorial block form")
    chart = g.chart
    V = g.V
    Xl, Yl, Zl = (lift(g, S) for S in frame)
    lam2 = div(1, g.lam_inv2)
    lam_m4 = mul(g.lam_inv2, g.lam_inv2)
    Om = omega_xy(g, frame)
    c = as_expr(g.c)
    f, x, y, z, a = cand.f, cand.x, cand.y, cand.z, cand.a
    r1 = add(V(f), a, neg(mul(0.5, lam2, add(mul(f, c), mul(z, Om)))))
    r2 = add(Xl(f), neg(mul(y, Om)), mul(lam_m4, V(x)))
    r3 = add(Yl(f), mul(x, Om), mul(lam_m4, V(y)))
    r4 = add(Zl(f), mul(lam_m4, V(z)))
    s1 = chart.evaluate([r1, r2, r3, r4, Om, lam2], points)
    om = s1[4]
    if np.min(np.abs(om)) < OMEGA_FLOOR:
        raise CheckError("Omega(X, Y) below floor: the relations assume Omega != 0")
    # horizontal block, as components on the lifted frame
    lifts = _lift_values(g, frame, points)
    F4 = lift(g, cand.horizontal_base(frame))
    LF = _lie_pullback_on_lifts(g, F4, lifts, points)
    coef = add(neg(mul(c, c)), mul(f, c), mul(z, Om), mul(2 * a, g.lam_inv2))
    Fr = frame.values(g.base_chart, points[:, :3])
    Ric = _frame_sym(sym_matrix_values(ricci3(g.h), g.base_chart, points[:, :3]), Fr)
    hf = _frame_sym(g.h.numeric(points[:, :3])[0], Fr)
    cv, l2 = chart.evaluate([coef], points)[0], s1[5]
    r5 = LF + (l2 * cv)[:, None, None] * hf + 2 * l2[:, None, None] * Ric
    return _pack(s1[:4], r5)


def _pack(scalars, r5):
    """Pointwise magnitudes of the five left-hand sides.

    The horizontal relation is a tensor on ``H``; its size is the Frobenius
    norm of its components on the lifted orthonormal frame.
    """
    return {
        "r1": np.abs(scalars[0]),
        "r2": np.abs(scalars[1]),
        "r3": np.abs(scalars[2]),
        "r4": np.abs(scalars[3]),
        "r5": np.sqrt(np.einsum("nij,nij->n", r5, r5)),
        "r5_tensor": r5,
    }


def _base_lie_with_fibre_term(h: Metric3, A, Fb: Vector3, fiber: str, weight) -> object:
    """``L_F h - 2 weight A . (d_fiber F)^flat`` for a fibre-dependent base field ``F``."""
    LF = lie_derivative_sym(Fb, h)
    dF = Vector3(tuple(c.diff(fiber) for c in Fb), h.coords)
    corr = sym_product(A, flat(dF, h)).scale(mul(-2, weight))
    return LF + corr


def five_relations_gh(data, frame: Frame3, cand: SolitonCandidate, points) -> dict:
    """The Gibbons-Hawking system written with ``u``, ``A``, ``|du|`` and ``d/dt``."""
    from .gibbons_hawking import GHData

    if not isinstance(data, GHData):
        raise CheckError("gh mode needs GHData")
    h, t = data.h, data.fiber
    chart = data.chart.extend(t, data.fiber_interval)
    u, A, dn = data.u, data.A, data.du_norm
    X, Y, Z = frame
    f, x, y, z, a = cand.f, cand.x, cand.y, cand.z, cand.a

    def base(S, e):
        return add(*[mul(S[i], e.diff(h.coords[i])) for i in range(3)])

    ft = f.diff(t)
    uu = mul(u, u)
    r1 = add(ft, a, mul(-0.5, z, div(dn, u)))
    r2 = add(neg(mul(pair(A, X), ft)), base(X, f), neg(mul(y, dn)), mul(uu, x.diff(t)))
    r3 = add(neg(mul(pair(A, Y), ft)), base(Y, f), mul(x, dn), mul(uu, y.diff(t)))
    r4 = add(neg(mul(pair(A, Z), ft)), base(Z, f), mul(uu, z.diff(t)))
    Fb = cand.horizontal_base(frame)
    T = _base_lie_with_fibre_term(h, A, Fb, t, 1)
    T = T + ricci3(h).scale(mul(2, div(1, u))) + h.as_tensor().scale(div(add(mul(z, dn), mul(2 * a, u)), u))
    s = chart.evaluate([r1, r2, r3, r4], points)
    Tv = _sym_values_4(T, chart, points)
    Fr = frame.values(data.chart, points[:, :3])
    return _pack(s[:4], _frame_sym(Tv, Fr))


def five_relations_beltrami(data, frame: Frame3, cand: SolitonCandidate, points) -> dict:
    """The Beltrami system written with ``rho``, ``|A|`` and ``d/drho``."""
    from .beltrami import BeltramiData

    if not isinstance(data, BeltramiData):
        raise CheckError("beltrami mode needs BeltramiData")
    h, r = data.h, data.fiber
    chart = data.chart.extend(r, data.fiber_interval)
    rho = chart.var(r)
    A, an = data.A, data.A_norm
    X, Y, Z = frame
    f, x, y, z, a = cand.f, cand.x, cand.y, cand.z, cand.a

    def base(S, e):
        return add(*[mul(S[i], e.diff(h.coords[i])) for i in range(3)])

    rho3 = power(rho, 3)
    fr = f.diff(r)
    r1 = add(mul(rho, fr), mul(a, rho, rho), neg(f), mul(z, an))
    r2 = add(base(X, f), mul(2, y, an), mul(rho3, x.diff(r)))
    r3 = add(base(Y, f), mul(-2, x, an), mul(rho3, y.diff(r)))
    r4 = add(neg(mul(an, div(fr, rho))), base(Z, f), mul(rho3, z.diff(r)))
    Fb = cand.horizontal_base(frame)
    T = _base_lie_with_fibre_term(h, A, Fb, r, div(1, rho)).scale(mul(rho, rho))
    T = T + ricci3(h).scale(2) + h.as_tensor().scale(mul(2, add(f, neg(mul(z, an)), mul(a, rho, rho), -2)))
    s = chart.evaluate([r1, r2, r3, r4], points)
    Tv = _sym_values_4(T, chart, points)
    Fr = frame.values(data.chart, points[:, :3])
    return _pack(s[:4], _frame_sym(Tv, Fr))


def _sym_values_4(T, chart4, points):
    from .exterior3 import _SYM_INDEX

    v = chart4.evaluate(T.comps, points)
    n = v.shape[1]
    out = np.empty((n, 3, 3))
    for (i, j), k in _SYM_INDEX.items():
        out[:, i, j] = out[:, j, i] = v[k]
    return out


def five_relations(construction, frame: Frame3, cand: SolitonCandidate, mode: str, points) -> dict:
    """Evaluate one of the three five-relation systems.

    ``construction`` is a :class:`Metric4` for ``mode="generic"`` and the
    matching data object (``GHData`` or ``BeltramiData``) for ``"gh"`` and
    ``"beltrami"``.
    """
    points = np.asarray(points, dtype=float)
    if mode == "generic":
        return five_relations_generic(construction, frame, cand, points)
    if mode == "gh":
        return five_relations_gh(construction, frame, cand, points)
    if mode == "beltrami":
        return five_relations_beltrami(construction, frame, cand, points)
    raise ValueError(f"unknown mode {mode!r}")


def max_relation(rel: dict, which=("r1", "r2", "r3", "r4", "r5")) -> float:
    return float(max(np.max(rel[k]) for k in which))


# ---------------------------------------------------------------------------
# structural checks


def twistoriality_check(g: Metric4, frame: Frame3, points, tol: float = 1e-10) -> dict:
    """``X~(lam)``, ``Y~(lam)``, ``Z~(lam^-2) - Omega(X, Y)`` and ``V(lam^-2) - c``."""
    lam = _lam(g)
    Xl, Yl, Zl = (lift(g, S) for S in frame)
    Om = omega_xy(g, frame)
    v = g.chart.evaluate([Xl(lam), Yl(lam), add(Zl(g.lam_inv2), neg(Om)), add(g.V(g.lam_inv2), -g.c)], points)
    names = ("X_lambda", "Y_lambda", "Z_lambda_inv2_minus_omega", "V_lambda_inv2_minus_c")
    parts = {k: float(np.max(np.abs(r))) for k, r in zip(names, v)}
    return report("twistoriality", v, tol, parts=parts, c=g.c)


def ricci_structure_check(g: Metric4, h: Metric3, c: float, points, frame: Frame3 | None = None,
                          tol: float = 1e-7) -> dict:
    """Block residuals of ``Ric`` against the twistorial Ricci structure and an Einstein verdict.

    Relative tolerance: each block residual is divided by ``max(1, |Ric|)``.
    The horizontal block is compared on lifted coordinate fields.
    """
    points = np.asarray(points, dtype=float)
    if frame is not None:
        om = g.chart.evaluate([omega_xy(g, frame)], points)[0]
        if np.min(np.abs(om)) < OMEGA_FLOOR:
            raise CheckError("Omega below floor: the Ricci structure is stated only where Omega != 0")
    else:
        th = g.theta
        dth = [add(th[b].diff(g.coords[a]), neg(th[a].diff(g.coords[b]))) for a in range(4) for b in range(a + 1, 4)]
        w = g.chart.evaluate(dth, points)
        if np.min(np.sqrt(np.sum(w**2, axis=0))) < OMEGA_FLOOR:
            raise CheckError("Omega below floor: the Ricci structure is stated only where Omega != 0")
    jet = g.jet(points)
    ric = ricci_from_jet(jet)
    scale = np.maximum(1.0, tensor_norm(ric, jet.ginv))
    Vv = g.chart.evaluate(list(g.V.comps), points).T
    n = len(points)
    lifts = g.horizontal_lifts(np.broadcast_to(np.eye(3), (n, 3, 3)), points)
    vv = np.einsum("na,nab,nb->n", Vv, ric, Vv)
    vh = np.einsum("na,nab,nib->ni", Vv, ric, lifts)
    hh = np.einsum("nia,nab,njb->nij", lifts, ric, lifts)
    base = points[:, :3]
    RN = sym_matrix_values(ricci3(h), h.chart, base)
    hN = h.numeric(base)[0]
    expect = RN - 0.5 * c * c * hN
    lam2 = 1.0 / g.chart.evaluate([g.lam_inv2], points)[0]
    # normalise: V has g-length lam, lifted coordinate fields have g-size lam^-1
    r_v = np.abs(vv) / lam2 / scale
    r_vh = np.sqrt(np.sum(vh**2, axis=1)) / scale
    r_h = np.sqrt(np.einsum("nij,nij->n", hh - expect, hh - expect)) / scale
    s = scalar_curvature(jet, ric)
    traceless = ric - 0.25 * s[:, None, None] * jet.g
    ein = tensor_norm(traceless, jet.ginv)
    einstein = bool(np.max(ein) <= tol)
    rep = report("ricci-structure", np.concatenate([r_v, r_vh, r_h]), tol,
                 blocks={"vertical": float(np.max(r_v)), "mixed": float(np.max(r_vh)),
                         "horizontal": float(np.max(r_h))},
                 einstein=einstein, einstein_residual=float(np.max(ein)))
    rep["horizontal_tensor"] = hh
    rep["ricci"] = ric
    return rep
