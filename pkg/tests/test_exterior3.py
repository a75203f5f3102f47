import numpy as np
import pytest

from twistorial.expr import Chart, add, const, mul, parse_expr, var
from twistorial.exterior3 import (
    Metric3,
    OneForm3,
    SymTensor3,
    TwoForm3,
    Vector3,
    codifferential,
    cross_1forms,
    exterior_derivative,
    flat,
    hessian,
    hodge_star,
    inner,
    lie_bracket,
    lie_derivative_metric,
    norm_values,
    ricci3,
    sharp,
    sym_matrix_values,
    sym_product,
    values,
    wedge,
)
from twistorial.sampling import uniform

XYZ = ("x", "y", "z")
BOX = ((-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5))
CHART = Chart(XYZ, BOX)
EUC = Metric3.euclidean(CHART)
CURVED = Metric3.diagonal(("exp(2*z)", "exp(2*z)", "1"), CHART)
PTS = uniform(BOX, 50, 11)


def one(*c):
    return OneForm3(tuple(parse_expr(str(v), XYZ) for v in c), XYZ)


def vec(*c):
    return Vector3(tuple(parse_expr(str(v), XYZ) for v in c), XYZ)


def two(*c):
    return TwoForm3(tuple(parse_expr(str(v), XYZ) for v in c), XYZ)


def close(obj, expected, h=EUC, tol=1e-12):
    return np.max(norm_values(obj - expected, h, PTS)) <= tol


BASIS = ["1", "x", "y", "z", "x*y", "sin(z)", "cos(x)", "y^2", "x*z", "exp(-y)"]


def random_form(rng):
    comps = []
    for _ in range(3):
        coef = rng.normal(size=len(BASIS))
        comps.append(add(*[mul(float(c), parse_expr(b, XYZ)) for c, b in zip(coef, BASIS)]))
    return OneForm3(tuple(comps), XYZ)


# -- musical isomorphisms ----------------------------------------------------


def test_sharp_euclidean():
    assert close(sharp(one(1, 0, 0), EUC), vec(1, 0, 0))


def test_flat_euclidean():
    assert close(flat(vec(0, 0, 1), EUC), one(0, 0, 1))


def test_sharp_diagonal():
    h = Metric3.diagonal((4, 1, 1), CHART)
    assert close(sharp(one(1, 0, 0), h), vec("1/4", 0, 0), h)


@pytest.mark.parametrize("h", [EUC, CURVED], ids=["flat", "conformal"])
def test_flat_sharp_inverse(h, rng):
    a = random_form(rng)
    assert close(flat(sharp(a, h), h), a, h, 1e-10)
    X = sharp(a, h)
    assert close(sharp(flat(X, h), h), X, h, 1e-10)


# -- d, star, codifferential -------------------------------------------------


def test_d_of_x_dy():
    assert close(exterior_derivative(one(0, "x", 0)), two(0, 0, 1))


def test_d_of_function():
    assert close(exterior_derivative(var("z"), XYZ), one(0, 0, 1))


@pytest.mark.parametrize("seed", range(5))
def test_d_squared_vanishes(seed):
    rng = np.random.default_rng(seed)
    a = random_form(rng)
    assert np.max(np.abs(values(exterior_derivative(exterior_derivative(a)), CHART, PTS))) <= 1e-12
    f = a[0]
    assert np.max(norm_values(exterior_derivative(exterior_derivative(f, XYZ)), EUC, PTS)) <= 1e-12


def test_star_conventions():
    assert close(hodge_star(one(0, 0, 1), EUC), two(0, 0, 1))
    assert close(hodge_star(two(0, 0, 1), EUC), one(0, 0, 1))
    vol = hodge_star(const(1), EUC)
    assert np.allclose(values(vol[0], CHART, PTS), 1.0)


@pytest.mark.parametrize("h", [EUC, CURVED], ids=["flat", "conformal"])
def test_star_involution(h, rng):
    a = random_form(rng)
    assert close(hodge_star(hodge_star(a, h), h), a, h, 1e-10)
    w = exterior_derivative(a)
    assert close(hodge_star(hodge_star(w, h), h), w, h, 1e-10)
    f = a[1]
    back = hodge_star(hodge_star(f, h), h)
    assert np.max(np.abs(values(back, CHART, PTS) - values(f, CHART, PTS))) <= 1e-10


def test_codifferential_examples():
    assert np.allclose(values(codifferential(one("x", 0, 0), EUC), CHART, PTS), -1.0)
    assert np.allclose(values(codifferential(one(0, 0, 1), EUC), CHART, PTS), 0.0)
    # u = z: d*(u^-2 du) = 2 u^-3 |du|^2
    d = values(codifferential(one(0, 0, "z^(-2)"), EUC), CHART, PTS)
    assert np.max(np.abs(d - 2 * PTS[:, 2] ** -3)) <= 1e-12


def test_codifferential_is_minus_divergence(rng):
    a = random_form(rng)
    div = add(*[a[i].diff(c) for i, c in enumerate(XYZ)])
    assert np.max(np.abs(values(add(codifferential(a, EUC), div), CHART, PTS))) <= 1e-12


# -- cross product ------------------------------------------------------------


def test_cross_examples():
    assert close(cross_1forms(one(1, 0, 0), one(0, 1, 0), EUC), one(0, 0, 1))
    assert close(cross_1forms(one(0, 0, 1), one(1, 0, 0), EUC), one(0, 1, 0))
    a = one("x", "y^2", "sin(z)")
    assert close(cross_1forms(a, a, EUC), one(0, 0, 0))


def test_cross_matches_classical_product(rng):
    a, b = random_form(rng), random_form(rng)
    got = values(cross_1forms(a, b, EUC), CHART, PTS)
    want = np.cross(values(a, CHART, PTS), values(b, CHART, PTS))
    assert np.max(np.abs(got - want)) <= 1e-12


@pytest.mark.parametrize("h", [EUC, CURVED], ids=["flat", "conformal"])
def test_cross_orthogonality_and_lagrange(h, rng):
    a, b = random_form(rng), random_form(rng)
    c = cross_1forms(a, b, h)
    ca = values(inner(c, a, h), CHART, PTS)
    cb = values(inner(c, b, h), CHART, PTS)
    scale = 1 + norm_values(a, h, PTS) ** 2 * norm_values(b, h, PTS) ** 2
    assert np.max(np.abs(ca) / scale) <= 1e-10
    assert np.max(np.abs(cb) / scale) <= 1e-10
    lhs = norm_values(c, h, PTS) ** 2
    rhs = norm_values(a, h, PTS) ** 2 * norm_values(b, h, PTS) ** 2 - values(inner(a, b, h), CHART, PTS) ** 2
    assert np.max(np.abs(lhs - rhs) / scale) <= 1e-10


# -- brackets and Lie derivatives ---------------------------------------------


def test_bracket_examples():
    assert close(lie_bracket(vec(1, 0, 0), vec(0, 1, 0)), vec(0, 0, 0))
    assert close(lie_bracket(vec(0, "x", 0), vec(1, 0, 0)), vec(0, -1, 0))
    X = vec("y*z", "sin(x)", "x^2")
    assert close(lie_bracket(X, X), vec(0, 0, 0))


def test_jacobi_identity(rng):
    X, Y, Z = (sharp(random_form(rng), EUC) for _ in range(3))
    jac = lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X)) + lie_bracket(Z, lie_bracket(X, Y))
    assert np.max(norm_values(jac, EUC, PTS)) <= 1e-8


def test_lie_derivative_examples():
    H = EUC.as_tensor()
    assert close(lie_derivative_metric(vec(1, 0, 0), EUC), H.scale(0))
    assert close(lie_derivative_metric(vec("x", "y", "z"), EUC), H.scale(2))
    assert close(lie_derivative_metric(vec("-y", "x", 0), EUC), H.scale(0))


def test_sym_product_convention():
    a, b = one(1, 0, 0), one(0, 1, 0)
    T = sym_matrix_values(sym_product(a, b), CHART, PTS[:1])[0]
    assert T[0, 1] == T[1, 0] == 0.5
    assert T[0, 0] == 0


# -- curvature ---------------------------------------------------------------


def test_flat_ricci_and_coordinate_hessian():
    assert np.max(np.abs(sym_matrix_values(ricci3(EUC), CHART, PTS))) == 0
    assert np.max(np.abs(sym_matrix_values(hessian(var("y"), EUC), CHART, PTS))) == 0


def test_hessian_of_square():
    T = sym_matrix_values(hessian(parse_expr("x^2", XYZ), EUC), CHART, PTS)
    want = np.zeros((3, 3))
    want[0, 0] = 2
    assert np.allclose(T, want, atol=0)


def _fd_metric(p, h_fn, step=1e-4):
    """Christoffel symbols by central differences of the metric components."""
    dim = 3
    g = h_fn(p)
    ginv = np.linalg.inv(g)
    dg = np.zeros((dim, dim, dim))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = step
        dg[k] = (h_fn(p + e) - h_fn(p - e)) / (2 * step)
    # first[l, i, j] = (d_i g_lj + d_j g_li - d_l g_ij) / 2
    first = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
    return np.einsum("kl,lij->kij", ginv, first)


def _fd_ricci(p, h_fn, step=1e-3):
    G = _fd_metric(p, h_fn)
    dG = np.zeros((3, 3, 3, 3))
    for m in range(3):
        e = np.zeros(3)
        e[m] = step
        dG[m] = (_fd_metric(p + e, h_fn) - _fd_metric(p - e, h_fn)) / (2 * step)
    # R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik
    return (np.einsum("kkij->ij", dG) - np.einsum("jkik->ij", dG)
            + np.einsum("kkl,lij->ij", G, G) - np.einsum("kjl,lik->ij", G, G))


def test_ricci_matches_finite_difference_oracle():
    def h_fn(p):
        return np.diag([np.exp(2 * p[2]), np.exp(2 * p[2]), 1.0])

    R = sym_matrix_values(ricci3(CURVED), CHART, PTS[:20])
    for p, r in zip(PTS[:20], R):
        assert np.max(np.abs(r - _fd_ricci(p, h_fn)) / (1 + np.abs(r))) <= 1e-5
    # nonzero: e^{2z}(dx^2 + dy^2) + dz^2 is hyperbolic space with Ric = -2 h
    hh = CURVED.numeric(PTS[:20])[0]
    assert np.max(np.abs(R + 2 * hh)) <= 1e-12


def test_rejects_bad_metric():
    from twistorial.exterior3 import SingularMetricError

    h = Metric3.diagonal((1, -1, 1), CHART)
    with pytest.raises(SingularMetricError):
        h.check_positive(PTS)


# -- codifferential of a wedge -------------------------------------------------


def codiff_wedge_gap(a, b, h):
    lhs = codifferential(wedge(a, b), h)
    rhs = (b.scale(codifferential(a, h)) - a.scale(codifferential(b, h))
           - flat(lie_bracket(sharp(a, h), sharp(b, h)), h))
    return float(np.max(norm_values(lhs - rhs, h, PTS)))


@pytest.mark.parametrize("h", [EUC, CURVED], ids=["flat", "conformal"])
def test_codifferential_of_wedge_identity(h):
    rng = np.random.default_rng(99)
    worst = max(codiff_wedge_gap(random_form(rng), random_form(rng), h) for _ in range(10))
    assert worst <= 1e-8


def test_two_form_sign_convention_is_forced():
    # the opposite sign for d* on 2-forms breaks the identity
    rng = np.random.default_rng(5)
    a, b = random_form(rng), random_form(rng)
    flipped = -codifferential(wedge(a, b), EUC)
    rhs = (b.scale(codifferential(a, EUC)) - a.scale(codifferential(b, EUC))
           - flat(lie_bracket(sharp(a, EUC), sharp(b, EUC)), EUC))
    assert np.max(norm_values(flipped - rhs, EUC, PTS)) > 1e-3


def test_symtensor_call():
    T = SymTensor3(tuple(parse_expr(s, XYZ) for s in ("1", "2", "3", "4", "5", "6")), XYZ)
    X, Y = vec(1, 0, 0), vec(0, 1, 0)
    assert values(T(X, Y), CHART, PTS[:1])[0] == 2
    assert np.allclose(values(T(X), CHART, PTS[:1])[0], [1, 2, 3])
