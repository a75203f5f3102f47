import numpy as np
import pytest

from twistorial import catalogue
from twistorial.curvature4 import MetricError, lie_derivative_numeric
from twistorial.expr import Chart
from twistorial.exterior3 import Metric3
from twistorial.gibbons_hawking import (
    GHData,
    GHDataError,
    fiber_diagnostic,
    gh_build,
    gh_frame,
    validate,
    verify_monopole,
)
from twistorial.sampling import base_samples, total_samples, uniform
from twistorial.soliton_check import omega_xy, twistoriality_check

XYZ = ("x", "y", "z")
BOX = ((-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5))


def flat_data(u, A, box=BOX):
    return GHData(Metric3.euclidean(Chart(XYZ, box)), u, A)


def test_linear_monopole_exact(gh_linear):
    rep = verify_monopole(gh_linear, base_samples(BOX))
    assert rep["monopole"] <= 1e-12
    assert rep["harmonic"] <= 1e-12


@pytest.mark.parametrize("example", ["gh.pole1", "gh.pole2"])
def test_pole_potentials_satisfy_monopole(example):
    entry = catalogue.CATALOGUE[example]
    rep = verify_monopole(catalogue.get(example), base_samples(entry.box))
    assert rep["monopole"] <= 1e-8
    assert rep["harmonic"] <= 1e-8


def test_sign_broken_potential_fails():
    data = flat_data("z", ("y", "0", "0"))
    rep = verify_monopole(data, base_samples(BOX))
    assert rep["monopole"] > 1
    with pytest.raises(GHDataError):
        validate(data, base_samples(BOX))


def test_build_components_and_c(gh_linear):
    pts = uniform(BOX + ((0.0, 1.0),), 30, 2)
    g = gh_build(gh_linear, pts)
    x, z = pts[:, 0], pts[:, 2]
    G = g.numeric(pts)
    expect = np.zeros_like(G)
    expect[:, 0, 0] = expect[:, 2, 2] = z
    expect[:, 1, 1] = z + x**2 / z
    expect[:, 1, 3] = expect[:, 3, 1] = x / z
    expect[:, 3, 3] = 1 / z
    assert np.max(np.abs(G - expect)) <= 1e-14
    assert g.c == 0


def test_nonpositive_u_rejected():
    data = flat_data("z", ("0", "x", "0"), ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)))
    pts = total_samples(((-1.0, 1.0), (-1.0, 0.0), (-1.0, 1.0)), (0.0, 1.0))
    with pytest.raises((GHDataError, MetricError)):
        gh_build(data, pts)


def test_fiber_field_is_killing(gh_linear_built):
    g, _, samples = gh_linear_built
    jet = g.jet(samples, second=False)
    E = np.tile([0.0, 0.0, 0.0, 1.0], (len(samples), 1))
    L = lie_derivative_numeric(jet, E, np.zeros((len(samples), 4, 4)))
    assert np.max(np.abs(L)) <= 1e-10


def test_axis_aligned_frame(gh_linear):
    fr = gh_frame(gh_linear)
    F = fr.values(gh_linear.chart, base_samples(BOX))
    assert np.array_equal(F, np.broadcast_to(np.eye(3), F.shape))


def test_omega_equals_gradient_norm(gh_linear_built):
    g, fr, samples = gh_linear_built
    om = g.chart.evaluate([omega_xy(g, fr)], samples)[0]
    assert np.max(np.abs(om - 1)) <= 1e-12


def test_diagonal_gradient_frame():
    data = flat_data("x + y + z", ("z", "x", "y"))
    pts = base_samples(BOX)
    assert verify_monopole(data, pts)["monopole"] <= 1e-12
    F = gh_frame(data).values(data.chart, pts)
    assert np.allclose(F[:, 2], np.ones(3) / np.sqrt(3), atol=1e-15)
    gram = np.einsum("nia,nja->nij", F, F)
    assert np.max(np.abs(gram - np.eye(3))) <= 1e-12
    assert np.all(np.linalg.det(F) > 0)
    # X(u) = Y(u) = 0
    assert np.max(np.abs(F[:, :2].sum(axis=2))) <= 1e-12


def test_frame_needs_gradient():
    data = flat_data("1", ("0", "0", "0"))
    with pytest.raises(GHDataError):
        gh_frame(data, base_samples(BOX))


@pytest.mark.parametrize("u, A", [("z", ("0", "x", "0")), ("x + 2*y + 3*z", ("2*z", "3*x", "y"))])
def test_planar_level_sets_are_flat_and_geodesic(u, A):
    rep = fiber_diagnostic(flat_data(u, A), base_samples(BOX))
    assert rep["second_fundamental_form"] <= 1e-12
    assert rep["induced_curvature"] <= 1e-12


def test_spherical_level_sets_are_not_geodesic():
    entry = catalogue.CATALOGUE["gh.pole1"]
    rep = fiber_diagnostic(catalogue.get("gh.pole1"), base_samples(entry.box))
    assert rep["second_fundamental_form"] > 1e-3
    assert len(rep["argmax_second_fundamental_form"]) == 3
    # round spheres: intrinsic curvature 1/r^2 is far from zero as well
    assert rep["induced_curvature"] > 1e-3


@pytest.mark.parametrize("example", ["gh.linear", "gh.pole1", "gh.pole2"])
def test_twistoriality(example):
    entry = catalogue.CATALOGUE[example]
    data = catalogue.get(example)
    samples = total_samples(entry.box, entry.fiber)
    rep = twistoriality_check(gh_build(data, samples), gh_frame(data, samples), samples)
    assert rep["pass"], rep["parts"]
    assert rep["c"] == 0
