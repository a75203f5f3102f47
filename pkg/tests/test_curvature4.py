import numpy as np
import pytest

from twistorial import catalogue
from twistorial.curvature4 import (
    Metric4,
    MetricError,
    assemble_twistorial_metric,
    ricci4,
    tensor_norm,
    weyl_asd_norm,
    weyl_halves,
)
from twistorial.expr import Chart
from twistorial.exterior3 import Metric3, ricci3, sym_matrix_values
from twistorial.gibbons_hawking import gh_build
from twistorial.sampling import total_samples, uniform

XYZ = ("x", "y", "z")
BOX = ((-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5))
CHART3 = Chart(XYZ, BOX)
CHART4 = Chart(XYZ + ("t",), BOX + ((0.0, 1.0),))
PTS4 = uniform(BOX + ((0.0, 1.0),), 40, 3)


def flat4(chart=CHART4):
    return Metric4([[1 if i == j else 0 for j in range(4)] for i in range(4)], chart)


def test_product_blocks():
    g = assemble_twistorial_metric(Metric3.euclidean(CHART3), 1, [0, 0, 0, 1], "t", (0.0, 1.0))
    assert np.array_equal(g.numeric(PTS4), np.broadcast_to(np.eye(4), (len(PTS4), 4, 4)))
    assert g.c == 0


def test_gh_linear_components(gh_linear):
    g = gh_build(gh_linear)
    G = g.numeric(PTS4)
    x, z = PTS4[:, 0], PTS4[:, 2]
    assert np.allclose(G[:, 3, 3], 1 / z, rtol=1e-15)
    assert np.allclose(G[:, 3, 1], x / z, rtol=1e-15)
    assert np.allclose(G[:, 1, 1], z + x**2 / z, rtol=1e-15)
    assert g.assembled_from_blocks(PTS4) <= 1e-12


def test_negative_dilation_rejected():
    with pytest.raises(MetricError):
        assemble_twistorial_metric(Metric3.euclidean(CHART3), -1, [0, 0, 0, 1], "t", (0.0, 1.0))
    with pytest.raises(MetricError):
        assemble_twistorial_metric(Metric3.euclidean(CHART3), "z - 1", [0, 0, 0, 1], "t", (0.0, 1.0),
                                   samples=PTS4)


def test_vertical_block_invariants(gh_linear_built, bel_planar_built):
    for g, _, samples in (gh_linear_built, bel_planar_built):
        chk = g.vertical_checks(samples)
        assert chk["theta_V"] <= 1e-12
        assert chk["theta_horizontal"] <= 1e-12
        assert chk["c_spread"] <= 1e-10
        assert g.assembled_from_blocks(samples) <= 1e-12


def test_flat_ricci_and_weyl():
    g = flat4()
    assert np.max(np.abs(ricci4(g, PTS4))) == 0
    assert np.max(weyl_asd_norm(g, PTS4)) == 0


def test_sheared_flat_metric_is_flat():
    # dx^2 + dy^2 + dz^2 + dt^2 in coordinates (x, y, z, s) with t = s + x*y + z^2
    comps = [
        ["1 + y^2", "x*y", "2*y*z", "y"],
        [None, "1 + x^2", "2*x*z", "x"],
        [None, None, "1 + 4*z^2", "2*z"],
        [None, None, None, "1"],
    ]
    full = [[comps[min(i, j)][max(i, j)] for j in range(4)] for i in range(4)]
    g = Metric4(full, CHART4)
    assert np.max(np.abs(ricci4(g, PTS4))) <= 1e-10


@pytest.mark.parametrize("example", ["gh.linear", "gh.pole1", "gh.pole2"])
def test_gh_ricci_flat_and_self_dual(example):
    entry = catalogue.CATALOGUE[example]
    data = catalogue.get(example)
    samples = total_samples(entry.box, entry.fiber)
    g = gh_build(data, samples)
    jet = g.jet(samples)
    from twistorial.curvature4 import ricci_from_jet

    assert np.max(tensor_norm(ricci_from_jet(jet), jet.ginv)) <= 1e-8
    assert np.max(weyl_asd_norm(g, samples)) <= 1e-6


def test_orientation_flag_swaps_blocks(gh_linear_built):
    g, _, samples = gh_linear_built
    plus, minus, full = weyl_halves(g.jet(samples[:20]))
    assert np.allclose(weyl_asd_norm(g, samples[:20], 1, relative=False), minus)
    assert np.allclose(weyl_asd_norm(g, samples[:20], -1, relative=False), plus)
    with pytest.raises(ValueError):
        weyl_asd_norm(g, samples[:5], 0)


def test_gh_pole_is_not_conformally_flat():
    # the other Weyl half carries the curvature, so the orientation choice matters
    entry = catalogue.CATALOGUE["gh.pole1"]
    data = catalogue.get("gh.pole1")
    samples = total_samples(entry.box, entry.fiber)[:30]
    g = gh_build(data, samples)
    assert np.max(weyl_asd_norm(g, samples, -1)) > 1e-3


def test_curved_product_has_weyl_curvature():
    # (e^{2z} dx^2 + dy^2 + dz^2) + dt^2: base not of constant curvature
    h = Metric3.diagonal(("exp(2*z)", "1", "1"), CHART3)
    g = assemble_twistorial_metric(h, 1, [0, 0, 0, 1], "t", (0.0, 1.0))
    w = weyl_asd_norm(g, PTS4, relative=False)
    assert np.max(w) > 1e-3
    # the product Ricci is the base Ricci
    R4 = ricci4(g, PTS4)
    R3 = sym_matrix_values(ricci3(h), CHART3, PTS4[:, :3])
    assert np.max(np.abs(R4[:, :3, :3] - R3)) <= 1e-12
    assert np.max(np.abs(R4[:, 3, :])) <= 1e-12


def test_ricci_structure_blocks_all_catalogue_metrics():
    from twistorial.beltrami import beltrami_build, beltrami_frame
    from twistorial.gibbons_hawking import gh_frame
    from twistorial.soliton_check import ricci_structure_check

    for eid, entry in catalogue.CATALOGUE.items():
        data = catalogue.get(eid)
        samples = total_samples(entry.box, entry.fiber)[::4]
        if entry.kind == "beltrami":
            g, frame = beltrami_build(data, samples), beltrami_frame(data, samples)
        else:
            g, frame = gh_build(data, samples), gh_frame(data, samples)
        rep = ricci_structure_check(g, data.h, g.c, samples, frame)
        assert rep["pass"], (eid, rep["blocks"])
