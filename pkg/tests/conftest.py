import sys

import numpy as np
import pytest

from twistorial import catalogue
from twistorial.beltrami import beltrami_build, beltrami_frame
from twistorial.gibbons_hawking import gh_build, gh_frame
from twistorial.sampling import total_samples, uniform


@pytest.fixture(scope="session")
def gh_linear():
    return catalogue.get("gh.linear")


@pytest.fixture(scope="session")
def bel_planar():
    return catalogue.get("bel.planar")


@pytest.fixture(scope="session")
def gh_linear_built(gh_linear):
    e = catalogue.CATALOGUE["gh.linear"]
    samples = total_samples(e.box, e.fiber)
    return gh_build(gh_linear, samples), gh_frame(gh_linear, samples), samples


@pytest.fixture(scope="session")
def bel_planar_built(bel_planar):
    e = catalogue.CATALOGUE["bel.planar"]
    samples = total_samples(e.box, e.fiber)
    return beltrami_build(bel_planar, samples), beltrami_frame(bel_planar, samples), samples


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def points_on(box, n, seed=7):
    return uniform(box, n, seed)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
