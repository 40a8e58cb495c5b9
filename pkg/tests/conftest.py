import numpy as np
import pytest
from hypothesis import settings, strategies as st
from hypothesis.extra.numpy import arrays

from lyaplab.scenarios import A_DIAG, OMEGA, SIGMA

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


@st.composite
def invertible_matrices(draw, dims=(2, 3, 4, 5)):
    d = draw(st.sampled_from(dims))
    re = draw(arrays(float, (d, d), elements=finite))
    im = draw(arrays(float, (d, d), elements=finite))
    g = np.round(re, 3) + 1j * np.round(im, 3)
    if draw(st.booleans()):
        # a diagonal shift makes a well-conditioned draw
        g = g + (1.0 + float(np.abs(g).sum())) * np.eye(d)
    sv = np.linalg.svd(g, compute_uv=False)
    if sv[0] == 0 or sv[-1] < 1e-6 * sv[0]:
        g = g + np.eye(d) * (1.0 + sv[0])
    return g


@st.composite
def vectors(draw, d):
    re = draw(arrays(float, (d,), elements=finite))
    im = draw(arrays(float, (d,), elements=finite))
    v = re + 1j * im
    if np.linalg.norm(v) < 1e-3:
        v = v + 1.0
    return v


@pytest.fixture
def counterexample_matrices():
    return A_DIAG, SIGMA, OMEGA


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
