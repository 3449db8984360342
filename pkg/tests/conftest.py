import itertools
from collections import Counter
from fractions import Fraction
from pathlib import Path

import pytest

from toric_szego.polytope import cube, remark_simplex, segment, simplex

POLYTOPE_DIR = Path(__file__).resolve().parent.parent / "polytopes"


@pytest.fixture
def polytope_dir() -> Path:
    return POLYTOPE_DIR


# the polytopes exercised throughout; small enough for brute-force oracles
TEST_POLYTOPES = {
    "simplex1": lambda: simplex(1),
    "simplex2": lambda: simplex(2),
    "segment2": lambda: segment(2),
    "square": lambda: cube(2),
}


@pytest.fixture(params=sorted(TEST_POLYTOPES))
def test_polytope(request):
    return TEST_POLYTOPES[request.param]()


@pytest.fixture
def remark():
    return remark_simplex()


def sequence_counts(points, N):
    """Count length-N sequences of points by their sum (brute force)."""
    out = Counter()
    for seq in itertools.product(points, repeat=N):
        out[tuple(map(sum, zip(*seq)))] += 1
    return out


def in_simplex_hull(x, verts):
    """Membership in a simplex by exact barycentric coordinates."""
    m = len(x)
    v0 = verts[0]
    M = [[Fraction(verts[j + 1][i] - v0[i]) for j in range(m)] for i in range(m)]
    b = [Fraction(x[i] - v0[i]) for i in range(m)]
    # Gaussian elimination
    for col in range(m):
        piv = next(r for r in range(col, m) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(m):
            if r != col and M[r][col] != 0:
                k = M[r][col] / M[col][col]
                M[r] = [a - k * c for a, c in zip(M[r], M[col])]
                b[r] -= k * b[col]
    lam = [b[i] / M[i][i] for i in range(m)]
    return all(t >= 0 for t in lam) and sum(lam) <= 1


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
