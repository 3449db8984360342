import math
from fractions import Fraction

import numpy as np
import pytest

from toric_szego.norming import (
    closed_form_projective_norm,
    monomial_norm,
    norm_table,
    projective_structure,
    total_volume_check,
)
from toric_szego.polytope import cube, segment, simplex
from toric_szego.quadrature import QuadratureConfig, integrate_whitened


def trapezoid_segment_norm(alpha, n=1_000_000, lo=-60.0, hi=60.0):
    """Norm on [0,2] with unit weights, N=1, by a plain fine trapezoid in rho."""
    rho = np.linspace(lo, hi, n)
    e1, e2 = np.exp(rho), np.exp(2 * rho)
    s = 1 + e1 + e2
    mean = (e1 + 2 * e2) / s
    var = (e1 + 4 * e2) / s - mean**2
    vals = np.exp(alpha * rho) / s * var
    h = rho[1] - rho[0]
    return float(h * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


def test_segment_norm_matches_fine_trapezoid():
    got = monomial_norm(segment(2), 1, (1,)).value
    assert got == pytest.approx(trapezoid_segment_norm(1), rel=1e-8)


@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("N", [1, 2, 3])
def test_quadrature_matches_projective_closed_form(m, N):
    table = norm_table(simplex(m), N, method="quadrature")
    for e in table:
        exact = float(closed_form_projective_norm(m, N, e.alpha))
        assert e.value == pytest.approx(exact, rel=1e-6), e.alpha
        assert e.method == "quadrature" and not e.flagged


def test_closed_form_values():
    assert closed_form_projective_norm(1, 1, (0,)) == Fraction(1, 2)
    assert closed_form_projective_norm(2, 2, (1, 1)) == Fraction(1, 24)
    # p!/((p+m)! binom(p, alpha)) with binom the multinomial including the last slot
    assert closed_form_projective_norm(2, 3, (1, 0)) == Fraction(6, 120 * 3)


def test_fast_path_is_exact():
    table = norm_table(simplex(2), 2)
    assert table.all_exact
    for e in table:
        assert e.exact == closed_form_projective_norm(2, 2, e.alpha)
        assert e.method == "closed-form"


def test_binomial_weighted_simplex_uses_rescaled_closed_form():
    P = simplex(2, 2, "binomial")
    assert projective_structure(P) == (2, 2)
    q = norm_table(P, 1)
    quad = norm_table(P, 1, method="quadrature")
    for a, b in zip(q, quad):
        assert b.value == pytest.approx(float(a.exact), rel=1e-6)


def test_projective_structure_detection():
    assert projective_structure(simplex(3)) == (3, 1)
    assert projective_structure(cube(2)) is None
    assert projective_structure(segment(2)) is None  # unit weights are not Fubini-Study


def test_closed_method_refuses_without_structure():
    with pytest.raises(ValueError):
        monomial_norm(cube(2), 1, (0, 0), method="closed")


def test_alpha_outside_is_rejected():
    with pytest.raises(ValueError):
        monomial_norm(simplex(1), 1, (2,))


def test_square_norms_factor_into_segment_norms():
    # unit square: the potential splits, so Q(a, b) = Q_1(a) Q_1(b)
    table = norm_table(cube(2), 3, method="quadrature")
    for e in table:
        want = closed_form_projective_norm(1, 3, (e.alpha[0],)) * closed_form_projective_norm(1, 3, (e.alpha[1],))
        assert e.value == pytest.approx(float(want), rel=1e-8)


def test_boundary_entries_are_flagged_as_boundary():
    table = norm_table(segment(2), 2)
    flags = {e.alpha: e.boundary for e in table}
    assert flags[(0,)] and flags[(4,)] and not flags[(2,)]


def test_thread_count_does_not_change_values():
    a = norm_table(cube(2), 2, threads=1)
    b = norm_table(cube(2), 2, threads=4)
    assert [e.value for e in a] == [e.value for e in b]


def test_table_csv_layout():
    table = norm_table(simplex(1), 1)
    assert table.header() == ["alpha_1", "Q", "err", "method", "boundary_flag"]
    assert table.rows()[0] == [0, 0.5, 0.0, "closed-form", 1]


@pytest.mark.parametrize(
    "P", [simplex(1), simplex(2), segment(2), cube(2), simplex(2, 2, "binomial")], ids=lambda p: p.name
)
def test_total_volume(P):
    check = total_volume_check(P)
    assert check.converged
    assert check.gap <= 1e-6


def test_gaussian_integral():
    cfg = QuadratureConfig()
    cov_inv = np.array([[2.0, 0.5], [0.5, 1.0]])
    L = np.linalg.cholesky(np.linalg.inv(cov_inv))

    def logenv(r):
        return -0.5 * np.einsum("ij,jk,ik->i", r, cov_inv, r)

    res = integrate_whitened(lambda r: np.exp(logenv(r)), logenv, np.zeros(2), L, cfg)
    want = 2 * math.pi / math.sqrt(np.linalg.det(cov_inv))
    assert res.converged and float(res.value) == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("kw", [dict(rtol=0.0), dict(rtol=0.5), dict(radius=2.0), dict(max_subdivisions=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        QuadratureConfig(**kw)
