import math
from fractions import Fraction

import numpy as np
import pytest

from toric_szego.geometry import KahlerPotential, OrbitPoint, lifted_monomial, sample_orbit_points
from toric_szego.kernels import (
    FactorizationRefused,
    apply_multiplier,
    diagonal_trace,
    kernel_report,
    multiplier_table,
    projective_szego,
    pullback_base,
    pullback_kernel_N,
    symbol_ratio,
    szego_kernel,
    verify_factorization,
)
from toric_szego.norming import norm_table
from toric_szego.partition import partition_counts
from toric_szego.polytope import cube, ehrhart_count, segment, simplex


def pair(P, seed=0):
    x, y = sample_orbit_points(KahlerPotential(P), 2, np.random.default_rng(seed))
    return x, y


def test_pullback_base_is_inner_product_of_level_one_monomials():
    P = segment(2)
    data = KahlerPotential(P)
    x, y = pair(P)
    want = sum(lifted_monomial(data, a, 1, x) * np.conj(lifted_monomial(data, a, 1, y)) for a in P.points)
    assert pullback_base(P, x, y) == pytest.approx(want, abs=1e-14)
    assert abs(pullback_base(P, x, x) - 1) < 1e-14


def test_power_kernel_is_power_of_base():
    P = cube(2)
    x, y = pair(P, 1)
    assert pullback_kernel_N(P, 5, x, y) == pytest.approx(pullback_base(P, x, y) ** 5, rel=1e-12)


@pytest.mark.parametrize("m,N", [(1, 3), (2, 2), (2, 4)])
def test_szego_kernel_on_projective_space_matches_homogeneous_formula(m, N):
    P = simplex(m)
    norms = norm_table(P, N)
    for seed in range(3):
        x, y = pair(P, seed)
        assert szego_kernel(P, N, norms, x, y) == pytest.approx(projective_szego(m, N, x, y), rel=1e-11)


def test_szego_kernel_equivariance():
    P = cube(2)
    N = 2
    norms = norm_table(P, N)
    x, y = pair(P, 2)
    base = szego_kernel(P, N, norms, x, y)
    rotated = szego_kernel(P, N, norms, x.circle_act(0.7), y)
    assert rotated == pytest.approx(base * np.exp(1j * N * 0.7), rel=1e-12)


def test_szego_kernel_rejects_wrong_table():
    P = simplex(1)
    x, y = pair(P)
    with pytest.raises(ValueError):
        szego_kernel(P, 2, norm_table(P, 3), x, y)


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("N", [1, 2, 4])
def test_multiplier_is_constant_on_projective_space(m, N):
    mult = multiplier_table(partition_counts(simplex(m), N), norm_table(simplex(m), N))
    want = Fraction(math.factorial(N + m), math.factorial(N))
    assert set(mult.eigenvalues) == {want}


def test_multiplier_excludes_undecomposable_points(remark):
    mult = multiplier_table(partition_counts(remark, 2), norm_table(remark, 2))
    assert mult.excluded == ((1, 1, 1),)
    assert mult[(1, 1, 1)] is None


def test_multiplier_rows():
    mult = multiplier_table(partition_counts(simplex(1), 3), norm_table(simplex(1), 3))
    assert mult.header() == ["alpha_1", "P", "Q", "inv_PQ", "Nm_PQ"]
    assert [r[3] for r in mult.rows()] == [4.0] * 4
    assert [r[4] for r in mult.rows()] == [0.75] * 4


def test_multiplier_table_checks_alignment():
    with pytest.raises(ValueError):
        multiplier_table(partition_counts(simplex(1), 2), norm_table(simplex(1), 3))


def test_power_modes_match_partition_counts():
    P = cube(2)
    N = 3
    mult = multiplier_table(partition_counts(P, N), norm_table(P, N))
    x, y = pair(P, 3)
    value, dev, power = apply_multiplier(KahlerPotential(P), mult, x, y)
    assert dev < 1e-12
    assert power == pytest.approx(pullback_kernel_N(P, N, x, y), rel=1e-12)
    norms = mult.norms
    assert value == pytest.approx(szego_kernel(P, N, norms, x, y), rel=1e-8, abs=1e-14)


@pytest.mark.parametrize("P", [simplex(1), segment(2), cube(2), simplex(2)], ids=lambda p: p.name)
def test_factorization_identity(P):
    for N in (1, 3, 5):
        rep = verify_factorization(P, N, samples=6, seed=11)
        assert rep.max_resid_rel <= (1e-10 if rep.exact_norms else 1e-6)
        assert max(p.expansion_dev for p in rep.pairs) <= 1e-9
        assert rep.max_hermitian_dev <= 1e-9


def test_factorization_refuses_non_delzant(remark):
    with pytest.raises(FactorizationRefused, match="not Delzant"):
        verify_factorization(remark, 1)


def test_factorization_refuses_weighted():
    with pytest.raises(FactorizationRefused):
        verify_factorization(simplex(2, 2, "binomial"), 1)


def test_kernel_report_is_seed_deterministic():
    a = kernel_report(cube(2), 2, samples=3, seed=5).as_dict()
    b = kernel_report(cube(2), 2, samples=3, seed=5).as_dict()
    assert a == b
    assert a["seed"] == 5 and len(a["pairs"]) == 3


def test_weighted_kernel_report_skips_factorization():
    rep = kernel_report(simplex(2, 2, "binomial"), 1, samples=2, seed=0)
    assert not rep.factored
    assert "max_resid_rel" not in rep.as_dict()


@pytest.mark.parametrize("P", [simplex(1), simplex(2), segment(2), cube(2)], ids=lambda p: p.name)
@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_diagonal_trace_counts_sections(P, N):
    tr = diagonal_trace(P, N, norm_table(P, N))
    assert tr.converged
    count = ehrhart_count(P, N)
    assert abs(tr.value - count) / count <= 1e-5


def test_symbol_ratio_exact_on_projective_space():
    s1 = symbol_ratio(simplex(1), ["1/2"], [4, 8, 16])
    assert list(s1.values) == [Fraction(N, N + 1) for N in (4, 8, 16)]
    s2 = symbol_ratio(simplex(2), [1 / 3, 1 / 3], [3, 6])
    assert list(s2.values) == [Fraction(N * N, (N + 1) * (N + 2)) for N in (3, 6)]


def test_symbol_ratio_converges_on_segment():
    s = symbol_ratio(segment(2), [1.0], [8, 16, 32])
    d = np.abs(s.differences)
    assert d[0] / d[1] >= 1.8
    limit = s.richardson_limit()
    dist = np.abs(s.floats - limit)
    assert dist[0] > dist[1] > dist[2]


def test_symbol_ratio_rejects_boundary_ray():
    with pytest.raises(ValueError):
        symbol_ratio(simplex(1), [1.0], [4])


def test_orbit_point_sampling_is_seeded():
    data = KahlerPotential(cube(2))
    a = sample_orbit_points(data, 4, np.random.default_rng(9))
    b = sample_orbit_points(data, 4, np.random.default_rng(9))
    assert all(np.array_equal(p.rho, q.rho) and np.array_equal(p.phi, q.phi) for p, q in zip(a, b))
    assert isinstance(a[0], OrbitPoint)
