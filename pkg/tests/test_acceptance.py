"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run standalone with ``pytest tests/test_acceptance.py`` (the lines appear in
the terminal summary) or ``python tests/test_acceptance.py``.
"""

import math
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from toric_szego.characters import CharacterValue, character_exact, character_leading, character_trace
from toric_szego.geometry import (
    KahlerPotential,
    lifted_monomial,
    moment_map,
    potential,
    sample_orbit_points,
    weight_eigenvalue_check,
)
from toric_szego.kernels import diagonal_trace, multiplier_table, symbol_ratio, verify_factorization
from toric_szego.norming import closed_form_projective_norm, norm_table
from toric_szego.partition import convolve_tables, partition_counts
from toric_szego.polytope import cube, ehrhart_count, is_delzant, remark_simplex, segment, simplex

RESULTS: list[str] = []


def record(number: int, title: str, ok: bool, detail: str, elapsed: float, limit: float) -> None:
    within = elapsed <= limit
    status = "PASS" if ok and within else "FAIL"
    RESULTS.append(f"[{status}] criterion {number}: {title}: {detail}; {elapsed:.1f}s (limit {limit:.0f}s)")
    print(RESULTS[-1])
    assert ok, RESULTS[-1]
    assert within, RESULTS[-1]


@lru_cache(maxsize=None)
def quadrature_table(m: int, N: int):
    return norm_table(simplex(m), N, method="quadrature")


TRACE_POLYTOPES = {
    "simplex1": simplex(1),
    "simplex2": simplex(2),
    "simplex3": simplex(3),
    "segment2": segment(2),
    "square": cube(2),
    "2simplex2-binomial": simplex(2, 2, "binomial"),
}


def test_criterion_1_projective_calibration():
    t0 = time.perf_counter()
    worst = 0.0
    for m in (1, 2):
        for N in range(1, 7):
            for e in quadrature_table(m, N):
                exact = float(closed_form_projective_norm(m, N, e.alpha))
                worst = max(worst, abs(e.value - exact) / exact)
    record(1, "quadrature norms on Sigma_1, Sigma_2 vs closed form (N<=6)", worst <= 1e-6,
           f"max rel err {worst:.2e} (tol 1e-06)", time.perf_counter() - t0, 30)


def test_criterion_2_multiplier_constancy():
    t0 = time.perf_counter()
    exact_ok = True
    worst = 0.0
    for m in (1, 2, 3):
        for N in range(1, 7):
            want = Fraction(math.factorial(N + m), math.factorial(N))
            counts = partition_counts(simplex(m), N)
            mult = multiplier_table(counts, norm_table(simplex(m), N))
            exact_ok &= all(ev == want for ev in mult.eigenvalues)
            if m < 3:
                quad = multiplier_table(counts, quadrature_table(m, N))
                worst = max(worst, max(abs(float(ev) - float(want)) / float(want) for ev in quad.eigenvalues))
    record(2, "1/(P_N Q_N) = (N+m)!/N! on CP^m", exact_ok and worst <= 1e-6,
           f"rational path exact={exact_ok}, quadrature max rel dev {worst:.2e} (tol 1e-06)",
           time.perf_counter() - t0, 10)


def test_criterion_3_factorization_identity():
    t0 = time.perf_counter()
    ok = True
    parts = []
    for P in (simplex(1), segment(2), cube(2)):
        worst = 0.0
        exact = True
        for N in range(1, 7):
            rep = verify_factorization(P, N, samples=20, seed=7)
            worst = max(worst, rep.max_resid_rel)
            exact &= rep.exact_norms
        tol = 1e-10 if exact else 1e-6
        ok &= worst <= tol
        parts.append(f"{P.name} {worst:.1e} (tol {tol:.0e})")
    record(3, "direct Szego sum vs multiplier on power kernel, 20 pairs, N<=6", ok,
           "max rel residual " + ", ".join(parts), time.perf_counter() - t0, 120)


def test_criterion_4_normality_counterexample():
    t0 = time.perf_counter()
    P = remark_simplex()
    count = partition_counts(P, 2)[(1, 1, 1)]
    cert = is_delzant(P)
    dets = sorted({abs(v.determinant) for v in cert.failures})
    ok = count == 0 and P.contains((1, 1, 1), 2) and not cert.delzant and dets == [2]
    record(4, "non-normal tetrahedron (remark-simplex)", ok, f"P_2(1,1,1)={count}, (1,1,1) in 2P, Delzant={cert.delzant}, |det|={dets}",
           time.perf_counter() - t0, 1)


def test_criterion_5_dimension_trace():
    t0 = time.perf_counter()
    worst = 0.0
    for P in TRACE_POLYTOPES.values():
        for N in range(1, 5):
            tr = diagonal_trace(P, N, norm_table(P, N))
            count = ehrhart_count(P, N)
            worst = max(worst, abs(tr.value - count) / count if tr.converged else math.inf)
    record(5, f"integral of Pi_N(x,x) = |NP cap Z^m| on {len(TRACE_POLYTOPES)} polytopes, N<=4",
           worst <= 1e-5, f"max rel gap {worst:.2e} (tol 1e-05)", time.perf_counter() - t0, 60)


def test_criterion_6_characters():
    t0 = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(2024)
    for P in TRACE_POLYTOPES.values():
        for N in range(1, 5):
            norms = norm_table(P, N)
            for phi in rng.uniform(0, 2 * math.pi, size=(5, P.dim)):
                exact = character_exact(P, N, phi)
                tr = character_trace(P, N, norms, phi).value
                worst = max(worst, CharacterValue(N, tuple(phi), exact, tr, None).gap_trace)
    square = cube(2)
    lead = {N: character_leading(square, N, [0.0, 0.0]).value.real for N in (20, 40)}
    exact = {N: character_exact(square, N, [0.0, 0.0]).real for N in (20, 40)}
    gaps = {N: abs(exact[N] - lead[N]) / lead[N] for N in (20, 40)}
    ratio = gaps[20] / gaps[40]
    ok = (
        worst <= 1e-5
        and abs(lead[20] - 400) <= 1e-6 * 400
        and abs(lead[40] - 1600) <= 1e-6 * 1600
        and exact == {20: 441.0, 40: 1681.0}
        and 1.7 <= ratio <= 2.3
    )
    record(6, "characters", ok,
           f"trace vs exact max {worst:.1e} (tol 1e-05); square leading {lead[20]:.6f} vs {exact[20]:.0f}, "
           f"{lead[40]:.6f} vs {exact[40]:.0f}; gap ratio {ratio:.3f} in [1.7, 2.3]",
           time.perf_counter() - t0, 120)


def test_criterion_7_symbol_asymptotics():
    t0 = time.perf_counter()
    Ns = (8, 16, 32)
    s1 = symbol_ratio(simplex(1), ["1/2"], Ns)
    s2 = symbol_ratio(simplex(2), ["1/3", "1/3"], Ns)
    exact1 = list(s1.values) == [Fraction(N, N + 1) for N in Ns]
    exact2 = list(s2.values) == [Fraction(N * N, (N + 1) * (N + 2)) for N in Ns]
    trends = []
    ok = exact1 and exact2
    for P, ray in ((segment(2), [1.0]), (cube(2), [0.5, 0.5])):
        s = symbol_ratio(P, ray, Ns)
        d = np.abs(s.differences)
        shrink = bool(np.all(np.isfinite(s.floats))) and d[1] < d[0] and "flagged" not in s.flags
        ok &= shrink
        trends.append(f"{P.name} diffs {d[0]:.4f} > {d[1]:.4f}")
    record(7, "N^m P_N Q_N along interior rays", ok,
           f"Sigma_1 exact N/(N+1)={exact1}, Sigma_2 exact N^2/((N+1)(N+2))={exact2}; " + "; ".join(trends),
           time.perf_counter() - t0, 180)


def test_criterion_8_property_suites():
    t0 = time.perf_counter()
    polys = [simplex(1), simplex(2), segment(2), cube(2), simplex(3)]
    sum_rule = all(partition_counts(P, N).total() == len(P.points) ** N for P in polys for N in range(1, 6))
    semigroup = all(
        convolve_tables(P, partition_counts(P, a), partition_counts(P, b)).counts == partition_counts(P, a + b).counts
        for P in polys for a, b in ((1, 2), (2, 2), (3, 1))
    )
    rng = np.random.default_rng(8)
    sum_one = 0.0
    grad_err = 0.0
    hess_err = 0.0
    h = 1e-5
    for P in polys + [simplex(2, 2, "binomial")]:
        data = KahlerPotential(P)
        for x in sample_orbit_points(data, 5, rng):
            total = sum(abs(lifted_monomial(data, a, 1, x)) ** 2 for a in P.points)
            sum_one = max(sum_one, abs(total - 1))
        for rho in rng.normal(0, 1.5, size=(5, P.dim)):
            g = moment_map(data, rho)
            H = data.derivs(rho)[2]
            for j in range(P.dim):
                e = np.zeros(P.dim)
                e[j] = h
                fd = (potential(data, rho + e) - potential(data, rho - e)) / (2 * h)
                grad_err = max(grad_err, abs(fd - g[j]))
                row = (moment_map(data, rho + e) - moment_map(data, rho - e)) / (2 * h)
                hess_err = max(hess_err, float(np.max(np.abs(row - H[j]))))
    data = KahlerPotential(cube(2))
    x = sample_orbit_points(data, 1, rng)[0]
    r1 = weight_eigenvalue_check(data, (1, 2), 3, x, h=1e-2).max
    r2 = weight_eigenvalue_check(data, (1, 2), 3, x, h=5e-3).max
    order = math.log2(r1 / r2)
    ok = sum_rule and semigroup and sum_one <= 1e-12 and grad_err <= 1e-6 and hess_err <= 1e-4 and 1.8 <= order <= 2.2
    record(8, "property suites", ok,
           f"sum rule={sum_rule}, semigroup={semigroup}, |sum |m_a|^2 - 1|={sum_one:.1e}, "
           f"grad FD {grad_err:.1e} (tol 1e-06), Hessian FD {hess_err:.1e} (tol 1e-04), "
           f"eigenvalue residual order {order:.2f}", time.perf_counter() - t0, 60)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
