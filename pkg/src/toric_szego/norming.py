"""The monomial norming function Q_N(alpha) = ||chi_alpha||^2 in L^2(M, h^N).

Integrating out the fiber and torus angles reduces the norm to

    Q_N(alpha) = int_{R^m} exp(<alpha, rho> - N f(rho)) det Hess f(rho) d rho,

a Laplace-type integral peaked where the moment map equals alpha / N.  For
the standard simplex (Fubini-Study projective space) the exact rational
values are available and used as a fast path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from . import _backend
from .geometry import KahlerPotential, invert_moment_map
from .polytope import LatticePointSet, LatticePolytope, euclidean_volume, lattice_points
from .quadrature import QuadratureConfig, integrate_whitened, whitening

__all__ = [
    "NormEntry",
    "NormTable",
    "VolumeCheck",
    "monomial_norm",
    "norm_table",
    "closed_form_projective_norm",
    "projective_structure",
    "total_volume_check",
]

CLOSED_FORM = "closed-form"
QUADRATURE = "quadrature"


def closed_form_projective_norm(m: int, p: int, alpha) -> Fraction:
    """p! / ((p+m)! binom(p, alpha)) with the multinomial binom(p, alpha)."""
    a = [int(x) for x in np.atleast_1d(alpha)]
    if len(a) != m:
        raise ValueError(f"alpha must have {m} entries")
    if any(x < 0 for x in a) or sum(a) > p:
        raise ValueError(f"|alpha| = {sum(a)} exceeds p = {p}")
    multinom = math.factorial(p) // (
        math.factorial(p - sum(a)) * math.prod(math.factorial(x) for x in a)
    )
    return Fraction(math.factorial(p), math.factorial(p + m) * multinom)


def projective_structure(P: LatticePolytope) -> tuple[int, int] | None:
    """(m, p) when (P, c) is p*Sigma_m with the Fubini-Study weights, else None.

    Recognised weightings: c = 1 with p = 1, and the multinomial weights
    c_alpha = binom(p, alpha)^{1/2} for any p (which coincide when p = 1).
    """
    m = P.dim
    verts = set(P.vertices)
    p = max(max(v) for v in verts)
    expected = {tuple([0] * m)} | {tuple(p if i == j else 0 for i in range(m)) for j in range(m)}
    if verts != expected:
        return None
    for pt in P.points:
        key = tuple(int(x) for x in pt)
        c = P.weights.get(key, 1.0)
        target = math.sqrt(
            math.factorial(p)
            // (math.factorial(p - sum(key)) * math.prod(math.factorial(x) for x in key))
        )
        if abs(c - target) > 1e-12 * target:
            return None
    return m, p


@dataclass(frozen=True)
class NormEntry:
    alpha: tuple[int, ...]
    value: float
    err: float
    method: str
    boundary: bool = False
    flagged: bool = False
    exact: Fraction | None = None


@dataclass(frozen=True)
class NormTable:
    N: int
    support: LatticePointSet
    entries: tuple[NormEntry, ...]
    polytope: LatticePolytope
    config: QuadratureConfig

    def __getitem__(self, alpha) -> float:
        return self.entry(alpha).value

    def entry(self, alpha) -> NormEntry:
        key = tuple(int(x) for x in alpha)
        i = self.support.index.get(key)
        if i is None:
            raise KeyError(f"no norm entry for alpha={list(key)} at N={self.N}")
        return self.entries[i]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[NormEntry]:
        return iter(self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    @property
    def all_exact(self) -> bool:
        return all(e.exact is not None for e in self.entries)

    def flagged(self) -> list[NormEntry]:
        return [e for e in self.entries if e.flagged]

    def header(self) -> list[str]:
        m = self.support.points.shape[1]
        return [f"alpha_{j + 1}" for j in range(m)] + ["Q", "err", "method", "boundary_flag"]

    def rows(self) -> list[list]:
        return [
            list(e.alpha) + [e.value, e.err, e.method, int(e.boundary)] for e in self.entries
        ]


def _center_for(data: KahlerPotential, alpha: np.ndarray, N: int) -> tuple[np.ndarray, bool]:
    P = data.polytope
    boundary = P.on_boundary(alpha.tolist(), N)
    target = alpha / N
    if boundary:
        direction = P.barycenter - target
        norm = np.linalg.norm(direction)
        if norm > 0:
            target = target + 0.5 / N * direction / max(norm, 1.0)
    rho, ok = invert_moment_map(data, target)
    if not ok:
        raise RuntimeError(f"moment map inversion failed for alpha={alpha.tolist()}")
    return rho, boundary


def _quadrature_norm(data: KahlerPotential, alpha: np.ndarray, N: int, cfg: QuadratureConfig):
    center, boundary = _center_for(data, alpha, N)
    _, _, hess = data.derivs(center)
    L = whitening(hess, N)
    a = alpha.astype(float)

    def logg(rho):
        return _backend.norm_log_integrand(rho, data.B, data.logw, a, float(N))

    logpeak = float(logg(center[None, :])[0])

    def func(rho):
        return np.exp(logg(rho) - logpeak)

    res = integrate_whitened(func, logg, center, L, cfg)
    scale = math.exp(logpeak)
    value = float(res.value) * scale
    return value, res.err * scale, boundary, not res.converged


def monomial_norm(
    P: LatticePolytope,
    N: int,
    alpha,
    cfg: QuadratureConfig | None = None,
    method: str = "auto",
    data: KahlerPotential | None = None,
) -> NormEntry:
    """||chi_alpha||^2 at level N for the weights carried by P.

    method: "auto" (closed form when available), "quadrature" or "closed".
    """
    cfg = cfg or QuadratureConfig()
    a = np.asarray(alpha, dtype=np.int64).reshape(-1)
    key = tuple(int(x) for x in a)
    if a.shape != (P.dim,) or not P.contains(key, N):
        raise ValueError(f"alpha={list(key)} is not a lattice point of {N}P")
    boundary = P.on_boundary(key, N)
    proj = projective_structure(P) if method in ("auto", "closed") else None
    if method == "closed" and proj is None:
        raise ValueError("no closed form: P is not a Fubini-Study weighted simplex")
    if proj is not None:
        m, p = proj
        exact = p**m * closed_form_projective_norm(m, N * p, key)
        return NormEntry(key, float(exact), 0.0, CLOSED_FORM, boundary, False, exact)
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    data = data or KahlerPotential(P)
    value, err, boundary, flagged = _quadrature_norm(data, a, N, cfg)
    flagged = flagged or not (value > 0 and math.isfinite(value))
    return NormEntry(key, value, err, QUADRATURE, boundary, flagged, None)


def norm_table(
    P: LatticePolytope,
    N: int,
    cfg: QuadratureConfig | None = None,
    method: str = "auto",
    threads: int = 1,
) -> NormTable:
    """Q_N(alpha) for every lattice point of NP; entries are independent of
    thread count since each is computed by the same deterministic routine."""
    cfg = cfg or QuadratureConfig()
    support = lattice_points(P, N)
    data = KahlerPotential(P)

    def one(alpha):
        return monomial_norm(P, N, alpha, cfg, method, data)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = tuple(pool.map(one, list(support)))
    else:
        entries = tuple(one(a) for a in support)
    return NormTable(N=N, support=support, entries=entries, polytope=P, config=cfg)


@dataclass(frozen=True)
class VolumeCheck:
    quadrature: float
    err: float
    polytope_volume: Fraction
    gap: float
    converged: bool


def total_volume_check(P: LatticePolytope, cfg: QuadratureConfig | None = None) -> VolumeCheck:
    """Integrate det Hess f over R^m and compare with the Euclidean volume of P."""
    cfg = cfg or QuadratureConfig()
    data = KahlerPotential(P)
    center = data.center
    L = whitening(data.derivs(center)[2], 1.0)

    def logg(rho):
        return _backend.log_hessian_det(rho, data.B, data.logw)

    logpeak = float(logg(center[None, :])[0])
    res = integrate_whitened(lambda r: np.exp(logg(r) - logpeak), logg, center, L, cfg)
    q = float(res.value) * math.exp(logpeak)
    vol = euclidean_volume(P)
    return VolumeCheck(q, res.err * math.exp(logpeak), vol, abs(q - float(vol)) / float(vol), res.converged)
