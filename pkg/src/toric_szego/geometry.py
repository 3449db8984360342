"""Kahler geometry of the open torus orbit in log-polar coordinates.

A point of the circle bundle over the open orbit is stored as (rho, phi,
theta) with |z_j|^2 = exp(rho_j), phi_j = arg z_j and theta the fiber angle.
Everything is driven by the convex potential

    f(rho) = log sum_beta |c_beta|^2 exp(<beta, rho>),

whose gradient is the moment map and whose Hessian determinant is the
density of the Kahler volume after the torus angles are integrated out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _backend
from .polytope import LatticePolytope

__all__ = [
    "OrbitPoint",
    "KahlerPotential",
    "HomogenizedWeight",
    "EigenvalueResiduals",
    "potential",
    "moment_map",
    "hessian_density",
    "invert_moment_map",
    "lifted_monomial",
    "log_lifted_monomial",
    "weight_eigenvalue_check",
    "homogenize",
    "sample_orbit_points",
    "NewtonError",
    "log_density_batch",
]

TWO_PI = 2.0 * np.pi


class NewtonError(RuntimeError):
    pass


@dataclass(frozen=True)
class OrbitPoint:
    rho: np.ndarray
    phi: np.ndarray
    theta: float = 0.0

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if rho.shape != phi.shape:
            raise ValueError("rho and phi must have the same length")
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(phi)) and np.isfinite(self.theta)):
            raise ValueError("orbit points must have finite coordinates")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phi", np.mod(phi, TWO_PI))
        object.__setattr__(self, "theta", float(np.mod(self.theta, TWO_PI)))

    @classmethod
    def from_z(cls, z, theta: float = 0.0) -> "OrbitPoint":
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if np.any(z == 0):
            raise ValueError("z must lie in the open orbit (no zero coordinates)")
        return cls(rho=2.0 * np.log(np.abs(z)), phi=np.angle(z), theta=theta)

    @property
    def z(self) -> np.ndarray:
        return np.exp(0.5 * self.rho + 1j * self.phi)

    def torus_act(self, angles) -> "OrbitPoint":
        return OrbitPoint(self.rho, self.phi + np.asarray(angles, dtype=float), self.theta)

    def circle_act(self, t: float) -> "OrbitPoint":
        return OrbitPoint(self.rho, self.phi, self.theta + t)

    def as_dict(self) -> dict:
        return {"rho": self.rho.tolist(), "phi": self.phi.tolist(), "theta": self.theta}


@dataclass(frozen=True)
class KahlerPotential:
    """Potential data for (P, c): lattice points of P and log |c_beta|^2."""

    polytope: LatticePolytope
    B: np.ndarray = field(init=False, repr=False)
    logw: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "B", self.polytope.points.astype(float))
        object.__setattr__(self, "logw", 2.0 * np.log(self.polytope.weight_vector))

    @property
    def dim(self) -> int:
        return self.polytope.dim

    def derivs(self, rho):
        """f, grad f, Hess f at rho of shape (m,) or (n, m)."""
        rho = np.asarray(rho, dtype=float)
        single = rho.ndim == 1
        f, g, h = _backend.potential_derivs(np.atleast_2d(rho), self.B, self.logw)
        if single:
            return f[0], g[0], h[0]
        return f, g, h

    def weight(self, alpha) -> float:
        return self.polytope.weights.get(tuple(int(a) for a in alpha), 1.0)

    @cached_property
    def center(self) -> np.ndarray:
        """Preimage of the barycenter of P under the moment map."""
        rho, ok = invert_moment_map(self, self.polytope.barycenter)
        if not ok:
            raise NewtonError("could not invert the moment map at the barycenter")
        return rho


def potential(data: KahlerPotential, rho):
    return data.derivs(rho)[0]


def moment_map(data: KahlerPotential, rho):
    return data.derivs(rho)[1]


def hessian_density(data: KahlerPotential, rho):
    """det Hess f(rho): the volume density in rho after the torus angles are integrated."""
    h = data.derivs(rho)[2]
    return np.linalg.det(h)


def invert_moment_map(
    data: KahlerPotential, target, rho0=None, tol: float = 1e-12, max_iter: int = 200
) -> tuple[np.ndarray, bool]:
    """Solve grad f(rho) = target by damped Newton on f(rho) - <target, rho>."""
    target = np.asarray(target, dtype=float)
    rho = np.zeros(data.dim) if rho0 is None else np.array(rho0, dtype=float)
    f, g, h = data.derivs(rho)
    obj = f - target @ rho
    for _ in range(max_iter):
        r = g - target
        if np.max(np.abs(r)) <= tol * max(1.0, np.max(np.abs(target))):
            return rho, True
        try:
            step = np.linalg.solve(h, r)
        except np.linalg.LinAlgError:
            return rho, False
        t = 1.0
        while t > 1e-12:
            trial = rho - t * step
            f_t, g_t, h_t = data.derivs(trial)
            obj_t = f_t - target @ trial
            if obj_t <= obj - 1e-4 * t * (r @ step) or abs(obj_t - obj) <= 1e-15 * max(1.0, abs(obj)):
                break
            t *= 0.5
        else:
            return rho, False
        rho, f, g, h, obj = trial, f_t, g_t, h_t, obj_t
    r = g - target
    return rho, bool(np.max(np.abs(r)) <= 1e3 * tol * max(1.0, np.max(np.abs(target))))


# ---------------------------------------------------------------------------


def _check_alpha(data: KahlerPotential, alpha, N: int) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.int64).reshape(-1)
    if a.shape != (data.dim,) or not data.polytope.contains(a.tolist(), N):
        raise ValueError(f"alpha={a.tolist()} is not a lattice point of {N}P")
    return a


def log_lifted_monomial(
    data: KahlerPotential, alpha, N: int, x: OrbitPoint, weighted: bool = True
) -> tuple[float, float]:
    """(log |value|, phase) of the lifted monomial of weight alpha at level N.

    At level 1 with ``weighted`` the embedding constant c_alpha is included
    (the coordinate function of the lifted embedding); at level N >= 2 the
    section z^alpha itself is lifted, normalised by the N-th power metric.
    """
    a = _check_alpha(data, alpha, N)
    f = potential(data, x.rho)
    logmag = 0.5 * float(a @ x.rho) - 0.5 * N * f
    if weighted and N == 1:
        logmag += np.log(data.weight(a))
    phase = N * x.theta + float(a @ x.phi)
    return logmag, phase


def lifted_monomial(
    data: KahlerPotential, alpha, N: int, x: OrbitPoint, weighted: bool = True
) -> complex:
    logmag, phase = log_lifted_monomial(data, alpha, N, x, weighted)
    return complex(np.exp(logmag) * np.exp(1j * phase))


@dataclass(frozen=True)
class EigenvalueResiduals:
    torus: np.ndarray
    fiber: float
    step: float

    @property
    def max(self) -> float:
        return float(max(np.max(self.torus, initial=0.0), self.fiber))


def weight_eigenvalue_check(
    data: KahlerPotential, alpha, N: int, x: OrbitPoint, h: float = 1e-4
) -> EigenvalueResiduals:
    """Central differences of the torus and circle actions on a lifted monomial.

    The generators act on the monomial of weight alpha at level N with
    eigenvalues alpha_j and N; the residuals are the distances to those.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    a = _check_alpha(data, alpha, N)
    base = lifted_monomial(data, a, N, x)
    if base == 0:
        raise ZeroDivisionError("lifted monomial vanishes at x")
    res = np.empty(data.dim)
    for j in range(data.dim):
        e = np.zeros(data.dim)
        e[j] = h
        d = (lifted_monomial(data, a, N, x.torus_act(e)) - lifted_monomial(data, a, N, x.torus_act(-e))) / (2 * h)
        res[j] = abs(d / (1j * base) - a[j])
    d = (lifted_monomial(data, a, N, x.circle_act(h)) - lifted_monomial(data, a, N, x.circle_act(-h))) / (2 * h)
    return EigenvalueResiduals(torus=res, fiber=abs(d / (1j * base) - N), step=h)


@dataclass(frozen=True)
class HomogenizedWeight:
    alpha: tuple[int, ...]
    N: int
    p: int
    hat: tuple[int, ...]


def homogenize(alpha, N: int, P: LatticePolytope) -> HomogenizedWeight:
    """alpha -> (alpha, N p - |alpha|), p the largest coordinate sum on P."""
    a = tuple(int(x) for x in alpha)
    if len(a) != P.dim or not P.contains(a, N):
        raise ValueError(f"alpha={list(a)} is not a lattice point of {N}P")
    p = P.max_degree
    return HomogenizedWeight(alpha=a, N=N, p=p, hat=a + (N * p - sum(a),))


def sample_orbit_points(
    data: KahlerPotential, n: int, rng: np.random.Generator, shrink: float = 0.6
) -> list[OrbitPoint]:
    """Random orbit points whose moment images fill the central ``shrink`` part of P.

    A uniform point of P is contracted toward the barycenter by ``shrink``
    and pulled back by the moment map; angles are uniform.
    """
    P = data.polytope
    A, b = P.facet_matrix
    verts = np.array(P.vertices, dtype=float)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    bary = P.barycenter
    out = []
    while len(out) < n:
        u = rng.uniform(lo, hi)
        if np.any(A @ u > b):
            continue
        target = bary + shrink * (u - bary)
        rho, ok = invert_moment_map(data, target)
        if not ok:
            raise NewtonError(f"moment map inversion failed at {target}")
        out.append(OrbitPoint(rho, rng.uniform(0, TWO_PI, P.dim), rng.uniform(0, TWO_PI)))
    return out


def log_density_batch(data: KahlerPotential, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """f(rho) and log det Hess f(rho) for a batch of points (n, m)."""
    f, _, hess = _backend.potential_derivs(np.atleast_2d(rho), data.B, data.logw)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        det = hess[:, 0, 0] if data.dim == 1 else np.linalg.det(hess)
        return f, np.log(np.maximum(det, 0.0))
