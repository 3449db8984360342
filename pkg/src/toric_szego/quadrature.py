"""Adaptive quadrature over R^m for Laplace-type integrands.

The integrand is integrated in whitened coordinates rho = center + L y, where
L L^T is the inverse scaled Hessian at the peak, and each y_j is mapped by
y = sinh(t).  The trapezoid rule in t converges geometrically for integrands
with exponential tails; the step is halved until successive estimates agree.
The integration window is found by marching along the {-1,0,1}^m star
directions, in whitened and in raw coordinates, until the log envelope has
dropped by ``cutoff`` below the peak, and is widened again if
the envelope on the window boundary turns out to be too large.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["QuadratureConfig", "QuadratureResult", "integrate_whitened", "whitening"]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the monomial-norm and trace integrals.

    radius: initial half-width of the window in whitened units (standard
    deviations of the Laplace peak); the window only ever grows from there.
    """

    rtol: float = 1e-8
    max_subdivisions: int = 8
    radius: float = 12.0
    seed: int = 0
    cutoff: float = 46.0
    max_points: int = 4_000_000

    def __post_init__(self):
        if not 0 < self.rtol <= 1e-2:
            raise ValueError("rtol must lie in (0, 1e-2]")
        if self.radius < 6:
            raise ValueError("truncation radius must be >= 6")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def widened(self, factor: float) -> "QuadratureConfig":
        return QuadratureConfig(
            rtol=self.rtol,
            max_subdivisions=self.max_subdivisions,
            radius=self.radius * factor,
            seed=self.seed,
            cutoff=self.cutoff,
            max_points=self.max_points,
        )

    def as_dict(self) -> dict:
        return {
            "rtol": self.rtol,
            "max_subdivisions": self.max_subdivisions,
            "radius": self.radius,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray | complex | float
    err: float
    abs_integral: float
    converged: bool
    points: int


def whitening(hess: np.ndarray, scale: float) -> np.ndarray:
    """Cholesky factor of (scale * hess)^{-1}."""
    cov = np.linalg.inv(scale * np.asarray(hess, dtype=float))
    cov = 0.5 * (cov + cov.T)
    return np.linalg.cholesky(cov)


def _directions(m: int, L: np.ndarray) -> list[np.ndarray]:
    """Unit march directions in y: the {-1,0,1}^m stars of both the whitened
    and the raw rho coordinates (tails of toric integrands follow the latter)."""
    Linv = np.linalg.inv(L)
    out = []
    for d in itertools.product((-1.0, 0.0, 1.0), repeat=m):
        d = np.array(d)
        if not d.any():
            continue
        out.append(d / np.linalg.norm(d))
        y = Linv @ d
        out.append(y / np.linalg.norm(y))
    return out


def _window(logenv, center, L, radius, cutoff, ymax=1e4):
    m = len(center)
    peak = float(logenv(center[None, :])[0])
    ext = np.full((m, 2), float(radius))
    for d in _directions(m, L):
        r = radius
        while r < ymax:
            val = float(logenv((center + L @ (r * d))[None, :])[0])
            peak = max(peak, val) if np.isfinite(val) else peak
            if not np.isfinite(val) or val < peak - cutoff:
                break
            r *= 1.5
        r = min(r, ymax)
        for j in range(m):
            if d[j] < 0:
                ext[j, 0] = max(ext[j, 0], -r * d[j])
            elif d[j] > 0:
                ext[j, 1] = max(ext[j, 1], r * d[j])
    return ext, peak


def integrate_whitened(
    func: Callable[[np.ndarray], np.ndarray],
    logenv: Callable[[np.ndarray], np.ndarray],
    center: np.ndarray,
    L: np.ndarray,
    cfg: QuadratureConfig,
    h0: float = 0.5,
) -> QuadratureResult:
    """Integrate ``func`` over R^m (Lebesgue measure in rho).

    func maps rho points (n, m) to values (n,) or (n, K), real or complex.
    logenv bounds log |func| up to a constant and drives the window choice.
    """
    center = np.asarray(center, dtype=float)
    m = len(center)
    L = np.asarray(L, dtype=float)
    jac = abs(np.linalg.det(L))
    ext, peak = _window(logenv, center, L, cfg.radius, cfg.cutoff)

    for _grow in range(6):
        t_lo = np.arcsinh(-ext[:, 0])
        t_hi = np.arcsinh(ext[:, 1])
        n_axis = np.maximum(2, np.ceil((t_hi - t_lo) / h0).astype(int))
        prev = None
        result = None
        for level in range(cfg.max_subdivisions + 1):
            if level:
                n_axis = 2 * n_axis
            if np.prod(n_axis + 1) > cfg.max_points:
                break
            value, absval, boundary = _trapezoid(func, logenv, center, L, t_lo, t_hi, n_axis)
            value = value * jac
            absval *= jac
            if prev is not None:
                err = float(np.max(np.abs(value - prev)))
                result = QuadratureResult(value, err, absval, err <= cfg.rtol * absval, int(np.prod(n_axis + 1)))
                if result.converged:
                    break
            prev = value
        if result is None:
            return QuadratureResult(prev if prev is not None else np.nan, np.inf, np.nan, False, 0)
        if boundary <= peak + np.log(cfg.rtol) - 10.0 or np.all(ext >= 1e4):
            return result
        # envelope still significant on the window boundary: widen and redo
        ext = np.minimum(ext * 1.5, 1e4)
    return QuadratureResult(result.value, result.err, result.abs_integral, False, result.points)


def _trapezoid(func, logenv, center, L, t_lo, t_hi, n_axis, chunk=200_000):
    m = len(center)
    axes_t = [np.linspace(a, b, n + 1) for a, b, n in zip(t_lo, t_hi, n_axis)]
    axes_w = []
    for t, a, b, n in zip(axes_t, t_lo, t_hi, n_axis):
        h = (b - a) / n
        w = h * np.cosh(t)
        w[0] *= 0.5
        w[-1] *= 0.5
        axes_w.append(w)
    axes_y = [np.sinh(t) for t in axes_t]
    grid_y = np.stack(np.meshgrid(*axes_y, indexing="ij"), axis=-1).reshape(-1, m)
    grid_w = np.ones(1)
    for w in axes_w:
        grid_w = np.multiply.outer(grid_w, w)
    grid_w = grid_w.reshape(-1)
    idx_shape = tuple(n + 1 for n in n_axis)
    on_boundary = np.zeros(idx_shape, dtype=bool)
    for j in range(m):
        sl = [slice(None)] * m
        sl[j] = 0
        on_boundary[tuple(sl)] = True
        sl[j] = -1
        on_boundary[tuple(sl)] = True
    on_boundary = on_boundary.reshape(-1)

    total = None
    absval = 0.0
    bmax = -np.inf
    for s in range(0, len(grid_w), chunk):
        rho = center + grid_y[s : s + chunk] @ L.T
        vals = func(rho)
        w = grid_w[s : s + chunk]
        part = np.tensordot(w, vals, axes=(0, 0))
        total = part if total is None else total + part
        absval += float(np.sum(w * (np.abs(vals) if vals.ndim == 1 else np.abs(vals).max(axis=1))))
        ob = on_boundary[s : s + chunk]
        if np.any(ob):
            env = logenv(rho[ob])
            bmax = max(bmax, float(np.max(env)))
    return total, absval, bmax
