"""Polytope characters chi_NP(e^{i phi}) = sum over NP cap Z^m of e^{i<phi, alpha>}.

Three routes are compared:

* ``exact``   the lattice-point sum;
* ``trace``   the integral of Pi_N(e^{i phi} x, x) over M, which uses every
  entry of the norm table;
* ``leading`` N^m times the integral of Pi_1^N(e^{i phi} x, x), the principal
  term when the multiplier is replaced by its leading symbol N^m.  It agrees
  with the exact sum only to order 1/N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import KahlerPotential, log_density_batch
from .kernels import TraceResult, trace_integral
from .norming import NormTable, norm_table
from .polytope import LatticePolytope, lattice_points
from .quadrature import QuadratureConfig, integrate_whitened, whitening

__all__ = [
    "CharacterValue",
    "character_exact",
    "character_trace",
    "character_leading",
    "character_sweep",
    "relative_gap",
]


def character_exact(P: LatticePolytope, N: int, phi) -> complex:
    pts = lattice_points(P, N).points.astype(float)
    phi = np.asarray(phi, dtype=float).reshape(P.dim)
    return complex(np.sum(np.exp(1j * (pts @ phi))))


def character_trace(
    P: LatticePolytope,
    N: int,
    norms: NormTable,
    phi,
    cfg: QuadratureConfig | None = None,
) -> TraceResult:
    cfg = cfg or QuadratureConfig()
    if norms.N != N:
        raise ValueError(f"norm table is for N={norms.N}, not N={N}")
    data = KahlerPotential(P)
    phi = np.asarray(phi, dtype=float).reshape(P.dim)
    return trace_integral(data, norms.support, np.log(norms.values), N, phi, cfg)


def character_leading(
    P: LatticePolytope, N: int, phi, cfg: QuadratureConfig | None = None
) -> TraceResult:
    """N^m int_M Pi_1^N(e^{i phi} x, x) dVol, with the window widened twofold."""
    cfg = (cfg or QuadratureConfig()).widened(2.0)
    data = KahlerPotential(P)
    phi = np.asarray(phi, dtype=float).reshape(P.dim)
    rot = np.exp(1j * (data.B @ phi))

    def logenv(rho):
        return log_density_batch(data, rho)[1]

    def func(rho):
        f, logdet = log_density_batch(data, rho)
        w = np.exp(rho @ data.B.T + data.logw[None, :] - f[:, None])
        base = w @ rot
        with np.errstate(divide="ignore"):
            power = np.exp(N * np.log(np.abs(base)) + 1j * N * np.angle(base))
        dens = np.exp(logdet)
        return np.stack([power * dens, dens.astype(complex)], axis=1)

    center = data.center
    L = whitening(data.derivs(center)[2], 1.0)
    res = integrate_whitened(func, logenv, center, L, cfg)
    scale = float(N) ** P.dim
    return TraceResult(complex(res.value[0]) * scale, res.err * scale, res.converged)


def relative_gap(value: complex, reference: complex) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


@dataclass(frozen=True)
class CharacterValue:
    N: int
    phi: tuple[float, ...]
    exact: complex
    trace: complex | None
    leading: complex | None

    @property
    def gap_trace(self) -> float | None:
        # exact is a sum of unit phases; floor the scale at 1 where it cancels
        if self.trace is None:
            return None
        return abs(self.trace - self.exact) / max(abs(self.exact), 1.0)

    @property
    def gap_leading(self) -> float | None:
        if self.leading is None:
            return None
        return relative_gap(self.exact, self.leading)

    def row(self) -> list:
        def parts(z):
            return ("", "") if z is None else (z.real, z.imag)

        gt, gl = self.gap_trace, self.gap_leading
        return [
            *self.phi,
            *parts(self.exact),
            *parts(self.trace),
            *parts(self.leading),
            "" if gt is None else gt,
            "" if gl is None else gl,
        ]


def sweep_header(m: int) -> list[str]:
    return [f"phi_{j + 1}" for j in range(m)] + [
        "re_exact",
        "im_exact",
        "re_trace",
        "im_trace",
        "re_leading",
        "im_leading",
        "gap_trace",
        "gap_leading",
    ]


def character_sweep(
    P: LatticePolytope,
    N: int,
    phis,
    cfg: QuadratureConfig | None = None,
    norms: NormTable | None = None,
    trace: bool = True,
    leading: bool = True,
) -> list[CharacterValue]:
    cfg = cfg or QuadratureConfig()
    if trace and norms is None:
        norms = norm_table(P, N, cfg)
    out = []
    for phi in phis:
        phi = tuple(float(v) for v in np.asarray(phi, dtype=float).reshape(P.dim))
        ex = character_exact(P, N, phi)
        tr = character_trace(P, N, norms, phi, cfg).value if trace else None
        ld = character_leading(P, N, phi, cfg).value if leading else None
        out.append(CharacterValue(N, phi, ex, tr, ld))
    return out


def phi_grid(m: int, n: int) -> list[tuple[float, ...]]:
    """Uniform grid of n^m angles in [0, 2 pi)^m."""
    axis = 2 * math.pi * np.arange(n) / n
    return [tuple(p) for p in np.stack(np.meshgrid(*([axis] * m), indexing="ij"), -1).reshape(-1, m)]
