"""Szego kernels on the toric variety and the multiplier factorization.

Two kernels live on the circle bundle X over the open orbit:

* the pulled-back projective kernel  Pi_1^N(x, y) = <iota(x), conj iota(y)>^N,
  a single N-th power of a sum over the lattice points of P;
* the Szego kernel  Pi_N(x, y) = sum_alpha chi_alpha(x) conj chi_alpha(y) / Q_N(alpha)
  over the lattice points of NP.

Expanding the power gives coefficients P_N(alpha), so multiplying each
Fourier mode by 1 / (P_N(alpha) Q_N(alpha)) turns Pi_1^N into Pi_N.  The
verifier expands the power numerically into its modes, cross-checks the
expansion with an FFT synthesis over the torus action, and compares the
multiplied sum with the direct one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .geometry import (
    KahlerPotential,
    OrbitPoint,
    log_density_batch,
    potential,
    sample_orbit_points,
)
from .norming import NormTable, norm_table
from .partition import PartitionTable, partition_counts
from .polytope import LatticePointSet, LatticePolytope, is_delzant
from .quadrature import QuadratureConfig, integrate_whitened, whitening

__all__ = [
    "MultiplierTable",
    "PairRecord",
    "KernelReport",
    "FactorizationRefused",
    "SymbolRatioSeries",
    "TraceResult",
    "pullback_base",
    "pullback_kernel_N",
    "szego_kernel",
    "projective_szego",
    "multiplier_table",
    "apply_multiplier",
    "kernel_report",
    "verify_factorization",
    "check_factorizable",
    "symbol_ratio",
    "diagonal_trace",
]


class FactorizationRefused(ValueError):
    """The exact factorization needs a Delzant polytope with unit weights."""


def _as_data(P) -> KahlerPotential:
    return P if isinstance(P, KahlerPotential) else KahlerPotential(P)


# ---------------------------------------------------------------------------
# pointwise kernels


def pullback_base(P, x: OrbitPoint, y: OrbitPoint) -> complex:
    """sum over lattice points of P of  m_beta(x) conj m_beta(y)."""
    data = _as_data(P)
    fx, fy = potential(data, x.rho), potential(data, y.rho)
    logmag = data.B @ (0.5 * (x.rho + y.rho)) + data.logw - 0.5 * (fx + fy)
    phase = data.B @ (x.phi - y.phi) + (x.theta - y.theta)
    return complex(np.sum(np.exp(logmag + 1j * phase)))


def pullback_kernel_N(P, N: int, x: OrbitPoint, y: OrbitPoint) -> complex:
    """Pi_1^N(x, y): the N-th power of the base kernel, taken in polar form."""
    b = pullback_base(P, x, y)
    if b == 0:
        return 0j
    return complex(np.exp(N * math.log(abs(b))) * np.exp(1j * N * np.angle(b)))


def _szego_terms(data: KahlerPotential, support: LatticePointSet, logq: np.ndarray, N: int, x, y):
    A = support.points.astype(float)
    fx, fy = potential(data, x.rho), potential(data, y.rho)
    logmag = A @ (0.5 * (x.rho + y.rho)) - 0.5 * N * (fx + fy) - logq
    phase = A @ (x.phi - y.phi) + N * (x.theta - y.theta)
    return logmag, phase


def szego_kernel(P, N: int, norms: NormTable, x: OrbitPoint, y: OrbitPoint) -> complex:
    """Direct monomial sum for Pi_N(x, y) with weights 1 / Q_N(alpha)."""
    data = _as_data(P)
    if norms.N != N:
        raise ValueError(f"norm table is for N={norms.N}, not N={N}")
    logmag, phase = _szego_terms(data, norms.support, np.log(norms.values), N, x, y)
    top = logmag.max()
    return complex(np.exp(top) * np.sum(np.exp(logmag - top + 1j * phase)))


def projective_szego(m: int, N: int, x: OrbitPoint, y: OrbitPoint) -> complex:
    """((N+m)!/N!) <x_hat, conj y_hat>^N with x_hat the unit homogeneous lift of x."""

    def lift(pt: OrbitPoint) -> np.ndarray:
        v = np.concatenate(([1.0 + 0j], pt.z))
        return np.exp(1j * pt.theta) * v / np.linalg.norm(v)

    inner = complex(np.sum(lift(x) * np.conj(lift(y))))
    return math.factorial(N + m) / math.factorial(N) * inner**N


# ---------------------------------------------------------------------------
# the multiplier


@dataclass(frozen=True)
class MultiplierTable:
    """Eigenvalues 1 / (P_N Q_N) on the monomials of level N.

    Entries are exact fractions when the norm entry is exact, floats
    otherwise, and ``None`` where P_N(alpha) = 0 (listed in ``excluded``).
    """

    N: int
    support: LatticePointSet
    eigenvalues: tuple[Fraction | float | None, ...]
    partition: PartitionTable
    norms: NormTable
    excluded: tuple[tuple[int, ...], ...] = ()

    def __getitem__(self, alpha):
        return self.eigenvalues[self.support.index[tuple(int(x) for x in alpha)]]

    def as_floats(self) -> np.ndarray:
        return np.array([np.nan if e is None else float(e) for e in self.eigenvalues])

    def header(self) -> list[str]:
        m = self.support.points.shape[1]
        return [f"alpha_{j + 1}" for j in range(m)] + ["P", "Q", "inv_PQ", "Nm_PQ"]

    def rows(self) -> list[list]:
        m = self.support.points.shape[1]
        out = []
        for alpha, p, e, ev in zip(self.support, self.partition.counts, self.norms.entries, self.eigenvalues):
            nm_pq = (self.N**m) * p * (e.exact if e.exact is not None else e.value)
            out.append(list(alpha) + [str(p), e.value, "" if ev is None else float(ev), float(nm_pq)])
        return out


def multiplier_table(partition: PartitionTable, norms: NormTable) -> MultiplierTable:
    if partition.N != norms.N:
        raise ValueError("partition and norm tables are for different N")
    if not np.array_equal(partition.support.points, norms.support.points):
        raise ValueError("partition and norm tables have different supports")
    eig: list[Fraction | float | None] = []
    excluded = []
    for alpha, p, e in zip(partition.support, partition.counts, norms.entries):
        if p == 0:
            eig.append(None)
            excluded.append(alpha)
        elif e.exact is not None:
            eig.append(1 / (p * e.exact))
        else:
            eig.append(1.0 / (float(p) * e.value))
    return MultiplierTable(partition.N, partition.support, tuple(eig), partition, norms, tuple(excluded))


def _power_modes(data: KahlerPotential, N: int, x: OrbitPoint, y: OrbitPoint):
    """Coefficients of the torus modes of  psi -> Pi_1^N(e^{i psi} x, y).

    The base kernel is sum_beta a_beta e^{i<beta, psi>} with
    a_beta = m_beta(x) conj m_beta(y); its N-th power is expanded by N
    weighted shift-and-add passes over the bounding box of NP.  All products
    landing on one mode share a phase, so nothing cancels.
    """
    verts = np.array(data.polytope.vertices)
    lo = verts.min(axis=0)
    shape = tuple(int(N * (h - l) + 1) for l, h in zip(lo, verts.max(axis=0)))
    fx, fy = potential(data, x.rho), potential(data, y.rho)
    logmag = data.B @ (0.5 * (x.rho + y.rho)) + data.logw - 0.5 * (fx + fy)
    phase = data.B @ (x.phi - y.phi) + (x.theta - y.theta)
    coef = np.exp(logmag + 1j * phase)
    shifts = (data.polytope.points - lo).astype(int)
    src = np.zeros(shape, dtype=complex)
    src[(0,) * len(shape)] = 1.0
    for _ in range(N):
        dst = np.zeros_like(src)
        for a, s in zip(coef, shifts):
            dst[tuple(slice(k, None) for k in s)] += a * src[tuple(slice(0, n - k) for n, k in zip(shape, s))]
        src = dst
    return src, N * lo


def _fft_power_sum(data: KahlerPotential, N: int, x: OrbitPoint, y: OrbitPoint, modes, offset) -> float:
    """Relative mismatch between the expanded modes and Pi_1^N sampled on a
    torus grid (alias-free), i.e. an independent check of the expansion."""
    shape = modes.shape
    grids = np.meshgrid(*[2 * np.pi * np.arange(s) / s for s in shape], indexing="ij")
    psi = np.stack([g.reshape(-1) for g in grids], axis=1)
    fx, fy = potential(data, x.rho), potential(data, y.rho)
    logmag = data.B @ (0.5 * (x.rho + y.rho)) + data.logw - 0.5 * (fx + fy)
    phase0 = data.B @ (x.phi - y.phi) + (x.theta - y.theta)
    base = np.exp(logmag[None, :] + 1j * (phase0[None, :] + psi @ data.B.T)).sum(axis=1)
    sampled = base**N
    freqs = np.stack(np.meshgrid(*[np.arange(s) for s in shape], indexing="ij"), axis=-1).reshape(-1, len(shape))
    freqs = freqs + offset
    synth = np.exp(1j * psi @ freqs.T.astype(float)) @ modes.reshape(-1)
    return float(np.max(np.abs(synth - sampled)) / max(np.max(np.abs(sampled)), 1e-300))


def apply_multiplier(
    data: KahlerPotential, mult: MultiplierTable, x: OrbitPoint, y: OrbitPoint
) -> tuple[complex, float, complex]:
    """(M_N Pi_1^N)(x, y): each torus mode of Pi_1^N(., y) scaled by its eigenvalue.

    Also returns the largest relative deviation of a mode from
    P_N(alpha) chi_alpha(x) conj chi_alpha(y), taken from the integer table,
    and Pi_1^N(x, y) as the sum of all modes.
    """
    N = mult.N
    modes, offset = _power_modes(data, N, x, y)
    logmag, phase = _szego_terms(data, mult.support, np.zeros(len(mult.support)), N, x, y)
    unit = np.exp(logmag + 1j * phase)
    total = 0j
    dev = 0.0
    for i, alpha in enumerate(mult.support):
        c = modes[tuple(int(a - o) for a, o in zip(alpha, offset))]
        want = mult.partition.counts[i] * unit[i]
        dev = max(dev, abs(c - want) / max(abs(want), abs(c), 1e-300))
        ev = mult.eigenvalues[i]
        if ev is not None:
            total += float(ev) * c
    return complex(total), float(dev), complex(modes.sum())


EXTENDED_DPS = 40


def _extended_pair(data: KahlerPotential, mult: MultiplierTable, x: OrbitPoint, y: OrbitPoint):
    """Direct sum and multiplied power expansion evaluated with EXTENDED_DPS digits.

    Norm values are taken as exact rationals (a float is one) and each
    eigenvalue is rebuilt as 1 / (P_N Q_N) at the same precision, so the two
    routes share their inputs exactly and differ only by the identity itself.
    Returns (direct, factored, |direct - factored|, |direct|, expansion deviation).
    """
    ctx = mpmath.MPContext()
    ctx.dps = EXTENDED_DPS
    N = mult.N
    rx = [ctx.mpf(float(v)) for v in x.rho]
    ry = [ctx.mpf(float(v)) for v in y.rho]
    dphi = [ctx.mpf(float(a)) - ctx.mpf(float(b)) for a, b in zip(x.phi, y.phi)]
    dtheta = ctx.mpf(x.theta) - ctx.mpf(y.theta)
    P = data.polytope
    base_pts = [tuple(int(v) for v in b) for b in P.points]
    w = [ctx.mpf(P.weights.get(b, 1.0)) ** 2 for b in base_pts]

    def dot(a, v):
        return ctx.fsum(ai * vi for ai, vi in zip(a, v))

    def f(r):
        return ctx.log(ctx.fsum(wb * ctx.exp(dot(b, r)) for wb, b in zip(w, base_pts)))

    half_f = (f(rx) + f(ry)) / 2
    mid = [(a + b) / 2 for a, b in zip(rx, ry)]

    def monomial(a, level):
        return ctx.exp(dot(a, mid) - level * half_f) * ctx.expj(dot(a, dphi) + level * dtheta)

    coef = [wb * monomial(b, 1) for wb, b in zip(w, base_pts)]
    modes = {(0,) * P.dim: ctx.mpc(1)}
    for _ in range(N):
        nxt: dict = {}
        for k, v in modes.items():
            for b, a in zip(base_pts, coef):
                key = tuple(i + j for i, j in zip(k, b))
                nxt[key] = nxt.get(key, 0) + v * a
        modes = nxt

    direct = ctx.mpc(0)
    factored = ctx.mpc(0)
    dev = ctx.mpf(0)
    for alpha, count, entry in zip(mult.support, mult.partition.counts, mult.norms.entries):
        unit = monomial(alpha, N)
        q = entry.exact if entry.exact is not None else Fraction(entry.value)
        q = ctx.mpf(q.numerator) / q.denominator
        direct += unit / q
        c = modes.get(tuple(alpha), ctx.mpc(0))
        want = count * unit
        scale = max(abs(want), abs(c))
        if scale > 0:
            dev = max(dev, abs(c - want) / scale)
        if count:
            factored += c / (count * q)
    return complex(direct), complex(factored), float(abs(direct - factored)), float(abs(direct)), float(dev)


# ---------------------------------------------------------------------------
# reports


def _cx(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


@dataclass(frozen=True)
class PairRecord:
    x: OrbitPoint
    y: OrbitPoint
    pi_direct: complex
    pi_power: complex
    pi_factored: complex | None
    resid_abs: float | None
    resid_rel: float | None
    expansion_dev: float | None
    hermitian_dev: float
    resid_scaled: float | None = None
    precision: str = "double"
    resid_rel_double: float | None = None

    def as_dict(self) -> dict:
        out = {
            "x": self.x.as_dict(),
            "y": self.y.as_dict(),
            "pi_direct": _cx(self.pi_direct),
            "pi_power": _cx(self.pi_power),
            "hermitian_dev": self.hermitian_dev,
        }
        if self.pi_factored is not None:
            out.update(
                pi_factored=_cx(self.pi_factored),
                resid_abs=self.resid_abs,
                resid_rel=self.resid_rel,
                resid_scaled=self.resid_scaled,
                expansion_dev=self.expansion_dev,
                precision=self.precision,
            )
            if self.resid_rel_double is not None:
                out["resid_rel_double"] = self.resid_rel_double
        return out


@dataclass(frozen=True)
class KernelReport:
    N: int
    seed: int
    pairs: tuple[PairRecord, ...]
    exact_norms: bool
    config: dict = field(default_factory=dict)

    @property
    def factored(self) -> bool:
        return all(p.pi_factored is not None for p in self.pairs)

    @property
    def max_resid_rel(self) -> float:
        return max((p.resid_rel for p in self.pairs if p.resid_rel is not None), default=float("nan"))

    @property
    def max_resid_abs(self) -> float:
        return max((p.resid_abs for p in self.pairs if p.resid_abs is not None), default=float("nan"))

    @property
    def max_hermitian_dev(self) -> float:
        return max(p.hermitian_dev for p in self.pairs)

    def as_dict(self) -> dict:
        out = {
            "N": self.N,
            "seed": self.seed,
            "exact_norms": self.exact_norms,
            "pairs": [p.as_dict() for p in self.pairs],
            "max_hermitian_dev": self.max_hermitian_dev,
        }
        if self.factored:
            out["max_resid_rel"] = self.max_resid_rel
            out["max_resid_abs"] = self.max_resid_abs
            out["max_resid_scaled"] = max(p.resid_scaled for p in self.pairs)
            out["max_expansion_dev"] = max(p.expansion_dev for p in self.pairs)
        if self.config:
            out["config"] = self.config
        return out


def kernel_report(
    P: LatticePolytope,
    N: int,
    samples: int = 20,
    seed: int = 0,
    cfg: QuadratureConfig | None = None,
    norms: NormTable | None = None,
    factor: bool | None = None,
    threads: int = 1,
) -> KernelReport:
    """Evaluate Pi_N, Pi_1^N and (when weights are 1) M_N Pi_1^N on seeded random pairs."""
    cfg = cfg or QuadratureConfig()
    data = KahlerPotential(P)
    if factor is None:
        factor = P.has_unit_weights
    norms = norms or norm_table(P, N, cfg, threads=threads)
    mult = multiplier_table(partition_counts(P, N), norms) if factor else None
    rng = np.random.default_rng(seed)
    pts = sample_orbit_points(data, 2 * samples, rng)
    records = []
    for x, y in zip(pts[0::2], pts[1::2]):
        direct = szego_kernel(data, N, norms, x, y)
        swapped = szego_kernel(data, N, norms, y, x)
        power = pullback_kernel_N(data, N, x, y)
        herm = abs(direct - swapped.conjugate()) / max(abs(direct), 1e-300)
        if mult is not None:
            fact, dev, _ = apply_multiplier(data, mult, x, y)
            modes, offset = _power_modes(data, N, x, y)
            dev = max(dev, _fft_power_sum(data, N, x, y, modes, offset))
            r_rel_double = abs(direct - fact) / max(abs(direct), 1e-300)
            # double residual against the l1 size of the sum exposes cancellation
            logmag, _ = _szego_terms(data, norms.support, np.log(norms.values), N, x, y)
            r_scaled = abs(direct - fact) / float(np.sum(np.exp(logmag)))
            # the direct sum can cancel to 1e-11 of its terms, so the reported residual
            # comes from both routes redone in extended precision
            d_ext, f_ext, r_abs, size_ext, dev_ext = _extended_pair(data, mult, x, y)
            r_rel = r_abs / max(size_ext, 1e-300)
            records.append(PairRecord(x, y, d_ext, power, f_ext, r_abs, r_rel, max(dev, dev_ext), herm,
                                      r_scaled, "extended", r_rel_double))
        else:
            records.append(PairRecord(x, y, direct, power, None, None, None, None, herm))
    return KernelReport(N, seed, tuple(records), norms.all_exact)


def verify_factorization(
    P: LatticePolytope,
    N: int,
    samples: int = 20,
    seed: int = 0,
    cfg: QuadratureConfig | None = None,
    norms: NormTable | None = None,
    threads: int = 1,
) -> KernelReport:
    """Compare the direct Szego sum with the multiplier applied to Pi_1^N."""
    check_factorizable(P)
    return kernel_report(P, N, samples, seed, cfg, norms, factor=True, threads=threads)


def check_factorizable(P: LatticePolytope) -> None:
    """Raise FactorizationRefused unless P is Delzant with unit weights."""
    if not P.has_unit_weights:
        raise FactorizationRefused("the factorization is stated for unit weights c_alpha = 1")
    cert = is_delzant(P)
    if not cert.delzant:
        bad = cert.failures[0]
        raise FactorizationRefused(
            f"polytope is not Delzant (vertex {list(bad.vertex)}: det={bad.determinant})"
        )


# ---------------------------------------------------------------------------
# integrated quantities


@dataclass(frozen=True)
class TraceResult:
    value: complex
    err: float
    converged: bool


def trace_integral(
    data: KahlerPotential,
    support: LatticePointSet,
    logq: np.ndarray,
    N: int,
    phi: np.ndarray,
    cfg: QuadratureConfig,
) -> TraceResult:
    """int over M of  sum_alpha e^{i<phi,alpha>} |chi_alpha|^2 / Q_N(alpha)  dVol."""
    A = support.points.astype(float)
    phases = np.exp(1j * (A @ np.asarray(phi, dtype=float)))

    def logterms(rho):
        f, logdet = log_density_batch(data, rho)
        return rho @ A.T - N * f[:, None] - logq[None, :] + logdet[:, None]

    def logenv(rho):
        t = logterms(rho)
        top = t.max(axis=1)
        with np.errstate(invalid="ignore"):
            return top + np.log(np.sum(np.exp(t - top[:, None]), axis=1))

    center = data.center
    L = whitening(data.derivs(center)[2], 1.0)
    shift = float(logenv(center[None, :])[0])

    def func(rho):
        # second column is the phase-free magnitude, which sets the
        # convergence scale when the character itself cancels
        t = np.exp(logterms(rho) - shift)
        return np.stack([t @ phases, t.sum(axis=1).astype(complex)], axis=1)

    res = integrate_whitened(func, logenv, center, L, cfg)
    scale = math.exp(shift)
    value = complex(res.value[0]) * scale
    return TraceResult(value, res.err * scale, res.converged)


def diagonal_trace(
    P: LatticePolytope, N: int, norms: NormTable, cfg: QuadratureConfig | None = None
) -> TraceResult:
    """Quadrature of Pi_N(x, x) over M; equals the number of lattice points of NP."""
    cfg = cfg or QuadratureConfig()
    data = KahlerPotential(P)
    return trace_integral(data, norms.support, np.log(norms.values), N, np.zeros(P.dim), cfg)


@dataclass(frozen=True)
class SymbolRatioSeries:
    """N^m P_N(alpha_N) Q_N(alpha_N) along the ray through N * alpha0."""

    ray: tuple[float, ...]
    Ns: tuple[int, ...]
    alphas: tuple[tuple[int, ...] | None, ...]
    values: tuple[Fraction | float | None, ...]
    flags: tuple[str, ...]

    @property
    def floats(self) -> np.ndarray:
        return np.array([np.nan if v is None else float(v) for v in self.values])

    @property
    def differences(self) -> np.ndarray:
        return np.diff(self.floats)

    def richardson_limit(self) -> float:
        """Limit of r(N) = L + a/N fitted through the last two points."""
        r = self.floats
        n1, n2 = self.Ns[-2], self.Ns[-1]
        return (n2 * r[-1] - n1 * r[-2]) / (n2 - n1)

    def as_dict(self) -> dict:
        return {
            "ray": list(self.ray),
            "N": list(self.Ns),
            "alpha": [None if a is None else list(a) for a in self.alphas],
            "value": [None if v is None else float(v) for v in self.values],
            "exact": [str(v) if isinstance(v, Fraction) else None for v in self.values],
            "differences": [float(d) for d in self.differences],
            "flags": list(self.flags),
        }


def symbol_ratio(
    P: LatticePolytope,
    ray,
    Ns,
    cfg: QuadratureConfig | None = None,
) -> SymbolRatioSeries:
    """The diagonal consequence of the multiplier having principal symbol 1."""
    cfg = cfg or QuadratureConfig()
    from .norming import monomial_norm

    ray = tuple(float(Fraction(r)) if isinstance(r, str) else float(r) for r in ray)
    if len(ray) != P.dim:
        raise ValueError(f"ray must have {P.dim} components")
    A, b = P.facet_matrix
    if not np.all(A @ np.array(ray) < b):
        raise ValueError("ray direction must lie in the interior of P")
    data = KahlerPotential(P)
    alphas, values, flags = [], [], []
    for N in Ns:
        alpha = tuple(int(math.floor(N * r + 0.5)) for r in ray)
        if not P.contains(alpha, N):
            alphas.append(None)
            values.append(None)
            flags.append("outside")
            continue
        count = partition_counts(P, N)[alpha]
        entry = monomial_norm(P, N, alpha, cfg, data=data)
        q = entry.exact if entry.exact is not None else entry.value
        alphas.append(alpha)
        values.append(N**P.dim * count * q)
        flags.append("flagged" if entry.flagged else ("boundary" if entry.boundary else ""))
    return SymbolRatioSeries(ray, tuple(Ns), tuple(alphas), tuple(values), tuple(flags))
