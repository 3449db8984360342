"""Exact lattice-path partition function.

P_N(alpha) counts the length-N sequences of lattice points of P that sum to
alpha.  It is computed by N shift-and-add convolutions of the indicator of
P cap Z^m over the bounding box of NP.  Counts stay exact: int64 when the
total |P cap Z^m|^N fits, Python integers otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _backend
from .polytope import LatticePointSet, LatticePolytope, lattice_points

__all__ = [
    "PartitionTable",
    "partition_counts",
    "power_expansion_coefficients",
    "decomposability_check",
    "convolve_tables",
    "DEFAULT_MAX_CELLS",
]

DEFAULT_MAX_CELLS = 20_000_000
_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class PartitionTable:
    N: int
    support: LatticePointSet
    counts: tuple[int, ...]

    def __getitem__(self, alpha) -> int:
        i = self.support.index.get(tuple(int(x) for x in alpha))
        return 0 if i is None else self.counts[i]

    def __len__(self) -> int:
        return len(self.counts)

    def items(self) -> Iterator[tuple[tuple[int, ...], int]]:
        return zip(iter(self.support), self.counts)

    def total(self) -> int:
        return sum(self.counts)

    def zeros(self) -> list[tuple[int, ...]]:
        return [a for a, c in self.items() if c == 0]

    def rows(self) -> list[list]:
        return [list(a) + [str(c)] for a, c in self.items()]

    def header(self) -> list[str]:
        return [f"alpha_{j + 1}" for j in range(self.support.points.shape[1])] + ["count"]


def _dense_counts(P: LatticePolytope, N: int, max_cells: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array(P.vertices, dtype=np.int64).min(axis=0)
    hi = np.array(P.vertices, dtype=np.int64).max(axis=0)
    shape = tuple(int(N * (h - l) + 1) for l, h in zip(lo, hi))
    if math.prod(shape) > max_cells:
        raise MemoryError(
            f"partition table for N={N} needs {math.prod(shape)} cells (cap {max_cells})"
        )
    shape3 = shape + (1,) * (3 - len(shape))
    shifts = np.zeros((len(P.points), 3), dtype=np.int64)
    shifts[:, : P.dim] = P.points - lo
    exact_int64 = len(P.points) ** N <= _INT64_MAX
    if exact_int64:
        src = np.zeros(shape3, dtype=np.int64)
    else:
        src = np.zeros(shape3, dtype=object)
        src[...] = 0
    src[0, 0, 0] = 1
    for _ in range(N):
        dst = np.zeros_like(src)
        if not exact_int64:
            dst[...] = 0
            _backend.pure.convolve_shift_add(src, dst, shifts)
        else:
            _backend.convolve_shift_add(src, dst, shifts)
        src = dst
    return src.reshape(shape), N * lo


def partition_counts(
    P: LatticePolytope, N: int, max_cells: int = DEFAULT_MAX_CELLS
) -> PartitionTable:
    """P_N(alpha) for every alpha in NP cap Z^m."""
    if N < 1:
        raise ValueError("dilation N must be >= 1")
    dense, offset = _dense_counts(P, N, max_cells)
    support = lattice_points(P, N)
    idx = support.points - offset
    counts = tuple(int(dense[tuple(i)]) for i in idx)
    return PartitionTable(N=N, support=support, counts=counts)


def power_expansion_coefficients(
    P: LatticePolytope, N: int, max_cells: int = DEFAULT_MAX_CELLS
) -> PartitionTable:
    """Coefficients of chi_alpha(x) conj(chi_alpha(y)) in the N-th power of the
    pulled-back kernel; these are exactly the partition counts."""
    return partition_counts(P, N, max_cells)


def decomposability_check(
    P: LatticePolytope, N: int, table: PartitionTable | None = None
) -> list[tuple[int, ...]]:
    """Lattice points of NP that are not a sum of N lattice points of P."""
    if table is None:
        table = partition_counts(P, N)
    return table.zeros()


def convolve_tables(P: LatticePolytope, t1: PartitionTable, t2: PartitionTable) -> PartitionTable:
    """Table for N1 + N2 as the convolution of the tables for N1 and N2."""
    support = lattice_points(P, t1.N + t2.N)
    acc = dict.fromkeys(support, 0)
    for a, ca in t1.items():
        if ca == 0:
            continue
        for b, cb in t2.items():
            if cb:
                acc[tuple(x + y for x, y in zip(a, b))] += ca * cb
    return PartitionTable(N=t1.N + t2.N, support=support, counts=tuple(acc[a] for a in support))
