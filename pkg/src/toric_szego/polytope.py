"""Lattice polytopes: parsing, H/V representations, dilated lattice points,
the Delzant test, exact volumes and Ehrhart counts.

Dimension is capped at 3 so the convex hull can be found by brute force over
vertex subsets.  Membership is always decided by the H-representation; edges
and the Delzant certificate come from the V-representation.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Facet",
    "LatticePolytope",
    "LatticePointSet",
    "DelzantCertificate",
    "VertexCertificate",
    "PolytopeError",
    "PolytopeParseError",
    "PolytopeValidationError",
    "parse_polytope",
    "load_polytope",
    "lattice_points",
    "is_delzant",
    "euclidean_volume",
    "ehrhart_count",
    "simplex",
    "segment",
    "cube",
    "remark_simplex",
    "MAX_DIM",
    "MAX_BOX_POINTS",
]

MAX_DIM = 3
MAX_BOX_POINTS = 50_000_000
_COORD_LIMIT = 2**62

Point = tuple[int, ...]


class PolytopeError(ValueError):
    """Base class for polytope input problems."""


class PolytopeParseError(PolytopeError):
    """Malformed polytope description (bad JSON, wrong types, non-integers)."""


class PolytopeValidationError(PolytopeError):
    """Well-formed input that does not describe an admissible polytope."""


@dataclass(frozen=True)
class Facet:
    """The half-space ``<normal, x> <= offset`` with a primitive integer normal."""

    normal: Point
    offset: int

    def value(self, x: Sequence[int]) -> int:
        return sum(u * xi for u, xi in zip(self.normal, x))


# ---------------------------------------------------------------------------
# small exact linear algebra helpers (m <= 3)


def _int_det(rows: Sequence[Sequence[int]]) -> int:
    n = len(rows)
    if n == 0:
        return 1
    if n == 1:
        return rows[0][0]
    if n == 2:
        (a, b), (c, d) = rows
        return a * d - b * c
    if n == 3:
        (a, b, c), (d, e, f), (g, h, i) = rows
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    raise ValueError("determinant only implemented for n <= 3")


def _rank(rows: Sequence[Sequence[int]]) -> int:
    mat = [[Fraction(v) for v in r] for r in rows]
    if not mat:
        return 0
    ncols = len(mat[0])
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(mat)) if mat[r][col] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        for r in range(len(mat)):
            if r != rank and mat[r][col] != 0:
                factor = mat[r][col] / mat[rank][col]
                mat[r] = [a - factor * b for a, b in zip(mat[r], mat[rank])]
        rank += 1
    return rank


def _primitive(v: Sequence[int]) -> Point:
    g = 0
    for x in v:
        g = math.gcd(g, abs(int(x)))
    if g == 0:
        return tuple(int(x) for x in v)
    return tuple(int(x) // g for x in v)


def _sub(a: Sequence[int], b: Sequence[int]) -> Point:
    return tuple(x - y for x, y in zip(a, b))


def _affine_dim(points: Sequence[Sequence[int]]) -> int:
    if not points:
        return -1
    base = points[0]
    return _rank([_sub(p, base) for p in points[1:]]) if len(points) > 1 else 0


def _normal_through(points: Sequence[Point]) -> Point:
    """Integer normal of the hyperplane through ``len(points) == m`` points."""
    m = len(points[0])
    if m == 1:
        return (1,)
    diffs = [_sub(p, points[0]) for p in points[1:]]
    if m == 2:
        (dx, dy), = diffs
        return (-dy, dx)
    (a1, a2, a3), (b1, b2, b3) = diffs
    return (a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1)


def _hull_facets(vertices: Sequence[Point]) -> list[Facet]:
    m = len(vertices[0])
    if m == 1:
        xs = [v[0] for v in vertices]
        return [Facet((-1,), -min(xs)), Facet((1,), max(xs))]
    found: dict[tuple[Point, int], Facet] = {}
    for subset in itertools.combinations(vertices, m):
        n = _normal_through(subset)
        if not any(n):
            continue
        n = _primitive(n)
        for sign in (1, -1):
            u = tuple(sign * x for x in n)
            b = max(sum(ui * vi for ui, vi in zip(u, v)) for v in vertices)
            if sum(ui * si for ui, si in zip(u, subset[0])) == b:
                found[(u, b)] = Facet(u, b)
    return sorted(found.values(), key=lambda f: (f.normal, f.offset))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticePolytope:
    """Integral convex polytope in the closed positive orthant of R^m.

    ``weights`` maps lattice points of P to the positive embedding constants
    c_alpha; points not listed carry weight 1.
    """

    dim: int
    vertices: tuple[Point, ...]
    facets: tuple[Facet, ...]
    weights: Mapping[Point, float] = field(default_factory=dict, compare=True)
    name: str = field(default="", compare=False)

    @classmethod
    def from_vertices(
        cls,
        vertices: Sequence[Sequence[int]],
        facets: Sequence[Facet] | None = None,
        weights: Mapping[Sequence[int], float] | None = None,
        name: str = "",
    ) -> "LatticePolytope":
        if not vertices:
            raise PolytopeParseError("empty vertex list")
        verts = []
        for v in vertices:
            try:
                pt = tuple(_as_int(x) for x in v)
            except TypeError as exc:
                raise PolytopeParseError(f"vertex {v!r}: {exc}") from None
            verts.append(pt)
        m = len(verts[0])
        if not 1 <= m <= MAX_DIM:
            raise PolytopeValidationError(f"dimension {m} outside supported range 1..{MAX_DIM}")
        if any(len(v) != m for v in verts):
            raise PolytopeParseError("vertices have inconsistent dimension")
        for v in verts:
            if any(x < 0 for x in v):
                raise PolytopeValidationError(f"vertex {list(v)} lies outside positive quadrant")
        verts = sorted(set(verts))
        if _affine_dim(verts) != m:
            raise PolytopeValidationError("polytope is not full-dimensional")
        hull = _hull_facets(verts)
        if facets is not None:
            supplied = sorted(
                {(tuple(int(x) for x in f.normal), int(f.offset)) for f in facets}
            )
            for normal, offset in supplied:
                if len(normal) != m:
                    raise PolytopeParseError("facet normal has wrong dimension")
                if _primitive(normal) != normal or not any(normal):
                    raise PolytopeValidationError(f"facet normal {list(normal)} is not primitive")
            if supplied != [(f.normal, f.offset) for f in hull]:
                raise PolytopeValidationError("supplied facets are inconsistent with the vertices")
        poly = cls(dim=m, vertices=tuple(verts), facets=tuple(hull), weights={}, name=name)
        for i, v in enumerate(poly.vertices):
            tight = [f.normal for f in poly.facets if f.value(v) == f.offset]
            if _rank(tight) < m:
                raise PolytopeValidationError(f"point {list(v)} is not a vertex of its hull")
        if weights:
            w: dict[Point, float] = {}
            for pt, c in weights.items():
                key = tuple(int(x) for x in pt)
                if len(key) != m or not poly.contains(key):
                    raise PolytopeValidationError(f"weight point {list(key)} is not in P")
                if not (c > 0 and math.isfinite(c)):
                    raise PolytopeValidationError(f"weight at {list(key)} must be positive")
                if c != 1.0:
                    w[key] = float(c)
            object.__setattr__(poly, "weights", w)
        return poly

    # -- membership -----------------------------------------------------------

    def contains(self, x: Sequence[int], dilation: int = 1) -> bool:
        return all(f.value(x) <= dilation * f.offset for f in self.facets)

    def on_boundary(self, x: Sequence[int], dilation: int = 1) -> bool:
        return any(f.value(x) == dilation * f.offset for f in self.facets)

    @cached_property
    def facet_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.array([f.normal for f in self.facets], dtype=np.int64)
        b = np.array([f.offset for f in self.facets], dtype=np.int64)
        return A, b

    # -- derived data ---------------------------------------------------------

    @cached_property
    def points(self) -> np.ndarray:
        """Lattice points of P, lexicographically sorted, shape (k, m)."""
        return lattice_points(self, 1).points

    @cached_property
    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights.get(tuple(int(x) for x in p), 1.0) for p in self.points])

    @property
    def has_unit_weights(self) -> bool:
        return not self.weights

    @cached_property
    def max_degree(self) -> int:
        """p = max |beta| over lattice points of P."""
        return int(self.points.sum(axis=1).max())

    @cached_property
    def barycenter(self) -> np.ndarray:
        return np.mean(np.array(self.vertices, dtype=float), axis=0)

    @cached_property
    def tight_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(
            frozenset(i for i, v in enumerate(self.vertices) if f.value(v) == f.offset)
            for f in self.facets
        )

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Vertex index pairs spanning one-dimensional faces."""
        m = self.dim
        out = []
        for i, j in itertools.combinations(range(len(self.vertices)), 2):
            common = [
                self.facets[k].normal
                for k, tight in enumerate(self.tight_sets)
                if i in tight and j in tight
            ]
            if _rank(common) != m - 1:
                continue
            # the face cut out by the common facets must contain only i, j
            face = frozenset(range(len(self.vertices)))
            for k, tight in enumerate(self.tight_sets):
                if i in tight and j in tight:
                    face &= tight
            if _affine_dim([self.vertices[t] for t in face]) == 1:
                out.append((i, j))
        return tuple(out)

    def weights_payload(self) -> list[dict]:
        return [{"point": list(k), "c": v} for k, v in sorted(self.weights.items())]

    def to_json(self) -> str:
        payload = {
            "dim": self.dim,
            "vertices": [list(v) for v in self.vertices],
            "facets": [{"normal": list(f.normal), "offset": f.offset} for f in self.facets],
        }
        if self.weights:
            payload["weights"] = self.weights_payload()
        return json.dumps(payload)

    def __repr__(self) -> str:
        label = f"{self.name}, " if self.name else ""
        return f"LatticePolytope({label}dim={self.dim}, vertices={[list(v) for v in self.vertices]})"


def _as_int(x) -> int:
    if isinstance(x, bool):
        raise TypeError("booleans are not coordinates")
    if isinstance(x, int):
        return x
    if isinstance(x, float) and x.is_integer():
        return int(x)
    raise TypeError(f"coordinate {x!r} is not an integer")


def parse_polytope(text: str, name: str = "") -> LatticePolytope:
    """Build a polytope from its JSON description.

    ``{"dim": m, "vertices": [[...]], "facets": [{"normal": [...], "offset": b}],
    "weights": [{"point": [...], "c": 1.0}]}``; ``facets`` and ``weights`` are
    optional.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolytopeParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict) or "vertices" not in data:
        raise PolytopeParseError("expected an object with a 'vertices' list")
    verts = data["vertices"]
    if not isinstance(verts, list) or not all(isinstance(v, list) for v in verts):
        raise PolytopeParseError("'vertices' must be a list of integer lists")
    if not verts:
        raise PolytopeParseError("empty vertex list")
    dim = data.get("dim", len(verts[0]))
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise PolytopeParseError("'dim' must be an integer")
    if not 1 <= dim <= MAX_DIM:
        raise PolytopeValidationError(f"dimension {dim} outside supported range 1..{MAX_DIM}")
    if any(len(v) != dim for v in verts):
        raise PolytopeParseError(f"every vertex must have {dim} coordinates")
    facets = None
    if data.get("facets") is not None:
        try:
            facets = [
                Facet(tuple(_as_int(x) for x in f["normal"]), _as_int(f["offset"]))
                for f in data["facets"]
            ]
        except (KeyError, TypeError) as exc:
            raise PolytopeParseError(f"malformed facet entry: {exc}") from None
    weights = None
    if data.get("weights") is not None:
        try:
            weights = {tuple(_as_int(x) for x in w["point"]): float(w["c"]) for w in data["weights"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise PolytopeParseError(f"malformed weight entry: {exc}") from None
    return LatticePolytope.from_vertices(verts, facets=facets, weights=weights, name=name)


def load_polytope(path) -> LatticePolytope:
    from pathlib import Path

    p = Path(path)
    return parse_polytope(p.read_text(encoding="utf-8"), name=p.stem)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticePointSet:
    """Lattice points of the dilate N*P in lexicographic order."""

    dilation: int
    points: np.ndarray

    @cached_property
    def index(self) -> dict[Point, int]:
        return {tuple(int(x) for x in p): i for i, p in enumerate(self.points)}

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Point]:
        for p in self.points:
            yield tuple(int(x) for x in p)

    def __contains__(self, alpha) -> bool:
        return tuple(int(x) for x in alpha) in self.index


def lattice_points(P: LatticePolytope, N: int) -> LatticePointSet:
    """All integer points of N*P, found by scanning the bounding box."""
    if N < 1:
        raise ValueError("dilation N must be >= 1")
    verts = np.array(P.vertices, dtype=object)
    lo = [N * int(x) for x in verts.min(axis=0)]
    hi = [N * int(x) for x in verts.max(axis=0)]
    if max(abs(x) for x in lo + hi) >= _COORD_LIMIT:
        raise OverflowError("dilated coordinates do not fit in 64 bits")
    shape = [h - l + 1 for l, h in zip(lo, hi)]
    if math.prod(shape) > MAX_BOX_POINTS:
        raise MemoryError(
            f"bounding box of {N}P has {math.prod(shape)} points (cap {MAX_BOX_POINTS})"
        )
    grid = np.indices(shape, dtype=np.int64).reshape(P.dim, -1).T + np.array(lo, dtype=np.int64)
    A, b = P.facet_matrix
    keep = np.all(grid @ A.T <= N * b, axis=1)
    # np.indices already enumerates in lexicographic (C) order
    return LatticePointSet(dilation=N, points=grid[keep])


def ehrhart_count(P: LatticePolytope, N: int) -> int:
    return len(lattice_points(P, N))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VertexCertificate:
    vertex: Point
    edge_directions: tuple[Point, ...]
    determinant: int | None

    @property
    def ok(self) -> bool:
        return self.determinant is not None and abs(self.determinant) == 1

    def as_dict(self) -> dict:
        return {
            "vertex": list(self.vertex),
            "edges": [list(e) for e in self.edge_directions],
            "det": self.determinant,
        }


@dataclass(frozen=True)
class DelzantCertificate:
    delzant: bool
    vertices: tuple[VertexCertificate, ...]

    def __bool__(self) -> bool:
        return self.delzant

    @property
    def failures(self) -> list[VertexCertificate]:
        return [v for v in self.vertices if not v.ok]

    def as_dict(self) -> dict:
        return {"delzant": self.delzant, "vertices": [v.as_dict() for v in self.vertices]}


def is_delzant(P: LatticePolytope) -> DelzantCertificate:
    """Check that every vertex has m primitive edge vectors forming a Z-basis."""
    adjacency: dict[int, list[int]] = {i: [] for i in range(len(P.vertices))}
    for i, j in P.edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    certs = []
    for i, v in enumerate(P.vertices):
        dirs = tuple(_primitive(_sub(P.vertices[j], v)) for j in sorted(adjacency[i]))
        det = _int_det(dirs) if len(dirs) == P.dim else None
        certs.append(VertexCertificate(v, dirs, det))
    return DelzantCertificate(all(c.ok for c in certs), tuple(certs))


# ---------------------------------------------------------------------------


def _subfaces(P: LatticePolytope, face: frozenset[int], dim: int) -> list[frozenset[int]]:
    out = set()
    for tight in P.tight_sets:
        g = face & tight
        if g != face and g and _affine_dim([P.vertices[i] for i in sorted(g)]) == dim - 1:
            out.add(g)
    return sorted(out, key=sorted)


def _triangulate(P: LatticePolytope, face: frozenset[int], dim: int) -> list[tuple[int, ...]]:
    if dim == 0:
        return [tuple(face)]
    apex = min(face)
    simplices = []
    for sub in _subfaces(P, face, dim):
        if apex in sub:
            continue
        simplices.extend((apex,) + s for s in _triangulate(P, sub, dim - 1))
    return simplices


def euclidean_volume(P: LatticePolytope) -> Fraction:
    """Exact volume by coning from the smallest vertex over every face not containing it."""
    total = 0
    for simplex_ in _triangulate(P, frozenset(range(len(P.vertices))), P.dim):
        base = P.vertices[simplex_[0]]
        total += abs(_int_det([_sub(P.vertices[k], base) for k in simplex_[1:]]))
    return Fraction(total, math.factorial(P.dim))


# ---------------------------------------------------------------------------
# standard test polytopes


def simplex(m: int, p: int = 1, weights: str | None = None) -> LatticePolytope:
    """The dilated standard simplex p*Sigma_m.

    ``weights="binomial"`` installs the multinomial weights c_alpha =
    binom(p, alpha)^{1/2}, under which the potential is p*log(1 + sum e^rho).
    """
    verts = [[0] * m] + [[p if i == j else 0 for i in range(m)] for j in range(m)]
    w = None
    if weights == "binomial":
        w = {}
        for alpha in itertools.product(range(p + 1), repeat=m):
            if sum(alpha) <= p:
                coef = math.factorial(p) // (
                    math.factorial(p - sum(alpha)) * math.prod(math.factorial(a) for a in alpha)
                )
                w[alpha] = math.sqrt(coef)
    elif weights is not None:
        raise ValueError(f"unknown weight scheme {weights!r}")
    name = f"simplex{m}" if p == 1 else f"{p}simplex{m}"
    return LatticePolytope.from_vertices(verts, weights=w, name=name)


def segment(p: int) -> LatticePolytope:
    return LatticePolytope.from_vertices([[0], [p]], name=f"segment{p}")


def cube(m: int, side: int = 1) -> LatticePolytope:
    verts = [list(v) for v in itertools.product((0, side), repeat=m)]
    return LatticePolytope.from_vertices(verts, name=f"cube{m}")


def remark_simplex() -> LatticePolytope:
    """The non-normal lattice tetrahedron with vertices 0, (0,1,1), (1,0,1), (1,1,0)."""
    return LatticePolytope.from_vertices(
        [[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]], name="remark-simplex"
    )
