"""Lattice geometry, regions, and power-law Hamiltonian term lists.

Sites of a ``D``-dimensional lattice of side ``L`` are indexed in row-major
order, so site ``k`` of a chain sits at coordinate ``(k,)``.  All distances
are Euclidean in lattice units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class LatticeSpec:
    dimension: int
    side_length: int

    def __post_init__(self):
        if self.dimension < 1 or self.side_length < 1:
            raise ValueError("dimension and side_length must be positive")

    @property
    def n(self) -> int:
        return self.side_length**self.dimension

    @cached_property
    def coordinates(self) -> np.ndarray:
        """(n, D) integer array of site coordinates."""
        grids = np.indices((self.side_length,) * self.dimension)
        return grids.reshape(self.dimension, -1).T.copy()

    def coord(self, site: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.coordinates[site])

    def index(self, coord: Sequence[int]) -> int:
        if len(coord) != self.dimension:
            raise ValueError(f"expected {self.dimension} coordinates, got {len(coord)}")
        idx = 0
        for c in coord:
            if not 0 <= c < self.side_length:
                raise ValueError(f"coordinate {tuple(coord)} outside the lattice")
            idx = idx * self.side_length + int(c)
        return idx

    def all_sites(self) -> "Region":
        return block(self, [(0, self.side_length)] * self.dimension)


def build_chain(D: int, L: int) -> LatticeSpec:
    """Hypercubic lattice with ``L`` sites per axis (``D=1`` is a chain)."""
    if D < 1:
        raise ValueError(f"dimension must be >= 1, got {D}")
    if L < 2:
        raise ValueError(f"side length must be >= 2, got {L}")
    return LatticeSpec(D, L)


# -- regions -----------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: tuple[int, ...]
    radius: float


@dataclass(frozen=True)
class Shell:
    center: tuple[int, ...]
    inner: float
    outer: float


@dataclass(frozen=True)
class Block:
    # half-open [start, stop) per axis
    ranges: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Explicit:
    pass


Descriptor = Union[Ball, Shell, Block, Explicit]


@dataclass(frozen=True)
class Region:
    """A materialized set of lattice sites plus the geometry that produced it."""

    lattice: LatticeSpec
    sites: frozenset[int]
    descriptor: Descriptor = field(default_factory=Explicit)

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, site) -> bool:
        return site in self.sites

    @cached_property
    def indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.sites))

    @property
    def is_empty(self) -> bool:
        return not self.sites

    def __or__(self, other: "Region") -> "Region":
        _check_same_lattice(self, other)
        sites = self.sites | other.sites
        if isinstance(self.descriptor, Block) and isinstance(other.descriptor, Block):
            merged = _merge_blocks(self.descriptor, other.descriptor)
            if merged is not None:
                return Region(self.lattice, sites, merged)
        return Region(self.lattice, sites, Explicit())

    def __and__(self, other: "Region") -> "Region":
        _check_same_lattice(self, other)
        return Region(self.lattice, self.sites & other.sites, Explicit())

    def __sub__(self, other: "Region") -> "Region":
        _check_same_lattice(self, other)
        return Region(self.lattice, self.sites - other.sites, Explicit())

    def complement(self) -> "Region":
        return Region(self.lattice, frozenset(range(self.lattice.n)) - self.sites, Explicit())

    def isdisjoint(self, other: "Region") -> bool:
        return self.sites.isdisjoint(other.sites)

    def __repr__(self) -> str:
        d = type(self.descriptor).__name__
        idx = self.indices
        body = f"{idx[0]}..{idx[-1]}" if len(idx) > 6 else ",".join(map(str, idx))
        return f"Region({d}, |{len(idx)}|: {body})"


def _check_same_lattice(a: Region, b: Region) -> None:
    if a.lattice != b.lattice:
        raise ValueError("regions live on different lattices")


def _merge_blocks(a: Block, b: Block) -> Block | None:
    # union of two blocks that share all but one axis and touch along it
    diff = [k for k, (ra, rb) in enumerate(zip(a.ranges, b.ranges)) if ra != rb]
    if len(diff) != 1:
        return a if not diff else None
    k = diff[0]
    (a0, a1), (b0, b1) = a.ranges[k], b.ranges[k]
    if a1 < b0 or b1 < a0:
        return None
    ranges = list(a.ranges)
    ranges[k] = (min(a0, b0), max(a1, b1))
    return Block(tuple(ranges))


def _center_coord(lattice: LatticeSpec, center) -> tuple[int, ...]:
    if isinstance(center, (int, np.integer)):
        return lattice.coord(int(center))
    center = tuple(int(c) for c in center)
    if len(center) != lattice.dimension:
        raise ValueError("center has wrong dimension")
    return center


def ball(lattice: LatticeSpec, center, radius: float) -> Region:
    """Sites within Euclidean distance ``radius`` of ``center`` (site index or coordinate)."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    c = np.asarray(_center_coord(lattice, center), dtype=float)
    d = np.linalg.norm(lattice.coordinates - c, axis=1)
    sites = frozenset(np.flatnonzero(d <= radius + 1e-9).tolist())
    return Region(lattice, sites, Ball(tuple(int(x) for x in c), float(radius)))


def shell(lattice: LatticeSpec, center, inner: float, outer: float) -> Region:
    """Ball(outer) minus Ball(inner)."""
    if not 0 <= inner <= outer:
        raise ValueError("need 0 <= inner <= outer")
    outer_ball = ball(lattice, center, outer)
    inner_ball = ball(lattice, center, inner)
    c = outer_ball.descriptor.center
    return Region(lattice, outer_ball.sites - inner_ball.sites, Shell(c, float(inner), float(outer)))


def block(lattice: LatticeSpec, ranges: Sequence[tuple[int, int]]) -> Region:
    """Hyperrectangle of sites with ``start <= x_k < stop`` on every axis."""
    if len(ranges) != lattice.dimension:
        raise ValueError("one (start, stop) range per axis required")
    ranges = tuple((int(a), int(b)) for a, b in ranges)
    for a, b in ranges:
        if not 0 <= a < b <= lattice.side_length:
            raise ValueError(f"invalid block range {(a, b)}")
    coords = lattice.coordinates
    mask = np.ones(lattice.n, dtype=bool)
    for k, (a, b) in enumerate(ranges):
        mask &= (coords[:, k] >= a) & (coords[:, k] < b)
    return Region(lattice, frozenset(np.flatnonzero(mask).tolist()), Block(ranges))


def explicit(lattice: LatticeSpec, sites: Iterable) -> Region:
    """Region from site indices (or coordinate tuples)."""
    out = set()
    for s in sites:
        idx = lattice.index(s) if isinstance(s, tuple) else int(s)
        if not 0 <= idx < lattice.n:
            raise ValueError(f"site {s} outside the lattice")
        out.add(idx)
    return Region(lattice, frozenset(out), Explicit())


def dist(X: Region, Y: Region) -> float:
    """Minimum Euclidean distance between a site of ``X`` and a site of ``Y``."""
    if X.is_empty or Y.is_empty:
        raise ValueError("distance to an empty region is undefined")
    _check_same_lattice(X, Y)
    if not X.sites.isdisjoint(Y.sites):
        return 0.0
    coords = X.lattice.coordinates
    if X.lattice.dimension == 1:
        x = np.asarray(X.indices)
        y = np.asarray(Y.indices)
        pos = np.searchsorted(x, y)
        left = np.abs(y - x[np.clip(pos - 1, 0, len(x) - 1)])
        right = np.abs(x[np.clip(pos, 0, len(x) - 1)] - y)
        return float(min(left.min(), right.min()))
    best = math.inf
    cy = coords[list(Y.indices)]
    xs = list(X.indices)
    for start in range(0, len(xs), 2048):
        best = min(best, float(cdist(coords[xs[start:start + 2048]], cy).min()))
    return best


def sphere_area(D: int, r: float) -> float:
    """Surface area of a D-ball of radius r (2 endpoints when D=1)."""
    return 2 * math.pi ** (D / 2) / math.gamma(D / 2) * r ** (D - 1)


def boundary_area(X: Region) -> float:
    """Area of the boundary of a ball or block region."""
    D = X.lattice.dimension
    d = X.descriptor
    if isinstance(d, Ball):
        return sphere_area(D, d.radius)
    if isinstance(d, Block):
        sides = [b - a for a, b in d.ranges]
        return float(2 * sum(math.prod(sides[:k] + sides[k + 1:]) for k in range(D)))
    raise ValueError(f"boundary area undefined for {type(d).__name__} regions")


def partition_blocks(n: int, ell: int, lattice: LatticeSpec | None = None) -> list[Region]:
    """Cut a chain of ``n`` sites into ``n // ell`` consecutive blocks.

    Leftover sites when ``ell`` does not divide ``n`` join the last block.
    """
    if ell < 1:
        raise ValueError("block size must be >= 1")
    if 2 * ell > n:
        raise ValueError(f"block size {ell} violates ell <= n/2 (n={n})")
    lattice = lattice or build_chain(1, n)
    if lattice.dimension != 1 or lattice.n != n:
        raise ValueError("partition_blocks needs a chain lattice of n sites")
    m = n // ell
    edges = [k * ell for k in range(m)] + [n]
    return [block(lattice, [(edges[k], edges[k + 1])]) for k in range(m)]


def ball_shell_family(lattice: LatticeSpec, r0: float, ell: float, M: int, center) -> list[Region]:
    """Nested balls of radii r0, r0+ell, ..., r0+M*ell around ``center``."""
    if r0 < 0 or ell < 1 or M < 1:
        raise ValueError("need r0 >= 0, ell >= 1, M >= 1")
    return [ball(lattice, center, r0 + k * ell) for k in range(M + 1)]


def shells_of(balls: Sequence[Region]) -> list[Region]:
    """Consecutive differences of a nested ball family."""
    out = []
    for inner, outer in zip(balls, balls[1:]):
        di, do = inner.descriptor, outer.descriptor
        out.append(Region(outer.lattice, outer.sites - inner.sites, Shell(do.center, di.radius, do.radius)))
    return out


# -- Hamiltonians ---------------------------------------------------------------


class PairTerm(NamedTuple):
    i: int
    j: int
    label: str
    coeff: float


class FieldTerm(NamedTuple):
    i: int
    label: str
    coeff: float


@dataclass(frozen=True)
class HamiltonianSpec:
    """Two-body Pauli Hamiltonian on a lattice."""

    lattice: LatticeSpec
    alpha: float
    pair_terms: tuple[PairTerm, ...]
    field_terms: tuple[FieldTerm, ...]
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def fields(self) -> np.ndarray:
        """Per-site Z-field coefficients (zero where absent)."""
        b = np.zeros(self.n)
        for t in self.field_terms:
            if t.label == "Z":
                b[t.i] += t.coeff
        return b

    @cached_property
    def pair_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(i, j, label, coeff) columns of the pair terms."""
        if not self.pair_terms:
            e = np.zeros(0, dtype=int)
            return e, e, np.zeros(0, dtype="<U2"), np.zeros(0)
        i, j, lab, c = zip(*self.pair_terms)
        return np.asarray(i), np.asarray(j), np.asarray(lab), np.asarray(c, dtype=float)

    def with_terms(self, pair_terms, field_terms) -> "HamiltonianSpec":
        return HamiltonianSpec(self.lattice, self.alpha, tuple(pair_terms), tuple(field_terms), self.seed)


def random_fields(n: int, seed: int, strength: float = 1.0) -> np.ndarray:
    """Uniform fields in [-strength, strength]; the draw used by every model builder."""
    rng = np.random.default_rng(seed)
    return strength * rng.uniform(-1.0, 1.0, size=n)


def power_law_hamiltonian(
    lattice: LatticeSpec,
    alpha: float,
    seed: int = 0,
    channels: Sequence[str] = ("XX", "YY", "ZZ"),
    field_strength: float = 1.0,
    field_label: str = "Z",
) -> HamiltonianSpec:
    """All-to-all couplings ``1/|i-j|^alpha`` on each channel plus random fields."""
    coords = lattice.coordinates.astype(float)
    n = lattice.n
    pairs = []
    for i in range(n):
        d = np.linalg.norm(coords[i + 1:] - coords[i], axis=1)
        for j, r in zip(range(i + 1, n), d):
            c = float(r**-alpha)
            pairs.extend(PairTerm(i, j, ch, c) for ch in channels)
    fields = []
    if field_strength:
        b = random_fields(n, seed, field_strength)
        fields = [FieldTerm(i, field_label, float(b[i])) for i in range(n)]
    return HamiltonianSpec(lattice, float(alpha), tuple(pairs), tuple(fields), seed)


def heisenberg_chain(n: int, alpha: float, seed: int = 0, field_strength: float = 1.0) -> HamiltonianSpec:
    """Long-range Heisenberg chain with random Z fields.

    >>> h = heisenberg_chain(2, 4.0, seed=1)
    >>> [t.label for t in h.pair_terms]
    ['XX', 'YY', 'ZZ']
    """
    if n < 2:
        raise ValueError("need at least two sites")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return power_law_hamiltonian(build_chain(1, n), alpha, seed, field_strength=field_strength)


def sub_hamiltonian(H: HamiltonianSpec, X: Region) -> HamiltonianSpec:
    """Terms supported entirely inside ``X``."""
    s = X.sites
    return H.with_terms(
        [t for t in H.pair_terms if t.i in s and t.j in s],
        [t for t in H.field_terms if t.i in s],
    )


def cross_terms(H: HamiltonianSpec, X: Region, Y: Region) -> HamiltonianSpec:
    """Pair terms with one site in ``X`` and the other in ``Y``."""
    if not X.isdisjoint(Y):
        raise ValueError("cross terms need disjoint regions")
    x, y = X.sites, Y.sites
    return H.with_terms(
        [t for t in H.pair_terms if (t.i in x and t.j in y) or (t.i in y and t.j in x)],
        [],
    )


def drop_couplings(H: HamiltonianSpec, regions: Sequence[Region]) -> HamiltonianSpec:
    """Remove every pair term whose sites fall in different regions of ``regions``."""
    owner = {}
    for k, r in enumerate(regions):
        for s in r.sites:
            owner[s] = k
    return H.with_terms(
        [t for t in H.pair_terms if owner.get(t.i) == owner.get(t.j)],
        H.field_terms,
    )
