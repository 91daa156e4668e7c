"""Block decompositions of a global evolution and their measured errors.

A schedule is an ordered list of region evolutions.  Its product is read
left to right as a matrix product, so in the Heisenberg picture
``U^dag O U`` the leftmost factor acts on ``O`` first.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Sequence


from .evolve import EvolutionEngine, Mode, unitary_distance
from .fitting import FitResult, fixed_exponent_fit, power_law_fit
from .lattice import (
    LatticeSpec,
    Region,
    ball,
    block,
    build_chain,
    explicit,
    heisenberg_chain,
    partition_blocks,
)


class Direction(enum.Enum):
    FORWARD = "F"
    BACKWARD = "B"

    def flipped(self) -> "Direction":
        return Direction.BACKWARD if self is Direction.FORWARD else Direction.FORWARD


class ScheduleEntry(tuple):
    __slots__ = ()

    def __new__(cls, region: Region, slice_index: int, direction: Direction):
        return super().__new__(cls, (region, slice_index, direction))

    region = property(lambda self: self[0])
    slice_index = property(lambda self: self[1])
    direction = property(lambda self: self[2])

    def __repr__(self):
        return f"{self.direction.value}({self.region!r}, k={self.slice_index})"


@dataclass
class BlockSchedule:
    entries: list
    t: float
    M: int
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.t * self.M

    def slice(self, k: int) -> list:
        return [e for e in self.entries if e.slice_index == k]

    def counts(self) -> dict:
        f = sum(e.direction is Direction.FORWARD for e in self.entries)
        return {"forward": f, "backward": len(self.entries) - f, "total": len(self.entries)}

    def support(self) -> frozenset:
        out = frozenset()
        for e in self.entries:
            out |= e.region.sites
        return out


@dataclass(frozen=True)
class DecompErrorSample:
    ell: int
    measured_error: float
    n: int
    t: float
    alpha: float
    seed: int


# -- construction ----------------------------------------------------------------


def _check_slices(M: int, T: float) -> None:
    if M < 1:
        raise ValueError("need at least one time slice")
    if T < 0:
        raise ValueError("total time must be nonnegative")


def _chain_pattern(blocks: Sequence) -> list:
    """F(L1 L2), B(L2), F(L2 L3), ..., F(L_{m-1} L_m) as (pair-or-single, direction)."""
    out = []
    m = len(blocks)
    for k in range(m - 1):
        out.append(((blocks[k], blocks[k + 1]), Direction.FORWARD))
        if k < m - 2:
            out.append(((blocks[k + 1],), Direction.BACKWARD))
    return out


def hhkl_schedule_1d(n: int, ell: int, M: int, T: float, lattice: LatticeSpec | None = None) -> BlockSchedule:
    """Forward/backward block pattern on a chain, repeated for ``M`` slices."""
    _check_slices(M, T)
    lattice = lattice or build_chain(1, n)
    blocks = partition_blocks(n, ell, lattice)
    pattern = []
    for parts, d in _chain_pattern(blocks):
        reg = parts[0] if len(parts) == 1 else parts[0] | parts[1]
        pattern.append((reg, d))
    entries = [ScheduleEntry(r, k, d) for k in range(M) for r, d in pattern]
    return BlockSchedule(entries, T / M, M, {"kind": "hhkl", "n": n, "ell": ell, "m": len(blocks)})


def _axis_cuts(L: int, ell: int) -> list:
    m = L // ell
    edges = [k * ell for k in range(m)] + [L]
    return [(edges[k], edges[k + 1]) for k in range(m)]


def _layer(ranges: list, axis: int, D: int, cuts: list, direction: Direction) -> list:
    """Decompose the evolution of a box into factors, cutting axes ``axis..D-1``."""
    if axis == D:
        return [(tuple(ranges), direction)]
    out = []
    for parts, d in _chain_pattern(cuts):
        span = (parts[0][0], parts[-1][1])
        sub = _layer(ranges[:axis] + [span] + ranges[axis + 1:], axis + 1, D, cuts, Direction.FORWARD)
        if d is Direction.BACKWARD:
            # inverse of a product: reverse order, flip every factor
            sub = [(r, dd.flipped()) for r, dd in reversed(sub)]
        out.extend(sub)
    if direction is Direction.BACKWARD:
        out = [(r, dd.flipped()) for r, dd in reversed(out)]
    return out


def hhkl_schedule_nd(lattice: LatticeSpec, ell: int, M: int, T: float) -> BlockSchedule:
    """Layered block pattern on a hypercube: the chain pattern along each axis in turn.

    Every factor is a box with sides of length ``ell`` or ``2 ell`` (the last
    block on an axis absorbs the remainder).
    """
    _check_slices(M, T)
    L, D = lattice.side_length, lattice.dimension
    if ell < 1 or 2 * ell > L:
        raise ValueError(f"block size {ell} violates ell <= L/2 (L={L})")
    cuts = _axis_cuts(L, ell)
    boxes = _layer([(0, L)] * D, 0, D, cuts, Direction.FORWARD)
    pattern = [(block(lattice, r), d) for r, d in boxes]
    entries = [ScheduleEntry(r, k, d) for k in range(M) for r, d in pattern]
    return BlockSchedule(entries, T / M, M, {"kind": "hhkl-nd", "D": D, "L": L, "ell": ell, "m": len(cuts)})


def shell_schedule(
    lattice: LatticeSpec,
    r0: float,
    ell: float,
    M: int,
    T: float,
    center=0,
    expanded: bool = False,
) -> BlockSchedule:
    """Nested-ball approximation of the evolution seen by an operator near ``center``.

    Slice k evolves the ball of radius ``r0 + (k+1) ell``.  With
    ``expanded=True`` each slice is instead the three-region split
    F(outside ball r_k), B(shell r_k..r_k+ell), F(ball r_k+ell); the first two
    factors act away from an operator inside ball ``r_k`` and cancel in the
    Heisenberg picture.
    """
    if r0 < 0 or ell <= 0:
        raise ValueError("need r0 >= 0 and ell > 0")
    _check_slices(M, T)
    entries = []
    for k in range(M):
        r = r0 + k * ell
        outer = ball(lattice, center, r + ell)
        if expanded:
            inner = ball(lattice, center, r)
            rest = inner.complement()
            shell_region = outer - inner
            if not rest.is_empty:
                entries.append(ScheduleEntry(rest, k, Direction.FORWARD))
            if not shell_region.is_empty and not rest.is_empty:
                entries.append(ScheduleEntry(shell_region, k, Direction.BACKWARD))
        entries.append(ScheduleEntry(outer, k, Direction.FORWARD))
    return BlockSchedule(entries, T / M, M, {"kind": "shell", "r0": r0, "ell": ell, "expanded": expanded})


# -- execution --------------------------------------------------------------------


def _factor(engine: EvolutionEngine, entry: ScheduleEntry, t: float):
    U = engine.unitary(entry.region, t)
    return U if entry.direction is Direction.FORWARD else U.dag()


def apply_schedule(schedule: BlockSchedule, engine: EvolutionEngine):
    """Ordered product of the schedule's factors.

    Slices with identical factor lists are multiplied once; a schedule whose
    slices are all equal is raised to the M-th power.
    """
    slices = [schedule.slice(k) for k in range(schedule.M)]
    keys = [tuple((e.region.sites, e.direction) for e in s) for s in slices]
    memo = {}
    for key, s in zip(keys, slices):
        if key not in memo:
            P = engine.identity()
            for e in s:
                P = P @ _factor(engine, e, schedule.t)
            memo[key] = P
    if len(set(keys)) == 1:
        return memo[keys[0]].power(schedule.M)
    out = engine.identity()
    for key in keys:
        out = out @ memo[key]
    return out


def schedule_error(schedule: BlockSchedule, engine: EvolutionEngine) -> float:
    """Spectral-norm distance between the exact evolution and the schedule product."""
    exact = engine.unitary(None, schedule.T)
    return unitary_distance(exact, apply_schedule(schedule, engine))


def lemma1_split(engine: EvolutionEngine, A: Region, B: Region, C: Region, t: float):
    """Approximate ``U_ABC`` by ``U_AB U_B^dag U_BC``; return (approx, error)."""
    regions = (A, B, C)
    for X, Y in itertools.combinations(regions, 2):
        if not X.isdisjoint(Y):
            raise ValueError("A, B, C must be disjoint")
    if len(A) + len(B) + len(C) != engine.n:
        raise ValueError("A, B, C must cover every site")
    approx = engine.unitary(A | B, t) @ engine.unitary(B, t).dag() @ engine.unitary(B | C, t)
    exact = engine.unitary(None, t)
    return approx, unitary_distance(exact, approx)


# -- sweeps -----------------------------------------------------------------------


def centered_split(lattice: LatticeSpec, ell: int):
    """A = left part, B = buffer of ``ell`` sites around the middle, C = the rest."""
    n = lattice.n
    if lattice.dimension != 1:
        raise ValueError("centered_split is defined on chains")
    a = n // 2 - ell // 2
    if a < 1 or a + ell >= n:
        raise ValueError(f"buffer width {ell} leaves no room for A and C (n={n})")
    return (
        explicit(lattice, range(0, a)),
        explicit(lattice, range(a, a + ell)),
        explicit(lattice, range(a + ell, n)),
    )


def decomp_error_sweep(n: int, t: float, alpha: float, ells: Sequence[int], seed: int = 0) -> list:
    """Three-region split error on a single-excitation Heisenberg chain for each buffer width."""
    H = heisenberg_chain(n, alpha, seed)
    engine = EvolutionEngine(H, Mode.SINGLE_EXCITATION)
    out = []
    for ell in ells:
        A, B, C = centered_split(H.lattice, int(ell))
        _, err = lemma1_split(engine, A, B, C, t)
        out.append(DecompErrorSample(int(ell), err, n, t, alpha, seed))
    return out


def hhkl_error_sweep(n: int, T: float, M: int, alpha: float, ells: Sequence[int], seed: int = 0) -> list:
    """Block-schedule error for each block size on a single-excitation Heisenberg chain."""
    H = heisenberg_chain(n, alpha, seed)
    engine = EvolutionEngine(H, Mode.SINGLE_EXCITATION)
    out = []
    for ell in ells:
        err = schedule_error(hhkl_schedule_1d(n, int(ell), M, T, H.lattice), engine)
        out.append(DecompErrorSample(int(ell), err, n, T, alpha, seed))
    return out


@dataclass(frozen=True)
class DecompFit:
    b: float
    fixed: FitResult
    free: FitResult


def fit_decomp_prefactor(samples: Sequence[DecompErrorSample], alpha: float, D: int = 1) -> DecompFit:
    """Fit ``error = b / ell^(alpha-D-1)`` plus an unconstrained power law."""
    ells = [s.ell for s in samples]
    if len(samples) < 4 or len(set(ells)) < 4:
        raise ValueError("need at least four samples with distinct ell")
    errs = [s.measured_error for s in samples]
    fixed = fixed_exponent_fit(ells, errs, -(alpha - D - 1))
    return DecompFit(fixed.prefactor, fixed, power_law_fit(ells, errs))
