"""Closed-form error and Lieb-Robinson bound evaluators plus brute-force lattice sums.

The unspecified constants of the bounds are plain parameters with default 1;
only shapes, exponents and constant-free inequalities are meaningful.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import zeta

from .lattice import Block, Region, boundary_area, dist, sphere_area


@dataclass(frozen=True)
class BoundParams:
    alpha: float
    D: int = 1
    gamma: float = 0.5
    v: float = 1.0
    c0: float = 1.0
    c_tr: float = 1.0
    c_ov: float = 1.0
    c_lr: float = 1.0
    c_lr_tilde: float = 1.0
    c_gong: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.D < 1:
            raise ValueError("D must be >= 1")
        if self.v <= 0:
            raise ValueError("v must be positive")


def xi_alpha(ell: float, p: BoundParams) -> float:
    """``(16/(1-gamma))^alpha / ell^(alpha-D-1) + exp(-gamma ell)``.

    The algebraic term is formed in log space so large alpha does not overflow.
    """
    if ell <= 0:
        raise ValueError("ell must be positive")
    if p.alpha <= p.D + 1:
        raise ValueError(f"xi_alpha needs alpha > D+1 (alpha={p.alpha}, D={p.D})")
    log_alg = p.alpha * math.log(16 / (1 - p.gamma)) - (p.alpha - p.D - 1) * math.log(ell)
    return math.exp(log_alg) + math.exp(-p.gamma * ell)


def lemma1_bound(t: float, phi: float, ell: float, p: BoundParams) -> float:
    """Three-region split error bound ``c0 (e^{vt}-1) phi xi_alpha(ell)``."""
    if t < 0 or phi < 0:
        raise ValueError("t and phi must be nonnegative")
    return p.c0 * math.expm1(p.v * t) * phi * xi_alpha(ell, p)


def lr_bound(T: float, R: float, p: BoundParams) -> float:
    """Two-branch Lieb-Robinson bound for operators a distance R apart after time T."""
    if R <= 0:
        raise ValueError("R must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    if p.alpha <= 2 * p.D:
        raise ValueError(f"the bound needs alpha > 2D (alpha={p.alpha}, D={p.D})")
    if p.v * T >= p.alpha:
        return p.c_lr * math.exp(p.alpha) * T * R ** (p.D - 1) * xi_alpha(R * p.alpha / (p.v * T), p)
    return p.c_lr_tilde * math.expm1(p.v * T) * xi_alpha(R, p)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def light_cone_exponents(alpha, D: int) -> tuple[Fraction, Fraction]:
    """Exact light-cone exponents ``((a-2D)/(a-D), (a-2D)/(a-D+1))``.

    >>> light_cone_exponents(4, 1)
    (Fraction(2, 3), Fraction(1, 2))
    """
    a = _as_fraction(alpha)
    if a <= 2 * D:
        raise ValueError(f"light cone needs alpha > 2D (alpha={alpha}, D={D})")
    return (a - 2 * D) / (a - D), (a - 2 * D) / (a - D + 1)


def gong_bound(t: float, r: float, p: BoundParams) -> float:
    """Prior commutator bound per unit product of norms."""
    if r <= 0:
        raise ValueError("r must be positive")
    alg = math.exp(-p.alpha * math.log((1 - p.gamma) * r))
    return p.c_gong * math.exp(p.v * t) * (alg + math.exp(-p.gamma * r))


# -- brute-force pair sums ---------------------------------------------------------


@dataclass(frozen=True)
class SumCheck:
    brute: float
    shape: float

    @property
    def ratio(self) -> float:
        return self.brute / self.shape


def _pair_multiplicity(a: tuple[int, int], c: tuple[int, int]):
    """Offsets c-a between two integer ranges and how many pairs realize each."""
    na, nc = a[1] - a[0], c[1] - c[0]
    offsets = np.arange(c[0] - (a[1] - 1), c[1] - a[0])
    return offsets, np.convolve(np.ones(na), np.ones(nc))


def box_pair_sum(a_ranges: Sequence[tuple[int, int]], c_ranges: Sequence[tuple[int, int]], alpha: float) -> float:
    """``sum_{a in A, c in C} |a-c|^-alpha`` for disjoint boxes, via offset multiplicities."""
    per_axis = [_pair_multiplicity(a, c) for a, c in zip(a_ranges, c_ranges)]
    first_off, first_mult = per_axis[0]
    if len(per_axis) == 1:
        if np.any(first_off == 0):
            raise ValueError("boxes overlap")
        return float(np.sum(first_mult * np.abs(first_off).astype(float) ** -alpha))
    rest_sq = np.zeros(1)
    rest_mult = np.ones(1)
    for off, mult in per_axis[1:]:
        rest_sq = (rest_sq[:, None] + off[None, :].astype(float) ** 2).ravel()
        rest_mult = (rest_mult[:, None] * mult[None, :]).ravel()
    total = 0.0
    for off, m in zip(first_off, first_mult):
        r2 = rest_sq + float(off) ** 2
        if np.any(r2 == 0):
            raise ValueError("boxes overlap")
        total += m * float(np.dot(rest_mult, r2 ** (-alpha / 2)))
    return total


def region_pair_sum(A: Region, C: Region, alpha: float) -> float:
    """Power-law pair sum between two disjoint regions."""
    if not A.isdisjoint(C):
        raise ValueError("regions overlap")
    if isinstance(A.descriptor, Block) and isinstance(C.descriptor, Block):
        return box_pair_sum(A.descriptor.ranges, C.descriptor.ranges, alpha)
    coords = A.lattice.coordinates.astype(float)
    ca = coords[list(A.indices)]
    cc = coords[list(C.indices)]
    total = 0.0
    for start in range(0, len(ca), 1024):
        d2 = np.sum((ca[start:start + 1024, None, :] - cc[None, :, :]) ** 2, axis=-1)
        total += float(np.sum(d2 ** (-alpha / 2)))
    return total


@dataclass(frozen=True)
class TruncCheck(SumCheck):
    ell: float = 0.0
    normalization: int = 3


def trunc_bound_and_sum(A: Region, C: Region, alpha: float) -> TruncCheck:
    """Brute pair sum between A and C next to the shape ``Phi(A) / ell^(alpha-D-1)``.

    The brute sum counts one unit coupling per pair; the Heisenberg model has
    three Pauli channels per pair, recorded in ``normalization``.
    """
    ell = dist(A, C)
    if ell < 1:
        raise ValueError("A and C must be disjoint")
    D = A.lattice.dimension
    brute = region_pair_sum(A, C, alpha)
    shape = boundary_area(A) / ell ** (alpha - D - 1)
    return TruncCheck(brute, shape, ell)


# -- power-law lattice sums -------------------------------------------------------------


class SumKind(enum.Enum):
    TAIL = "tail"
    TAIL_EXP = "tail-exp"
    CONV = "conv"
    CONV_MIXED = "conv-mixed"


def _ball_volume(D: int) -> float:
    return math.pi ** (D / 2) / math.gamma(D / 2 + 1)


def _orthant_norms(D: int, N: int):
    """Norms of lattice points in [-N, N]^D with |r| <= N, as (norm, multiplicity)."""
    axes = np.arange(N + 1)
    r2 = np.zeros(1)
    mult = np.ones(1)
    w = np.where(axes == 0, 1.0, 2.0)
    for _ in range(D):
        r2 = (r2[:, None] + (axes**2)[None, :]).ravel()
        mult = (mult[:, None] * w[None, :]).ravel()
        keep = r2 <= N * N
        r2, mult = r2[keep], mult[keep]
    return np.sqrt(r2), mult


def radial_lattice_sum(f, R: float, D: int, N: int) -> float:
    """``sum_{r in Z^D, |r| >= R} f(|r|)`` for decreasing f.

    Points with ``|r| <= N`` are summed directly; the rest is the radial integral
    beyond N, corrected for the lattice-point excess inside radius N.
    """
    norms, mult = _orthant_norms(D, N)
    sel = norms >= R
    direct = float(np.dot(mult[sel], f(norms[sel])))
    integral, _ = quad(lambda r: sphere_area(D, r) * f(np.asarray(r)), N, np.inf, limit=200)
    excess = float(mult.sum()) - _ball_volume(D) * N**D
    return direct + integral - float(f(np.asarray(float(N)))) * excess


def tail_sum(R: float, alpha: float, D: int, N: int | None = None) -> float:
    """``sum_{|r| >= R} |r|^-alpha`` over Z^D (exact Hurwitz zeta in D=1)."""
    if alpha <= D:
        raise ValueError("tail sum diverges for alpha <= D")
    if R <= 0:
        raise ValueError("R must be positive")
    if D == 1:
        return 2.0 * float(zeta(alpha, math.ceil(R)))
    if N is None:
        N = int(max(40 * R, 400)) if D == 2 else int(max(8 * R, 60))
    return radial_lattice_sum(lambda r: r ** (-alpha), R, D, N)


def _conv_grid(D: int, d: int, N: int):
    """Lattice points b in a box padded by N around the segment from 0 to d e_1."""
    x = np.arange(-N, d + N + 1)
    grids = [x] + [np.arange(-N, N + 1)] * (D - 1)
    mesh = np.meshgrid(*grids, indexing="ij")
    b = np.stack([m.ravel() for m in mesh], axis=1).astype(float)
    return b


def conv_sum(d: int, alpha: float, D: int = 1, N: int | None = None) -> float:
    """``sum_b |a-b|^-alpha |b-c|^-alpha`` with a = 0, c = d e_1, b distinct from both."""
    if alpha <= D:
        raise ValueError("convolution sum needs alpha > D")
    N = N or (max(4 * d, 2000) if D == 1 else max(2 * d, 60))
    b = _conv_grid(D, d, N)
    c = np.zeros(D)
    c[0] = d
    ra = np.linalg.norm(b, axis=1)
    rc = np.linalg.norm(b - c, axis=1)
    keep = (ra > 0) & (rc > 0)
    direct = float(np.sum(ra[keep] ** -alpha * rc[keep] ** -alpha))
    # beyond the box both distances exceed N; bound the remainder by its integral
    tail = sphere_area(D, N) * N ** (D - 2 * alpha) / (2 * alpha - D) if D > 1 else 2 * N ** (1 - 2 * alpha) / (2 * alpha - 1)
    return direct + tail


def conv_mixed_sum(d: int, alpha: float, gamma: float, beta: int, D: int = 1, N: int | None = None) -> float:
    """``sum_b |a-b|^-alpha |b-c|^beta e^{-gamma |b-c|}`` with a = 0, c = d e_1, b != a."""
    if alpha <= D:
        raise ValueError("mixed convolution sum needs alpha > D")
    N = N or max(int(60 / gamma) + 2 * beta, 2 * d if D > 1 else 4 * d, 50)
    b = _conv_grid(D, d, N)
    c = np.zeros(D)
    c[0] = d
    ra = np.linalg.norm(b, axis=1)
    rc = np.linalg.norm(b - c, axis=1)
    keep = ra > 0
    return float(np.sum(ra[keep] ** -alpha * rc[keep] ** beta * np.exp(-gamma * rc[keep])))


def tail_exp_sum(R: float, beta: float, D: int) -> float:
    """``sum_{|r| >= R} |r|^beta e^{-|r|}`` over Z^D."""
    N = int(R + 80 + 4 * beta)
    return radial_lattice_sum(lambda r: r**beta * np.exp(-r), R, D, N)


def verify_sum_lemma(kind: SumKind | str, **params) -> SumCheck:
    """Brute lattice sum against the matching right-hand-side shape with unit constant.

    TAIL: R, alpha, D.  TAIL_EXP: R, beta, D.  CONV: d, alpha, D.
    CONV_MIXED: d, alpha, gamma, beta, D.
    """
    kind = SumKind(kind)
    D = int(params.get("D", 1))
    if kind is SumKind.TAIL:
        R, alpha = params["R"], params["alpha"]
        if R <= math.sqrt(D):
            raise ValueError("tail shape needs R > sqrt(D)")
        return SumCheck(tail_sum(R, alpha, D), (R - math.sqrt(D)) ** (D - alpha))
    if kind is SumKind.TAIL_EXP:
        R, beta = params["R"], params["beta"]
        if R <= 0 or beta <= 0:
            raise ValueError("need R > 0 and beta > 0")
        return SumCheck(tail_exp_sum(R, beta, D), R ** (beta + D - 1) * math.exp(-R))
    if kind is SumKind.CONV:
        d, alpha = int(params["d"]), params["alpha"]
        if d < 1:
            raise ValueError("a and c must be distinct")
        return SumCheck(conv_sum(d, alpha, D), 2**alpha / d**alpha)
    d, alpha, gamma, beta = int(params["d"]), params["alpha"], params["gamma"], int(params["beta"])
    if not 0 < gamma < 1 or beta < 1 or d < 1:
        raise ValueError("need gamma in (0,1), integer beta >= 1, d >= 1")
    g2 = gamma / (2 - gamma)
    shape = (4 / (1 - g2)) ** alpha / d**alpha + d ** (beta + D - 1) * math.exp(-g2 * d)
    return SumCheck(conv_mixed_sum(d, alpha, gamma, beta, D), shape)
