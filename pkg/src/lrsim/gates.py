"""Gate-count models: QSP segments, block-decomposed QSP, textbook scalings, and
an empirical fourth-order product-formula search.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .evolve import (
    EvolutionEngine,
    Mode,
    SectorOperator,
    DenseOperator,
    pauli_action,
    unitary_distance,
)
from .fitting import power_law_fit
from .lattice import HamiltonianSpec, random_fields

TAU_MAX = 1000.0
Q_MAX = 10_000
PF4_P = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))


class InfeasibleError(RuntimeError):
    """A search ran past its cap; ``report`` holds what was reached."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class QspEstimate:
    r: int
    q: int
    M: int
    gates: int


@dataclass
class GateReport:
    algorithm: str
    n: int
    T: float
    epsilon: float
    alpha: float
    gates: float
    params: dict = field(default_factory=dict)


# -- term statistics -------------------------------------------------------------


def lcu_term_stats(H: HamiltonianSpec) -> tuple[int, float]:
    """Number of Pauli strings and the sum of their absolute weights."""
    terms = [t.coeff for t in H.pair_terms] + [t.coeff for t in H.field_terms]
    return len(terms), float(sum(abs(c) for c in terms))


def chain_block_stats(start: int, stop: int, alpha: float, fields: np.ndarray, channels: int = 3) -> tuple[int, float]:
    """Closed-form ``lcu_term_stats`` of the power-law chain restricted to sites [start, stop)."""
    k = stop - start
    d = np.arange(1, k, dtype=float)
    pair_weight = float(np.sum((k - d) * d**-alpha)) if k > 1 else 0.0
    L = channels * k * (k - 1) // 2 + k
    return L, channels * pair_weight + float(np.sum(np.abs(fields[start:stop])))


# -- QSP -------------------------------------------------------------------------


def qsp_estimate(L: int, beta_sum: float, t: float, eps: float) -> QspEstimate:
    """Segment count, order and gate total for QSP on ``sum_j beta_j H_j``.

    >>> qsp_estimate(1, 1.0, 1.0, 1e-3)
    QspEstimate(r=1, q=6, M=10, gates=120)
    """
    if L < 1 or beta_sum <= 0:
        raise ValueError("need L >= 1 and beta_sum > 0")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if t <= 0:
        raise ValueError("t must be positive")
    r = max(1, math.ceil(beta_sum * t / TAU_MAX))
    tau = beta_sum * t / r
    target = math.log(eps / (8 * r))
    log_tau, log2 = math.log(tau), math.log(2.0)
    for q in range(2, Q_MAX + 1):
        # log of 4 tau^q / (2^q q!)
        if math.log(4.0) + q * (log_tau - log2) - math.lgamma(q + 1) <= target:
            M = 2 * (q - 1)
            return QspEstimate(r, q, M, (math.ceil(math.log2(L)) + 12 * L) * r * M)
    raise InfeasibleError(f"no QSP order q <= {Q_MAX} meets eps={eps}")


def qsp_gate_count(n: int, T: float, eps: float, alpha: float, seed: int = 0) -> GateReport:
    """QSP applied to the whole power-law chain for time T."""
    fields = random_fields(n, seed)
    L, beta = chain_block_stats(0, n, alpha, fields)
    est = qsp_estimate(L, beta, T, eps)
    return GateReport("QSP", n, T, eps, alpha, est.gates, {"L": L, "beta_sum": beta, "r": est.r, "q": est.q, "M": est.M})


def hhkl_block_size(n: int, T: float, eps_dec: float, alpha: float, b: float, t: float = 1.0) -> float:
    """Unrounded block size that keeps the decomposition error at ``eps_dec``."""
    return (T / t * 2 * n * b / eps_dec) ** (1.0 / (alpha - 1))


def hhkl_gate_count(
    n: int,
    T: float,
    eps: float,
    alpha: float,
    b: float,
    seed: int = 0,
    split_budget: bool = True,
    census: str = "exact",
) -> GateReport:
    """Gates for the block decomposition with every block simulated by QSP.

    ``split_budget`` gives half of ``eps`` to the decomposition and half to the
    block simulations; otherwise each gets all of it.  ``census="exact"``
    counts the m-1 double blocks and m-2 single blocks of each slice;
    ``"asymptotic"`` uses n/ell blocks of each size.
    """
    if alpha <= 2:
        raise ValueError("alpha must exceed 2D (D=1)")
    if b <= 0:
        raise ValueError("b must be positive")
    if census not in ("exact", "asymptotic"):
        raise ValueError(f"unknown census {census!r}")
    eps_dec = eps_sim = eps / 2 if split_budget else eps
    t = 1.0
    M = max(1, math.ceil(T / t))
    raw = hhkl_block_size(n, T, eps_dec, alpha, b, t)
    ell = math.ceil(raw)
    clamped = ell > n // 2
    ell = min(ell, n // 2)
    fields = random_fields(n, seed)
    params = {"ell_raw": raw, "ell": ell, "clamped": clamped, "b": b, "t": t, "M": M,
              "eps_dec": eps_dec, "eps_sim": eps_sim, "census": census}
    if census == "exact":
        m = n // ell
        edges = [k * ell for k in range(m)] + [n]
        spans = []
        for k in range(m - 1):
            spans.append((edges[k], edges[k + 2]))
            if k < m - 2:
                spans.append((edges[k + 1], edges[k + 2]))
        per_block = eps_sim / (M * len(spans))
        per_slice = sum(qsp_estimate(*chain_block_stats(a, z, alpha, fields), t, per_block).gates for a, z in spans)
        params.update(m=m, blocks_per_slice=len(spans), eps_block=per_block)
        gates = M * per_slice
    else:
        nb = n / ell
        per_block = eps_sim / (M * 2 * nb)
        g1 = qsp_estimate(*chain_block_stats(0, ell, alpha, fields), t, per_block).gates
        g2 = qsp_estimate(*chain_block_stats(0, 2 * ell, alpha, fields), t, per_block).gates
        params.update(blocks_per_slice=2 * nb, eps_block=per_block)
        gates = M * nb * (g1 + g2)
    return GateReport("HHKL", n, T, eps, alpha, gates, params)


def hhkl_vs_qsp(ns: Sequence[int], eps: float, alpha: float, b: float, seed: int = 0, **kw):
    """Both counts over a size grid with T = n, plus their power-law fits."""
    hh = [hhkl_gate_count(n, n, eps, alpha, b, seed, **kw) for n in ns]
    qq = [qsp_gate_count(n, n, eps, alpha, seed) for n in ns]
    fit_h = power_law_fit(ns, [r.gates for r in hh])
    fit_q = power_law_fit(ns, [r.gates for r in qq])
    return hh, qq, fit_h, fit_q


# -- textbook scalings -----------------------------------------------------------------


class Algorithm(enum.Enum):
    PF1 = "PF1"
    PF4 = "PF4"
    QSP = "QSP"
    LCU = "LCU"
    HHKL = "HHKL"


def theoretical_count(algorithm, n: float, T: float, eps: float, alpha: float = 4.0, D: int = 1) -> float:
    """Leading-order gate scaling with unit constants (only slopes are meaningful)."""
    a = Algorithm(algorithm)
    if a is Algorithm.PF1:
        return T**2 * n**6 / eps
    if a is Algorithm.PF4:
        return n**2 * (T * n**2) ** 1.25 / eps**0.25
    if a in (Algorithm.QSP, Algorithm.LCU):
        return T * n**3 * math.log(T * n / eps)
    if alpha <= 2 * D:
        raise ValueError("HHKL scaling needs alpha > 2D")
    return T * n * (T * n / eps) ** (2 * D / (alpha - D)) * math.log(T * n / eps)


def theoretical_exponent(algorithm, alpha=4, D: int = 1) -> Fraction:
    """Power of n at T = n, logarithms dropped."""
    a = Algorithm(algorithm)
    if a is Algorithm.PF1:
        return Fraction(8)
    if a is Algorithm.PF4:
        return Fraction(23, 4)
    if a in (Algorithm.QSP, Algorithm.LCU):
        return Fraction(4)
    al = Fraction(repr(alpha)) if isinstance(alpha, float) else Fraction(alpha)
    if al <= 2 * D:
        raise ValueError("HHKL scaling needs alpha > 2D")
    return 2 + 4 * D / (al - D)


# -- fourth-order product formula ---------------------------------------------------------


def _ordered_terms(H: HamiltonianSpec):
    pairs = sorted(H.pair_terms, key=lambda t: (t.i, t.j, t.label))
    fields_ = sorted(H.field_terms, key=lambda t: (t.i, t.label))
    return pairs, fields_


def pf4_stage_weights() -> list:
    p = PF4_P
    return [p, p, 1 - 4 * p, p, p]


class _SectorStepper:
    """Exact per-term exponentials acting on the rows of sector blocks.

    Consecutive XX, YY, ZZ terms of one pair commute and are applied as one
    rotation; runs of Z fields are applied as one diagonal phase.
    """

    def __init__(self, H: HamiltonianSpec, sectors):
        n = H.n
        self.sectors = sectors
        pairs, fields_ = _ordered_terms(H)
        groups = {}
        for t in pairs:
            groups.setdefault((t.i, t.j), {})[t.label] = t.coeff
        self.pairs = []
        for (i, j), c in groups.items():
            cxy, cz = c.get("XX", 0.0), c.get("ZZ", 0.0)
            mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
            per = []
            for states in sectors:
                bi = (states >> (n - 1 - i)) & 1
                bj = (states >> (n - 1 - j)) & 1
                lo = np.flatnonzero((bi == 0) & (bj == 1))
                hi = np.searchsorted(states, states[lo] ^ mask)
                eq = np.flatnonzero(bi == bj)
                per.append((lo, hi, eq))
            self.pairs.append((cxy, cz, per))
        self.field_z = []
        for states in sectors:
            z = np.zeros(len(states))
            for t in fields_:
                z += t.coeff * (1 - 2 * ((states >> (n - 1 - t.i)) & 1))
            self.field_z.append(z)

    def s2(self, blocks, lam: float):
        # symmetric sweep: pairs forward, fields twice (merged), pairs backward
        half = lam / 2
        seq = [("pair", k) for k in range(len(self.pairs))]
        ops = seq + [("field", None)] + seq[::-1]
        for kind, k in reversed(ops):
            for s, W in enumerate(blocks):
                if kind == "field":
                    W *= np.exp(-1j * lam * self.field_z[s])[:, None]
                    continue
                cxy, cz, per = self.pairs[k]
                lo, hi, eq = per[s]
                if eq.size:
                    W[eq] *= np.exp(-1j * half * cz)
                if lo.size:
                    c, sn = math.cos(2 * cxy * half), math.sin(2 * cxy * half)
                    ph = np.exp(1j * half * cz)
                    a, b = W[lo], W[hi]
                    W[lo] = ph * (c * a - 1j * sn * b)
                    W[hi] = ph * (c * b - 1j * sn * a)
        return blocks

    def step(self, tau: float):
        blocks = [np.eye(len(s), dtype=complex) for s in self.sectors]
        for w in reversed(pf4_stage_weights()):
            blocks = self.s2(blocks, w * tau)
        return blocks


class _DenseStepper:
    """Per-term exponentials ``cos(th) I - i sin(th) P`` on the full space."""

    def __init__(self, H: HamiltonianSpec):
        n = H.n
        pairs, fields_ = _ordered_terms(H)
        rows = np.arange(2**n)
        self.terms = []
        for t in pairs:
            mask, phase = pauli_action(n, (t.i, t.j), t.label)
            self.terms.append((t.coeff, rows ^ mask, phase[rows ^ mask]))
        for t in fields_:
            mask, phase = pauli_action(n, (t.i,), t.label)
            self.terms.append((t.coeff, rows ^ mask, phase[rows ^ mask]))
        self.dim = 2**n

    def s2(self, W, lam: float):
        half = lam / 2
        seq = list(range(len(self.terms)))
        for k in reversed(seq + seq[::-1]):
            c, src, ph = self.terms[k]
            th = c * half
            W = math.cos(th) * W - 1j * math.sin(th) * (ph[:, None] * W[src])
        return W

    def step(self, tau: float):
        W = np.eye(self.dim, dtype=complex)
        for w in reversed(pf4_stage_weights()):
            W = self.s2(W, w * tau)
        return W


def pf4_gates_per_step(H: HamiltonianSpec) -> int:
    """Term exponentials in one step: five symmetric sweeps of 2K exponentials each."""
    return 10 * (len(H.pair_terms) + len(H.field_terms))


class PF4Simulator:
    """Fourth-order product formula for a fixed Hamiltonian and total time."""

    def __init__(self, H: HamiltonianSpec, T: float, engine: EvolutionEngine | None = None, fast: bool = True):
        if H.n > 12:
            raise ValueError("PF4 simulation limited to n <= 12")
        self.H = H
        self.T = T
        self.engine = engine or EvolutionEngine(H, Mode.FULL, use_sectors=fast)
        if self.engine.mode is not Mode.FULL:
            raise ValueError("PF4 simulation runs in the full space")
        if self.engine.sectors is not None:
            self._stepper = _SectorStepper(H, self.engine.sectors)
        else:
            self._stepper = _DenseStepper(H)
        self._exact = None
        self.errors: dict = {}

    def unitary(self, steps: int):
        if steps < 1:
            raise ValueError("steps must be >= 1")
        step = self._stepper.step(self.T / steps)
        if isinstance(self._stepper, _SectorStepper):
            return SectorOperator(tuple(step), self.engine.sectors, self.engine.dim).power(steps)
        return DenseOperator(step).power(steps)

    def error(self, steps: int) -> float:
        if steps not in self.errors:
            if self._exact is None:
                self._exact = self.engine.unitary(None, self.T)
            self.errors[steps] = unitary_distance(self._exact, self.unitary(steps))
        return self.errors[steps]


def pf4_unitary(H: HamiltonianSpec, T: float, steps: int, engine: EvolutionEngine | None = None):
    """``[S2(pt)^2 S2((1-4p)t) S2(pt)^2]^steps`` with ``t = T/steps``."""
    return PF4Simulator(H, T, engine).unitary(steps)


def pf4_min_gates(H: HamiltonianSpec, T: float, eps: float, max_steps: int = 2**20, engine=None) -> GateReport:
    """Smallest step count whose PF4 error is at most ``eps``: doubling, then bisection."""
    sim = PF4Simulator(H, T, engine)
    per_step = pf4_gates_per_step(H)
    hi = 1
    while sim.error(hi) > eps:
        hi *= 2
        if hi > max_steps:
            report = GateReport("PF4", H.n, T, eps, H.alpha, math.inf, {"max_steps": max_steps, "errors": dict(sim.errors)})
            raise InfeasibleError(f"PF4 error above {eps} at {max_steps} steps", report)
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if sim.error(mid) <= eps:
            hi = mid
        else:
            lo = mid
    params = {
        "steps": hi,
        "gates_per_step": per_step,
        "gate_unit": "term exponential",
        "error": sim.errors[hi],
        "search_path": dict(sorted(sim.errors.items())),
    }
    return GateReport("PF4", H.n, T, eps, H.alpha, hi * per_step, params)
