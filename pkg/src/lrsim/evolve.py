"""Exact dense evolution in the full qubit space and the single-excitation sector.

Basis conventions: site 0 is the most significant bit of a computational
basis index, bit value 0 is the Z=+1 state.  A Pauli string maps
``|x> -> phase(x) |x ^ mask>``; every full-space matrix here is assembled from
those signed permutations.

Hamiltonians that conserve total Z (ZZ couplings, equal XX/YY couplings, Z
fields) are handled sector by sector when ``use_sectors`` is on, which keeps
n=12 work to blocks of at most 924 states.
"""
from __future__ import annotations

import enum
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .lattice import HamiltonianSpec, Region

FULL_SPACE_MAX_SITES = 14
SVD_MAX_DIM = 512


class Mode(enum.Enum):
    FULL = "full"
    SINGLE_EXCITATION = "single-excitation"


# -- operators -----------------------------------------------------------------


@dataclass
class DenseOperator:
    entries: np.ndarray
    hermitian: bool = False

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        return DenseOperator(self.entries @ _dense(other))

    def __add__(self, other):
        return DenseOperator(self.entries + _dense(other), self.hermitian and _herm(other))

    def __sub__(self, other):
        return DenseOperator(self.entries - _dense(other), self.hermitian and _herm(other))

    def scale(self, c) -> "DenseOperator":
        return DenseOperator(c * self.entries, self.hermitian and np.isreal(c))

    def dag(self) -> "DenseOperator":
        return DenseOperator(self.entries.conj().T, self.hermitian)

    def power(self, k: int) -> "DenseOperator":
        return DenseOperator(np.linalg.matrix_power(self.entries, k), self.hermitian)

    def to_dense(self) -> np.ndarray:
        return self.entries

    def norm(self) -> float:
        return spectral_norm(self)


def _dense(op):
    return op.to_dense() if hasattr(op, "to_dense") else np.asarray(op)


def _herm(op) -> bool:
    return bool(getattr(op, "hermitian", False))


@dataclass
class SectorOperator:
    """Block-diagonal operator; ``index[k]`` lists the basis states of block k."""

    blocks: tuple
    index: tuple
    dim: int
    hermitian: bool = False

    def _same(self, other):
        if not isinstance(other, SectorOperator) or len(other.blocks) != len(self.blocks):
            raise ValueError("operators use different sector layouts")
        return other

    def _map(self, fn, hermitian=False):
        return SectorOperator(tuple(fn(k, b) for k, b in enumerate(self.blocks)), self.index, self.dim, hermitian)

    def __matmul__(self, other):
        o = self._same(other)
        return self._map(lambda k, b: b @ o.blocks[k])

    def __add__(self, other):
        o = self._same(other)
        return self._map(lambda k, b: b + o.blocks[k], self.hermitian and o.hermitian)

    def __sub__(self, other):
        o = self._same(other)
        return self._map(lambda k, b: b - o.blocks[k], self.hermitian and o.hermitian)

    def scale(self, c):
        return self._map(lambda k, b: c * b, self.hermitian and np.isreal(c))

    def dag(self):
        return self._map(lambda k, b: b.conj().T, self.hermitian)

    def power(self, k: int):
        return self._map(lambda _, b: np.linalg.matrix_power(b, k), self.hermitian)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.result_type(*self.blocks))
        for idx, b in zip(self.index, self.blocks):
            out[np.ix_(idx, idx)] = b
        return out

    def norm(self) -> float:
        return max(spectral_norm(DenseOperator(b, self.hermitian)) for b in self.blocks)


def spectral_norm(A, rng_seed: int = 0) -> float:
    """Largest singular value.

    Hermitian operators use the extreme eigenvalues.  Otherwise a full SVD
    handles dim <= 512 and power iteration on ``A^dag A`` covers larger inputs.
    """
    if isinstance(A, SectorOperator):
        return A.norm()
    hermitian = _herm(A)
    a = _dense(A)
    if a.size == 0:
        return 0.0
    if hermitian:
        w = np.linalg.eigvalsh(a)
        return float(max(abs(w[0]), abs(w[-1])))
    if a.shape[0] <= SVD_MAX_DIM:
        return float(np.linalg.svd(a, compute_uv=False)[0])
    return _power_iteration_norm(a, rng_seed)


def _power_iteration_norm(a: np.ndarray, seed: int, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    ah = a.conj().T
    est = 0.0
    for _ in range(max_iter):
        w = ah @ (a @ v)
        new = float(np.sqrt(np.linalg.norm(w)))
        if new == 0.0:
            return 0.0
        v = w / np.linalg.norm(w)
        if abs(new - est) <= tol * 1e-2 * new:
            return new
        est = new
    return est


def unitary_distance(U, V) -> float:
    """``||U - V||`` for unitaries, read off the spectrum of ``U^dag V``."""
    if isinstance(U, SectorOperator):
        return max(_unitary_distance(a, b) for a, b in zip(U.blocks, U._same(V).blocks))
    return _unitary_distance(_dense(U), _dense(V))


def _unitary_distance(u: np.ndarray, v: np.ndarray) -> float:
    if u.size == 0:
        return 0.0
    w = np.linalg.eigvals(u.conj().T @ v)
    return float(np.max(np.abs(1.0 - w)))


def evolve_unitary(Hmat, t: float):
    """``exp(-i H t)`` through a Hermitian eigendecomposition."""
    if isinstance(Hmat, SectorOperator):
        return Hmat._map(lambda _, b: evolve_unitary(DenseOperator(b), t).entries)
    h = _dense(Hmat)
    if h.size and np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
        raise ValueError("evolve_unitary needs a Hermitian generator")
    w, v = np.linalg.eigh(h)
    return DenseOperator((v * np.exp(-1j * w * t)) @ v.conj().T)


def commutator(A, B):
    return A @ B - B @ A


def heisenberg(U, O):
    """``U^dag O U``; stays flagged Hermitian when ``O`` is."""
    out = U.dag() @ O @ U
    out.hermitian = _herm(O)
    return out


# -- Pauli strings on the full space ----------------------------------------------

def pauli_action(n: int, sites: Sequence[int], letters: str, states: np.ndarray | None = None):
    """Return (mask, phase) with ``P|x> = phase[x] |x ^ mask>`` over ``states``."""
    x = np.arange(2**n, dtype=np.int64) if states is None else np.asarray(states, dtype=np.int64)
    mask = 0
    phase = np.ones(x.shape, dtype=complex)
    for s, p in zip(sites, letters):
        shift = n - 1 - s
        bit = (x >> shift) & 1
        if p == "X":
            mask |= 1 << shift
        elif p == "Y":
            mask |= 1 << shift
            phase *= np.where(bit == 0, 1j, -1j)
        elif p == "Z":
            phase *= 1 - 2 * bit
        elif p != "I":
            raise ValueError(f"unknown Pauli label {p!r}")
    return mask, phase


def _term_list(H: HamiltonianSpec, sites: frozenset | None):
    for t in H.pair_terms:
        if sites is None or (t.i in sites and t.j in sites):
            yield (t.i, t.j), t.label, t.coeff
    for t in H.field_terms:
        if sites is None or t.i in sites:
            yield (t.i,), t.label, t.coeff


def _check_full_cap(n: int) -> None:
    if n > FULL_SPACE_MAX_SITES:
        raise ValueError(f"full-space evolution limited to n <= {FULL_SPACE_MAX_SITES}, got n={n}")


def _full_matrix(H: HamiltonianSpec, sites: frozenset | None) -> np.ndarray:
    n = H.n
    _check_full_cap(n)
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    cols = np.arange(d)
    for support, label, c in _term_list(H, sites):
        if len(label) != len(support):
            raise ValueError(f"label {label!r} does not match support {support}")
        mask, phase = pauli_action(n, support, label)
        out[cols ^ mask, cols] += c * phase
    return out


def _excitation_couplings(H: HamiltonianSpec):
    """Dense (J_xy, J_zz, B) arrays, or None if H does not conserve total Z."""
    n = H.n
    jx = np.zeros((n, n))
    jy = np.zeros((n, n))
    jz = np.zeros((n, n))
    b = np.zeros(n)
    target = {"XX": jx, "YY": jy, "ZZ": jz}
    for t in H.pair_terms:
        m = target.get(t.label)
        if m is None:
            return None
        m[t.i, t.j] += t.coeff
        m[t.j, t.i] += t.coeff
    for t in H.field_terms:
        if t.label != "Z":
            return None
        b[t.i] += t.coeff
    if not np.allclose(jx, jy, rtol=0, atol=1e-15):
        return None
    return jx, jz, b


def conserves_magnetization(H: HamiltonianSpec) -> bool:
    return _excitation_couplings(H) is not None


def single_excitation_state(n: int, k: int) -> int:
    """Full-space index of the state with site k up and every other site down."""
    return (2**n - 1) ^ (1 << (n - 1 - k))


def single_excitation_matrix(couplings, sites: Sequence[int]) -> np.ndarray:
    """n x n generator of the sub-Hamiltonian on ``sites`` restricted to one excitation."""
    jxy, jzz, b = couplings
    n = len(b)
    idx = np.asarray(sorted(sites), dtype=int)
    out = np.zeros((n, n))
    if idx.size == 0:
        return out
    sub_xy = jxy[np.ix_(idx, idx)]
    sub_zz = jzz[np.ix_(idx, idx)]
    out[np.ix_(idx, idx)] = 2 * sub_xy
    zz_total = sub_zz.sum() / 2
    field_total = b[idx].sum()
    # every site down except k: pairs touching k flip sign
    diag = np.full(n, zz_total - field_total)
    diag[idx] = zz_total - 2 * sub_zz.sum(axis=1) - field_total + 2 * b[idx]
    out[np.diag_indices(n)] += diag
    return out


def assemble_matrix(H: HamiltonianSpec, X: Region | None = None, mode: Mode = Mode.FULL) -> DenseOperator:
    """Matrix of the terms of ``H`` supported inside ``X`` (all of H if ``X`` is None)."""
    sites = None if X is None else X.sites
    if mode is Mode.FULL:
        return DenseOperator(_full_matrix(H, sites), hermitian=True)
    couplings = _excitation_couplings(H)
    if couplings is None:
        raise ValueError("single-excitation mode needs ZZ, equal XX/YY couplings and Z fields only")
    idx = range(H.n) if sites is None else sites
    return DenseOperator(single_excitation_matrix(couplings, idx).astype(complex), hermitian=True)


def embed(op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n matrix of ``op`` acting on ``sites`` (in the given order)."""
    sites = list(sites)
    k = len(sites)
    op = np.asarray(op)
    if op.shape != (2**k, 2**k):
        raise ValueError("operator dimension does not match its support")
    if len(set(sites)) != k or any(not 0 <= s < n for s in sites):
        raise ValueError("invalid support")
    _check_full_cap(n)
    rest = [s for s in range(n) if s not in sites]
    full = np.kron(op, np.eye(2 ** (n - k)))
    order = sites + rest
    pos = [order.index(s) for s in range(n)]
    full = full.reshape((2,) * (2 * n)).transpose(pos + [n + p for p in pos])
    return full.reshape(2**n, 2**n)


def pauli_operator(n: int, sites: Sequence[int], letters: str) -> np.ndarray:
    """Dense Pauli string on the full n-qubit space."""
    _check_full_cap(n)
    d = 2**n
    cols = np.arange(d)
    mask, phase = pauli_action(n, sites, letters)
    out = np.zeros((d, d), dtype=complex)
    out[cols ^ mask, cols] = phase
    return out


# -- engine ---------------------------------------------------------------------


class EvolutionEngine:
    """Region-restricted generators and unitaries for one Hamiltonian.

    Eigendecompositions are cached per region, so repeated factors of a
    schedule cost one diagonalization each.
    """

    def __init__(self, H: HamiltonianSpec, mode: Mode = Mode.FULL, use_sectors: bool = True, cache_size: int = 512):
        self.H = H
        self.mode = mode
        self.n = H.n
        self._couplings = _excitation_couplings(H)
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size
        if mode is Mode.SINGLE_EXCITATION:
            if self._couplings is None:
                raise ValueError("single-excitation mode needs ZZ, equal XX/YY couplings and Z fields only")
            self.dim = self.n
            self.sectors = None
        else:
            _check_full_cap(self.n)
            self.dim = 2**self.n
            self.sectors = _weight_sectors(self.n) if use_sectors and self._couplings is not None else None

    @property
    def all_sites(self) -> frozenset:
        return frozenset(range(self.n))

    def _sites(self, X) -> frozenset:
        if X is None:
            return self.all_sites
        return X.sites if isinstance(X, Region) else frozenset(X)

    def identity(self):
        if self.sectors is not None:
            return SectorOperator(tuple(np.eye(len(s), dtype=complex) for s in self.sectors), self.sectors, self.dim)
        return DenseOperator(np.eye(self.dim, dtype=complex), hermitian=True)

    def hamiltonian(self, X=None):
        sites = self._sites(X)
        if self.mode is Mode.SINGLE_EXCITATION:
            return DenseOperator(single_excitation_matrix(self._couplings, sites).astype(complex), hermitian=True)
        if self.sectors is not None:
            blocks = tuple(_sector_matrix(self.n, self._couplings, sites, s) for s in self.sectors)
            return SectorOperator(blocks, self.sectors, self.dim, hermitian=True)
        return DenseOperator(_full_matrix(self.H, sites), hermitian=True)

    def _eig(self, sites: frozenset):
        hit = self._cache.get(sites)
        if hit is not None:
            self._cache.move_to_end(sites)
            return hit
        if self.mode is Mode.SINGLE_EXCITATION:
            idx = np.asarray(sorted(sites), dtype=int)
            full = single_excitation_matrix(self._couplings, sites)
            rest = np.setdiff1d(np.arange(self.n), idx)
            outside = full[rest[0], rest[0]] if rest.size else 0.0
            w, v = np.linalg.eigh(full[np.ix_(idx, idx)]) if idx.size else (np.zeros(0), np.zeros((0, 0)))
            hit = ("se", idx, rest, w, v, outside)
        elif self.sectors is not None:
            hit = ("local",) + self._local_eig(sorted(sites))
        else:
            hit = ("full", np.linalg.eigh(self.hamiltonian(sites).entries))
        self._cache[sites] = hit
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return hit

    def _local_eig(self, sl: list):
        # diagonalize H_X on its own 2^k space, sector by sector, and record
        # where each global basis state lands in that local space
        k = len(sl)
        jxy, jzz, b = self._couplings
        ix = np.ix_(sl, sl)
        local = (jxy[ix], jzz[ix], b[sl])
        lsec = _weight_sectors(k)
        eigs = [np.linalg.eigh(_sector_matrix(k, local, range(k), s)) for s in lsec]
        rest = [s for s in range(self.n) if s not in set(sl)]
        maps = []
        for states in self.sectors:
            xl = _gather_bits(states, self.n, sl)
            xr = _gather_bits(states, self.n, rest)
            lw = _popcount(xl, k)
            lpos = np.empty_like(xl)
            for w in np.unique(lw):
                sel = lw == w
                lpos[sel] = np.searchsorted(lsec[w], xl[sel])
            maps.append((lw, lpos, xr))
        return eigs, maps

    def unitary(self, X, t: float):
        """``exp(-i H_X t)`` on the engine's space."""
        if t == 0:
            # exact, rather than v v^dag from the eigenbasis
            return self.identity()
        hit = self._eig(self._sites(X))
        if hit[0] == "se":
            _, idx, rest, w, v, outside = hit
            u = np.zeros((self.n, self.n), dtype=complex)
            if idx.size:
                u[np.ix_(idx, idx)] = (v * np.exp(-1j * w * t)) @ v.conj().T
            u[rest, rest] = np.exp(-1j * outside * t)
            return DenseOperator(u)
        if hit[0] == "full":
            w, v = hit[1]
            return DenseOperator((v * np.exp(-1j * w * t)) @ v.conj().T)
        _, eigs, maps = hit
        local = [(v * np.exp(-1j * w * t)) @ v.conj().T for w, v in eigs]
        blocks = []
        for states, (lw, lpos, xr) in zip(self.sectors, maps):
            blk = np.zeros((len(states), len(states)), dtype=complex)
            for w in np.unique(lw):
                sel = np.flatnonzero(lw == w)
                p, r = lpos[sel], xr[sel]
                blk[np.ix_(sel, sel)] = local[w][np.ix_(p, p)] * (r[:, None] == r[None, :])
            blocks.append(blk)
        return SectorOperator(tuple(blocks), self.sectors, self.dim)

    def native(self, op):
        """Convert a dense full-space matrix to this engine's operator form."""
        a = _dense(op)
        if a.shape != (self.dim, self.dim):
            raise ValueError(f"operator dimension {a.shape[0]} != engine dimension {self.dim}")
        herm = _herm(op)
        if self.sectors is None:
            return DenseOperator(np.asarray(a, dtype=complex), herm)
        blocks = tuple(a[np.ix_(s, s)] for s in self.sectors)
        kept = sum(float(np.sum(np.abs(b) ** 2)) for b in blocks)
        if not math.isclose(kept, float(np.sum(np.abs(a) ** 2)), rel_tol=1e-12, abs_tol=1e-24):
            raise ValueError("operator mixes magnetization sectors; build the engine with use_sectors=False")
        return SectorOperator(tuple(np.asarray(b, dtype=complex) for b in blocks), self.sectors, self.dim, herm)

    def project_single_excitation(self) -> np.ndarray:
        """Isometry (2^n x n) injecting the single-excitation basis into the full space."""
        p = np.zeros((2**self.n, self.n))
        for k in range(self.n):
            p[single_excitation_state(self.n, k), k] = 1.0
        return p


def _weight_sectors(n: int) -> tuple:
    x = np.arange(2**n, dtype=np.int64)
    weight = np.zeros_like(x)
    for s in range(n):
        weight += (x >> s) & 1
    return tuple(np.flatnonzero(weight == w) for w in range(n + 1))


def _gather_bits(states: np.ndarray, n: int, sites: Sequence[int]) -> np.ndarray:
    """Pack the bits of ``sites`` (first site most significant) into integers."""
    out = np.zeros_like(states)
    for s in sites:
        out = (out << 1) | ((states >> (n - 1 - s)) & 1)
    return out


def _popcount(x: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(x)
    for s in range(k):
        out += (x >> s) & 1
    return out


def _sector_matrix(n: int, couplings, sites: frozenset, states: np.ndarray) -> np.ndarray:
    jxy, jzz, b = couplings
    d = len(states)
    out = np.zeros((d, d), dtype=complex)
    diag = np.zeros(d)
    sl = sorted(sites)
    bits = {s: (states >> (n - 1 - s)) & 1 for s in sl}
    cols = np.arange(d)
    for a, i in enumerate(sl):
        zi = 1 - 2 * bits[i]
        diag += b[i] * zi
        for j in sl[a + 1:]:
            if jzz[i, j]:
                diag += jzz[i, j] * zi * (1 - 2 * bits[j])
            if jxy[i, j]:
                flip = np.flatnonzero(bits[i] != bits[j])
                mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
                rows = np.searchsorted(states, states[flip] ^ mask)
                out[rows, cols[flip]] += 2 * jxy[i, j]
    out[np.diag_indices(d)] += diag
    return out


def commutator_norm(
    H: HamiltonianSpec,
    T: float,
    O_X: np.ndarray,
    X: Sequence[int] | Region,
    O_Y: np.ndarray,
    Y: Sequence[int] | Region,
    engine: EvolutionEngine | None = None,
) -> float:
    """``||[U^dag O_X U, O_Y]||`` with ``U`` the evolution of all of H for time T."""
    xs = list(X.indices) if isinstance(X, Region) else list(X)
    ys = list(Y.indices) if isinstance(Y, Region) else list(Y)
    if set(xs) & set(ys):
        warnings.warn("commutator_norm called with overlapping supports", stacklevel=2)
    n = H.n
    ox = embed(O_X, xs, n)
    oy = embed(O_Y, ys, n)
    if engine is None:
        engine = EvolutionEngine(H, Mode.FULL)
    try:
        ox_n, oy_n = engine.native(ox), engine.native(oy)
    except ValueError:
        engine = EvolutionEngine(H, Mode.FULL, use_sectors=False)
        ox_n, oy_n = engine.native(ox), engine.native(oy)
    U = engine.unitary(None, T)
    heis = U.dag() @ ox_n @ U
    return spectral_norm(commutator(heis, oy_n))


def ordered_product(generators: Sequence[np.ndarray], dt: float) -> np.ndarray:
    """Time-ordered product of ``exp(-i G_k dt)`` with later steps on the left."""
    d = generators[0].shape[0]
    W = np.eye(d, dtype=complex)
    for G in generators:
        W = sla.expm(-1j * dt * np.asarray(G)) @ W
    return W
