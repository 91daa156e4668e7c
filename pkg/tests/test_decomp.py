import numpy as np
import pytest

from lrsim.decomp import (
    DecompErrorSample,
    Direction,
    apply_schedule,
    centered_split,
    decomp_error_sweep,
    fit_decomp_prefactor,
    hhkl_schedule_1d,
    hhkl_schedule_nd,
    lemma1_split,
    schedule_error,
    shell_schedule,
)
from lrsim.evolve import DenseOperator, EvolutionEngine, Mode, heisenberg, pauli_operator
from lrsim.lattice import (
    LatticeSpec,
    block,
    build_chain,
    drop_couplings,
    explicit,
    heisenberg_chain,
    partition_blocks,
    power_law_hamiltonian,
)


def test_chain_schedule_pattern():
    s = hhkl_schedule_1d(12, 3, 2, 1.0)
    first = s.slice(0)
    assert [e.direction for e in first] == [Direction.FORWARD, Direction.BACKWARD] * 2 + [Direction.FORWARD]
    assert [e.region.indices for e in first[:3]] == [tuple(range(6)), (3, 4, 5), tuple(range(3, 9))]
    assert s.counts() == {"forward": 6, "backward": 4, "total": 10}
    assert s.support() == frozenset(range(12))
    assert s.t == 0.5 and s.T == 1.0


def test_schedule_argument_checks():
    with pytest.raises(ValueError):
        hhkl_schedule_1d(8, 2, 0, 1.0)
    with pytest.raises(ValueError):
        hhkl_schedule_1d(8, 2, 1, -1.0)
    with pytest.raises(ValueError):
        hhkl_schedule_nd(LatticeSpec(2, 4), 3, 1, 1.0)
    with pytest.raises(ValueError):
        shell_schedule(build_chain(1, 6), 0, 0, 1, 1.0)


def test_square_schedule_factor_count_and_sizes():
    lat = LatticeSpec(2, 6)
    s = hhkl_schedule_nd(lat, 2, 1, 1.0)
    # three row strips F, B, F; each strip splits into three column factors
    assert len(s.entries) == 9
    for e in s.entries:
        sides = e.region.descriptor.ranges
        assert all(b - a in (2, 4) for a, b in sides)
    assert s.support() == frozenset(range(36))


def test_square_schedule_exact_without_cross_block_couplings():
    lat = LatticeSpec(2, 4)
    H = power_law_hamiltonian(lat, 3.0, seed=1)
    quads = [block(lat, [(a, a + 2), (b, b + 2)]) for a in (0, 2) for b in (0, 2)]
    eng = EvolutionEngine(drop_couplings(H, quads), Mode.SINGLE_EXCITATION)
    assert schedule_error(hhkl_schedule_nd(lat, 2, 2, 0.8), eng) < 1e-10


def test_chain_schedule_exact_without_cross_block_couplings():
    H = heisenberg_chain(10, 3.0, seed=4)
    blocks = partition_blocks(10, 2, H.lattice)
    eng = EvolutionEngine(drop_couplings(H, blocks))
    assert schedule_error(hhkl_schedule_1d(10, 2, 3, 1.5, H.lattice), eng) < 1e-10


def test_schedule_error_decreases_with_block_size():
    H = heisenberg_chain(60, 4.0, seed=0)
    eng = EvolutionEngine(H, Mode.SINGLE_EXCITATION)
    errs = [schedule_error(hhkl_schedule_1d(60, ell, 5, 0.5), eng) for ell in (3, 6, 12)]
    assert errs[0] > errs[1] > errs[2] > 0


def test_apply_schedule_power_shortcut_matches_loop():
    H = heisenberg_chain(8, 3.0, seed=2)
    eng = EvolutionEngine(H, Mode.SINGLE_EXCITATION)
    s = hhkl_schedule_1d(8, 2, 4, 1.0)
    P = np.eye(8, dtype=complex)
    for e in s.entries:
        U = eng.unitary(e.region, s.t).entries
        P = P @ (U if e.direction is Direction.FORWARD else U.conj().T)
    np.testing.assert_allclose(apply_schedule(s, eng).entries, P, atol=1e-12)


def test_three_region_split_checks_regions():
    H = heisenberg_chain(9, 4.0)
    eng = EvolutionEngine(H, Mode.SINGLE_EXCITATION)
    A, B, C = centered_split(H.lattice, 3)
    _, err = lemma1_split(eng, A, B, C, 0.2)
    assert 0 < err < 1e-2
    with pytest.raises(ValueError):
        lemma1_split(eng, A, B | explicit(H.lattice, [0]), C, 0.2)
    with pytest.raises(ValueError):
        lemma1_split(eng, A, B, explicit(H.lattice, [8]), 0.2)


def test_centered_split_geometry():
    lat = build_chain(1, 20)
    A, B, C = centered_split(lat, 4)
    assert A.indices == tuple(range(8))
    assert B.indices == (8, 9, 10, 11)
    assert len(C) == 8
    with pytest.raises(ValueError):
        centered_split(lat, 19)


def test_shell_schedule_structure():
    lat = build_chain(1, 12)
    s = shell_schedule(lat, 0, 2, 3, 1.0, center=0)
    assert [len(e.region) for e in s.entries] == [3, 5, 7]
    ex = shell_schedule(lat, 0, 2, 3, 1.0, center=0, expanded=True)
    assert [e.direction.value for e in ex.slice(1)] == ["F", "B", "F"]


def test_expanded_shell_schedule_cancels_for_local_operator():
    H = heisenberg_chain(8, 4.0, seed=3)
    eng = EvolutionEngine(H)
    O = eng.native(DenseOperator(pauli_operator(8, [0], "Z"), hermitian=True))
    red = heisenberg(apply_schedule(shell_schedule(H.lattice, 0, 2, 2, 0.6), eng), O)
    full = heisenberg(apply_schedule(shell_schedule(H.lattice, 0, 2, 2, 0.6, expanded=True), eng), O)
    assert (red - full).norm() < 1e-12


def test_decomp_sweep_and_fit():
    samples = decomp_error_sweep(80, 0.01, 4.0, [4, 6, 8, 10, 12])
    assert [s.ell for s in samples] == [4, 6, 8, 10, 12]
    fit = fit_decomp_prefactor(samples, 4.0)
    assert fit.fixed.exponent == -2.0
    assert fit.b > 0
    with pytest.raises(ValueError):
        fit_decomp_prefactor(samples[:3], 4.0)


def test_fit_requires_distinct_ells():
    s = [DecompErrorSample(4, 1e-3, 10, 0.1, 4.0, 0)] * 5
    with pytest.raises(ValueError):
        fit_decomp_prefactor(s, 4.0)
