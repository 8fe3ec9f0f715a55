"""Pauli words, conjugation, and tableau simulation against dense oracles."""

import numpy as np
import pytest

from nlqclab import pauli, qudit
from nlqclab.errors import DimensionMismatch, NotClifford


def test_hadamard_exchanges_x_and_z():
    c = pauli.CliffordCircuit.from_gate_list(2, 1, [("H", (0,), 1)])
    x = pauli.PauliWord.single(2, 1, 0, 1, 0)
    z = pauli.PauliWord.single(2, 1, 0, 0, 1)
    assert pauli.conjugate_pauli(c, x) == z
    assert pauli.conjugate_pauli(c, z) == x  # X^-1 = X at d = 2


def test_cnot_propagates_x():
    c = pauli.CliffordCircuit.from_gate_list(2, 2, [("CNOT", (0, 1), 1)])
    x0 = pauli.PauliWord(2, 2, (1, 0), (0, 0))
    assert pauli.conjugate_pauli(c, x0) == pauli.PauliWord(2, 2, (1, 1), (0, 0))
    z1 = pauli.PauliWord(2, 2, (0, 0), (0, 1))
    assert pauli.conjugate_pauli(c, z1) == pauli.PauliWord(2, 2, (0, 0), (1, 1))


@pytest.mark.parametrize("d,n", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (5, 1), (5, 2)])
def test_conjugation_matches_dense_including_phase(d, n):
    rng = np.random.default_rng(10 * d + n)
    for trial in range(8):
        c = pauli.random_clifford(n, d, seed=1000 * d + 10 * n + trial)
        u = c.unitary()
        p = pauli.PauliWord(
            d, n,
            tuple(rng.integers(0, d, n)),
            tuple(rng.integers(0, d, n)),
            int(rng.integers(0, 4 if d == 2 else d)),
        )
        img = pauli.conjugate_pauli(c, p)
        assert np.abs(u @ p.matrix() @ u.conj().T - img.matrix()).max() < 1e-9


def test_word_multiplication_matches_matrices():
    rng = np.random.default_rng(0)
    for d in (2, 3, 5):
        for _ in range(10):
            a = pauli.PauliWord(
                d, 2, tuple(rng.integers(0, d, 2)), tuple(rng.integers(0, d, 2)),
                int(rng.integers(0, 4 if d == 2 else d)),
            )
            b = pauli.PauliWord(
                d, 2, tuple(rng.integers(0, d, 2)), tuple(rng.integers(0, d, 2)),
                int(rng.integers(0, 4 if d == 2 else d)),
            )
            assert np.abs(a.mul(b).matrix() - a.matrix() @ b.matrix()).max() < 1e-9
            assert np.abs(a.inverse().matrix() - np.linalg.inv(a.matrix())).max() < 1e-9


def test_group_closure_under_generators():
    for d in (2, 3):
        word = pauli.PauliWord(d, 2, (1, 0), (1, 1), 1)
        for name, targets in [("H", (0,)), ("S", (1,)), ("CNOT", (0, 1)), ("X", (0,)), ("Z", (1,))]:
            c = pauli.CliffordCircuit.from_gate_list(d, 2, [(name, targets, 1)])
            out = pauli.conjugate_pauli(c, word)
            assert isinstance(out, pauli.PauliWord)
            assert all(0 <= v < d for v in out.x + out.z)


def test_involution_is_exact():
    for d in (2, 3, 5):
        c = pauli.random_clifford(3, d, seed=d)
        rng = np.random.default_rng(d)
        p = pauli.PauliWord(
            d, 3, tuple(rng.integers(0, d, 3)), tuple(rng.integers(0, d, 3)), 1
        )
        roundtrip = pauli.conjugate_pauli(c.then(c.inverse()), p)
        assert roundtrip == p


def test_empty_circuit_gives_identity_tableau():
    t = pauli.identity_tableau(3, 2)
    assert t.x_images[0] == pauli.PauliWord.single(3, 2, 0, 1, 0)
    assert t.z_images[1] == pauli.PauliWord.single(3, 2, 1, 0, 1)


def test_cnot_tableau_rows():
    c = pauli.CliffordCircuit.from_gate_list(2, 2, [("CNOT", (0, 1), 1)])
    t = pauli.tableau_simulate(c)
    assert t.x_images[0] == pauli.PauliWord(2, 2, (1, 1), (0, 0))
    assert t.z_images[1] == pauli.PauliWord(2, 2, (0, 0), (1, 1))


@pytest.mark.parametrize("d,n", [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_tableau_unitary_reconstruction(d, n):
    for trial in range(6):
        c = pauli.random_clifford(n, d, seed=33 * d + 7 * n + trial)
        t = pauli.tableau_simulate(c)
        u = c.unitary()
        v = t.to_unitary()
        k = np.argmax(np.abs(u))
        phase = u.flat[k] / v.flat[k]
        assert np.abs(u - phase * v).max() < 1e-9


def test_tableau_conjugate_agrees_with_direct():
    c = pauli.random_clifford(3, 3, seed=2)
    t = pauli.tableau_simulate(c)
    rng = np.random.default_rng(5)
    for _ in range(10):
        p = pauli.PauliWord(
            3, 3, tuple(rng.integers(0, 3, 3)), tuple(rng.integers(0, 3, 3)),
            int(rng.integers(0, 3)),
        )
        assert t.conjugate(p) == pauli.conjugate_pauli(c, p)


def test_tableau_validation_rejects_broken_rows():
    t = pauli.identity_tableau(2, 2)
    with pytest.raises(DimensionMismatch):
        pauli.StabilizerTableau(2, 2, t.x_images, (t.z_images[1], t.z_images[0]))


def test_random_clifford_deterministic():
    a = pauli.random_clifford(2, 3, seed=42)
    b = pauli.random_clifford(2, 3, seed=42)
    assert a == b
    assert a != pauli.random_clifford(2, 3, seed=43)


def test_random_clifford_covers_single_qubit_actions():
    seen = set()
    x = pauli.PauliWord.single(2, 1, 0, 1, 0)
    z = pauli.PauliWord.single(2, 1, 0, 0, 1)
    for seed in range(1000):
        c = pauli.random_clifford(1, 2, seed=seed)
        ix = pauli.conjugate_pauli(c, x)
        iz = pauli.conjugate_pauli(c, z)
        seen.add(((ix.x, ix.z), (iz.x, iz.z)))
        if len(seen) == 6:
            break
    assert len(seen) == 6


def test_random_clifford_tableaux_are_symplectic():
    for seed in range(100):
        c = pauli.random_clifford(2, 3, seed=seed)
        pauli.tableau_simulate(c).validate()


def test_gate_count_rules():
    assert pauli.gate_count(pauli.CliffordCircuit(2, 2, ())) == 0
    c = pauli.CliffordCircuit.from_gate_list(2, 2, [("H", (0,), 1), ("CNOT", (0, 1), 1)])
    assert pauli.gate_count(c) == 2
    powered = pauli.CliffordCircuit.from_gate_list(3, 1, [("X", (0,), 2), ("Z", (0,), 3)])
    assert pauli.gate_count(powered) == 1  # Z^3 = I at d = 3


def test_circuit_spec_rejects_custom_gates():
    h = qudit.hadamard(2)
    spec = qudit.CircuitSpec(2, 1, (qudit.GateSpec("custom", (0,), 1, h),))
    with pytest.raises(NotClifford):
        pauli.CliffordCircuit.from_circuit_spec(spec)
