"""One-round protocol engine: constructors, execution, the success bound."""

import numpy as np
import pytest

from nlqclab import engine, pauli, qudit, teleport


SWAP_GATES = [("CNOT", (0, 1), 1), ("CNOT", (1, 0), 1), ("CNOT", (0, 1), 1)]


def swap_circuit(d=2):
    if d == 2:
        return pauli.CliffordCircuit.from_gate_list(2, 2, SWAP_GATES)
    raise ValueError


# ---------------------------------------------------------------------------
# constructors and exactness
# ---------------------------------------------------------------------------

def test_identity_circuit_uses_no_pairs():
    c = pauli.CliffordCircuit(2, 2, ())
    p = engine.clifford_protocol(c, (1, 1))
    assert p.meta["pairs"] == 0
    assert engine.verify_implements(p, np.eye(4)).passed


def test_local_unitary_needs_no_resource():
    c = pauli.CliffordCircuit.from_gate_list(2, 2, [("X", (0,), 1)])
    p = engine.clifford_protocol(c, (1, 1))
    assert p.meta["pairs"] == 0
    assert engine.verify_implements(p, c.unitary()).passed


def test_swap_protocol_is_exact_on_every_branch():
    c = swap_circuit()
    p = engine.clifford_protocol(c, (1, 1))
    assert p.meta["pairs"] == 1
    maxd, ptot, branches = engine.branch_exactness(p, c.unitary())
    assert branches == 4
    assert maxd < 1e-9 and abs(ptot - 1) < 1e-9


def test_qutrit_cnot_protocol_and_accounting():
    c = pauli.CliffordCircuit.from_gate_list(3, 2, [("CNOT", (0, 1), 1)])
    p = engine.clifford_protocol(c, (1, 1))
    maxd, ptot, _ = engine.branch_exactness(p, c.unitary())
    assert maxd < 1e-9 and abs(ptot - 1) < 1e-9
    account = p.account()
    assert account.ebit_count == 1
    assert abs(account.mutual_information_ebits - 2 * np.log2(3)) < 1e-6
    assert account.consistent_with_pairs(3)


@pytest.mark.parametrize(
    "d,n,n0", [(2, 2, 1), (2, 3, 2), (2, 4, 2), (3, 3, 1), (3, 4, 2), (5, 2, 1)]
)
def test_random_clifford_protocols_exact(d, n, n0):
    for seed in range(2):
        c = pauli.random_clifford(n, d, seed=977 * d + 31 * n + seed)
        p = engine.clifford_protocol(c, (n0, n - n0))
        maxd, ptot, _ = engine.branch_exactness(p, c.unitary())
        dec = p.meta["decomposition"]
        assert maxd < 1e-9
        assert abs(ptot - 1) < 1e-9
        assert p.meta["pairs"] == min(dec.n0_core, dec.n1_core)


def test_reduction_peels_one_sided_gates():
    gates = [("H", (0,), 1), ("CNOT", (0, 1), 1), ("S", (1,), 1)]
    c = pauli.CliffordCircuit.from_gate_list(2, 2, gates)
    dec = engine.reduce_circuit(c, 1)
    assert len(dec.pre_left.gates) == 1
    assert len(dec.post_right.gates) == 1
    assert len(dec.core.gates) == 1
    assert dec.core0 == (0,) and dec.core1 == (1,)


def test_execute_with_reference_register():
    c = pauli.CliffordCircuit.from_gate_list(2, 2, [("CNOT", (0, 1), 1)])
    p = engine.clifford_protocol(c, (1, 1))
    amp = np.zeros(8)
    amp[0] = amp[3] = 1 / np.sqrt(2)
    st = qudit.DenseState(2, 3, amp)
    rho = engine.execute(p, st)
    u = qudit.embed_operator(c.unitary(), 2, 3, (0, 1))
    want = u @ st.density().matrix @ u.conj().T
    assert np.abs(rho.matrix - want).max() < 1e-9


def test_forced_execution_is_normalized():
    c = swap_circuit()
    p = engine.clifford_protocol(c, (1, 1))
    st = qudit.DenseState.computational(2, 2, 2)
    rho = engine.execute(p, st, forced={"x_0": (1, 1)})
    assert abs(np.trace(rho.matrix).real - 1) < 1e-9


def test_choi_paths_agree():
    c = pauli.random_clifford(2, 2, seed=3)
    p = engine.clifford_protocol(c, (1, 1))
    assert np.abs(
        engine.protocol_choi(p, method="columns") - engine.protocol_choi(p, method="ref")
    ).max() < 1e-10


def test_verify_identity_against_swap_distance():
    # oracle: Chois are rank one, distance sqrt(1 - |tr(SWAP)/4|^2)
    ident = pauli.CliffordCircuit(2, 2, ())
    p = engine.clifford_protocol(ident, (1, 1))
    swap = swap_circuit().unitary()
    rep = engine.verify_implements(p, swap, tol=0.1)
    assert not rep.passed
    assert abs(rep.choi_distance - np.sqrt(3) / 2) < 1e-9


# ---------------------------------------------------------------------------
# BK protocol
# ---------------------------------------------------------------------------

def test_bk_reduced_matches_protocol_path():
    for u in (np.eye(4, dtype=complex), qudit.cnot(2)):
        for n in (1, 2):
            j_red = engine.bk_choi(u, (1, 1), n, method="reduced")
            j_pro = engine.bk_choi(u, (1, 1), n, method="protocol")
            assert np.abs(j_red - j_pro).max() < 1e-9
            assert abs(np.trace(j_red).real - 1) < 1e-9


def test_bk_identity_single_port_equals_pbt():
    j = engine.bk_choi(np.eye(4, dtype=complex), (1, 1), 1)
    rep = teleport.pbt_channel(teleport.PBTParams(4, 1))
    assert np.abs(j - rep.choi).max() < 1e-9


def test_bk_distance_decreases_with_ports():
    for u in (np.eye(4, dtype=complex), qudit.cnot(2)):
        jt = qudit.choi_of_unitary(u)
        dists = [
            qudit.trace_distance_matrices(engine.bk_choi(u, (1, 1), n), jt)
            for n in (2, 4)
        ]
        assert dists[1] < dists[0]


def test_bk_port_relabeling_invariance():
    # permuting which port is which cannot change anything: the reduced
    # per-port Chois are identical across ports
    inst = teleport.build_pgm(teleport.PBTParams(4, 3))
    chois = teleport.reduced_port_choi(inst)
    for c in chois[1:]:
        assert np.abs(c - chois[0]).max() < 1e-10


# ---------------------------------------------------------------------------
# product replacement bound
# ---------------------------------------------------------------------------

def test_unentangled_protocol_keeps_probability_one():
    c = pauli.CliffordCircuit.from_gate_list(2, 2, [("X", (0,), 1)])
    rep = engine.product_replacement_check(engine.clifford_protocol(c, (1, 1)))
    assert rep.mutual_information_nats < 1e-9
    assert abs(rep.p_suc_product - 1) < 1e-9
    assert rep.passed and rep.passed_full


def test_swap_protocol_saturates_full_mutual_information():
    """Teleportation consumes everything: -ln p equals I, not I/2.

    p_suc(product) = 1/4 for one consumed pair at d = 2, an exact value
    checked against the closed form; the half-I variant is genuinely
    violated here while the full-I (relative entropy) bound saturates.
    """
    p = engine.clifford_protocol(swap_circuit(), (1, 1))
    rep = engine.product_replacement_check(p)
    assert abs(rep.p_suc_original - 1) < 1e-9
    assert abs(rep.p_suc_product - 0.25) < 1e-9
    assert abs(rep.mutual_information_nats - 2 * np.log(2)) < 1e-9
    assert rep.passed_full and not rep.passed


@pytest.mark.parametrize("d", [2, 3])
def test_full_information_bound_holds_on_seeded_protocols(d):
    rng = np.random.default_rng(d)
    for _ in range(10):
        c = pauli.random_clifford(2, d, seed=int(rng.integers(2**31)))
        rep = engine.product_replacement_check(engine.clifford_protocol(c, (1, 1)))
        assert abs(rep.p_suc_original - 1) < 1e-9
        assert rep.passed_full


def test_resource_account_pairs_consistency():
    for d, k in ((2, 2), (3, 1), (5, 1)):
        account = engine.Resource.pairs(d, k).account()
        assert account.ebit_count == k
        assert abs(account.mutual_information_ebits - 2 * k * np.log2(d)) < 1e-6


def test_protocol_json_round_trip():
    doc = {
        "n0": 1,
        "n1": 1,
        "split_circuit": {
            "d": 2,
            "n": 2,
            "gates": [{"g": g, "q": list(q), "pow": p} for g, q, p in SWAP_GATES],
        },
    }
    p = engine.load_protocol_json(doc)
    maxd, _, _ = engine.branch_exactness(p, swap_circuit().unitary())
    assert maxd < 1e-9


def test_bk_error_non_increasing_on_port_grid():
    u = qudit.cnot(2)
    jt = qudit.choi_of_unitary(u)
    dists = [
        qudit.trace_distance_matrices(engine.bk_choi(u, (1, 1), n), jt)
        for n in (1, 2, 3, 4)
    ]
    assert all(b <= a + 1e-12 for a, b in zip(dists, dists[1:]))


def test_explicit_decomposition_is_honored():
    # force the full circuit into the interaction even though the built-in
    # reduction would peel the one-sided dressing
    gates = [("H", (0,), 1), ("CNOT", (0, 1), 1), ("S", (1,), 1)]
    c = pauli.CliffordCircuit.from_gate_list(2, 2, gates)
    full_core = engine.InteractionDecomposition(
        2, 1, 1,
        pauli.CliffordCircuit(2, 1, ()), pauli.CliffordCircuit(2, 1, ()),
        c, pauli.CliffordCircuit(2, 1, ()), pauli.CliffordCircuit(2, 1, ()),
        (0,), (1,),
    )
    p = engine.clifford_protocol(c, (1, 1), decomposition=full_core)
    maxd, ptot, _ = engine.branch_exactness(p, c.unitary())
    assert maxd < 1e-9 and abs(ptot - 1) < 1e-9
    auto = engine.clifford_protocol(c, (1, 1))
    assert p.meta["pairs"] == auto.meta["pairs"] == 1


def test_protocol_validate_passes_for_constructors():
    c = pauli.random_clifford(2, 3, seed=8)
    engine.clifford_protocol(c, (1, 1)).validate()
    engine.bk_protocol(np.eye(4, dtype=complex), (1, 1), 2).validate()


def test_bk_identity_two_ports_reduces_to_pbt():
    # with the target trivial, the whole protocol is teleport-and-return,
    # so its channel coincides with the bare port channel
    j = engine.bk_choi(np.eye(4, dtype=complex), (1, 1), 2)
    rep = teleport.pbt_channel(teleport.PBTParams(4, 2))
    assert np.abs(j - rep.choi).max() < 1e-9


def test_bk_works_over_qutrits():
    u = qudit.cnot(3)
    jt = qudit.choi_of_unitary(u)
    d1 = qudit.trace_distance_matrices(engine.bk_choi(u, (1, 1), 1), jt)
    d2 = qudit.trace_distance_matrices(engine.bk_choi(u, (1, 1), 2), jt)
    assert d2 < d1
    # cross-check the reduced path against the full protocol at N=1
    j_red = engine.bk_choi(u, (1, 1), 1, method="reduced")
    j_pro = engine.bk_choi(u, (1, 1), 1, method="protocol")
    assert np.abs(j_red - j_pro).max() < 1e-9


def test_malformed_protocol_document_rejected():
    import pytest
    from nlqclab.errors import IOFailure
    with pytest.raises(IOFailure):
        engine.load_protocol_json({"n0": 1})
    with pytest.raises(IOFailure):
        engine.load_protocol_json(
            {"n0": 2, "n1": 1, "split_circuit": {"d": 2, "n": 2, "gates": []}}
        )


def test_protocol_document_resource_declaration_checked():
    import pytest
    from nlqclab.errors import IOFailure
    doc = {
        "n0": 1, "n1": 1, "resource": {"pairs": 2},
        "split_circuit": {"d": 2, "n": 2,
                          "gates": [{"g": "CNOT", "q": [0, 1], "pow": 1}]},
    }
    with pytest.raises(IOFailure):
        engine.load_protocol_json(doc)
    doc["resource"]["pairs"] = 1
    assert engine.load_protocol_json(doc).meta["pairs"] == 1
