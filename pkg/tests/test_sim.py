import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vubqc import sim


def dense_plus(k):
    return np.array([1, np.exp(1j * np.pi * k / 4)]) / np.sqrt(2)


def test_plus_state_and_gate_table():
    for k in range(8):
        assert np.allclose(sim.plus_state(k), dense_plus(k))
        assert np.allclose(sim.gate(("Z", k)) @ sim.plus_state(0), dense_plus(k))
    with pytest.raises(sim.SimError):
        sim.gate("T")


def test_xy_measurement_probabilities():
    for prep in range(8):
        for basis in range(8):
            env = sim.allocate([sim.PlusTheta(prep)])
            _, p0 = env.measure(0, sim.XY(basis), forced=0)
            expected = abs(np.vdot(dense_plus(basis), dense_plus(prep))) ** 2
            assert abs(p0 - expected) < 1e-12


def test_forced_null_branch_sets_flag():
    env = sim.allocate([sim.PlusTheta(0)])
    bit, p = env.measure(0, sim.XY(0), forced=1)
    assert bit == 1 and p < 1e-14 and env.null


def test_cz_on_dummy_factors_into_z():
    env = sim.allocate([sim.PlusTheta(0), sim.Computational(1)], defer=False)
    env.cz(0, 1)
    assert len(env.registers()) == 2
    assert np.allclose(env.vector([0]), dense_plus(4))


def test_vector_rejects_entangled_subset():
    env = sim.allocate([sim.PlusTheta(0), sim.PlusTheta(0)])
    env.cz(0, 1)
    with pytest.raises(sim.SimError):
        env.vector([0])
    rho = env.reduced_density([0])
    assert np.allclose(rho, np.eye(2) / 2)


def test_custom_prep_and_unitary_checks():
    with pytest.raises(sim.SimError):
        sim.Custom(1, 1)
    env = sim.allocate([sim.Custom(0.6, 0.8j)])
    with pytest.raises(sim.SimError):
        env.local(0, np.ones((2, 2)))
    with pytest.raises(sim.SimError):
        env.cz(0, 0)


def _dense_run(preps, ops):
    """Plain statevector oracle; qubit 0 is the most significant."""
    n = len(preps)
    psi = np.array([1.0 + 0j])
    for p in preps:
        psi = np.kron(psi, p.amplitudes())
    for op in ops:
        if op[0] == "cz":
            _, i, j = op
            idx = np.arange(2**n)
            bi = (idx >> (n - 1 - i)) & 1
            bj = (idx >> (n - 1 - j)) & 1
            psi = psi * np.where(bi & bj, -1, 1)
        else:
            _, i, name = op
            full = np.eye(1)
            for q in range(n):
                full = np.kron(full, sim.gate(name) if q == i else np.eye(2))
            psi = full @ psi
    return psi


prep_strategy = st.one_of(
    st.builds(sim.PlusTheta, st.integers(0, 7)),
    st.builds(sim.Computational, st.integers(0, 1)),
)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(prep_strategy, min_size=2, max_size=5),
    st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.sampled_from(["cz", "X", "Z", "H", "S"])),
             max_size=12),
    st.booleans(),
    st.booleans(),
)
def test_factoring_and_deferral_match_dense(preps, raw_ops, factoring, defer):
    n = len(preps)
    ops = []
    for a, b, kind in raw_ops:
        a, b = a % n, b % n
        if kind == "cz":
            if a != b:
                ops.append(("cz", a, b))
        else:
            ops.append(("g", a, kind))
    env = sim.allocate(preps, factoring=factoring, defer=defer)
    for op in ops:
        if op[0] == "cz":
            env.cz(op[1], op[2])
        else:
            env.local(op[1], op[2])
    got = env.vector(list(range(n)))
    want = _dense_run(preps, ops)
    assert abs(abs(np.vdot(want, got)) - 1) < 1e-10


def test_measure_renormalises_rest():
    env = sim.allocate([sim.PlusTheta(0), sim.PlusTheta(0)])
    env.cz(0, 1)
    bit, p = env.measure(0, sim.PAULI_Z, forced=1)
    assert abs(p - 0.5) < 1e-12
    assert np.allclose(env.vector([1]), dense_plus(4))
    assert np.allclose(env.norms(), [1.0])


def test_trace_distance_and_fidelity():
    a = np.diag([1.0, 0.0])
    b = np.eye(2) / 2
    assert abs(sim.trace_distance(a, b) - 0.5) < 1e-12
    assert abs(sim.fidelity(np.array([1, 0]), np.array([1, 1]) / np.sqrt(2)) - 0.5) < 1e-12
    assert abs(sim.fidelity(b, np.array([1, 0])) - 0.5) < 1e-12


def test_json_dump_is_little_endian():
    env = sim.Environment()
    env.add_register(["a", "b"], np.array([0, 1, 0, 0]))  # |01> big-endian: b is 1
    dump = json.loads(env.to_json())
    assert dump["endianness"] == "little"
    reg = dump["registers"][0]
    assert reg["qubits"] == ["a", "b"]
    amps = [complex(*x) for x in reg["amplitudes"]]
    # little-endian index: bit 0 is qubit a, bit 1 is qubit b
    assert amps[2] == 1


def test_copy_is_independent():
    env = sim.allocate([sim.PlusTheta(0), sim.PlusTheta(2)])
    env.cz(0, 1)
    twin = env.copy()
    twin.measure(0, sim.XY(0), forced=0)
    assert env.live == {0, 1} and twin.live == {1}
