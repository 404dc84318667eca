import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ftlab.circuit import Circuit, CircuitError, Location
from ftlab.dense import DenseState, dense_fidelity
from ftlab.errors import ConfigurationError, DimensionError, UnsupportedGateError
from ftlab.noise import NoiseModel
from ftlab.pauli import PauliOperator
from ftlab.sim import ShotRecord, apply_gate, apply_pauli, measure, run_circuit
from ftlab.tableau import StabilizerTableau

KINDS = ["H", "S", "S_DAG", "X", "Y", "Z", "CNOT"]


def _both(n):
    return [StabilizerTableau(n), DenseState(n)]


def random_ops(rng, n, depth, p_meas=0.15):
    ops = []
    for _ in range(depth):
        if rng.random() < p_meas:
            ops.append(("M", (int(rng.integers(n)),)))
            continue
        kinds = KINDS if n > 1 else KINDS[:-1]
        k = kinds[rng.integers(len(kinds))]
        ops.append((k, tuple(int(q) for q in rng.choice(n, 2 if k == "CNOT" else 1, replace=False))))
    return ops


def exact_distribution(state, ops, prob=1.0, prefix=(), out=None):
    """Outcome-string probabilities by branching at each measurement (works on either backend)."""
    out = {} if out is None else out
    for i, (k, q) in enumerate(ops):
        if k != "M":
            apply_gate(state, Location(k, q))
            continue
        if isinstance(state, DenseState):
            p1 = state.prob_one(q[0])
            branches = [(b, pb) for b, pb in ((0, 1 - p1), (1, p1)) if pb > 1e-12]
        elif state.is_deterministic(q[0]):
            branches = [(state.copy().measure_z(q[0]), 1.0)]
        else:
            branches = [(0, 0.5), (1, 0.5)]
        for b, pb in branches:
            s = state.copy()
            s.measure_z(q[0], forced=b)
            exact_distribution(s, ops[i + 1:], prob * pb, prefix + (b,), out)
        return out
    out[prefix] = out.get(prefix, 0.0) + prob
    return out


# -- gates -----------------------------------------------------------------


@pytest.mark.parametrize("backend", ["tableau", "dense"])
def test_h_involution(backend):
    s = StabilizerTableau(2) if backend == "tableau" else DenseState(2)
    apply_gate(s, ("H", (0,)))
    apply_gate(s, ("CNOT", (0, 1)))
    ref = s.copy()
    apply_gate(s, ("H", (1,)))
    apply_gate(s, ("H", (1,)))
    if backend == "dense":
        assert dense_fidelity(s, ref) == pytest.approx(1, abs=1e-12)
    else:
        assert s.stabilizers() == ref.stabilizers()


def test_s_four_times_identity():
    d = DenseState(1)
    apply_gate(d, ("H", (0,)))
    ref = d.psi.copy()
    for _ in range(4):
        apply_gate(d, ("S", (0,)))
    np.testing.assert_allclose(d.psi, ref, atol=1e-14)
    t = StabilizerTableau(1)
    apply_gate(t, ("H", (0,)))
    before = t.stabilizers()
    for _ in range(4):
        apply_gate(t, ("S", (0,)))
    assert t.stabilizers() == before


def _unitary_of(ops, n):
    cols = []
    for i in range(2**n):
        d = DenseState(n, np.eye(2**n, dtype=complex)[i])
        for k, q in ops:
            apply_gate(d, (k, q))
        cols.append(d.psi)
    return np.array(cols).T


@pytest.mark.parametrize("before,after", [("XI", "XX"), ("IZ", "ZZ"), ("ZI", "ZI"), ("IX", "IX")])
def test_cnot_propagation_matrix(before, after):
    u = _unitary_of([("CNOT", (0, 1))], 2)
    p, q = PauliOperator.from_label(before).to_matrix(), PauliOperator.from_label(after).to_matrix()
    np.testing.assert_allclose(u @ p @ u.conj().T, q, atol=1e-14)


def test_cnot_propagation_tableau():
    t = StabilizerTableau(2)
    t.h(0)  # stabilisers X1, Z2
    t.cnot(0, 1)
    labels = {p.label() for p in t.stabilizers()}
    assert labels == {"+XX", "+ZZ"}


def test_t_rejected_on_tableau():
    with pytest.raises(UnsupportedGateError):
        apply_gate(StabilizerTableau(1), ("T", (0,)))


def test_t_on_dense():
    d = DenseState.from_bitstring("1")
    apply_gate(d, ("T", (0,)))
    assert d.psi[1] == pytest.approx(np.exp(1j * np.pi / 4))


@pytest.mark.parametrize("state", [StabilizerTableau(2), DenseState(2)])
def test_out_of_range(state):
    with pytest.raises(DimensionError):
        apply_gate(state, ("H", (2,)))


def test_measure_locations_are_not_gates():
    with pytest.raises(ConfigurationError):
        apply_gate(DenseState(1), ("MEASURE_Z", (0,)))


# -- paulis and measurement -------------------------------------------------


@pytest.mark.parametrize("letter,bit", [("X", 1), ("Z", 0), ("Y", 1)])
def test_pauli_then_measure(letter, bit):
    for s in _both(1):
        apply_pauli(s, PauliOperator.from_label(letter))
        assert measure(s, 0, "Z", np.random.default_rng(0))[0] == bit


def test_y_equals_ixz_on_dense():
    d = DenseState(1)
    apply_pauli(d, PauliOperator.from_label("Y"))
    ref = DenseState(1)
    apply_gate(ref, ("Z", (0,)))
    apply_gate(ref, ("X", (0,)))
    np.testing.assert_allclose(d.psi, 1j * ref.psi, atol=1e-15)


def test_pauli_size_mismatch():
    with pytest.raises(DimensionError):
        apply_pauli(DenseState(2), PauliOperator.from_label("X"))


def test_tableau_pauli_changes_only_signs():
    t = StabilizerTableau(3)
    t.h(0)
    t.cnot(0, 2)
    x, z = t.x.copy(), t.z.copy()
    apply_pauli(t, PauliOperator.from_label("XYZ"))
    assert (t.x == x).all() and (t.z == z).all()


@pytest.mark.parametrize("make", [StabilizerTableau, DenseState])
def test_measure_x_on_zero_is_fair(make):
    rng = np.random.default_rng(4)
    ones = sum(measure(make(1), 0, "X", rng)[0] for _ in range(10_000))
    assert stats.chisquare([ones, 10_000 - ones]).pvalue > 1e-3


@pytest.mark.parametrize("make", [StabilizerTableau, DenseState])
def test_repeat_measurement_idempotent(make):
    rng = np.random.default_rng(8)
    for trial in range(2000 if make is StabilizerTableau else 10_000):
        n = 3
        s = make(n)
        for k, q in random_ops(rng, n, 8, p_meas=0):
            apply_gate(s, (k, q))
        q = int(rng.integers(n))
        a, _ = measure(s, q, "Z", rng)
        b, _ = measure(s, q, "Z", rng)
        assert a == b


def test_measure_z_on_zero_is_deterministic():
    for s in _both(1):
        assert measure(s, 0, "Z", None)[0] == 0


# -- fidelity --------------------------------------------------------------


def test_dense_fidelity_examples():
    s = DenseState(1)
    assert dense_fidelity(s, s) == pytest.approx(1)
    assert dense_fidelity(DenseState.from_bitstring("0"), DenseState.from_bitstring("1")) == pytest.approx(0)
    h = DenseState(1)
    apply_gate(h, ("H", (0,)))
    assert dense_fidelity(DenseState(1), h) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        dense_fidelity(DenseState(1), DenseState(2))


def test_norm_preserved_depth_100():
    rng = np.random.default_rng(3)
    d = DenseState(5)
    for k, q in random_ops(rng, 5, 100, p_meas=0):
        apply_gate(d, (k, q))
        if rng.random() < 0.2:
            apply_gate(d, ("T", (q[0],)))
    assert abs(d.norm() - 1) < 1e-10


# -- backend equivalence ----------------------------------------------------


def test_tableau_matches_dense_exact_distributions():
    """100 random Clifford+measurement circuits: tableau and dense outcome laws agree exactly."""
    rng = np.random.default_rng(2024)
    for c in range(100):
        n = int(rng.integers(1, 7))
        ops = random_ops(rng, n, int(rng.integers(5, 21)))
        ops.append(("M", (int(rng.integers(n)),)))
        t_dist = exact_distribution(StabilizerTableau(n), ops)
        d_dist = exact_distribution(DenseState(n), ops)
        keys = set(t_dist) | set(d_dist)
        for k in keys:
            assert t_dist.get(k, 0) == pytest.approx(d_dist.get(k, 0), abs=1e-9), (c, ops)


def test_tableau_invariants_after_every_gate():
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        t = StabilizerTableau(n)
        for k, q in random_ops(rng, n, 20):
            if k == "M":
                t.measure_z(q[0], rng)
            else:
                apply_gate(t, (k, q))
            t.check_invariants()


def _sample(circ, backend, shots, seed):
    counts = {}
    for s in range(shots):
        key = run_circuit(circ, backend, seed=[seed, s]).outcomes
        counts[key] = counts.get(key, 0) + 1
    return counts


@pytest.mark.slow
def test_sampled_distributions_agree_chi2():
    circ = Circuit.from_text("H 1; H 2\nCNOT 1 3\nS 3; H 2\nH 3\nMEASURE_Z 1; MEASURE_Z 2; MEASURE_Z 3")
    a = _sample(circ, "tableau", 10_000, 1)
    b = _sample(circ, "dense", 10_000, 2)
    keys = sorted(set(a) | set(b))
    table = np.array([[a.get(k, 0) for k in keys], [b.get(k, 0) for k in keys]])
    assert stats.chi2_contingency(table).pvalue > 1e-3


# -- run_circuit ------------------------------------------------------------


def test_empty_circuit():
    assert run_circuit(Circuit(2), "tableau", seed=0) == ShotRecord()


def test_run_circuit_deterministic():
    circ = Circuit.from_text("H 1\nCNOT 1 2\nMEASURE_Z 1; MEASURE_Z 2")
    noise = NoiseModel.depolarizing(0.2, p_meas=0.1)
    for backend in ("tableau", "dense"):
        recs = [run_circuit(circ, backend, noise, seed=77) for _ in range(2)]
        assert recs[0] == recs[1]
        assert len(recs[0].outcomes) == 2


def test_prep_flip_rate():
    circ = Circuit.from_text("PREP_ZERO 1\nMEASURE_Z 1")
    noise = NoiseModel.depolarizing(0.3)
    n = 100_000
    ones = sum(run_circuit(circ, "tableau", noise, seed=[5, s]).outcomes[0] for s in range(n // 10))
    # the vectorised executor gives the same channel much faster
    from ftlab.executors import FrameExecutor

    ex = FrameExecutor(n, noise, np.random.default_rng(5))
    q = ex.alloc(1)
    bits = ex.measure(q)[0]
    sigma = np.sqrt(0.2 * 0.8 / n)
    assert abs(bits.mean() - 0.2) < 3 * sigma
    assert abs(ones / (n // 10) - 0.2) < 3 * np.sqrt(0.2 * 0.8 / (n // 10))


def test_error_log_names_locations():
    circ = Circuit.from_text("H 1\nCNOT 1 2\nMEASURE_Z 2")
    rec = run_circuit(circ, "dense", NoiseModel.depolarizing(1.0), seed=3)
    assert len(rec.errors) == 2
    assert rec.errors[0][0] == Location("H", (0,))
    assert rec.errors[1][0] == Location("CNOT", (0, 1))


def test_coherent_noise_needs_dense():
    circ = Circuit.from_text("H 1")
    with pytest.raises(ConfigurationError):
        run_circuit(circ, "tableau", NoiseModel("coherent", theta=0.3), seed=0)
    with pytest.raises(ConfigurationError):
        run_circuit(circ, "gpu", seed=0)


# -- circuit text -----------------------------------------------------------


def test_text_round_trip():
    text = "CNOT 1 8; H 3\nTICK\nMEASURE_X 8\n"
    circ = Circuit.from_text(text)
    assert circ.n_qubits == 8
    assert circ.steps[0][0] == Location("CNOT", (0, 7))
    assert circ.to_text() == text
    assert Circuit.from_text(circ.to_text()).digest() == circ.digest()


@pytest.mark.parametrize("text", ["H 1; H 1", "CNOT 2 2", "FOO 1", "H 0"])
def test_bad_circuits(text):
    with pytest.raises(CircuitError):
        Circuit.from_text(text)


def test_idle_locations():
    circ = Circuit.from_text("H 1; H 2\nCNOT 1 2\nH 1\nMEASURE_Z 1; MEASURE_Z 2")
    idle = [(t, loc.qubits) for t, loc in circ.locations(include_idle=True) if loc.kind == "IDLE"]
    assert idle == [(2, (1,))]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_circuit_norm_and_invariants(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    t, d = StabilizerTableau(n), DenseState(n)
    for k, q in random_ops(rng, n, 15, p_meas=0):
        apply_gate(t, (k, q))
        apply_gate(d, (k, q))
    t.check_invariants()
    assert abs(d.norm() - 1) < 1e-10
    # every stabiliser of the tableau fixes the dense state
    for p in t.stabilizers():
        np.testing.assert_allclose(p.to_matrix() @ d.psi, d.psi, atol=1e-10)
