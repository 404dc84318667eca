import json

import numpy as np
import pytest

from ftlab import gadgets, steane
from ftlab.dense import dense_fidelity
from ftlab.errors import ConfigurationError, PreconditionError
from ftlab.executors import DenseExecutor, RecordingExecutor, TableauExecutor
from ftlab.gadgets import (
    GadgetReport,
    PreparationOutcome,
    SyndromeRecord,
    ec_round,
    logical_t_gadget,
    measure_logical_nondemolition,
    prepare_magic_ideal,
    prepare_plus_verified,
    prepare_verified,
    prepare_zero_verified,
)
from ftlab.noise import NoiseModel
from ftlab.pauli import PauliOperator
from ftlab.steane import encode_ideal
from ftlab.verify import double_fault_demo, preparation_fault_scan

SQ2 = 1 / np.sqrt(2)
XL = PauliOperator.from_label("X" * 7)
MAGIC = (SQ2, np.exp(1j * np.pi / 4) * SQ2)
INPUTS = {"0": 0, "1": 1, "+": "+", "magic": MAGIC}


def block_state(ex, block):
    return ex.qubit_state(np.asarray(block).ravel())


def random_logical(rng):
    a = rng.normal(size=2) + 1j * rng.normal(size=2)
    return a / np.linalg.norm(a)


# -- verified preparation -----------------------------------------------------


def test_zero_noise_preparation():
    out = prepare_zero_verified(rng=np.random.default_rng(0))
    assert out.status == "accepted" and out.attempts == 1
    assert dense_fidelity(block_state(out.executor, out.block.qubits), encode_ideal(0)) == pytest.approx(1, abs=1e-10)


def test_logical_flip_on_one_copy_is_rejected():
    out = prepare_zero_verified(rng=np.random.default_rng(0), max_retries=3, inject=(XL, None))
    assert out.status == "rejected" and out.attempts == 3 and out.block is None


def test_logical_flip_on_checker_is_rejected():
    out = prepare_zero_verified(rng=np.random.default_rng(0), max_retries=1, inject=(None, XL))
    assert out.status == "rejected"


def test_logical_flip_on_both_copies_fools_the_check():
    status, w1 = double_fault_demo()
    assert status == "accepted"
    assert w1 == pytest.approx(1, abs=1e-10)


def test_single_fault_scan_is_sound():
    scan = preparation_fault_scan()
    assert scan.accepted_flipped == 0
    assert scan.accepted + scan.rejected == scan.faults
    assert scan.rejected > 0


def test_max_retries_validated():
    with pytest.raises(PreconditionError):
        prepare_zero_verified(max_retries=0)


def test_plus_preparation():
    out = prepare_plus_verified(rng=np.random.default_rng(1))
    st = block_state(out.executor, out.block.qubits)
    assert dense_fidelity(st, encode_ideal("+")) == pytest.approx(1, abs=1e-10)
    for seed in range(5):
        bit, _, _ = steane.measure_logical_destructive(st.copy(), range(7), np.random.default_rng(seed), basis="X")
        assert bit == 0


@pytest.mark.parametrize("q", range(7))
def test_z_error_after_plus_preparation_is_corrected(q):
    ex = DenseExecutor(rng=np.random.default_rng(q))
    blk, _, ok = prepare_verified(ex, 1, plus=True)
    assert ok.all()
    ex.inject(PauliOperator.single(7, q, "Z"), blk[0])
    rep = ec_round(ex, blk)
    assert rep.record().z_correction == q + 1
    assert dense_fidelity(block_state(ex, blk), encode_ideal("+")) == pytest.approx(1, abs=1e-10)


def test_outcome_invariants():
    with pytest.raises(ValueError):
        PreparationOutcome("rejected", 1, steane.SteaneBlock(0, tuple(range(7))))
    with pytest.raises(ValueError):
        PreparationOutcome("accepted", 0)
    with pytest.raises(ValueError):
        PreparationOutcome("maybe", 1)


# -- non-demolition measurement ----------------------------------------------------


def test_nondemolition_on_one():
    ex = DenseExecutor(rng=np.random.default_rng(0))
    d = ex.alloc_encoded([1])
    bits, rep = measure_logical_nondemolition(ex, d)
    assert bits[0, 0] == 1 and rep.outcome[0, 0] == 1
    assert dense_fidelity(block_state(ex, d), encode_ideal(1)) == pytest.approx(1, abs=1e-10)


def test_nondemolition_on_plus_collapses():
    seen = {0: 0, 1: 0}
    for seed in range(200):
        ex = DenseExecutor(rng=np.random.default_rng(seed), exact_ancillas=True)
        d = ex.alloc_encoded(["+"])
        bits, _ = measure_logical_nondemolition(ex, d)
        b = int(bits[0, 0])
        seen[b] += 1
        assert dense_fidelity(block_state(ex, d), encode_ideal(b)) == pytest.approx(1, abs=1e-10)
    assert abs(seen[1] - 100) < 3 * np.sqrt(50)


@pytest.mark.parametrize("q", range(7))
@pytest.mark.parametrize("value", [0, 1])
def test_nondemolition_absorbs_one_x_error(q, value):
    ex = DenseExecutor(rng=np.random.default_rng(q), exact_ancillas=True)
    d = ex.alloc_encoded([value])
    ex.inject(PauliOperator.single(7, q, "X"), d[0])
    bits, _ = measure_logical_nondemolition(ex, d)
    assert bits[0, 0] == value


# -- error correction ----------------------------------------------------------------


def _ec_on(value, pauli=None, seed=0):
    ex = DenseExecutor(rng=np.random.default_rng(seed), exact_ancillas=True)
    d = ex.alloc_state(encode_ideal(value))[None, :]
    if pauli is not None:
        ex.inject(pauli, d[0])
    rep = ec_round(ex, d)
    return rep, block_state(ex, d)


def test_x5_on_zero():
    rep, st = _ec_on(0, PauliOperator.single(7, 4, "X"))
    assert rep.record().x_correction == 5 and rep.record().z_correction is None
    assert dense_fidelity(st, encode_ideal(0)) == pytest.approx(1, abs=1e-10)


def test_no_error_no_syndrome():
    rep, st = _ec_on("+")
    rec = rep.record()
    assert rec.x_syndrome == (0, 0, 0) and rec.z_syndrome == (0, 0, 0)
    assert dense_fidelity(st, encode_ideal("+")) == pytest.approx(1, abs=1e-10)


def test_y2_on_plus_triggers_both():
    rep, st = _ec_on("+", PauliOperator.single(7, 1, "Y"))
    rec = rep.record()
    assert rec.x_correction == 2 and rec.z_correction == 2
    assert dense_fidelity(st, encode_ideal("+")) == pytest.approx(1, abs=1e-10)


@pytest.mark.parametrize("name", INPUTS)
@pytest.mark.parametrize("q,letter", [(q, c) for q in range(7) for c in "XYZ"])
def test_every_single_pauli_corrected(name, q, letter):
    rep, st = _ec_on(INPUTS[name], PauliOperator.single(7, q, letter))
    assert dense_fidelity(st, encode_ideal(INPUTS[name])) == pytest.approx(1, abs=1e-10)
    rec = rep.record()
    assert rec.x_correction == (q + 1 if letter in "XY" else None)
    assert rec.z_correction == (q + 1 if letter in "ZY" else None)


def test_ec_does_not_disturb_random_states():
    rng = np.random.default_rng(5)
    for i in range(20):
        a = random_logical(rng)
        rep, st = _ec_on(a, seed=i)
        assert dense_fidelity(st, encode_ideal(a)) == pytest.approx(1, abs=1e-10)
        assert int(rep.x_syndrome[0, 0]) == 0 and int(rep.z_syndrome[0, 0]) == 0


def test_real_ancillas_match_exact_ones():
    # the two-copy check with noiseless encoders gives exactly the cached ancilla
    ex = DenseExecutor(rng=np.random.default_rng(2))
    d = ex.alloc_state(encode_ideal(MAGIC))[None, :]
    ex.inject(PauliOperator.single(7, 3, "Y"), d[0])
    ec_round(ex, d)
    assert dense_fidelity(block_state(ex, d), encode_ideal(MAGIC)) == pytest.approx(1, abs=1e-10)


def test_repeat_syndrome_majority():
    ex = DenseExecutor(rng=np.random.default_rng(3), exact_ancillas=True)
    d = ex.alloc_encoded([0])
    ex.inject(PauliOperator.single(7, 6, "X"), d[0])
    rep = ec_round(ex, d, repeat_syndrome=True)
    assert rep.record().x_correction == 7 and rep.ancilla_blocks == 12


def test_report_json_lines():
    rep, _ = _ec_on(0, PauliOperator.single(7, 2, "Y"))
    row = json.loads(rep.to_json_lines())
    assert row["gadget"] == "ec_round"
    assert row["x_syndrome"] == "".join(map(str, steane.HAMMING.parity_check[:, 2]))
    assert row["x_correction"] == 3 and row["z_correction"] == 3


def test_syndrome_record_invariant():
    SyndromeRecord((0, 0, 1), (0, 0, 0), 7, None)
    with pytest.raises(ValueError):
        SyndromeRecord((0, 0, 1), (0, 0, 0), None, None)
    with pytest.raises(ValueError):
        SyndromeRecord((0, 0, 0), (0, 0, 0), None, 3)


def test_gadget_circuits_are_transversal():
    rec = RecordingExecutor()
    d = rec.alloc_encoded([0, 0])
    ec_round(rec, d)
    measure_logical_nondemolition(rec, d[:1])
    steane.apply_logical(steane.LogicalGate("CNOT", (0, 1)), rec, d)
    circ = rec.circuit()
    assert circ.count_locations() > 0
    assert steane.check_transversal(circ, rec.blocks) == []


def test_adversarial_noise_on_tableau_runs():
    noise = NoiseModel("adversarial", 0.01, p_meas=0.01)
    ex = TableauExecutor(noise, np.random.default_rng(1))
    d = ex.alloc_encoded([0])
    ec_round(ex, d)
    bits, _, _ = steane.measure_logical_destructive(ex, d)
    assert bits.shape == (1, 1)


# -- T gadget --------------------------------------------------------------------------


def _t_gadget(value, seed):
    ex = DenseExecutor(rng=np.random.default_rng(seed), exact_ancillas=True)
    d = ex.alloc_state(encode_ideal(value))
    m = ex.alloc_state(prepare_magic_ideal())
    bits, rep = logical_t_gadget(ex, d, m)
    return int(bits[0, 0]), block_state(ex, d), rep


def _both_outcomes(value):
    out = {}
    seed = 0
    while len(out) < 2:
        b, st, rep = _t_gadget(value, seed)
        out.setdefault(b, (st, rep))
        seed += 1
    return out


def test_t_fixes_zero():
    for b, (st, _) in _both_outcomes(0).items():
        assert dense_fidelity(st, encode_ideal(0)) == pytest.approx(1, abs=1e-10)


def test_t_on_plus():
    for b, (st, rep) in _both_outcomes("+").items():
        assert dense_fidelity(st, encode_ideal(MAGIC)) == pytest.approx(1, abs=1e-10)
        assert len(rep.corrections) == b


def test_t_random_inputs_both_outcomes():
    rng = np.random.default_rng(8)
    tmat = np.diag([1, np.exp(1j * np.pi / 4)])
    for _ in range(20):
        a = random_logical(rng)
        for st, _ in _both_outcomes(a).values():
            assert dense_fidelity(st, encode_ideal(tmat @ a)) >= 1 - 1e-9


def test_t_twice_is_s():
    rng = np.random.default_rng(4)
    for i in range(5):
        a = random_logical(rng)
        ex = DenseExecutor(rng=np.random.default_rng(i), exact_ancillas=True)
        d = ex.alloc_state(encode_ideal(a))
        for _ in range(2):
            m = ex.alloc_state(prepare_magic_ideal())
            logical_t_gadget(ex, d, m)
        assert dense_fidelity(block_state(ex, d), encode_ideal(np.diag([1, 1j]) @ a)) == pytest.approx(1, abs=1e-10)


def test_t_gadget_needs_dense():
    ex = TableauExecutor(rng=np.random.default_rng(0))
    d = ex.alloc_encoded([0, 0])
    with pytest.raises(ConfigurationError):
        logical_t_gadget(ex, d[0], d[1])


def test_magic_state_properties():
    m = prepare_magic_ideal()
    assert steane.is_codeword_state(m)
    assert dense_fidelity(m, encode_ideal("+")) == pytest.approx(np.cos(np.pi / 8) ** 2, abs=1e-9)
    rng = np.random.default_rng(6)
    n = 10_000
    ones = sum(steane.measure_logical_destructive(m.copy(), range(7), rng)[0] for _ in range(n))
    assert abs(ones / n - 0.5) < 3 * np.sqrt(0.25 / n)


def test_report_defaults():
    rep = GadgetReport("t_gadget", outcome=np.array([[1]]))
    assert json.loads(rep.to_json_lines()) == {"gadget": "t_gadget", "block": 0, "outcome": 1}
    assert gadgets.DEFAULT_RETRIES >= 1
