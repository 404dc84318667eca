"""One test per acceptance criterion; each prints a single PASS/FAIL line.

The thresholds here are the contract: they are not tuned to the results.
"""

import itertools
import math
import time

import numpy as np
import pytest

from ftlab import steane
from ftlab.dense import DenseState, dense_fidelity, rz
from ftlab.executors import BranchingDenseExecutor, DenseExecutor, RecordingExecutor
from ftlab.gadgets import ec_round, logical_t_gadget, prepare_magic_ideal
from ftlab.noise import NoiseModel
from ftlab.pauli import PauliOperator
from ftlab.steane import LogicalGate, apply_logical, encode_ideal
from ftlab.threshold import (
    MemoryExperiment,
    coherent_collapse,
    concat_project,
    fit_threshold,
    levels_for_target,
    memory_sweep,
    run_level1_concat,
    run_memory,
)
from ftlab.verify import double_fault_demo, preparation_fault_scan

ZERO_WORDS = ["0000000", "1111000", "1100110", "1010101", "0011110", "0101101", "0110011", "1001011"]
ONE_WORDS = ["1111111", "0000111", "0011001", "0101010", "1100001", "1010010", "1001100", "0110100"]
SQ2 = 1 / np.sqrt(2)
MATRICES = {
    "H": np.array([[1, 1], [1, -1]]) * SQ2,
    "S": np.diag([1, 1j]),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
}
CNOT4 = np.eye(4)[[0, 1, 3, 2]]
T2 = np.diag([1, np.exp(1j * np.pi / 4)])
SWEEP_P = (3e-4, 1e-3, 3e-3)


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def random_amplitudes(rng, k):
    v = rng.normal(size=k) + 1j * rng.normal(size=k)
    return v / np.linalg.norm(v)


def encode_pair(c):
    z, o = encode_ideal(0).psi, encode_ideal(1).psi
    return DenseState(14, sum(ci * np.kron(a, b) for ci, (a, b) in zip(c, itertools.product((z, o), repeat=2))))


@pytest.fixture(scope="module")
def sweep():
    """Single-round memory sweep shared by the quadratic-law and concatenation criteria."""
    t0 = time.time()
    exp = MemoryExperiment(noise=NoiseModel.circuit_level(1e-3), shots=131_072, seed=1000)
    res = memory_sweep(exp, SWEEP_P, min_failures=10, max_shots=2**24)
    fit = fit_threshold(list(zip(SWEEP_P, res)))
    return res, fit, time.time() - t0


def test_criterion_1_codewords(capsys):
    t0 = time.time()
    dev = 0.0
    ok = True
    for state, words in ((encode_ideal(0), ZERO_WORDS), (encode_ideal(1), ONE_WORDS)):
        support = {format(i, "07b") for i in np.flatnonzero(np.abs(state.psi) > 1e-12)}
        ok &= support == set(words)
        amps = state.psi[[int(w, 2) for w in words]]
        dev = max(dev, float(np.max(np.abs(amps - amps[0]))), abs(float(np.abs(amps[0])) - 1 / math.sqrt(8)))
    dt = time.time() - t0
    ok = ok and dev <= 1e-12 and dt < 1
    verdict(capsys, 1, ok, f"8+8 supports match, amplitude deviation {dev:.1e}, {dt:.3f} s")


def test_criterion_2_exhaustive_correction(capsys):
    t0 = time.time()
    inputs = {"0": 0, "1": 1, "+": "+", "+i": (SQ2, 1j * SQ2)}
    worst = 1.0
    cases = 0
    for value in inputs.values():
        target = encode_ideal(value)
        for q, letter in itertools.product(range(7), "XYZ"):
            ex = DenseExecutor(rng=np.random.default_rng(cases), exact_ancillas=True)
            d = ex.alloc_state(target)[None, :]
            ex.inject(PauliOperator.single(7, q, letter), d[0])
            ec_round(ex, d)
            worst = min(worst, dense_fidelity(ex.qubit_state(d[0]), target))
            cases += 1
    dt = time.time() - t0
    ok = cases == 84 and abs(1 - worst) <= 1e-10 and dt < 10
    verdict(capsys, 2, ok, f"{cases} cases, worst fidelity 1 - {1 - worst:.1e}, {dt:.1f} s")


def test_criterion_3_transversal_gates(capsys):
    t0 = time.time()
    rng = np.random.default_rng(3)
    b0, b1 = np.arange(7), np.arange(7, 14)
    worst = {}
    for kind, u in MATRICES.items():
        f = 1.0
        for _ in range(30):
            a = random_amplitudes(rng, 2)
            st = apply_logical(LogicalGate(kind, (0,)), encode_ideal(a), [b0])
            f = min(f, dense_fidelity(st, encode_ideal(u @ a)))
        worst[kind] = f
    f = 1.0
    for _ in range(30):
        c = random_amplitudes(rng, 4)
        st = apply_logical(LogicalGate("CNOT", (0, 1)), encode_pair(c), [b0, b1])
        f = min(f, dense_fidelity(st, encode_pair(CNOT4 @ c)))
    worst["CNOT"] = f

    rec = RecordingExecutor()
    d = rec.alloc_encoded([0, 0])
    for kind in MATRICES:
        apply_logical(LogicalGate(kind, (0,)), rec, d)
    apply_logical(LogicalGate("CNOT", (0, 1)), rec, d)
    off = steane.check_transversal(rec.circuit(), rec.blocks)
    dt = time.time() - t0
    low = min(worst.values())
    ok = low >= 1 - 1e-9 and not off and rec.circuit().count_locations() > 0 and dt < 30
    verdict(capsys, 3, ok, f"worst fidelity over H,S,X,Y,Z,CNOT 1 - {1 - low:.1e}, "
                           f"{len(off)} non-transversal locations, {dt:.1f} s")


def _t_gadget(a, seed):
    ex = DenseExecutor(rng=np.random.default_rng(seed), exact_ancillas=True)
    d = ex.alloc_state(encode_ideal(a))
    m = ex.alloc_state(prepare_magic_ideal())
    bits, _ = logical_t_gadget(ex, d, m)
    return int(bits[0, 0]), ex.qubit_state(d)


def test_criterion_4_t_gadget(capsys):
    t0 = time.time()
    rng = np.random.default_rng(4)
    worst = 1.0
    seed = 0
    for _ in range(20):
        a = random_amplitudes(rng, 2)
        seen = {}
        while len(seen) < 2:
            b, st = _t_gadget(a, seed)
            seen.setdefault(b, st)
            seed += 1
        worst = min(worst, *(dense_fidelity(st, encode_ideal(T2 @ a)) for st in seen.values()))
    worst_s = 1.0
    for i in range(20):
        a = random_amplitudes(rng, 2)
        ex = DenseExecutor(rng=np.random.default_rng(100 + i), exact_ancillas=True)
        d = ex.alloc_state(encode_ideal(a))
        for _ in range(2):
            logical_t_gadget(ex, d, ex.alloc_state(prepare_magic_ideal()))
        worst_s = min(worst_s, dense_fidelity(ex.qubit_state(d), encode_ideal(MATRICES["S"] @ a)))
    dt = time.time() - t0
    ok = worst >= 1 - 1e-9 and worst_s >= 1 - 1e-9 and dt < 30
    verdict(capsys, 4, ok, f"T: worst 1 - {1 - worst:.1e} over both outcomes, "
                           f"T^2 = S: worst 1 - {1 - worst_s:.1e}, {dt:.1f} s")


def test_criterion_5_quadratic_law(sweep, capsys):
    res, fit, dt = sweep
    enough = all(r.shots >= 100_000 for r in res) and all(r.failures >= 10 for r in res)
    lo, hi = fit.p_T_ci
    ok = enough and 1.7 <= fit.slope <= 2.3 and lo < fit.p_T < hi and fit.C_ci[0] < fit.C < fit.C_ci[1]
    pts = ", ".join(f"p={r.p:g}: {r.failures}/{r.shots}" for r in res)
    verdict(capsys, 5, ok, f"slope {fit.slope:.3f} (CI {fit.slope_ci[0]:.2f}-{fit.slope_ci[1]:.2f}), "
                           f"C {fit.C:.1f} (CI {fit.C_ci[0]:.1f}-{fit.C_ci[1]:.1f}), "
                           f"p_T {fit.p_T:.3g} (CI {lo:.3g}-{hi:.3g}); {pts}; {dt:.0f} s")


def _level_compare(p, shots, seed):
    exp = MemoryExperiment(noise=NoiseModel.circuit_level(p), shots=shots, seed=seed)
    flat = run_memory(exp)
    conc = run_level1_concat(exp.replace(seed=seed + 1))
    z = (flat.p_logical - conc.p_logical) / math.hypot(flat.sigma, conc.sigma)
    return flat, conc, z


def test_criterion_6_concatenation_gain_and_loss(sweep, capsys):
    _, fit, _ = sweep
    t0 = time.time()
    p_low, p_high = fit.p_T / 5, 3 * fit.p_T
    f_lo, c_lo, z_lo = _level_compare(p_low, 2**22, 600)
    f_hi, c_hi, z_hi = _level_compare(p_high, 2**18, 700)
    dt = time.time() - t0
    gain, loss = z_lo > 3, z_hi < -3
    detail = (f"p_T/5 = {p_low:.3g}: one block {f_lo.p_logical:.3g}, 49 qubits {c_lo.p_logical:.3g}, "
              f"z = {z_lo:+.1f} ({'gain' if gain else 'no gain'}); "
              f"3 p_T = {p_high:.3g}: one block {f_hi.p_logical:.3g}, 49 qubits {c_hi.p_logical:.3g}, "
              f"z = {z_hi:+.1f} ({'loss' if loss else 'no loss'}); {dt:.0f} s")
    verdict(capsys, 6, gain and loss and dt < 3600, detail)


def test_criterion_7_concatenation_formula(capsys):
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        p_T = 10 ** rng.uniform(-4, -1)
        p = p_T * 10 ** rng.uniform(-3, 0.5)
        k = int(rng.integers(0, 7))
        pr = concat_project(p, p_T, k)
        # independent iteration of p -> C p^2 with C = 1/p_T
        it = p
        for _ in range(k):
            it = (1 / p_T) * it * it
        if pr.p_k > 0 and it > 0:
            worst = max(worst, abs(pr.p_k - it) / pr.p_k)
    eps = [10.0**-e for e in range(6, 25)]
    double_log = True
    for p, p_T in ((1e-3, 1e-2), (2e-3, 1e-2), (1e-4, 3e-3)):
        ks = {e: levels_for_target(p, p_T, e)[0] for e in eps}
        double_log &= all(ks[a] <= ks[b] for a, b in zip(eps, eps[1:]))
        for e in eps:
            # closed form k = ceil(log2(log(p_T/eps) / log(p_T/p))), away from exact boundaries
            x = math.log2(math.log(p_T / e) / math.log(p_T / p))
            if abs(x - round(x)) > 1e-9:
                double_log &= ks[e] == max(0, math.ceil(x))
            # squaring eps/p_T doubles log(p_T/eps), which costs at most one more level
            e2 = p_T * (e / p_T) ** 2
            double_log &= levels_for_target(p, p_T, e2)[0] <= ks[e] + 1
    dt = time.time() - t0
    ok = worst <= 1e-12 and double_log and dt < 1
    verdict(capsys, 7, ok, f"worst relative error {worst:.1e} over 1000 sets, double-log property "
                           f"{'holds' if double_log else 'violated'} for eps 1e-6..1e-24, {dt:.3f} s")


def test_criterion_8_coherent_collapse(capsys):
    t0 = time.time()
    zero = encode_ideal(0)
    z_flipped = [zero]
    for q in range(7):
        st = zero.copy()
        st.apply_pauli(PauliOperator.single(7, q, "Z"))
        z_flipped.append(st)
    parts, ok = [], True
    for i, theta in enumerate((0.2, 0.6, 1.0)):
        r = coherent_collapse(theta, shots=100_000, seed=80 + i)
        # the post-measurement data itself, before any correction
        ex = BranchingDenseExecutor(2000, rng=np.random.default_rng(90 + i))
        d = ex.alloc_encoded([0])
        ex.apply_unitary(rz(theta), d[0, 0])
        ec_round(ex, d, apply_corrections=False)
        collapse = min(max(dense_fidelity(st, c) for c in z_flipped) for st, _ in ex.branch_states(d[0]))
        ok &= abs(r.z_score) <= 3 and abs(1 - collapse) <= 1e-9 and abs(1 - r.corrected_fidelity) <= 1e-9
        parts.append(f"theta {theta}: rate {r.rate:.4f} vs {r.expected:.4f} (z {r.z_score:+.2f}), "
                     f"collapsed fidelity 1 - {1 - collapse:.0e}")
    dt = time.time() - t0
    verdict(capsys, 8, ok and dt < 300, "; ".join(parts) + f"; {dt:.1f} s")


def test_criterion_9_preparation_soundness(capsys):
    t0 = time.time()
    scan = preparation_fault_scan()
    status, w1 = double_fault_demo()
    dt = time.time() - t0
    fooled = status == "accepted" and abs(w1 - 1) <= 1e-10
    ok = scan.faults > 0 and scan.accepted_flipped == 0 and scan.rejected > 0 and fooled and dt < 60
    verdict(capsys, 9, ok, f"{scan.faults} single faults: {scan.accepted} accepted, {scan.rejected} rejected, "
                           f"{scan.accepted_flipped} accepted with a flipped block; expected double-fault case "
                           f"(logical X on both copies) {status} with |1_L> weight {w1:.3f}; {dt:.1f} s")


def test_criterion_10_worker_independence(capsys):
    t0 = time.time()
    counts = {}
    for code in ("steane", "concat"):
        exp = MemoryExperiment(noise=NoiseModel.circuit_level(3e-3), code=code, seed=10,
                               shots=200_000 if code == "steane" else 40_000, chunk_size=16_384)
        counts[code] = [(r.failures, r.aborts) for r in (run_memory(exp, workers=w) for w in (1, 4))]
    dt = time.time() - t0
    ok = all(a == b for a, b in counts.values()) and dt < 60
    verdict(capsys, 10, ok, ", ".join(f"{k}: workers 1 {v[0]} vs 4 {v[1]}" for k, v in counts.items())
            + f"; {dt:.1f} s")
