"""Deterministic self-checks behind ``ftlab verify``.

Each suite returns a list of failure messages (empty = pass).  Oracles are
computed independently of the code under test where possible: codewords from
the row space of the check matrix, logical gates from 2x2 / 4x4 matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import steane
from .circuit import Location
from .dense import DenseState, dense_fidelity
from .executors import DenseExecutor, FrameExecutor, RecordingExecutor
from .gadgets import ec_round, prepare_verified, prepare_zero_verified
from .noise import ScheduledFaults
from .pauli import HAMMING, PauliOperator, codeword_parity, hamming_correct, hamming_syndrome
from .tableau import StabilizerTableau
from .threshold import concat_project, levels_for_target

_SQ2 = 1 / np.sqrt(2)
LOGICAL_MATRICES = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "S": np.diag([1, 1j]),
}
CNOT4 = np.eye(4, dtype=complex)[[0, 1, 3, 2]]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def _words(n=7):
    return ["".join(b) for b in itertools.product("01", repeat=n)]


def _row_space() -> set[str]:
    rows = [np.array([int(c) for c in r]) for r in HAMMING.CHECK_ROWS]
    out = set()
    for coeffs in itertools.product((0, 1), repeat=len(rows)):
        v = sum(c * r for c, r in zip(coeffs, rows)) % 2 if any(coeffs) else np.zeros(7, int)
        out.add("".join(str(int(b)) for b in v))
    return out


def suite_hamming() -> list[str]:
    """All 128 words: syndrome, correction and parity agree with brute force."""
    bad = []
    rows = [np.array([int(c) for c in r]) for r in HAMMING.CHECK_ROWS]
    code = {w for w in _words() if all(np.dot(r, [int(c) for c in w]) % 2 == 0 for r in rows)}
    if len(code) != 16:
        bad.append(f"Hamming code has {len(code)} words, expected 16")
    for w in _words():
        arr = np.array([int(c) for c in w])
        syn = tuple(int(np.dot(r, arr) % 2) for r in rows)
        if tuple(hamming_syndrome(w)) != syn:
            bad.append(f"syndrome of {w}")
        fixed, pos = hamming_correct(w)
        fixed_s = "".join(str(int(b)) for b in fixed)
        near = [c for c in code if sum(a != b for a, b in zip(c, w)) <= 1]
        if len(near) != 1 or fixed_s != near[0]:
            bad.append(f"correction of {w}")
            continue
        flip = [i + 1 for i in range(7) if fixed_s[i] != w[i]]
        if (pos or None) != (flip[0] if flip else None):
            bad.append(f"flipped position of {w}")
        if codeword_parity(fixed) != fixed_s.count("1") % 2:
            bad.append(f"parity of {w}")
    return bad


def suite_codewords() -> list[str]:
    bad = []
    zero = _row_space()
    one = {"".join("1" if c == "0" else "0" for c in w) for w in zero}
    for value, support in ((0, zero), (1, one)):
        psi = steane.encode_ideal(value).psi
        nz = {format(i, "07b") for i in np.flatnonzero(np.abs(psi) > 1e-12)}
        if nz != support:
            bad.append(f"support of |{value}_L>")
        amps = np.array([psi[int(w, 2)] for w in support])
        if np.max(np.abs(amps - 1 / np.sqrt(8))) > 1e-12:
            bad.append(f"amplitudes of |{value}_L>")
    if set(steane.ZERO_WORDS) != zero or set(steane.ONE_WORDS) != one:
        bad.append("codeword tables")
    return bad


def suite_stabilizers() -> list[str]:
    bad = []
    g = steane.stabilizer_generators()
    checks = g["x_checks"] + g["z_checks"]
    for a, b in itertools.combinations(checks, 2):
        if not a.commutes(b):
            bad.append(f"{a} and {b} anticommute")
    for c in checks:
        if not (c.commutes(g["logical_x"]) and c.commutes(g["logical_z"])):
            bad.append(f"{c} does not commute with the logicals")
    if g["logical_x"].commutes(g["logical_z"]):
        bad.append("logical X and Z commute")
    for v in (0, 1, "+"):
        if not steane.is_codeword_state(steane.encode_ideal(v)):
            bad.append(f"encode({v}) is not stabilised")
    return bad


def _encode_pair(c: np.ndarray) -> DenseState:
    z, o = steane.encode_ideal(0).psi, steane.encode_ideal(1).psi
    basis = [np.kron(a, b) for a in (z, o) for b in (z, o)]
    return DenseState(14, sum(ci * v for ci, v in zip(c, basis)))


def _random_amplitudes(rng, k):
    v = rng.normal(size=k) + 1j * rng.normal(size=k)
    return v / np.linalg.norm(v)


def suite_transversal(n_states: int = 30, seed: int = 7) -> list[str]:
    """Transversal logical gates against their 2x2 / 4x4 matrices, and circuit structure."""
    bad = []
    rng = np.random.default_rng(seed)
    blk = [np.arange(7)]
    for kind, u in LOGICAL_MATRICES.items():
        worst = 1.0
        for _ in range(n_states):
            a = _random_amplitudes(rng, 2)
            st = steane.encode_ideal(a)
            steane.apply_logical(steane.LogicalGate(kind, (0,)), st, blk)
            worst = min(worst, dense_fidelity(st, steane.encode_ideal(u @ a)))
        if worst < 1 - 1e-9:
            bad.append(f"logical {kind}: fidelity {worst:.3g}")
    worst = 1.0
    for _ in range(n_states):
        c = _random_amplitudes(rng, 4)
        st = _encode_pair(c)
        steane.apply_logical(steane.LogicalGate("CNOT", (0, 1)), st, [np.arange(7), np.arange(7, 14)])
        worst = min(worst, dense_fidelity(st, _encode_pair(CNOT4 @ c)))
    if worst < 1 - 1e-9:
        bad.append(f"logical CNOT: fidelity {worst:.3g}")
    gates = [steane.LogicalGate(k, (0,)) for k in LOGICAL_MATRICES] + [steane.LogicalGate("CNOT", (0, 1))]
    circ = steane.logical_circuit(gates, 2)
    off = steane.check_transversal(circ, [range(7), range(7, 14)])
    if off:
        bad.append(f"non-transversal locations: {off[:3]}")
    return bad


def _input_states():
    return {"0": 0, "1": 1, "+": "+", "+i": (_SQ2, 1j * _SQ2)}


def suite_correction() -> list[str]:
    """Every weight-0/1 Pauli on every input is undone by one noiseless EC round."""
    bad = []
    paulis = [None] + [(q, c) for q in range(7) for c in "XYZ"]
    for name, value in _input_states().items():
        target = steane.encode_ideal(value)
        for err in paulis:
            ex = DenseExecutor(rng=np.random.default_rng(0), exact_ancillas=True)
            d = ex.alloc_state(target)[None, :]
            if err is not None:
                ex.inject(PauliOperator.single(7, err[0], err[1]), d[0])
            ec_round(ex, d)
            f = dense_fidelity(ex.qubit_state(d[0]), target)
            if abs(f - 1) > 1e-10:
                bad.append(f"input {name}, error {err}: fidelity {f:.3g}")
    return bad


def suite_tableau(n_circuits: int = 30, seed: int = 3) -> list[str]:
    """Random Clifford circuits: tableau invariants hold and deterministic outcomes match the dense oracle."""
    from .sim import apply_gate

    bad = []
    rng = np.random.default_rng(seed)
    kinds = ["H", "S", "S_DAG", "X", "Y", "Z", "CNOT"]
    for c in range(n_circuits):
        n = int(rng.integers(1, 6))
        t, d = StabilizerTableau(n), DenseState(n)
        for _ in range(20):
            k = kinds[rng.integers(len(kinds))] if n > 1 else kinds[rng.integers(len(kinds) - 1)]
            q = tuple(int(v) for v in rng.choice(n, 2 if k == "CNOT" else 1, replace=False))
            apply_gate(t, Location(k, q))
            apply_gate(d, Location(k, q))
        try:
            t.check_invariants()
        except AssertionError as err:
            bad.append(f"circuit {c}: {err}")
        for q in range(n):
            p1 = d.prob_one(q)
            if t.is_deterministic(q):
                want = t.copy().measure_z(q, rng)
                if abs(p1 - want) > 1e-9:
                    bad.append(f"circuit {c}, qubit {q}: tableau says {want}, P(1) = {p1:.3g}")
            elif abs(p1 - 0.5) > 1e-9:
                bad.append(f"circuit {c}, qubit {q}: random on tableau, P(1) = {p1:.3g}")
    return bad


@dataclass(frozen=True)
class PreparationScan:
    """Outcome of injecting every single fault into one two-copy ``|0_L>`` check."""

    faults: int
    accepted: int
    accepted_flipped: int
    rejected: int
    flipped_examples: tuple[str, ...] = ()


def _single_faults(locs):
    for idx, loc in locs:
        if loc.kind in ("MEASURE_Z", "MEASURE_X"):
            labels = ["X"]
        else:
            labels = ["".join(t) for t in itertools.product("IXYZ", repeat=len(loc.qubits)) if set(t) != {"I"}]
        for lab in labels:
            yield idx, loc, lab


def preparation_fault_scan(strict: bool = False) -> PreparationScan:
    """Every Pauli at every location of one verification attempt, one shot each.

    A shot counts as flipped when a noiseless destructive readout of the kept
    block decodes to logical 1.
    """
    rec = RecordingExecutor(ScheduledFaults([{}]))
    prepare_verified(rec, 1, max_retries=1, strict=strict)
    cases = list(_single_faults(rec.rec["indexed"]))
    tables = [{idx: PauliOperator.from_label(lab)} for idx, _, lab in cases]
    ex = FrameExecutor(len(tables), ScheduledFaults(tables), np.random.default_rng(0))
    blocks, _, ok = prepare_verified(ex, 1, max_retries=1, strict=strict)
    with ex.noiseless():
        bits, _, _ = steane.measure_logical_destructive(ex, blocks)
    ok, flipped = ok[0], bits[:, 0] == 1
    bad = np.flatnonzero(ok & flipped)
    examples = tuple(f"{lab} at {cases[i][1].kind}{cases[i][1].qubits}" for i in bad[:5] for lab in [cases[i][2]])
    return PreparationScan(len(cases), int(ok.sum()), int(bad.size), int((~ok).sum()), examples)


def double_fault_demo(max_retries: int = 3) -> tuple[str, float]:
    """Logical X on both copies: the comparison sees agreement and keeps a flipped block.

    Returns ``(status, weight of |1_L>)`` of the accepted block.
    """
    xl = PauliOperator.from_label("X" * 7)
    out = prepare_zero_verified(rng=np.random.default_rng(0), max_retries=max_retries, inject=(xl, xl))
    if out.block is None:
        return out.status, float("nan")
    st = out.executor.qubit_state(out.block.qubits)
    return out.status, float(abs(steane.logical_amplitudes(st)[1]) ** 2)


def suite_preparation() -> list[str]:
    bad = []
    scan = preparation_fault_scan()
    if scan.accepted_flipped:
        bad.append(f"{scan.accepted_flipped} single faults pass verification with a flipped block: "
                   f"{', '.join(scan.flipped_examples)}")
    if scan.rejected == 0:
        bad.append("no single fault is ever rejected; the comparison is not checking anything")
    xl = PauliOperator.from_label("X" * 7)
    one = prepare_zero_verified(rng=np.random.default_rng(0), max_retries=2, inject=(xl, None))
    if one.status != "rejected" or one.attempts != 2:
        bad.append(f"logical X on one copy: {one.status} after {one.attempts} attempt(s)")
    status, w1 = double_fault_demo()
    if status != "accepted" or abs(w1 - 1) > 1e-10:
        bad.append(f"double fault: expected an accepted flipped block, got {status} with |1_L> weight {w1:.3g}")
    return bad


def suite_concat(n: int = 1000, seed: int = 5) -> list[str]:
    bad = []
    rng = np.random.default_rng(seed)
    for _ in range(n):
        p_T = 10 ** rng.uniform(-3, -1)
        p = p_T * 10 ** rng.uniform(-2, 0.3)
        k = int(rng.integers(0, 7))
        pr = concat_project(p, p_T, k)
        if pr.p_k != 0 and abs(pr.p_k - pr.p_k_iterated) > 1e-12 * abs(pr.p_k):
            bad.append(f"closed form vs iterated at p={p:g}, p_T={p_T:g}, k={k}")
    eps = [10.0**-e for e in range(6, 25, 2)]
    ks = [levels_for_target(1e-3, 1e-2, e)[0] for e in eps]
    for i, e in enumerate(eps):
        for j, e2 in enumerate(eps):
            if abs(np.log(1 / e2) - 2 * np.log(1 / e)) < 1e-9 and ks[j] > ks[i] + 1:
                bad.append(f"doubling log(1/eps) from {e:g} adds {ks[j] - ks[i]} levels")
    if any(b < a for a, b in zip(ks, ks[1:])):
        bad.append("levels not monotone in epsilon")
    return bad


SUITES: dict[str, Callable[[], list[str]]] = {
    "hamming": suite_hamming,
    "codewords": suite_codewords,
    "stabilizers": suite_stabilizers,
    "transversal": suite_transversal,
    "correction": suite_correction,
    "tableau": suite_tableau,
    "concat": suite_concat,
    "preparation": suite_preparation,
}


def run_suites(names=None) -> list[SuiteResult]:
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}; have {', '.join(SUITES)}")
    return [SuiteResult(n, tuple(SUITES[n]())) for n in names]
