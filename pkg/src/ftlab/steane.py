"""The 7-qubit CSS code built from the [7,4] Hamming code.

Block position ``i`` (1..7) is qubit ``i-1`` of a block and bit ``i`` of the
Hamming words.  Logical operators use the transversal representatives
``X⊗7`` and ``Z⊗7``; weight-3 equivalents are exposed for tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Location
from .dense import SINGLE_QUBIT, DenseState
from .errors import DimensionError, PreconditionError, UnsupportedGateError
from .pauli import HAMMING, PauliOperator

N = 7
ZERO_WORDS = tuple(HAMMING.codewords(parity=0))
ONE_WORDS = tuple(HAMMING.codewords(parity=1))

# Physical gate applied on every qubit of a block to realise each logical gate.
# Transversal S_DAG acts as logical S on this code: odd codewords have weight
# 3 or 7, and (-i)**3 = (-i)**7 = i.
LOGICAL_S_PHYSICAL = "S_DAG"
_TRANSVERSAL = {"X": "X", "Y": "Y", "Z": "Z", "H": "H"}
LOGICAL_KINDS = ("X", "Y", "Z", "H", "S", "CNOT", "T")

# Non-fault-tolerant encoder for |0>: Hadamards on the pivot positions of the
# three check rows, then each pivot copies itself onto the rest of its row.
ENCODING_PIVOTS = (4, 6, 7)
ENCODING_LAYERS = (
    ((4, 1), (6, 2), (7, 3)),
    ((4, 2), (6, 5), (7, 1)),
    ((4, 3), (6, 1), (7, 5)),
)


def physical_kind(kind: str) -> str:
    """Physical gate used transversally for logical ``kind``."""
    if kind == "S":
        return LOGICAL_S_PHYSICAL
    if kind in _TRANSVERSAL:
        return _TRANSVERSAL[kind]
    if kind == "CNOT":
        return "CNOT"
    raise UnsupportedGateError(f"logical {kind} is not transversal; use the T gadget")


@dataclass(frozen=True)
class SteaneBlock:
    block_id: int
    physical_qubits: tuple[int, ...]

    def __post_init__(self):
        if len(self.physical_qubits) != N or len(set(self.physical_qubits)) != N:
            raise DimensionError("a block needs 7 distinct qubits")

    @property
    def qubits(self) -> np.ndarray:
        return np.array(self.physical_qubits, dtype=np.int64)


@dataclass(frozen=True)
class LogicalGate:
    kind: str
    blocks: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in LOGICAL_KINDS:
            raise ValueError(f"unknown logical gate {self.kind!r}")
        want = 2 if self.kind == "CNOT" else 1
        if len(self.blocks) != want:
            raise ValueError(f"logical {self.kind} takes {want} block(s)")
        if want == 2 and self.blocks[0] == self.blocks[1]:
            raise ValueError("logical CNOT needs two distinct blocks")


# ---------------------------------------------------------------------------
# states and operators


def _amplitudes(value) -> tuple[complex, complex]:
    if isinstance(value, str):
        table = {"0": (1, 0), "1": (0, 1), "+": (1, 1), "-": (1, -1)}
        if value not in table:
            raise ValueError(f"unknown logical label {value!r}")
        a, b = table[value]
        s = 1 / np.sqrt(abs(a) ** 2 + abs(b) ** 2)
        return complex(a * s), complex(b * s)
    if isinstance(value, (int, np.integer)):
        if value not in (0, 1):
            raise ValueError("logical bit must be 0 or 1")
        return (1.0, 0.0) if value == 0 else (0.0, 1.0)
    a, b = (complex(v) for v in np.asarray(value, dtype=complex).ravel())
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-10:
        raise PreconditionError("logical amplitudes must be normalised")
    return a, b


def encode_ideal(value) -> DenseState:
    """``a|0_L> + b|1_L>`` on 7 qubits; ``value`` is 0, 1, a label or ``(a, b)``."""
    a, b = _amplitudes(value)
    psi = np.zeros(2**N, dtype=complex)
    amp = 1 / np.sqrt(8)
    for w in ZERO_WORDS:
        psi[int(w, 2)] += a * amp
    for w in ONE_WORDS:
        psi[int(w, 2)] += b * amp
    return DenseState(N, psi)


def _word_pauli(word: str, letter: str) -> PauliOperator:
    return PauliOperator.from_label("".join(letter if c == "1" else "I" for c in word))


def stabilizer_generators() -> dict[str, list[PauliOperator] | PauliOperator]:
    """Three X-type and three Z-type checks on the Hamming rows, plus ``X_L``/``Z_L``."""
    rows = HAMMING.CHECK_ROWS
    return {
        "x_checks": [_word_pauli(r, "X") for r in rows],
        "z_checks": [_word_pauli(r, "Z") for r in rows],
        "logical_x": PauliOperator.from_label("X" * N),
        "logical_z": PauliOperator.from_label("Z" * N),
    }


def stabilizer_group_generators() -> list[PauliOperator]:
    g = stabilizer_generators()
    return g["x_checks"] + g["z_checks"]


def weight3_logicals() -> dict[str, PauliOperator]:
    """Minimum-weight representatives supported on the weight-3 odd codewords."""
    w3 = next(w for w in ONE_WORDS if w.count("1") == 3)
    return {"logical_x": _word_pauli(w3, "X"), "logical_z": _word_pauli(w3, "Z"), "support": w3}


# ---------------------------------------------------------------------------
# circuits


def encoding_steps(blocks) -> list[list[tuple[str, np.ndarray]]]:
    """Time steps (after PREP_ZERO) that encode ``|0_L>`` on each row of ``blocks``."""
    blocks = np.asarray(blocks, dtype=np.int64).reshape(-1, N)
    piv = [p - 1 for p in ENCODING_PIVOTS]
    steps = [[("H", blocks[:, piv].ravel())]]
    for layer in ENCODING_LAYERS:
        pairs = [np.stack([blocks[:, c - 1], blocks[:, t - 1]], axis=1) for c, t in layer]
        steps.append([("CNOT", np.concatenate(pairs))])
    return steps


def encoding_circuit() -> Circuit:
    """The non-fault-tolerant 7-qubit encoder for ``|0_L>`` (qubits 0..6)."""
    circ = Circuit(N)
    circ.append([("PREP_ZERO", (q,)) for q in range(N)], tag="encode")
    for step in encoding_steps(np.arange(N)):
        locs = []
        for kind, q in step:
            q = np.asarray(q).reshape(-1, 2 if kind == "CNOT" else 1)
            locs.extend(Location(kind, tuple(int(v) for v in row)) for row in q)
        circ.append(locs, tag="encode")
    return circ


def logical_steps(gate: LogicalGate | str, blocks) -> list[tuple[str, np.ndarray]]:
    """One time step of physical operations realising a logical gate.

    ``blocks`` is ``(7,)`` for single-block gates or ``(2, 7)`` for CNOT, or a
    stack of those (applied in parallel).
    """
    kind = gate.kind if isinstance(gate, LogicalGate) else gate
    phys = physical_kind(kind)
    b = np.asarray(blocks, dtype=np.int64)
    if kind == "CNOT":
        b = b.reshape(-1, 2, N)
        return [("CNOT", np.stack([b[:, 0].ravel(), b[:, 1].ravel()], axis=1))]
    return [(phys, b.ravel())]


def logical_circuit(gates: list[LogicalGate], n_blocks: int) -> Circuit:
    """Physical circuit for a sequence of logical gates on blocks ``0..n_blocks-1``."""
    circ = Circuit(N * n_blocks)
    for g in gates:
        blocks = [np.arange(N) + N * b for b in g.blocks]
        locs = []
        for kind, q in logical_steps(g, np.array(blocks)):
            q = np.asarray(q).reshape(-1, 2 if kind == "CNOT" else 1)
            locs.extend(Location(kind, tuple(int(v) for v in row)) for row in q)
        circ.append(locs, tag=f"logical_{g.kind}")
    return circ


def apply_logical(gate: LogicalGate, state, blocks):
    """Apply ``gate`` transversally.

    ``state`` is a :class:`DenseState` (``blocks`` = per-block qubit axes) or an
    executor (``blocks`` = per-block qubit ids).  Returns the state.
    """
    if gate.kind == "T":
        raise UnsupportedGateError("logical T is not transversal; use logical_t_gadget")
    sel = np.array([np.asarray(blocks[b]) for b in gate.blocks])
    steps = logical_steps(gate, sel)
    if isinstance(state, DenseState):
        for kind, q in steps:
            if kind == "CNOT":
                for c, t in np.asarray(q).reshape(-1, 2):
                    state.cnot(int(c), int(t))
            else:
                u = SINGLE_QUBIT[kind]
                for a in np.asarray(q).ravel():
                    state.apply_1q(u, int(a))
        return state
    state.step(steps, tag=f"logical_{gate.kind}")
    return state


def check_transversal(circuit: Circuit, blocks, skip_tags=("encode",)) -> list[Location]:
    """Two-qubit locations that couple different positions, or two qubits of one block.

    Steps whose tag is in ``skip_tags`` (the ancilla encoders, which are checked
    by verification instead) are ignored.  An empty list means transversal.
    """
    where: dict[int, tuple[int, int]] = {}
    for b, blk in enumerate(blocks):
        for pos, q in enumerate(blk):
            where[int(q)] = (b, pos)
    bad = []
    for step, tag in zip(circuit.steps, circuit.tags or [""] * len(circuit.steps)):
        if tag in skip_tags:
            continue
        for loc in step:
            if len(loc.qubits) < 2:
                continue
            spots = [where.get(q) for q in loc.qubits]
            if None in spots:
                bad.append(loc)
                continue
            (b0, p0), (b1, p1) = spots
            if b0 == b1 or p0 != p1:
                bad.append(loc)
    return bad


# ---------------------------------------------------------------------------
# classical decoding


def decode_words(words) -> tuple[np.ndarray, np.ndarray]:
    """Hamming-correct raw 7-bit words (last axis) and read their parity.

    Returns ``(logical_bits, corrected_position)`` with position 0 meaning no
    correction.
    """
    words = np.asarray(words, dtype=np.int64)
    if words.shape[-1] != N:
        raise DimensionError("words must have 7 bits on the last axis")
    pos = HAMMING.position_of[HAMMING.syndrome_index(words)]
    parity = words.sum(axis=-1) % 2
    bits = (parity ^ (pos > 0)).astype(np.uint8)
    return bits, pos


def measure_logical_destructive(state, block, rng=None, basis: str = "Z"):
    """Measure all 7 qubits, Hamming-correct the word, return its parity.

    On a :class:`DenseState` the state is projected in place and the result is
    ``(bit, raw_word, position_or_None)``.  On an executor the block is released
    and ``(bits, raw_words, positions)`` are arrays over shots.
    """
    if isinstance(state, DenseState):
        rng = rng if rng is not None else np.random.default_rng()
        meas = state.measure_z if basis == "Z" else state.measure_x
        raw = np.array([meas(int(q), rng) for q in block], dtype=np.uint8)
        bit, pos = decode_words(raw)
        return int(bit), raw, (int(pos) or None)
    out = state.measure(np.asarray(block).ravel(), basis)
    raw = out.T.reshape(state.n_shots, out.shape[0] // N, N).astype(np.uint8)
    bits, pos = decode_words(raw)
    return bits, raw, pos


def is_codeword_state(state: DenseState, atol: float = 1e-10) -> bool:
    """All six checks stabilise ``state`` (7-qubit dense state)."""
    for g in stabilizer_group_generators():
        tmp = state.copy()
        tmp.apply_pauli(g)
        if abs(np.vdot(state.psi, tmp.psi) - 1) > atol:
            return False
    return True


def logical_amplitudes(state: DenseState) -> np.ndarray:
    """Project a 7-qubit state onto ``(|0_L>, |1_L>)``."""
    z, o = encode_ideal(0), encode_ideal(1)
    return np.array([np.vdot(z.psi, state.psi), np.vdot(o.psi, state.psi)])


