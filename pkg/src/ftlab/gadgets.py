"""Fault-tolerant gadgets for the 7-qubit code, written once against the executor API.

* verified ``|0_L>`` / ``|+_L>`` preparation (two encoded copies compared
  through a transversal CNOT, retry on mismatch);
* non-demolition logical Z measurement;
* Steane-style error correction (X stage with ``|+_L>``, Z stage with ``|0_L>``);
* the T gadget consuming an encoded magic state.

All functions take ``blocks`` as an ``(m, 7)`` array of qubit ids and act on
every block (and every shot of a batched executor) in parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import steane
from .dense import DenseState
from .errors import ConfigurationError, GadgetAbortError, PreconditionError
from .executors import DenseExecutor, Executor, make_executor
from .pauli import HAMMING, PauliOperator
from .steane import N, SteaneBlock, decode_words, encode_ideal, encoding_steps

DEFAULT_RETRIES = 3


def _blocks(blocks) -> np.ndarray:
    return np.asarray(blocks, dtype=np.int64).reshape(-1, N)


def _pairs(a, b) -> np.ndarray:
    return np.stack([_blocks(a).ravel(), _blocks(b).ravel()], axis=1)


def _decode_out(out: np.ndarray, m: int, shots: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``out`` is ``(7m, shots)`` -> raw words ``(m, shots, 7)``, bits and positions ``(m, shots)``."""
    words = out.reshape(m, N, shots).transpose(0, 2, 1)
    bits, pos = decode_words(words)
    return words, bits, pos


def _position_mask(pos: np.ndarray) -> np.ndarray:
    """Positions ``(m, shots)`` (0 = none) -> correction mask ``(7m, shots)``."""
    m, shots = pos.shape
    mask = np.zeros((m, N, shots), dtype=np.uint8)
    jj, ss = np.nonzero(pos)
    mask[jj, pos[jj, ss] - 1, ss] = 1
    return mask.reshape(m * N, shots)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class SyndromeRecord:
    x_syndrome: tuple[int, int, int]
    z_syndrome: tuple[int, int, int]
    x_correction: int | None
    z_correction: int | None

    def __post_init__(self):
        if (self.x_correction is None) != (not any(self.x_syndrome)):
            raise ValueError("x correction must be present exactly when the x syndrome is nonzero")
        if (self.z_correction is None) != (not any(self.z_syndrome)):
            raise ValueError("z correction must be present exactly when the z syndrome is nonzero")


def _bits3(s: int) -> tuple[int, int, int]:
    return ((s >> 2) & 1, (s >> 1) & 1, s & 1)


@dataclass
class GadgetReport:
    """What a gadget measured and corrected.  Arrays are indexed ``[block, shot]``."""

    gadget: str
    ancilla_blocks: int = 0
    x_syndrome: np.ndarray | None = None
    z_syndrome: np.ndarray | None = None
    x_correction: np.ndarray | None = None
    z_correction: np.ndarray | None = None
    outcome: np.ndarray | None = None
    corrections: list[tuple[str, np.ndarray]] = field(default_factory=list)

    def record(self, block: int = 0, shot: int = 0) -> SyndromeRecord:
        sx = int(self.x_syndrome[block, shot]) if self.x_syndrome is not None else 0
        sz = int(self.z_syndrome[block, shot]) if self.z_syndrome is not None else 0
        cx = int(self.x_correction[block, shot]) if self.x_correction is not None else 0
        cz = int(self.z_correction[block, shot]) if self.z_correction is not None else 0
        return SyndromeRecord(_bits3(sx), _bits3(sz), cx or None, cz or None)

    def to_json_lines(self, shot: int = 0) -> str:
        lines = []
        n_blocks = 0
        for arr in (self.x_syndrome, self.z_syndrome, self.outcome):
            if arr is not None:
                n_blocks = arr.shape[0]
                break
        for b in range(n_blocks):
            row: dict = {"gadget": self.gadget, "block": b}
            if self.x_syndrome is not None or self.z_syndrome is not None:
                rec = self.record(b, shot)
                row.update(
                    x_syndrome="".join(map(str, rec.x_syndrome)),
                    z_syndrome="".join(map(str, rec.z_syndrome)),
                    x_correction=rec.x_correction,
                    z_correction=rec.z_correction,
                )
            if self.outcome is not None:
                row["outcome"] = int(self.outcome[b, shot])
            lines.append(json.dumps(row))
        return "\n".join(lines)


@dataclass
class PreparationOutcome:
    status: str
    attempts: int
    block: SteaneBlock | None = None
    executor: Executor | None = None

    def __post_init__(self):
        if self.status not in ("accepted", "rejected"):
            raise ValueError("status must be 'accepted' or 'rejected'")
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")
        if self.status == "rejected" and self.block is not None:
            raise ValueError("rejected preparations carry no block")


# ---------------------------------------------------------------------------
# verified preparation


def _encode_noisy(ex: Executor, m: int) -> np.ndarray:
    ids = ex.alloc(N * m, tag="encode").reshape(m, N)
    for ops in encoding_steps(ids):
        ex.step(ops, tag="encode")
    return ids


def _attempt(ex: Executor, m: int, plus: bool, inject, strict: bool):
    """One two-copy attempt for ``m`` blocks inside a factory of ``ex``."""
    fac = ex.spawn()
    both = _encode_noisy(fac, 2 * m)
    cand, check = both[:m], both[m:]
    if inject is not None:
        for ids, p in zip((cand, check), inject):
            if p is not None:
                for blk in ids:
                    fac.inject(p, blk)
    fac.step([("CNOT", _pairs(cand, check))], tag="verify")
    out = fac.measure(check.ravel(), "Z", tag="verify")
    _, bits, pos = _decode_out(out, m, ex.n_shots)
    ok = bits == 0
    if strict:
        ok &= pos == 0
    if plus:
        fac.gate("H", cand.ravel(), tag="prep_plus")
    cand = ex.absorb(fac, cand)
    return _blocks(cand), ok


def prepare_verified(ex: Executor, m: int = 1, plus: bool = False, max_retries: int = DEFAULT_RETRIES,
                     inject=None, strict: bool = False):
    """Verified ancilla blocks prepared offline and handed to ``ex``.

    Two noisy encodings are compared by a transversal CNOT and a destructive
    Z measurement of the second copy; the first copy is kept when the decoded
    comparison bit is 0.  Rejected shots retry with fresh copies up to
    ``max_retries`` attempts in total; shots that never pass are flagged in
    ``ex.aborted``.  ``inject`` optionally holds a Pauli per copy applied
    noiselessly right after encoding.

    Returns ``(blocks (m, 7), attempts (m, shots), accepted (m, shots))``.
    """
    if max_retries < 1:
        raise PreconditionError("max_retries must be >= 1")
    if _cache_ok(ex, inject):
        blocks = np.array([ex.alloc_state(_cached_state(plus)) for _ in range(m)])
        ones = np.ones((m, ex.n_shots), dtype=np.int64)
        return blocks, ones, ones.astype(bool)
    blocks, ok = _attempt(ex, m, plus, inject, strict)
    attempts = np.ones((m, ex.n_shots), dtype=np.int64)
    for _ in range(1, max_retries):
        bad = ~ok
        rows = np.flatnonzero(bad.any(axis=0) & ~ex.aborted)
        if rows.size == 0:
            break
        sub = ex.spawn_subset(rows)
        new, ok_new = _attempt(sub, m, plus, inject, strict)
        take = bad[:, rows]
        blocks = _blocks(ex.adopt(rows, take, blocks, sub, new))
        ok[:, rows] = np.where(take, ok_new, ok[:, rows])
        attempts[:, rows] += take
    ex.aborted[:] |= ~ok.all(axis=0)
    return blocks, attempts, ok


# exact ancillas for noiseless dense runs, where the two-copy check is a no-op
_STATE_CACHE: dict[bool, DenseState] = {}


def _cache_ok(ex: Executor, inject) -> bool:
    return (hasattr(ex, "alloc_state") and inject is None and getattr(ex, "exact_ancillas", False)
            and ex.noise.is_noiseless)


def _cached_state(plus: bool) -> DenseState:
    if plus not in _STATE_CACHE:
        _STATE_CACHE[plus] = encode_ideal("+" if plus else 0)
    return _STATE_CACHE[plus]


def _prepare_single(noise, rng, max_retries, plus, backend, inject=None, strict=False) -> PreparationOutcome:
    ex = make_executor(backend, noise, rng)
    blocks, attempts, ok = prepare_verified(ex, 1, plus, max_retries, inject, strict)
    n_att = int(attempts[0, 0])
    if not ok[0, 0]:
        ex.discard(blocks[0])
        return PreparationOutcome("rejected", n_att, None, ex)
    return PreparationOutcome("accepted", n_att, SteaneBlock(0, tuple(int(q) for q in blocks[0])), ex)


def prepare_zero_verified(noise=None, rng=None, max_retries: int = DEFAULT_RETRIES, *, backend: str = "dense",
                          inject=None, strict: bool = False) -> PreparationOutcome:
    """Single-shot verified ``|0_L>``; the block lives in ``outcome.executor``."""
    return _prepare_single(noise, rng, max_retries, False, backend, inject, strict)


def prepare_plus_verified(noise=None, rng=None, max_retries: int = DEFAULT_RETRIES, *, backend: str = "dense",
                          inject=None, strict: bool = False) -> PreparationOutcome:
    """Single-shot verified ``|+_L>`` (verified as ``|0_L>``, then transversal H)."""
    return _prepare_single(noise, rng, max_retries, True, backend, inject, strict)


# ---------------------------------------------------------------------------
# measurement and error correction


def measure_logical_nondemolition(ex: Executor, blocks, max_retries: int = DEFAULT_RETRIES):
    """Logical Z of each data block via a verified ``|0_L>`` ancilla.

    Returns ``(bits (m, shots), report)``.  The data blocks stay in ``ex``.
    """
    data = _blocks(blocks)
    m = len(data)
    anc, _, _ = prepare_verified(ex, m, plus=False, max_retries=max_retries)
    ex.step([("CNOT", _pairs(data, anc))], tag="nd_measure")
    out = ex.measure(anc.ravel(), "Z", tag="nd_measure")
    _, bits, _ = _decode_out(out, m, ex.n_shots)
    return bits, GadgetReport("nondemolition_measure", ancilla_blocks=2 * m, outcome=bits)


def _extract(ex: Executor, data: np.ndarray, stage: str, max_retries: int) -> np.ndarray:
    """One syndrome extraction; returns syndrome integers ``(m, shots)``."""
    m = len(data)
    if stage == "x":
        anc, _, _ = prepare_verified(ex, m, plus=True, max_retries=max_retries)
        ex.step([("CNOT", _pairs(data, anc))], tag="ec_x")
        out = ex.measure(anc.ravel(), "Z", tag="ec_x")
    else:
        anc, _, _ = prepare_verified(ex, m, plus=False, max_retries=max_retries)
        ex.step([("CNOT", _pairs(anc, data))], tag="ec_z")
        out = ex.measure(anc.ravel(), "X", tag="ec_z")
    words, _, _ = _decode_out(out, m, ex.n_shots)
    return HAMMING.syndrome_index(words)


def _majority(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.where(a == b, a, np.where(a == c, a, np.where(b == c, b, c)))


def ec_round(ex: Executor, blocks, *, apply_corrections: bool = True, repeat_syndrome: bool = False,
             max_retries: int = DEFAULT_RETRIES) -> GadgetReport:
    """Steane error correction on each block: X errors first, then Z errors.

    X stage: transversal CNOT data -> ``|+_L>``, Z-basis readout, Hamming
    lookup, X on the named position.  Z stage: transversal CNOT ``|0_L>`` ->
    data, X-basis readout, Z correction.  ``repeat_syndrome`` extracts each
    syndrome three times and keeps the majority value.
    """
    data = _blocks(blocks)
    report = GadgetReport("ec_round")
    for stage, letter in (("x", "X"), ("z", "Z")):
        if repeat_syndrome:
            runs = [_extract(ex, data, stage, max_retries) for _ in range(3)]
            synd = _majority(*runs)
        else:
            synd = _extract(ex, data, stage, max_retries)
        report.ancilla_blocks += 2 * len(data) * (3 if repeat_syndrome else 1)
        pos = HAMMING.position_of[synd]
        if apply_corrections:
            mask = _position_mask(pos)
            ex.correct(letter, data.ravel(), mask)
            report.corrections.append((letter, pos))
        setattr(report, f"{stage}_syndrome", synd)
        setattr(report, f"{stage}_correction", pos)
    return report


# ---------------------------------------------------------------------------
# T gadget


def prepare_magic_ideal() -> DenseState:
    """Encoded ``(|0_L> + e^{i pi/4}|1_L>)/sqrt(2)``, noiseless by construction."""
    return encode_ideal((1 / np.sqrt(2), np.exp(1j * np.pi / 4) / np.sqrt(2)))


def logical_t_gadget(ex: Executor, data, magic) -> tuple[np.ndarray, GadgetReport]:
    """Logical T on ``data`` by consuming the encoded magic state in ``magic``.

    Transversal CNOT data -> magic, destructive logical Z readout of the magic
    block, logical S on the data when the outcome is 1.
    """
    if not isinstance(ex, DenseExecutor):
        raise ConfigurationError("the T gadget consumes a non-stabilizer state and needs the dense backend")
    data, magic = _blocks(data)[0], _blocks(magic)[0]
    ex.step([("CNOT", _pairs(data, magic))], tag="t_gadget")
    out = ex.measure(magic, "Z", tag="t_gadget")
    _, bits, _ = _decode_out(out, 1, 1)
    ex.gate_if(steane.physical_kind("S"), data, bits[0])
    report = GadgetReport("t_gadget", ancilla_blocks=1, outcome=bits)
    if bits[0, 0]:
        report.corrections.append(("S", np.array([[1]])))
    return bits, report


def require_accepted(ex: Executor) -> None:
    if ex.aborted.any():
        raise GadgetAbortError("ancilla preparation was rejected on every attempt")


def inject_pauli(ex: Executor, block, label: str) -> None:
    """Noiselessly apply a 7-letter Pauli label to ``block`` on every shot."""
    ex.inject(PauliOperator.from_label(label), _blocks(block)[0])
