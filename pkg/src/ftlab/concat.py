"""Second-level encoding: an executor whose qubits are code blocks of another executor.

Every gadget in :mod:`ftlab.gadgets` runs unchanged on a
:class:`ConcatenatedExecutor`; each of its locations expands into the
transversal construction on the inner blocks:

* ``alloc`` -> verified inner ``|0_L>`` preparation;
* one-qubit gates and CNOT -> the transversal physical gate (S via S_DAG);
* measurement -> transversal physical measurement plus Hamming decoding;
* classical corrections -> transversal Paulis (noiseless, like all corrections).

With ``schedule="after_gate"`` an inner EC round follows every inner gate
location and every preparation; ``"none"`` leaves inner EC to the caller
(e.g. once per block before each outer round).
"""

from __future__ import annotations

import contextlib

import numpy as np

from .circuit import MEASUREMENTS
from .errors import ConfigurationError, UnsupportedGateError
from .executors import Executor, _as_ops, _check_disjoint
from .gadgets import DEFAULT_RETRIES, ec_round, prepare_verified
from .steane import N, decode_words, physical_kind

SCHEDULES = ("after_gate", "after_cnot", "none")


class _Registry:
    """Logical id -> inner block ids, shared by an executor and its factories."""

    def __init__(self):
        self.blocks: dict[int, np.ndarray] = {}
        self.next_id = 0

    def add(self, inner_blocks: np.ndarray) -> np.ndarray:
        ids = np.arange(self.next_id, self.next_id + len(inner_blocks), dtype=np.int64)
        self.next_id += len(inner_blocks)
        for i, blk in zip(ids, inner_blocks):
            self.blocks[int(i)] = np.asarray(blk, dtype=np.int64)
        return ids

    def get(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        return np.array([self.blocks[int(i)] for i in ids.ravel()], dtype=np.int64).reshape(ids.shape + (N,))


class ConcatenatedExecutor(Executor):
    def __init__(self, inner: Executor, *, schedule: str = "none", max_retries: int = DEFAULT_RETRIES,
                 registry: _Registry | None = None):
        if schedule not in SCHEDULES:
            raise ConfigurationError(f"schedule must be one of {SCHEDULES}")
        self.inner = inner
        self.schedule = schedule
        self.max_retries = max_retries
        self.reg = registry if registry is not None else _Registry()
        self.shared = inner.shared
        self.n_shots = inner.n_shots
        self.live: set[int] = set()
        self.step_count = 0
        self.error_timing = inner.error_timing

    @property
    def noise(self):
        return self.inner.noise

    @property
    def relative(self) -> bool:
        return self.inner.relative

    @contextlib.contextmanager
    def noiseless(self):
        with self.inner.noiseless():
            yield self

    def _child(self, inner, registry=None) -> ConcatenatedExecutor:
        return ConcatenatedExecutor(inner, schedule=self.schedule, max_retries=self.max_retries,
                                    registry=registry if registry is not None else self.reg)

    # -- inner EC ---------------------------------------------------------

    def _inner_ec(self, inner_blocks: np.ndarray) -> None:
        if self.schedule == "none" or self.inner.noise.is_noiseless or inner_blocks.size == 0:
            return
        ec_round(self.inner, inner_blocks.reshape(-1, N), max_retries=self.max_retries)

    def inner_blocks(self, ids) -> np.ndarray:
        return self.reg.get(ids)

    # -- allocation -------------------------------------------------------

    def alloc(self, k: int, tag: str = "") -> np.ndarray:
        blocks, _, _ = prepare_verified(self.inner, k, plus=False, max_retries=self.max_retries)
        self._inner_ec(blocks)
        ids = self.reg.add(blocks)
        self.live.update(int(i) for i in ids)
        return ids

    def alloc_ideal(self, k: int) -> np.ndarray:
        blocks = self.inner.alloc_encoded(["0"] * k)
        ids = self.reg.add(blocks)
        self.live.update(int(i) for i in ids)
        return ids

    def _release(self, qubits, measured) -> None:
        for q in qubits:
            blk = self.reg.blocks.pop(int(q))
            if measured:
                self.inner.free(blk, measured=measured)
            else:
                self.inner.discard(blk)

    def discard(self, qubits) -> None:
        self.free(qubits)

    # -- factories --------------------------------------------------------

    def spawn(self) -> ConcatenatedExecutor:
        return self._child(self.inner.spawn())

    def spawn_subset(self, rows) -> ConcatenatedExecutor:
        return self._child(self.inner.spawn_subset(rows), _Registry())

    def absorb(self, child: ConcatenatedExecutor, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        for q in ids.ravel():
            blk = child.reg.blocks.pop(int(q))
            self.reg.blocks[int(q)] = np.asarray(self.inner.absorb(child.inner, blk), dtype=np.int64)
            child.live.discard(int(q))
            self.live.add(int(q))
        return ids

    def adopt(self, rows, take, dst, sub: ConcatenatedExecutor, src) -> np.ndarray:
        dst = np.asarray(dst, dtype=np.int64)
        src = np.asarray(src, dtype=np.int64)
        m = len(dst)
        dst_inner = self.reg.get(dst).reshape(m, -1)
        src_inner = sub.reg.get(src).reshape(m, -1)
        new = np.asarray(self.inner.adopt(rows, take, dst_inner, sub.inner, src_inner)).reshape(dst.shape + (N,))
        for j, row in enumerate(dst):
            for k, q in enumerate(row):
                self.reg.blocks[int(q)] = new[j, k]
        for q in src.ravel():
            sub.reg.blocks.pop(int(q), None)
        return dst

    # -- execution --------------------------------------------------------

    def step(self, ops, tag: str = "") -> list[np.ndarray]:
        ops = _as_ops(ops)
        _check_disjoint(ops)
        inner_ops = []
        gated = []
        meas_slots = []
        for kind, q in ops:
            if kind == "T":
                raise UnsupportedGateError("logical T needs the magic-state gadget")
            if kind == "PREP_ZERO":
                raise ConfigurationError("allocate fresh logical qubits with alloc()")
            blocks = self.reg.get(q)  # (m, arity, 7)
            if kind in MEASUREMENTS:
                inner_ops.append((kind, blocks.reshape(-1)))
                meas_slots.append(len(q))
            elif kind == "CNOT":
                inner_ops.append(("CNOT", np.stack([blocks[:, 0].ravel(), blocks[:, 1].ravel()], axis=1)))
                gated.append(blocks.reshape(-1, N))
            else:
                inner_ops.append((physical_kind(kind), blocks.reshape(-1)))
                if self.schedule == "after_gate":
                    gated.append(blocks.reshape(-1, N))
        raw = self.inner.step(inner_ops, tag) if inner_ops else []
        outcomes = []
        for out, m in zip(raw, meas_slots):
            words = out.reshape(m, N, self.n_shots).transpose(0, 2, 1)
            bits, _ = decode_words(words)
            outcomes.append(bits.astype(np.uint8))
        if gated:
            self._inner_ec(np.concatenate(gated))
        for kind, q in ops:
            for v in q.ravel():
                if kind in MEASUREMENTS:
                    self.live.discard(int(v))
                else:
                    self.live.add(int(v))
        self.step_count += 1
        return outcomes

    def _apply_masked(self, qubits, xb, zb, mask) -> None:
        letter = "Y" if xb and zb else ("X" if xb else "Z")
        blocks = self.reg.get(qubits)
        self.inner.correct(letter, blocks.ravel(), np.repeat(np.asarray(mask, dtype=np.uint8), N, axis=0))
