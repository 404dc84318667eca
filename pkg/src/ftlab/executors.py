"""Execution backends behind a single gadget-facing interface.

Gadgets are written once against :class:`Executor` and run unchanged on

* :class:`TableauExecutor` -- one shot on a :class:`StabilizerTableau`;
* :class:`DenseExecutor` -- one shot on a :class:`DenseState` (any gate, incl. T);
* :class:`BranchingDenseExecutor` -- many noiseless shots on shared state vectors;
* :class:`FrameExecutor` -- a batch of shots as bit-packed Pauli frames;
* :class:`RecordingExecutor` -- no state; records the emitted :class:`Circuit`.

Every executor works on a batch of ``n_shots`` shots (``1`` for the per-shot
backends).  Measurements return ``uint8`` arrays of shape ``(len(qubits), n_shots)``.

Frame measurements report the *deviation* from a noiseless reference run.
That is exact for every decision the Steane gadgets make, since syndromes and
verification parities of the reference run are all zero, but it is not a
sampler of raw outcomes.

Factory semantics: :meth:`Executor.spawn` opens a child used to prepare
ancillas "offline".  Idle noise in a step only hits qubits live in the
executor running that step, so data blocks do not idle while a factory works.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np

from .circuit import MEASUREMENTS, TWO_QUBIT, Circuit, Location
from .dense import SINGLE_QUBIT, DenseState, rz
from .errors import ConfigurationError, DimensionError, UnsupportedGateError
from .noise import Hits, NoiseModel
from .pauli import PauliOperator
from .steane import encode_ideal, encoding_steps
from .tableau import StabilizerTableau

_NOISELESS = NoiseModel()
_U64 = np.uint64


def _as_ops(ops) -> list[tuple[str, np.ndarray]]:
    out = []
    for kind, qubits in ops:
        q = np.asarray(qubits, dtype=np.int64)
        arity = 2 if kind in TWO_QUBIT else 1
        q = q.reshape(-1, arity)
        out.append((kind, q))
    return out


def _check_disjoint(ops) -> None:
    allq = np.concatenate([q.ravel() for _, q in ops]) if ops else np.zeros(0, np.int64)
    if allq.size != np.unique(allq).size:
        raise ConfigurationError("a qubit appears in two locations of one time step")


@dataclass
class _Shared:
    """State shared between an executor and the factories it spawns."""

    rng: np.random.Generator
    loc_index: np.ndarray
    aborted: np.ndarray
    shot_ids: np.ndarray


class Executor:
    n_shots: int = 1
    # True when measurements report deviations from a noiseless reference run
    relative = False
    supports_t = False
    supports_coherent = False
    error_timing = "after"

    def __init__(self, noise=None, shared: _Shared | None = None, error_timing: str = "after"):
        self.noise = noise if noise is not None else _NOISELESS
        if error_timing not in ("after", "before"):
            raise ConfigurationError("error_timing must be 'after' or 'before'")
        self.error_timing = error_timing
        self.shared = shared
        self.live: set[int] = set()
        self.step_count = 0
        if getattr(self.noise, "kind", None) == "coherent" and not self.supports_coherent:
            raise ConfigurationError(f"coherent noise needs the dense backend, not {type(self).__name__}")
        if getattr(self.noise, "kind", None) == "adversarial" and getattr(self.noise, "strategy", "") != "all_Y_heuristic":
            raise ConfigurationError("stochastic runs support only the all_Y_heuristic adversary")

    # -- shared bookkeeping ---------------------------------------------

    @property
    def rng(self) -> np.random.Generator:
        return self.shared.rng

    @property
    def aborted(self) -> np.ndarray:
        return self.shared.aborted

    @contextlib.contextmanager
    def noiseless(self):
        saved = self.noise
        self.noise = _NOISELESS
        try:
            yield self
        finally:
            self.noise = saved

    def _sample(self, kind: str, arity: int, m: int) -> Hits:
        noise = self.noise
        if getattr(noise, "is_noiseless", False) or m == 0:
            if noise.needs_location_index and kind != "IDLE":
                self.shared.loc_index += m
            return Hits.empty(arity)
        base = self.shared.loc_index if noise.needs_location_index else None
        hits = noise.sample_step(kind, arity, m, self.n_shots, self.rng, base, self.shared.shot_ids)
        if noise.needs_location_index and kind != "IDLE":
            self.shared.loc_index += m
        return hits

    # -- public API -----------------------------------------------------

    def step(self, ops, tag: str = "") -> list[np.ndarray]:
        """Run one time step; returns outcome arrays for the measurement ops in order."""
        ops = _as_ops(ops)
        _check_disjoint(ops)
        outcomes = []
        touched: set[int] = set()
        for kind, q in ops:
            self._validate(kind, q)
            touched.update(int(v) for v in q.ravel())
            m, arity = q.shape
            if kind in MEASUREMENTS:
                out = self._measure(kind, q[:, 0])
                hits = self._sample(kind, arity, m)
                if hits:
                    out[hits.loc, hits.shot] ^= 1
                    self._log_flips(kind, q, hits)
                outcomes.append(out)
                self._record(kind, q, tag)
                continue
            if kind == "PREP_ZERO":
                self._prep(q[:, 0])
                hits = self._sample(kind, arity, m)
                self._apply_hits(q, hits, kind)
                self._record(kind, q, tag)
                continue
            if self.error_timing == "before":
                hits = self._sample(kind, arity, m)
                self._apply_hits(q, hits, kind)
                self._gate(kind, q)
            else:
                self._gate(kind, q)
                hits = self._sample(kind, arity, m)
                self._apply_hits(q, hits, kind)
            if getattr(self.noise, "kind", None) == "coherent" and self.noise.theta:
                self._coherent(q.ravel(), self.noise.theta)
            self._record(kind, q, tag)
        idle = sorted(self.live - touched)
        if idle:
            idle_q = np.array(idle, dtype=np.int64)[:, None]
            self._apply_hits(idle_q, self._sample("IDLE", 1, len(idle)))
        for kind, q in ops:
            for v in q.ravel():
                if kind in MEASUREMENTS:
                    self.live.discard(int(v))
                else:
                    self.live.add(int(v))
        self._end_step(tag)
        self.step_count += 1
        return outcomes

    def gate(self, kind: str, qubits, tag: str = "") -> None:
        self.step([(kind, qubits)], tag)

    def measure(self, qubits, basis: str = "Z", tag: str = "") -> np.ndarray:
        """Destructive measurement: the qubits are released afterwards."""
        qubits = np.asarray(qubits, dtype=np.int64).ravel()
        (out,) = self.step([("MEASURE_" + basis, qubits)], tag)
        self.free(qubits, measured=basis)
        return out

    def alloc(self, k: int, tag: str = "") -> np.ndarray:
        """``k`` fresh qubits prepared in ``|0>`` (one noisy PREP_ZERO step)."""
        ids = self._new_qubits(k)
        self.step([("PREP_ZERO", ids)], tag)
        return ids

    def alloc_ideal(self, k: int) -> np.ndarray:
        ids = self._new_qubits(k)
        self._prep(ids)
        self.live.update(int(v) for v in ids)
        return ids

    def alloc_encoded(self, values) -> np.ndarray:
        """Ideal (noiseless) code blocks, one per entry of ``values`` (0, 1, "+" or "-").

        Runs the encoding circuit without noise; returns ids of shape ``(m, 7)``.
        """
        values = [str(v) for v in values]
        with self.noiseless():
            ids = self.alloc_ideal(7 * len(values)).reshape(len(values), 7)
            for ops in encoding_steps(ids):
                self.step(ops, tag="ideal_encode")
            flip = [ids[j] for j, v in enumerate(values) if v in ("1", "-")]
            if flip:
                self.step([("X", np.concatenate(flip))], tag="ideal_encode")
            had = [ids[j] for j, v in enumerate(values) if v in ("+", "-")]
            if had:
                self.step([("H", np.concatenate(had))], tag="ideal_encode")
        return ids

    def correct(self, letter: str, qubits, mask) -> None:
        """Noiseless classically controlled Pauli ``letter`` on ``qubits[i]`` where ``mask[i]``."""
        qubits = np.asarray(qubits, dtype=np.int64).ravel()
        mask = np.asarray(mask, dtype=np.uint8).reshape(qubits.size, self.n_shots)
        xb = 1 if letter in "XY" else 0
        zb = 1 if letter in "ZY" else 0
        self._apply_masked(qubits, xb, zb, mask)

    def inject(self, pauli: PauliOperator, qubits, mask=None) -> None:
        """Apply ``pauli`` (given on ``len(qubits)`` qubits) noiselessly."""
        qubits = np.asarray(qubits, dtype=np.int64).ravel()
        if pauli.n != qubits.size:
            raise DimensionError(f"{pauli.n}-qubit Pauli on {qubits.size} qubits")
        if mask is None:
            mask = np.ones(self.n_shots, dtype=np.uint8)
        mask = np.asarray(mask, dtype=np.uint8).reshape(self.n_shots)
        xbits, zbits = pauli.x_bits(), pauli.z_bits()
        for j, q in enumerate(qubits):
            if xbits[j] or zbits[j]:
                letter = "Y" if xbits[j] and zbits[j] else ("X" if xbits[j] else "Z")
                self.correct(letter, [q], mask[None, :])

    def gate_if(self, kind: str, qubits, cond) -> None:
        raise UnsupportedGateError(f"{type(self).__name__} cannot condition non-Pauli gates on outcomes")

    def free(self, qubits, measured: str | None = None) -> None:
        for q in np.asarray(qubits, dtype=np.int64).ravel():
            self.live.discard(int(q))
        self._release(np.asarray(qubits, dtype=np.int64).ravel(), measured)

    # -- hooks ----------------------------------------------------------

    def _validate(self, kind: str, q: np.ndarray) -> None:
        if kind == "T" and not self.supports_t:
            raise UnsupportedGateError(f"T gate is not supported by {type(self).__name__}")

    def _record(self, kind, q, tag) -> None:
        pass

    def _log_flips(self, kind, q, hits) -> None:
        pass

    def _end_step(self, tag) -> None:
        pass

    def _coherent(self, qubits, theta) -> None:
        raise UnsupportedGateError("coherent noise needs the dense backend")


# ---------------------------------------------------------------------------
# per-shot backends


class _SingleShot(Executor):
    n_shots = 1

    def __init__(self, noise=None, rng=None, shared=None, error_timing="after", log_errors=False):
        if shared is None:
            rng = rng if rng is not None else np.random.default_rng()
            shared = _Shared(rng, np.zeros(1, np.int64), np.zeros(1, bool), np.zeros(1, np.int64))
        super().__init__(noise, shared, error_timing)
        self.log_errors = log_errors
        self.error_log: list[tuple[int, Location, PauliOperator]] = []

    def _apply_hits(self, q: np.ndarray, hits: Hits, kind: str = "IDLE") -> None:
        for loc, xb, zb in zip(hits.loc, hits.xb, hits.zb):
            qubits = q[loc]
            for j, v in enumerate(qubits):
                if xb[j] or zb[j]:
                    self._pauli(int(v), int(xb[j]), int(zb[j]))
            if self.log_errors:
                self.error_log.append(
                    (self.step_count, Location(kind, tuple(int(v) for v in qubits)), PauliOperator.from_bits(xb, zb))
                )

    def _log_flips(self, kind, q, hits) -> None:
        if self.log_errors:
            for loc in hits.loc:
                self.error_log.append((self.step_count, Location(kind, (int(q[loc, 0]),)), PauliOperator.from_label("X")))

    def _apply_masked(self, qubits, xb, zb, mask) -> None:
        for j, v in enumerate(qubits):
            if mask[j, 0]:
                self._pauli(int(v), xb, zb)

    def gate_if(self, kind: str, qubits, cond) -> None:
        if np.asarray(cond).ravel()[0]:
            self.gate(kind, qubits)

    def spawn_subset(self, rows) -> Executor:
        rows = np.asarray(rows).ravel()
        if rows.tolist() != [0]:
            raise DimensionError("single-shot executors only have shot 0")
        return self.spawn()

    def adopt(self, rows, take, dst, sub, src) -> np.ndarray:
        """Replace blocks ``dst[j]`` by ``sub``'s ``src[j]`` where ``take[j]``; returns new ids."""
        dst = np.array(dst, dtype=np.int64)
        take = np.asarray(take, dtype=bool).reshape(len(dst), -1)[:, 0]
        for j in range(len(dst)):
            if take[j]:
                self.discard(dst[j])
                dst[j] = self.absorb(sub, src[j])
            else:
                sub.discard(src[j])
        return dst

    def discard(self, qubits) -> None:
        """Measure out and release qubits that are no longer needed."""
        qubits = np.asarray(qubits, dtype=np.int64).ravel()
        for q in qubits:
            self._measure_one(int(q), "Z")
        self.free(qubits, measured="Z")


class TableauExecutor(_SingleShot):
    """One shot on a bit-packed stabilizer tableau; Clifford gates only."""

    def __init__(self, noise=None, rng=None, *, tableau=None, pool=None, shared=None, **kw):
        super().__init__(noise, rng, shared, **kw)
        self.tableau = tableau if tableau is not None else StabilizerTableau(0)
        self.pool = pool if pool is not None else []

    def spawn(self) -> TableauExecutor:
        return TableauExecutor(self.noise, tableau=self.tableau, pool=self.pool, shared=self.shared,
                               error_timing=self.error_timing, log_errors=self.log_errors)

    def absorb(self, child, ids) -> np.ndarray:
        if child.tableau is not self.tableau:
            raise ConfigurationError("can only absorb factories spawned from this executor")
        ids = np.asarray(ids, dtype=np.int64)
        for q in ids.ravel():
            child.live.discard(int(q))
            self.live.add(int(q))
        if self.log_errors:
            self.error_log.extend(child.error_log)
            child.error_log = []
        return ids

    def _new_qubits(self, k: int) -> np.ndarray:
        self.pool.sort()
        take = self.pool[:k]
        del self.pool[:k]
        if len(take) < k:
            start = self.tableau.n
            self.tableau.extend(k - len(take))
            take += list(range(start, start + k - len(take)))
        return np.array(take, dtype=np.int64)

    def _release(self, qubits, measured) -> None:
        self.pool.extend(int(q) for q in qubits)

    def _prep(self, qubits) -> None:
        for q in qubits:
            self.tableau.reset(int(q), self.rng)

    def _gate(self, kind, q) -> None:
        t = self.tableau
        fn = {"H": t.h, "S": t.s, "S_DAG": t.s_dag, "X": t.pauli_x, "Y": t.pauli_y, "Z": t.pauli_z}
        for row in q:
            if kind == "CNOT":
                t.cnot(int(row[0]), int(row[1]))
            else:
                fn[kind](int(row[0]))

    def _pauli(self, q, xb, zb) -> None:
        if xb and zb:
            self.tableau.pauli_y(q)
        elif xb:
            self.tableau.pauli_x(q)
        elif zb:
            self.tableau.pauli_z(q)

    def _measure_one(self, q: int, basis: str) -> int:
        if basis == "Z":
            return self.tableau.measure_z(q, self.rng)
        return self.tableau.measure_x(q, self.rng)

    def _measure(self, kind, qubits) -> np.ndarray:
        basis = kind[-1]
        return np.array([[self._measure_one(int(q), basis)] for q in qubits], dtype=np.uint8).reshape(-1, 1)


class DenseExecutor(_SingleShot):
    """One shot on an exact state vector.  Qubits are tensored in on allocation
    and traced out after destructive measurement, so the register only holds
    what is live."""

    supports_t = True
    supports_coherent = True

    def __init__(self, noise=None, rng=None, *, shared=None, exact_ancillas=False, **kw):
        super().__init__(noise, rng, shared, **kw)
        # noiseless runs may take verified ancillas as exact states (same result, much faster)
        self.exact_ancillas = exact_ancillas
        self.state = DenseState(0)
        self.order: list[int] = []
        self._next = 0
        self._measured: dict[int, tuple[str, int]] = {}

    def axis(self, q: int) -> int:
        try:
            return self.order.index(int(q))
        except ValueError:
            raise DimensionError(f"qubit {q} is not allocated in this register") from None

    def spawn(self) -> DenseExecutor:
        return DenseExecutor(self.noise, shared=self.shared, error_timing=self.error_timing,
                             log_errors=self.log_errors, exact_ancillas=self.exact_ancillas)

    def absorb(self, child: DenseExecutor, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if sorted(child.order) != sorted(int(v) for v in ids.ravel()):
            # drop anything else the factory still holds
            extra = [q for q in child.order if q not in set(int(v) for v in ids.ravel())]
            child.discard(extra)
        perm = [child.axis(int(v)) for v in ids.ravel()]
        sub = child.state.permuted(perm)
        new = self._new_qubit_ids(len(perm))
        self.state.tensor(sub)
        self.order.extend(int(v) for v in new)
        self.live.update(int(v) for v in new)
        child.state, child.order = DenseState(0), []
        if self.log_errors:
            self.error_log.extend(child.error_log)
        return new.reshape(ids.shape)

    def alloc_state(self, state: DenseState) -> np.ndarray:
        """Tensor an explicit state into the register (noiseless); returns its qubit ids."""
        new = self._new_qubit_ids(state.n)
        self.state.tensor(state.copy())
        self.order.extend(int(v) for v in new)
        self.live.update(int(v) for v in new)
        return new

    def alloc_encoded(self, values) -> np.ndarray:
        return np.array([self.alloc_state(encode_ideal(v if not isinstance(v, (int, np.integer)) else int(v)))
                         for v in values]).reshape(-1, 7)

    def qubit_state(self, ids) -> DenseState:
        """Copy of the register reordered so that ``ids`` come first, in order.

        Only valid when ``ids`` are all the qubits held (use it on product states).
        """
        ids = [int(v) for v in np.asarray(ids).ravel()]
        if sorted(ids) != sorted(self.order):
            raise DimensionError("qubit_state needs every qubit of the register")
        return self.state.permuted([self.axis(q) for q in ids])

    def _new_qubit_ids(self, k: int) -> np.ndarray:
        ids = np.arange(self._next, self._next + k, dtype=np.int64)
        self._next += k
        return ids

    def _new_qubits(self, k: int) -> np.ndarray:
        ids = self._new_qubit_ids(k)
        self.state.tensor(DenseState(k))
        self.order.extend(int(v) for v in ids)
        return ids

    def _release(self, qubits, measured) -> None:
        for q in qubits:
            basis, value = self._measured.pop(int(q), (None, None))
            if basis is None:
                value = self.state.measure_z(self.axis(q), self.rng)
                basis = "Z"
            self.state.remove(self.axis(q), value, basis)
            self.order.remove(int(q))

    def _prep(self, qubits) -> None:
        for q in qubits:
            a = self.axis(q)
            if self.state.measure_z(a, self.rng):
                self.state.apply_named("X", a)

    def _gate(self, kind, q) -> None:
        if kind == "CNOT":
            self.state.cnot_many([(self.axis(c), self.axis(t)) for c, t in q])
            return
        for row in q:
            self.state.apply_named(kind, self.axis(row[0]))

    def _coherent(self, qubits, theta) -> None:
        u = rz(theta)
        for q in qubits:
            self.state.apply_1q(u, self.axis(q))

    def apply_unitary(self, u: np.ndarray, qubit: int) -> None:
        self.state.apply_1q(np.asarray(u, dtype=complex), self.axis(qubit))

    def _pauli(self, q, xb, zb) -> None:
        a = self.axis(q)
        if zb:
            self.state.apply_named("Z", a)
        if xb:
            self.state.apply_named("X", a)

    def _measure_one(self, q: int, basis: str) -> int:
        a = self.axis(q)
        out = self.state.measure_z(a, self.rng) if basis == "Z" else self.state.measure_x(a, self.rng)
        self._measured[int(q)] = (basis, out)
        return out

    def _measure(self, kind, qubits) -> np.ndarray:
        basis = kind[-1]
        if len(qubits) == 1:
            return np.array([[self._measure_one(int(qubits[0]), basis)]], dtype=np.uint8)
        bits = self.state.measure_many([self.axis(q) for q in qubits], self.rng, basis)
        for q, b in zip(qubits, bits):
            self._measured[int(q)] = (basis, int(b))
        return bits.reshape(-1, 1)

    def _gate_touch(self, q) -> None:
        for v in np.asarray(q).ravel():
            self._measured.pop(int(v), None)

    def step(self, ops, tag: str = ""):
        for _, q in _as_ops(ops):
            self._gate_touch(q)
        return super().step(ops, tag)


class BranchingDenseExecutor(Executor):
    """Exact state-vector sampling of many shots of a noiseless circuit at once.

    Shots that have seen the same measurement outcomes share one state
    vector (a branch).  A joint measurement samples every shot of a branch
    from one outcome distribution and splits the branch by outcome; branches
    that end up in identical states are merged again.  The cost therefore
    scales with the number of distinct branches rather than with shots, which
    makes deterministic perturbations (an explicit rotation, say) followed by
    ideal error correction cheap to sample.

    Ancillas come from the exact-state cache, so factories are not supported.
    """

    supports_t = True
    exact_ancillas = True

    def __init__(self, shots: int, noise=None, rng=None, *, shared=None):
        if shared is None:
            rng = rng if rng is not None else np.random.default_rng()
            shared = _Shared(rng, np.zeros(shots, np.int64), np.zeros(shots, bool), np.arange(shots, dtype=np.int64))
        super().__init__(noise, shared)
        if not self.noise.is_noiseless:
            raise ConfigurationError("the branching dense sampler runs noiseless circuits only")
        self.n_shots = shots
        self.branches: list[tuple[DenseState, np.ndarray]] = [(DenseState(0), np.arange(shots))]
        self.order: list[int] = []
        self._next = 0
        self._destructive = False
        self._gone: set[int] = set()

    def axis(self, q: int) -> int:
        try:
            return self.order.index(int(q))
        except ValueError:
            raise DimensionError(f"qubit {q} is not allocated in this register") from None

    def _factory(self, *_args):
        raise ConfigurationError("the branching dense sampler takes exact ancillas and has no factories")

    spawn = spawn_subset = absorb = adopt = _factory

    def _new_qubit_ids(self, k: int) -> np.ndarray:
        ids = np.arange(self._next, self._next + k, dtype=np.int64)
        self._next += k
        return ids

    def alloc_state(self, state: DenseState) -> np.ndarray:
        new = self._new_qubit_ids(state.n)
        for st, _ in self.branches:
            st.tensor(state)
        self.order.extend(int(v) for v in new)
        self.live.update(int(v) for v in new)
        return new

    def alloc_encoded(self, values) -> np.ndarray:
        return np.array([self.alloc_state(encode_ideal(v if not isinstance(v, (int, np.integer)) else int(v)))
                         for v in values]).reshape(-1, 7)

    def _new_qubits(self, k: int) -> np.ndarray:
        ids = self._new_qubit_ids(k)
        for st, _ in self.branches:
            st.tensor(DenseState(k))
        self.order.extend(int(v) for v in ids)
        return ids

    def _prep(self, qubits) -> None:
        qubits = np.asarray(qubits, dtype=np.int64).ravel()
        out = self._measure("MEASURE_Z", qubits)
        self._apply_masked(qubits, 1, 0, out)

    def _gate(self, kind, q) -> None:
        for st, _ in self.branches:
            if kind == "CNOT":
                st.cnot_many([(self.axis(c), self.axis(t)) for c, t in q])
            else:
                for row in q:
                    st.apply_named(kind, self.axis(row[0]))

    def apply_unitary(self, u: np.ndarray, qubit: int) -> None:
        u = np.asarray(u, dtype=complex)
        for st, _ in self.branches:
            st.apply_1q(u, self.axis(qubit))

    def measure(self, qubits, basis: str = "Z", tag: str = "") -> np.ndarray:
        self._destructive = True
        try:
            return super().measure(qubits, basis, tag)
        finally:
            self._destructive = False

    def _measure(self, kind, qubits) -> np.ndarray:
        basis = kind[-1]
        axes = [self.axis(q) for q in qubits]
        k = len(axes)
        remove = self._destructive
        out = np.zeros((k, self.n_shots), dtype=np.uint8)
        shifts = np.arange(k - 1, -1, -1)
        new = []
        for st, shots in self.branches:
            t, probs = st.joint_distribution(axes, basis)
            draws = self.rng.choice(probs.size, size=shots.size, p=probs)
            for o in np.unique(draws):
                sel = shots[draws == o]
                new.append((st.project(axes, t, probs, int(o), basis, remove), sel))
                out[:, sel] = ((int(o) >> shifts) & 1)[:, None]
        self.branches = new
        if remove:
            for q in qubits:
                self.order.remove(int(q))
                self._gone.add(int(q))
            self._merge()
        return out

    def _merge(self) -> None:
        seen: dict[bytes, int] = {}
        merged: list[tuple[DenseState, list[np.ndarray]]] = []
        for st, shots in self.branches:
            key = (np.round(st.psi, 10) + 0.0).tobytes()
            if key in seen:
                merged[seen[key]][1].append(shots)
            else:
                seen[key] = len(merged)
                merged.append((st, [shots]))
        self.branches = [(st, np.sort(np.concatenate(parts))) for st, parts in merged]

    def _split(self, pattern: np.ndarray, apply) -> None:
        """Split branches by per-shot ``pattern`` columns and call ``apply(state, column)``."""
        new = []
        for st, shots in self.branches:
            cols = pattern[:, shots]
            uniq, inv = np.unique(cols, axis=1, return_inverse=True)
            inv = inv.ravel()
            for j in range(uniq.shape[1]):
                part = st if uniq.shape[1] == 1 else st.copy()
                apply(part, uniq[:, j])
                new.append((part, shots[inv == j]))
        self.branches = new

    def _apply_masked(self, qubits, xb, zb, mask) -> None:
        axes = [self.axis(q) for q in qubits]

        def apply(st, col):
            for a, on in zip(axes, col):
                if on:
                    if zb:
                        st.apply_named("Z", a)
                    if xb:
                        st.apply_named("X", a)

        self._split(np.asarray(mask, dtype=np.uint8), apply)

    def _apply_hits(self, q, hits, kind: str = "IDLE") -> None:
        # noiseless by construction
        pass

    def gate_if(self, kind: str, qubits, cond) -> None:
        qubits = np.asarray(qubits, dtype=np.int64).ravel()
        cond = np.asarray(cond, dtype=np.uint8).reshape(1, self.n_shots)
        axes = [self.axis(q) for q in qubits]

        def apply(st, col):
            if col[0]:
                for a in axes:
                    st.apply_named(kind, a)

        self._split(cond, apply)

    def _release(self, qubits, measured) -> None:
        rest = [int(q) for q in qubits if int(q) not in self._gone]
        self._gone.difference_update(int(q) for q in qubits)
        if rest:
            self._destructive = True
            try:
                self._measure("MEASURE_Z", np.array(rest, dtype=np.int64))
            finally:
                self._destructive = False
            self._gone.difference_update(rest)

    def discard(self, qubits) -> None:
        self.free(qubits)

    def branch_states(self, ids) -> list[tuple[DenseState, np.ndarray]]:
        """``(state with ids first, shots)`` per branch; ``ids`` must be every qubit held."""
        ids = [int(v) for v in np.asarray(ids).ravel()]
        if sorted(ids) != sorted(self.order):
            raise DimensionError("branch_states needs every qubit of the register")
        perm = [self.axis(q) for q in ids]
        return [(st.permuted(perm), shots) for st, shots in self.branches]


# ---------------------------------------------------------------------------
# batched Pauli-frame sampler


def pack_shots(bits: np.ndarray, words: int) -> np.ndarray:
    """``(k, shots)`` 0/1 array -> ``(k, words)`` uint64, shot ``s`` at bit ``s % 64`` of word ``s // 64``."""
    bits = np.asarray(bits, dtype=np.uint8)
    k, shots = bits.shape
    padded = np.zeros((k, words * 64), dtype=np.uint8)
    padded[:, :shots] = bits
    return np.ascontiguousarray(np.packbits(padded, axis=1, bitorder="little")).view(_U64)


def unpack_shots(words: np.ndarray, shots: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype=_U64)
    return np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")[..., :shots]


@dataclass
class _FrameStore:
    shots: int
    x: np.ndarray = field(init=False)
    z: np.ndarray = field(init=False)
    pool: list[int] = field(default_factory=list)
    size: int = 0

    def __post_init__(self):
        self.words = max(1, -(-self.shots // 64))
        self.x = np.zeros((64, self.words), dtype=_U64)
        self.z = np.zeros((64, self.words), dtype=_U64)

    def grab(self, k: int) -> np.ndarray:
        self.pool.sort()
        take = self.pool[:k]
        del self.pool[:k]
        need = k - len(take)
        if need:
            if self.size + need > self.x.shape[0]:
                cap = max(2 * self.x.shape[0], self.size + need)
                for name in ("x", "z"):
                    old = getattr(self, name)
                    new = np.zeros((cap, self.words), dtype=_U64)
                    new[: old.shape[0]] = old
                    setattr(self, name, new)
            take += list(range(self.size, self.size + need))
            self.size += need
        return np.array(take, dtype=np.int64)


class FrameExecutor(Executor):
    """Batch of shots tracked as Pauli frames relative to a noiseless reference.

    Frames are bit-packed across shots (64 shots per word), so a gate costs a
    few word-level XORs per qubit regardless of the batch size.
    """

    relative = True

    def __init__(self, shots: int, noise=None, rng=None, *, store=None, shared=None, error_timing="after"):
        if shared is None:
            rng = rng if rng is not None else np.random.default_rng()
            shared = _Shared(rng, np.zeros(shots, np.int64), np.zeros(shots, bool), np.arange(shots, dtype=np.int64))
        super().__init__(noise, shared, error_timing)
        self.n_shots = shots
        self.store = store if store is not None else _FrameStore(shots)

    def spawn(self) -> FrameExecutor:
        return FrameExecutor(self.n_shots, self.noise, store=self.store, shared=self.shared, error_timing=self.error_timing)

    def spawn_subset(self, rows) -> FrameExecutor:
        rows = np.asarray(rows, dtype=np.int64).ravel()
        sh = self.shared
        shared = _Shared(sh.rng, sh.loc_index[rows].copy(), sh.aborted[rows].copy(), sh.shot_ids[rows])
        return FrameExecutor(rows.size, self.noise, shared=shared, error_timing=self.error_timing)

    def absorb(self, child, ids) -> np.ndarray:
        if child.store is not self.store:
            raise ConfigurationError("can only absorb factories spawned from this executor")
        ids = np.asarray(ids, dtype=np.int64)
        for q in ids.ravel():
            child.live.discard(int(q))
            self.live.add(int(q))
        return ids

    def adopt(self, rows, take, dst, sub: FrameExecutor, src) -> np.ndarray:
        """For shot ``rows[i]`` and block ``j`` with ``take[j, i]``, copy ``sub``'s block ``src[j]`` over ``dst[j]``."""
        rows = np.asarray(rows, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        src = np.asarray(src, dtype=np.int64)
        take = np.asarray(take, dtype=bool).reshape(len(dst), rows.size)
        st, ss = self.store, sub.store
        for name in ("x", "z"):
            big = getattr(st, name)
            bits_dst = unpack_shots(big[dst.ravel()], self.n_shots).reshape(dst.shape + (self.n_shots,))
            bits_src = unpack_shots(getattr(ss, name)[src.ravel()], sub.n_shots).reshape(src.shape + (sub.n_shots,))
            cur = bits_dst[:, :, rows]
            bits_dst[:, :, rows] = np.where(take[:, None, :], bits_src, cur)
            big[dst.ravel()] = pack_shots(bits_dst.reshape(-1, self.n_shots), st.words)
        self.shared.loc_index[rows] = sub.shared.loc_index
        self.shared.aborted[rows] |= sub.shared.aborted
        return dst

    def discard(self, qubits) -> None:
        self.free(qubits)

    def alloc_encoded(self, values) -> np.ndarray:
        # the reference run holds the logical state; its frame is the identity
        return self.alloc_ideal(7 * len(values)).reshape(-1, 7)

    def _new_qubits(self, k: int) -> np.ndarray:
        return self.store.grab(k)

    def _release(self, qubits, measured) -> None:
        self.store.pool.extend(int(q) for q in qubits)

    def _prep(self, qubits) -> None:
        self.store.x[qubits] = 0
        self.store.z[qubits] = 0

    def _validate(self, kind, q) -> None:
        if kind == "T":
            raise UnsupportedGateError("T gate is not supported by the Pauli-frame sampler")

    def _gate(self, kind, q) -> None:
        x, z = self.store.x, self.store.z
        if kind == "H":
            a = q[:, 0]
            tmp = x[a].copy()
            x[a] = z[a]
            z[a] = tmp
        elif kind in ("S", "S_DAG"):
            a = q[:, 0]
            z[a] ^= x[a]
        elif kind == "CNOT":
            c, t = q[:, 0], q[:, 1]
            x[t] ^= x[c]
            z[c] ^= z[t]
        # X, Y, Z are part of the reference run and leave frames untouched

    def _apply_hits(self, q: np.ndarray, hits: Hits, kind: str = "IDLE") -> None:
        if not hits:
            return
        word = hits.shot >> 6
        bit = (hits.shot & 63).astype(_U64)
        for j in range(q.shape[1]):
            rows = q[hits.loc, j]
            xs = hits.xb[:, j].astype(_U64) << bit
            zs = hits.zb[:, j].astype(_U64) << bit
            np.bitwise_xor.at(self.store.x, (rows, word), xs)
            np.bitwise_xor.at(self.store.z, (rows, word), zs)

    def _apply_masked(self, qubits, xb, zb, mask) -> None:
        packed = pack_shots(mask, self.store.words)
        if xb:
            np.bitwise_xor.at(self.store.x, qubits, packed)
        if zb:
            np.bitwise_xor.at(self.store.z, qubits, packed)

    def _measure(self, kind, qubits) -> np.ndarray:
        src = self.store.x if kind == "MEASURE_Z" else self.store.z
        return unpack_shots(src[qubits], self.n_shots).copy()

    def frame_bits(self, qubits, which: str = "x") -> np.ndarray:
        """Current frame bits ``(len(qubits), shots)`` -- for tests and ideal decoding."""
        src = self.store.x if which == "x" else self.store.z
        return unpack_shots(src[np.asarray(qubits, dtype=np.int64).ravel()], self.n_shots)


# ---------------------------------------------------------------------------
# circuit recorder


class RecordingExecutor(_SingleShot):
    """Records the physical circuit a gadget emits; measurements read as 0.

    The noise model is never sampled.  When it indexes locations (as
    :class:`ScheduledFaults` does), ``rec["indexed"]`` lists ``(index, Location)``
    for every location a noisy run would index, in the same order.
    """

    supports_t = True

    def __init__(self, noise=None, *, recorder=None, shared=None, **kw):
        super().__init__(noise, None, shared, **kw)
        self._pending: list[Location] = []
        self.rec = recorder if recorder is not None else {"steps": [], "tags": [], "blocks": [], "pool": [], "n": 0,
                                                          "corrections": [], "indexed": []}

    def _sample(self, kind: str, arity: int, m: int) -> Hits:
        noise = self.noise
        if kind != "IDLE" and noise.needs_location_index and not noise.is_noiseless:
            self.shared.loc_index += m
        return Hits.empty(arity)

    def spawn(self) -> RecordingExecutor:
        return RecordingExecutor(self.noise, recorder=self.rec, shared=self.shared)

    def absorb(self, child, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        for q in ids.ravel():
            child.live.discard(int(q))
            self.live.add(int(q))
        return ids

    def _new_qubits(self, k: int) -> np.ndarray:
        pool = self.rec["pool"]
        pool.sort()
        take = pool[:k]
        del pool[:k]
        while len(take) < k:
            take.append(self.rec["n"])
            self.rec["n"] += 1
        ids = np.array(take, dtype=np.int64)
        for b in range(0, k - k % 7, 7):
            self.rec["blocks"].append(tuple(int(v) for v in ids[b:b + 7]))
        return ids

    def alloc_encoded(self, values) -> np.ndarray:
        return self.alloc_ideal(7 * len(values)).reshape(-1, 7)

    def _release(self, qubits, measured) -> None:
        self.rec["pool"].extend(int(q) for q in qubits)

    def _prep(self, qubits) -> None:
        pass

    def _gate(self, kind, q) -> None:
        pass

    def _pauli(self, q, xb, zb) -> None:
        pass

    def _apply_masked(self, qubits, xb, zb, mask) -> None:
        letter = "Y" if xb and zb else ("X" if xb else "Z")
        self.rec["corrections"].append((letter, tuple(int(v) for v in qubits)))

    def _measure_one(self, q, basis) -> int:
        return 0

    def _measure(self, kind, qubits) -> np.ndarray:
        return np.zeros((len(qubits), 1), dtype=np.uint8)

    def _record(self, kind, q, tag) -> None:
        locs = [Location(kind, tuple(int(v) for v in row)) for row in q]
        self._pending.extend(locs)
        if self.noise.needs_location_index and not self.noise.is_noiseless:
            start = int(self.shared.loc_index[0]) - len(locs)
            self.rec["indexed"].extend((start + j, loc) for j, loc in enumerate(locs))

    def _end_step(self, tag) -> None:
        self.rec["steps"].append(self._pending)
        self.rec["tags"].append(tag)
        self._pending = []

    def gate_if(self, kind, qubits, cond) -> None:
        self.gate(kind, qubits, tag="conditional")

    def circuit(self) -> Circuit:
        circ = Circuit(max(self.rec["n"], 1))
        for step, tag in zip(self.rec["steps"], self.rec["tags"]):
            circ.steps.append(step)
            circ.tags.append(tag)
        return circ

    @property
    def blocks(self) -> list[tuple[int, ...]]:
        return list(self.rec["blocks"])


def make_executor(backend: str, noise=None, rng=None, shots: int = 1, **kw) -> Executor:
    if backend == "tableau":
        return TableauExecutor(noise, rng, **kw)
    if backend == "dense":
        return DenseExecutor(noise, rng, **kw)
    if backend == "frame":
        return FrameExecutor(shots, noise, rng, **kw)
    if backend == "branching":
        return BranchingDenseExecutor(shots, noise, rng, **kw)
    if backend == "record":
        return RecordingExecutor(noise, **kw)
    raise ConfigurationError(f"unknown backend {backend!r}")
