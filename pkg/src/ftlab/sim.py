"""Backend-agnostic entry points: single operations and whole-circuit runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import MEASUREMENTS, Circuit, Location, validate_location
from .dense import SINGLE_QUBIT, DenseState, dense_fidelity
from .errors import ConfigurationError, DimensionError, UnsupportedGateError
from .executors import DenseExecutor, TableauExecutor
from .noise import NoiseModel
from .pauli import PauliOperator
from .tableau import StabilizerTableau

__all__ = ["ShotRecord", "apply_gate", "apply_pauli", "measure", "run_circuit", "dense_fidelity"]

BACKENDS = ("tableau", "dense")


@dataclass(frozen=True)
class ShotRecord:
    outcomes: tuple[int, ...] = ()
    errors: tuple[tuple[Location, PauliOperator], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.outcomes)


def _n(state) -> int:
    return state.n


def apply_gate(state, location: Location | tuple):
    """Apply one non-measurement location to a tableau or dense state (in place)."""
    loc = Location(*location)
    validate_location(loc, _n(state))
    kind, q = loc.kind, loc.qubits
    if kind in MEASUREMENTS or kind == "PREP_ZERO":
        raise ConfigurationError(f"{kind} is not a unitary gate; use measure()")
    if isinstance(state, StabilizerTableau):
        if kind == "T":
            raise UnsupportedGateError("T is not a Clifford gate")
        if kind == "CNOT":
            state.cnot(*q)
        else:
            fn = {"H": state.h, "S": state.s, "S_DAG": state.s_dag,
                  "X": state.pauli_x, "Y": state.pauli_y, "Z": state.pauli_z}[kind]
            fn(q[0])
        return state
    if isinstance(state, DenseState):
        if kind == "CNOT":
            state.cnot(*q)
        else:
            state.apply_1q(SINGLE_QUBIT[kind], q[0])
        return state
    raise ConfigurationError(f"unknown state type {type(state).__name__}")


def apply_pauli(state, p: PauliOperator):
    if p.n != _n(state):
        raise DimensionError(f"{p.n}-qubit Pauli on a {_n(state)}-qubit state")
    state.apply_pauli(p)
    return state


def measure(state, qubit: int, basis: str = "Z", rng=None):
    """Projective single-qubit measurement; returns ``(bit, state)``."""
    if basis not in ("Z", "X"):
        raise ConfigurationError("basis must be 'Z' or 'X'")
    rng = rng if rng is not None else np.random.default_rng()
    fn = state.measure_z if basis == "Z" else state.measure_x
    return int(fn(int(qubit), rng)), state


def run_circuit(circuit: Circuit, backend: str = "tableau", noise: NoiseModel | None = None,
                seed=None, *, error_timing: str = "after") -> ShotRecord:
    """One noisy shot of ``circuit`` from ``|0...0>``.

    Each location is executed as its own operation so outcomes come back in
    circuit order; idle qubits of a step take idle noise.
    """
    if backend not in BACKENDS:
        raise ConfigurationError(f"backend must be one of {BACKENDS}")
    rng = np.random.default_rng(seed)
    cls = TableauExecutor if backend == "tableau" else DenseExecutor
    ex = cls(noise, rng, log_errors=True, error_timing=error_timing)
    ids = ex.alloc_ideal(circuit.n_qubits)
    outcomes: list[int] = []
    for step in circuit.steps:
        ops = [(loc.kind, ids[list(loc.qubits)]) for loc in step]
        for out in ex.step(ops):
            outcomes.extend(int(b) for b in out[:, 0])
    errors = tuple((Location(loc.kind, tuple(int(ids.tolist().index(q)) for q in loc.qubits)), p)
                   for _, loc, p in ex.error_log)
    return ShotRecord(tuple(outcomes), errors)
