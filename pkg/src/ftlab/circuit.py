"""Time-stepped circuits and their text format.

Text format: one time step per line, semicolon-separated locations, qubits
numbered from 1, e.g. ``CNOT 1 8; H 3``.  Blank lines and ``#`` comments are
ignored; a line containing only ``TICK`` is an empty (idle) step.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

from .errors import DimensionError

GATE_KINDS = ("H", "S", "S_DAG", "X", "Y", "Z", "CNOT", "T", "MEASURE_Z", "MEASURE_X", "PREP_ZERO")
TWO_QUBIT = frozenset({"CNOT"})
MEASUREMENTS = frozenset({"MEASURE_Z", "MEASURE_X"})
CLIFFORD = frozenset(GATE_KINDS) - {"T"}


class CircuitError(ValueError):
    pass


class Location(NamedTuple):
    kind: str
    qubits: tuple[int, ...]


def validate_location(loc: Location, n_qubits: int | None = None) -> None:
    if loc.kind not in GATE_KINDS:
        raise CircuitError(f"unknown gate kind {loc.kind!r}")
    arity = 2 if loc.kind in TWO_QUBIT else 1
    if len(loc.qubits) != arity:
        raise CircuitError(f"{loc.kind} takes {arity} qubit(s), got {loc.qubits}")
    if arity == 2 and loc.qubits[0] == loc.qubits[1]:
        raise CircuitError(f"{loc.kind} needs two distinct qubits")
    if n_qubits is not None:
        for q in loc.qubits:
            if not 0 <= q < n_qubits:
                raise DimensionError(f"qubit {q} out of range for {n_qubits} qubits")


@dataclass
class Circuit:
    n_qubits: int
    steps: list[list[Location]] = field(default_factory=list)
    # free-form label per step (e.g. "encode"); same length as steps when used
    tags: list[str] = field(default_factory=list)

    def append(self, locations: Iterable[Location | tuple], tag: str = "") -> None:
        step = [Location(loc[0], tuple(int(q) for q in loc[1])) for loc in locations]
        seen: set[int] = set()
        for loc in step:
            validate_location(loc, self.n_qubits)
            for q in loc.qubits:
                if q in seen:
                    raise CircuitError(f"qubit {q} used twice in one time step")
                seen.add(q)
        self.steps.append(step)
        self.tags.append(tag)

    def locations(self, include_idle: bool = False) -> Iterator[tuple[int, Location]]:
        """Yield ``(step_index, location)``; idle qubits appear as ``("IDLE", (q,))``.

        A qubit counts as idle in a step when it is untouched and live: it has
        been used before without being measured since (or prepared).
        """
        live: set[int] = set()
        for t, step in enumerate(self.steps):
            touched = set()
            for loc in step:
                yield t, loc
                touched.update(loc.qubits)
            if include_idle:
                for q in sorted(live - touched):
                    yield t, Location("IDLE", (q,))
            for loc in step:
                for q in loc.qubits:
                    if loc.kind in MEASUREMENTS:
                        live.discard(q)
                    else:
                        live.add(q)

    def count_locations(self) -> int:
        return sum(len(s) for s in self.steps)

    def measurement_count(self) -> int:
        return sum(1 for _, loc in self.locations() if loc.kind in MEASUREMENTS)

    def to_text(self) -> str:
        lines = []
        for step in self.steps:
            if not step:
                lines.append("TICK")
                continue
            lines.append("; ".join(" ".join([loc.kind, *(str(q + 1) for q in loc.qubits)]) for loc in step))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> Circuit:
        parsed: list[list[Location]] = []
        top = 0
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            step = []
            if line != "TICK":
                for part in line.split(";"):
                    tokens = part.split()
                    if not tokens:
                        continue
                    try:
                        qubits = tuple(int(tok) - 1 for tok in tokens[1:])
                    except ValueError as exc:
                        raise CircuitError(f"line {lineno}: bad qubit index in {part!r}") from exc
                    if any(q < 0 for q in qubits):
                        raise CircuitError(f"line {lineno}: qubits are numbered from 1")
                    step.append(Location(tokens[0].upper(), qubits))
                    top = max([top, *(q + 1 for q in qubits)])
            parsed.append(step)
        circ = cls(n_qubits if n_qubits is not None else top)
        for step in parsed:
            circ.append(step)
        return circ

    def digest(self) -> str:
        """Short SHA-256 of the text form; identifies the exact gate sequence."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]
