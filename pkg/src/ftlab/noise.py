"""Error channels bound to circuit locations.

Executors call :meth:`NoiseModel.sample_step` once per homogeneous group of
locations.  The result is a :class:`Hits` record listing which (location,
shot) pairs were struck and with which Pauli, so the same sampler drives the
per-shot backends (``shots == 1``) and the batched frame sampler.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .circuit import MEASUREMENTS, Circuit, Location
from .dense import DenseState, rz
from .errors import ConfigurationError, UnsupportedGateError
from .pauli import PauliOperator

NOISE_KINDS = ("none", "depolarizing", "adversarial", "coherent")
TWO_QUBIT_RULES = ("uniform15", "independent")
STRATEGIES = ("all_Y_heuristic", "exhaustive_worst_case")

# 2-bit letter codes: 0=I, 1=X, 2=Y, 3=Z
_CODE_X = np.array([0, 1, 1, 0], dtype=np.uint8)
_CODE_Z = np.array([0, 0, 1, 1], dtype=np.uint8)
_LETTERS = "IXYZ"


class Hits(NamedTuple):
    """Errors struck in one step: ``loc[i]`` of shot ``shot[i]`` gets ``(xb[i], zb[i])``.

    For measurement locations any nonzero entry means "flip the outcome".
    """

    loc: np.ndarray
    shot: np.ndarray
    xb: np.ndarray
    zb: np.ndarray

    @staticmethod
    def empty(arity: int) -> Hits:
        z = np.zeros(0, dtype=np.int64)
        return Hits(z, z, np.zeros((0, arity), np.uint8), np.zeros((0, arity), np.uint8))

    def __bool__(self) -> bool:
        return bool(self.loc.size)


def bernoulli_indices(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices in ``range(n)``, each included independently with probability ``p``.

    Low rates skip ahead with geometric gaps so the cost scales with the
    number of hits rather than with ``n``.
    """
    if n <= 0 or p <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n, dtype=np.int64)
    if p > 0.02:
        return np.flatnonzero(rng.random(n) < p)
    chunks = []
    pos = -1
    block = int(n * p + 5 * math.sqrt(n * p) + 16)
    while True:
        idx = pos + np.cumsum(rng.geometric(p, block))
        if idx[-1] >= n:
            chunks.append(idx[idx < n])
            break
        chunks.append(idx)
        pos = int(idx[-1])
    return np.concatenate(chunks).astype(np.int64)


def _codes_to_bits(codes: np.ndarray, arity: int) -> tuple[np.ndarray, np.ndarray]:
    """Map integer Pauli codes (base 4, first qubit most significant) to bit arrays."""
    xb = np.zeros((codes.size, arity), dtype=np.uint8)
    zb = np.zeros((codes.size, arity), dtype=np.uint8)
    for j in range(arity):
        digit = (codes >> (2 * (arity - 1 - j))) & 3
        xb[:, j] = _CODE_X[digit]
        zb[:, j] = _CODE_Z[digit]
    return xb, zb


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    p_gate: float = 0.0
    p_idle: float = 0.0
    p_meas: float = 0.0
    two_qubit_rule: str = "uniform15"
    strategy: str = "all_Y_heuristic"
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigurationError(f"kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        for name in ("p_gate", "p_idle", "p_meas"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ConfigurationError(f"{name}={val} is not a probability")
        if self.two_qubit_rule not in TWO_QUBIT_RULES:
            raise ConfigurationError(f"two_qubit_rule must be one of {TWO_QUBIT_RULES}")
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}")

    @classmethod
    def none(cls) -> NoiseModel:
        return cls()

    @classmethod
    def depolarizing(cls, p: float, *, p_idle: float = 0.0, p_meas: float = 0.0, **kw) -> NoiseModel:
        return cls("depolarizing", p_gate=p, p_idle=p_idle, p_meas=p_meas, **kw)

    @classmethod
    def circuit_level(cls, p: float) -> NoiseModel:
        """Depolarizing gates and preparations plus measurement flips, all at rate ``p``."""
        return cls("depolarizing", p_gate=p, p_meas=p)

    def scaled(self, p: float) -> NoiseModel:
        """Same model with every nonzero rate replaced by ``p``."""
        return replace(
            self,
            p_gate=p if self.p_gate else 0.0,
            p_idle=p if self.p_idle else 0.0,
            p_meas=p if self.p_meas else 0.0,
        )

    @property
    def is_noiseless(self) -> bool:
        if self.kind == "none":
            return True
        if self.kind == "coherent":
            return self.theta == 0.0
        return self.p_gate == 0 and self.p_idle == 0 and self.p_meas == 0

    @property
    def is_pauli(self) -> bool:
        return self.kind != "coherent"

    needs_location_index = False

    def sample_step(self, kind: str, arity: int, m: int, shots: int, rng, loc_base=None, shot_ids=None) -> Hits:
        """Sample errors for ``m`` locations of ``kind`` across ``shots`` shots."""
        if self.kind in ("none", "coherent"):
            return Hits.empty(arity)
        if kind in MEASUREMENTS:
            p = self.p_meas
        elif kind == "IDLE":
            p = self.p_idle
        else:
            p = self.p_gate
        if p == 0:
            return Hits.empty(arity)
        if self.kind == "depolarizing" and arity == 2 and self.two_qubit_rule == "independent" and kind not in MEASUREMENTS:
            a = self.sample_step("H", 1, 2 * m, shots, rng)
            if not a:
                return Hits.empty(2)
            pair, half = np.divmod(a.loc, 2)
            # one event per struck (location, shot), even when both qubits fail
            key, row = np.unique(pair * shots + a.shot, return_inverse=True)
            xb = np.zeros((key.size, 2), np.uint8)
            zb = np.zeros((key.size, 2), np.uint8)
            xb[row, half] = a.xb[:, 0]
            zb[row, half] = a.zb[:, 0]
            loc, shot = np.divmod(key, shots)
            return Hits(loc, shot, xb, zb)
        flat = bernoulli_indices(rng, m * shots, p)
        loc, shot = np.divmod(flat, shots)
        if kind in MEASUREMENTS:
            ones = np.ones((flat.size, arity), np.uint8)
            return Hits(loc, shot, ones, np.zeros_like(ones))
        if self.kind == "adversarial":
            # heuristic adversary: Y on every qubit of every struck location
            ones = np.ones((flat.size, arity), np.uint8)
            return Hits(loc, shot, ones, ones.copy())
        codes = rng.integers(1, 4**arity, size=flat.size)
        xb, zb = _codes_to_bits(codes, arity)
        return Hits(loc, shot, xb, zb)


@dataclass
class ScheduledFaults:
    """Deterministic faults keyed by per-shot execution-order location index.

    ``faults[s]`` maps location index -> Pauli (on the location's qubits) for
    shot ``s``.  Measurement locations flip on any non-identity entry.
    """

    faults: Sequence[dict[int, PauliOperator]]
    needs_location_index = True
    kind: str = field(default="scheduled", init=False)
    is_noiseless = False
    is_pauli = True
    theta = 0.0

    def __post_init__(self):
        rows = []
        for s, table in enumerate(self.faults):
            for idx, pauli in table.items():
                rows.append((s, int(idx), pauli))
        rows.sort(key=lambda r: (r[0], r[1]))
        self._shot = np.array([r[0] for r in rows], dtype=np.int64)
        self._idx = np.array([r[1] for r in rows], dtype=np.int64)
        self._paulis = [r[2] for r in rows]

    def sample_step(self, kind, arity, m, shots, rng, loc_base=None, shot_ids=None) -> Hits:
        if kind == "IDLE" or not self._paulis:
            return Hits.empty(arity)
        if shot_ids is None:
            shot_ids = np.arange(shots)
        pos = np.searchsorted(shot_ids, self._shot)
        pos_c = np.minimum(pos, len(shot_ids) - 1)
        present = (pos < len(shot_ids)) & (shot_ids[pos_c] == self._shot)
        rel = self._idx - loc_base[pos_c]
        sel = np.flatnonzero(present & (rel >= 0) & (rel < m))
        if sel.size == 0:
            return Hits.empty(arity)
        xb = np.zeros((sel.size, arity), np.uint8)
        zb = np.zeros((sel.size, arity), np.uint8)
        for i, k in enumerate(sel):
            p = self._paulis[k]
            if p.n != arity:
                raise ConfigurationError(f"fault of width {p.n} at a {arity}-qubit {kind} location")
            if kind in MEASUREMENTS:
                xb[i] = 1 if (p.x or p.z) else 0
            else:
                xb[i], zb[i] = p.x_bits(), p.z_bits()
        return Hits(rel[sel], pos_c[sel], xb, zb)


# ---------------------------------------------------------------------------
# single-location operations


@dataclass(frozen=True)
class ErrorEvent:
    location: Location
    pauli: PauliOperator | None = None
    index: int | None = None
    # coherent events carry an angle instead of a Pauli
    theta: float | None = None

    def __post_init__(self):
        if self.pauli is not None and self.pauli.n != len(self.location.qubits):
            raise ValueError("error support must match the location's qubits")


def sample_depolarizing(location: Location, p: float, two_qubit_rule: str = "uniform15", rng=None) -> ErrorEvent | None:
    """One draw of the depolarizing channel at ``location`` (None = no error)."""
    if not 0 <= p <= 1:
        raise ConfigurationError(f"p={p} is not a probability")
    rng = rng if rng is not None else np.random.default_rng()
    arity = len(location.qubits)
    model = NoiseModel("depolarizing", p_gate=p, p_meas=p, p_idle=p, two_qubit_rule=two_qubit_rule)
    hits = model.sample_step(location.kind, arity, 1, 1, rng)
    if not hits:
        return None
    xb, zb = hits.xb[0], hits.zb[0]
    if location.kind in MEASUREMENTS:
        zb = np.zeros_like(xb)
    return ErrorEvent(location, PauliOperator.from_bits(xb, zb))


def sample_adversarial_locations(circuit: Circuit, p: float, rng, include_idle: bool = True) -> list[tuple[int, Location]]:
    """Each location of ``circuit`` (in execution order) is kept with probability ``p``."""
    if not 0 <= p <= 1:
        raise ConfigurationError(f"p={p} is not a probability")
    locs = [loc for _, loc in circuit.locations(include_idle=include_idle)]
    keep = bernoulli_indices(rng, len(locs), p)
    return [(int(i), locs[i]) for i in keep]


def _options(location: Location) -> list[PauliOperator]:
    arity = len(location.qubits)
    if location.kind in MEASUREMENTS:
        return [PauliOperator.from_label("X")]
    labels = ["".join(t) for t in itertools.product(_LETTERS, repeat=arity)]
    return [PauliOperator.from_label(lab) for lab in labels if set(lab) != {"I"}]


def _all_y(location: Location) -> PauliOperator:
    if location.kind in MEASUREMENTS:
        return PauliOperator.from_label("X")
    return PauliOperator.from_label("Y" * len(location.qubits))


def adversary_assign(
    locations: Sequence[tuple[int, Location] | Location],
    strategy: str = "all_Y_heuristic",
    oracle: Callable[[list[ErrorEvent]], float] | None = None,
    *,
    batch_oracle: Callable[[list[list[ErrorEvent]]], Sequence[float]] | None = None,
    max_locations: int = 6,
    allow_fallback: bool = True,
) -> list[ErrorEvent]:
    """Choose error types for already-chosen error locations.

    ``exhaustive_worst_case`` scores every joint Pauli assignment with the
    caller's failure oracle and returns the highest-scoring one; ties go to
    the lexicographically first assignment in enumeration order.
    ``batch_oracle`` scores a list of assignments in one call.
    """
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"strategy must be one of {STRATEGIES}")
    items = [(None, loc) if isinstance(loc, Location) else loc for loc in locations]
    if not items:
        return []
    if strategy == "exhaustive_worst_case" and len(items) > max_locations:
        if not allow_fallback:
            raise ConfigurationError(f"{len(items)} locations exceed the exhaustive bound of {max_locations}")
        warnings.warn(f"{len(items)} error locations > {max_locations}; using all_Y_heuristic", stacklevel=2)
        strategy = "all_Y_heuristic"
    if strategy == "all_Y_heuristic":
        return [ErrorEvent(loc, _all_y(loc), idx) for idx, loc in items]
    if oracle is None and batch_oracle is None:
        raise ConfigurationError("exhaustive_worst_case needs a failure oracle")
    candidates = [
        [ErrorEvent(loc, p, idx) for (idx, loc), p in zip(items, combo)]
        for combo in itertools.product(*(_options(loc) for _, loc in items))
    ]
    if batch_oracle is not None:
        scores = np.asarray(batch_oracle(candidates), dtype=float)
    else:
        scores = np.array([float(oracle(c)) for c in candidates])
    return candidates[int(np.argmax(scores))]


def apply_coherent(state, qubit: int, theta: float):
    """Over-rotate ``qubit`` by ``diag(1, e^{i theta})``; dense states only."""
    if not isinstance(state, DenseState):
        raise UnsupportedGateError("coherent errors need the dense backend")
    state.apply_1q(rz(theta), qubit)
    return state
