"""Exact state-vector simulation for small registers (verification oracle).

Qubit 0 is the most significant tensor factor, so basis index ``b1 b2 ... bn``
in ket order equals the binary number read left to right.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .pauli import PauliOperator

MAX_QUBITS = 24

_SQ2 = 1 / np.sqrt(2)
SINGLE_QUBIT = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "S": np.diag([1, 1j]).astype(complex),
    "S_DAG": np.diag([1, -1j]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
}


_DIAGONAL = {"Z": -1, "S": 1j, "S_DAG": -1j, "T": np.exp(1j * np.pi / 4)}
_PERM_CACHE: dict = {}
_HAD_CACHE: dict = {}


def _cnot_permutation(n: int, pairs: tuple) -> np.ndarray:
    key = (n, pairs)
    if key not in _PERM_CACHE:
        if len(_PERM_CACHE) > 256:
            _PERM_CACHE.clear()
        idx = np.arange(2**n, dtype=np.int64)
        src = idx.copy()
        for c, t in pairs:
            src ^= ((idx >> (n - 1 - c)) & 1) << (n - 1 - t)
        _PERM_CACHE[key] = src
    return _PERM_CACHE[key]


def _hadamard_k(k: int) -> np.ndarray:
    if k not in _HAD_CACHE:
        h = np.array([[1.0]])
        for _ in range(k):
            h = np.kron(h, SINGLE_QUBIT["H"].real)
        _HAD_CACHE[k] = h
    return _HAD_CACHE[k]


def rz(theta: float) -> np.ndarray:
    """``diag(1, e^{i theta})`` -- the over-rotation used for coherent noise."""
    return np.diag([1, np.exp(1j * theta)])


class DenseState:
    def __init__(self, n: int, amplitudes=None):
        if not 0 <= n <= MAX_QUBITS:
            raise DimensionError(f"dense backend supports 0..{MAX_QUBITS} qubits, got {n}")
        self.n = n
        if amplitudes is None:
            psi = np.zeros(2**n, dtype=complex)
            psi[0] = 1
        else:
            psi = np.array(amplitudes, dtype=complex).ravel()
            if psi.size != 2**n:
                raise DimensionError(f"need {2**n} amplitudes, got {psi.size}")
        self.psi = psi

    @classmethod
    def from_bitstring(cls, bits: str) -> DenseState:
        st = cls(len(bits))
        st.psi[:] = 0
        st.psi[int(bits, 2) if bits else 0] = 1
        return st

    def copy(self) -> DenseState:
        return DenseState(self.n, self.psi.copy())

    def norm(self) -> float:
        return float(np.vdot(self.psi, self.psi).real)

    def _check(self, *qubits: int) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise DimensionError(f"qubit {q} out of range for {self.n} qubits")

    def _split(self, q: int) -> np.ndarray:
        return self.psi.reshape(2**q, 2, 2 ** (self.n - q - 1))

    def apply_1q(self, u: np.ndarray, q: int) -> None:
        self._check(q)
        v = self._split(q)
        a0, a1 = v[:, 0, :].copy(), v[:, 1, :].copy()
        v[:, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
        v[:, 1, :] = u[1, 0] * a0 + u[1, 1] * a1

    def apply_named(self, kind: str, q: int) -> None:
        self._check(q)
        v = self._split(q)
        if kind in _DIAGONAL:
            v[:, 1, :] *= _DIAGONAL[kind]
        elif kind == "X":
            v[:] = v[:, ::-1, :].copy()
        elif kind == "H":
            a0 = v[:, 0, :].copy()
            v[:, 0, :] += v[:, 1, :]
            v[:, 1, :] = a0 - v[:, 1, :]
            v *= _SQ2
        else:
            self.apply_1q(SINGLE_QUBIT[kind], q)

    def apply_pauli(self, p) -> None:
        """Apply ``i**phase * prod_j X_j**x_j Z_j**z_j`` (a :class:`PauliOperator`)."""
        if p.n != self.n:
            raise DimensionError(f"{p.n}-qubit Pauli on a {self.n}-qubit state")
        xb, zb = p.x_bits(), p.z_bits()
        for j in range(self.n):
            if zb[j]:
                self.apply_named("Z", j)
            if xb[j]:
                self.apply_named("X", j)
        if p.phase % 4:
            self.psi = self.psi * (1j ** (p.phase % 4))

    def cnot(self, c: int, t: int) -> None:
        if c == t:
            raise DimensionError("CNOT needs two distinct qubits")
        self.cnot_many([(c, t)])

    def cnot_many(self, pairs) -> None:
        """Disjoint CNOTs ``(control, target)`` applied as one index permutation."""
        pairs = [(int(c), int(t)) for c, t in pairs]
        self._check(*[q for pr in pairs for q in pr])
        self.psi = self.psi[_cnot_permutation(self.n, tuple(pairs))]

    def joint_distribution(self, qubits, basis: str = "Z") -> tuple[np.ndarray, np.ndarray]:
        """Amplitudes regrouped as ``(outcome, rest)`` in the measured basis, and outcome probabilities."""
        qubits = [int(q) for q in qubits]
        self._check(*qubits)
        k = len(qubits)
        t = np.moveaxis(self.psi.reshape((2,) * self.n), qubits, range(k)).reshape(2**k, -1)
        if basis == "X":
            t = _hadamard_k(k) @ t
        probs = np.einsum("ij,ij->i", t.real, t.real) + np.einsum("ij,ij->i", t.imag, t.imag)
        return t, probs / probs.sum()

    def project(self, qubits, t: np.ndarray, probs: np.ndarray, outcome: int, basis: str = "Z",
                remove: bool = False) -> DenseState:
        """State after reading ``outcome`` (from :meth:`joint_distribution`); optionally drop the qubits."""
        qubits = [int(q) for q in qubits]
        k = len(qubits)
        rest = t[outcome] / np.sqrt(probs[outcome])
        if remove:
            return DenseState(self.n - k, np.ascontiguousarray(rest))
        kept = np.zeros_like(t)
        kept[outcome] = rest
        if basis == "X":
            kept = _hadamard_k(k) @ kept
        back = np.moveaxis(kept.reshape((2,) * self.n), range(k), qubits)
        return DenseState(self.n, np.ascontiguousarray(back).ravel())

    def measure_many(self, qubits, rng: np.random.Generator, basis: str = "Z") -> np.ndarray:
        """Jointly measure ``qubits`` in one basis; same statistics as measuring them in turn."""
        t, probs = self.joint_distribution(qubits, basis)
        outcome = int(rng.choice(probs.size, p=probs))
        self.psi = self.project(qubits, t, probs, outcome, basis).psi
        k = len(qubits)
        return np.array([(outcome >> (k - 1 - j)) & 1 for j in range(k)], dtype=np.uint8)

    def prob_one(self, q: int) -> float:
        self._check(q)
        return float(np.sum(np.abs(self._split(q)[:, 1, :]) ** 2))

    def measure_z(self, q: int, rng: np.random.Generator | None = None, forced: int | None = None) -> int:
        p1 = self.prob_one(q)
        if forced is None:
            if p1 < 1e-12:
                forced = 0
            elif p1 > 1 - 1e-12:
                forced = 1
            else:
                if rng is None:
                    raise ValueError("random measurement outcome needs an rng")
                forced = int(rng.random() < p1)
        prob = p1 if forced else 1 - p1
        if prob < 1e-15:
            raise ValueError(f"forced outcome {forced} has zero probability")
        v = self._split(q)
        v[:, 1 - forced, :] = 0
        self.psi /= np.sqrt(prob)
        return int(forced)

    def measure_x(self, q: int, rng=None, forced: int | None = None) -> int:
        self.apply_named("H", q)
        out = self.measure_z(q, rng, forced)
        self.apply_named("H", q)
        return out

    def tensor(self, other: DenseState) -> DenseState:
        """Append ``other``'s qubits after this state's qubits (in place)."""
        if self.n + other.n > MAX_QUBITS:
            raise DimensionError(f"dense register would exceed {MAX_QUBITS} qubits")
        self.psi = np.kron(self.psi, other.psi)
        self.n += other.n
        return self

    def remove(self, q: int, value: int, basis: str = "Z") -> None:
        """Drop qubit ``q``, known to be in the ``basis`` eigenstate labelled ``value``."""
        self._check(q)
        v = self._split(q)
        if basis == "Z":
            rest = v[:, value, :]
        else:
            sign = -1 if value else 1
            rest = (v[:, 0, :] + sign * v[:, 1, :]) * _SQ2
        self.psi = np.ascontiguousarray(rest).ravel()
        self.n -= 1

    def permuted(self, order) -> DenseState:
        """State whose qubit ``j`` is this state's qubit ``order[j]``."""
        order = list(order)
        if sorted(order) != list(range(self.n)):
            raise DimensionError("order must be a permutation of the qubits")
        tens = self.psi.reshape((2,) * self.n) if self.n else self.psi
        return DenseState(self.n, np.transpose(tens, order).ravel() if self.n else tens.copy())


def dense_fidelity(a: DenseState, b: DenseState) -> float:
    """``|<a|b>|^2`` -- insensitive to global phase."""
    if a.n != b.n:
        raise DimensionError(f"fidelity between {a.n}- and {b.n}-qubit states")
    return float(min(1.0, abs(np.vdot(a.psi, b.psi)) ** 2))
