"""Pauli-group algebra, single-qubit Pauli decomposition and the [7,4] Hamming code.

Bit-vector convention used throughout the package: position 1 is the leftmost
character of a ket string and maps to bit index 0 of the integer masks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionError, PreconditionError

__all__ = [
    "DimensionError",
    "PreconditionError",
    "PauliOperator",
    "PauliDecomposition",
    "HammingCode",
    "HAMMING",
    "pauli_multiply",
    "weight",
    "pauli_decompose",
    "hamming_syndrome",
    "hamming_correct",
    "codeword_parity",
    "word_from_string",
    "word_to_string",
]


I2 = np.eye(2, dtype=complex)
X2 = np.array([[0, 1], [1, 0]], dtype=complex)
Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
_PHASES = (1, 1j, -1, -1j)


@dataclass(frozen=True)
class PauliOperator:
    """``i**phase * X^x Z^z`` on ``n`` qubits.

    ``x`` and ``z`` are integer bit masks (bit ``j`` is qubit ``j``).  A ``Y``
    factor is stored as ``x=z=1`` together with one extra power of ``i``,
    since ``Y = iXZ``.
    """

    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise DimensionError("negative qubit count")
        full = (1 << self.n) - 1
        if self.x & ~full or self.z & ~full:
            raise DimensionError(f"mask wider than {self.n} qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def identity(cls, n: int) -> PauliOperator:
        return cls(n)

    @classmethod
    def from_label(cls, label: str) -> PauliOperator:
        """Parse strings such as ``"XIZY"``, ``"-iZZ"`` or ``"+XX"``."""
        coeff = 0
        body = label
        for prefix, ph in (("+i", 1), ("-i", 3), ("i", 1), ("+", 0), ("-", 2)):
            if body.startswith(prefix):
                coeff, body = ph, body[len(prefix):]
                break
        x = z = 0
        n_y = 0
        for j, ch in enumerate(body):
            if ch in "XY":
                x |= 1 << j
            if ch in "ZY":
                z |= 1 << j
            if ch == "Y":
                n_y += 1
            elif ch not in "IXZ":
                raise ValueError(f"bad Pauli letter {ch!r} in {label!r}")
        return cls(len(body), x, z, coeff + n_y)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> PauliOperator:
        """A single-qubit Pauli ``letter`` acting on ``qubit`` (0-based)."""
        if not 0 <= qubit < n:
            raise DimensionError(f"qubit {qubit} out of range for n={n}")
        return cls.from_label("I" * qubit + letter + "I" * (n - qubit - 1))

    @classmethod
    def from_bits(cls, xbits, zbits, phase: int = 0) -> PauliOperator:
        xbits = [int(b) & 1 for b in xbits]
        zbits = [int(b) & 1 for b in zbits]
        if len(xbits) != len(zbits):
            raise DimensionError("x and z bit vectors differ in length")
        x = sum(b << j for j, b in enumerate(xbits))
        z = sum(b << j for j, b in enumerate(zbits))
        return cls(len(xbits), x, z, phase)

    def x_bits(self) -> np.ndarray:
        return np.array([(self.x >> j) & 1 for j in range(self.n)], dtype=np.uint8)

    def z_bits(self) -> np.ndarray:
        return np.array([(self.z >> j) & 1 for j in range(self.n)], dtype=np.uint8)

    @property
    def n_y(self) -> int:
        return (self.x & self.z).bit_count()

    def letters(self) -> str:
        out = []
        for j in range(self.n):
            bx, bz = (self.x >> j) & 1, (self.z >> j) & 1
            out.append("IZXY"[2 * bx + bz])
        return "".join(out)

    def label(self) -> str:
        """Signed letter form, e.g. ``-iY`` for the product ``X*Z``."""
        coeff = (self.phase - self.n_y) % 4
        return ("+", "+i", "-", "-i")[coeff] + self.letters()

    def __str__(self) -> str:
        return self.label()

    def __mul__(self, other: PauliOperator) -> PauliOperator:
        return pauli_multiply(self, other)

    def inverse(self) -> PauliOperator:
        # (X^x Z^z)^-1 = Z^z X^x = (-1)^{|x&z|} X^x Z^z
        return PauliOperator(self.n, self.x, self.z, -self.phase + 2 * self.n_y)

    def commutes(self, other: PauliOperator) -> bool:
        if self.n != other.n:
            raise DimensionError("size mismatch")
        return ((self.x & other.z).bit_count() + (self.z & other.x).bit_count()) % 2 == 0

    def support(self) -> list[int]:
        return [j for j in range(self.n) if ((self.x | self.z) >> j) & 1]

    def restricted(self, qubits) -> PauliOperator:
        """Pauli acting on ``qubits`` (in that order) with the same letters."""
        xb = [(self.x >> q) & 1 for q in qubits]
        zb = [(self.z >> q) & 1 for q in qubits]
        sub = PauliOperator.from_bits(xb, zb)
        return PauliOperator(sub.n, sub.x, sub.z, self.phase)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix; qubit 0 is the most significant factor."""
        mats = []
        for j in range(self.n):
            bx, bz = (self.x >> j) & 1, (self.z >> j) & 1
            m = I2
            if bx:
                m = X2
            if bz:
                m = m @ Z2
            mats.append(m)
        base = reduce(np.kron, mats, np.ones((1, 1), dtype=complex))
        return _PHASES[self.phase] * base


def pauli_multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    """Group product ``a*b`` with the power of ``i`` tracked exactly."""
    if a.n != b.n:
        raise DimensionError(f"cannot multiply {a.n}-qubit and {b.n}-qubit Paulis")
    # X^a1 Z^b1 X^a2 Z^b2 = (-1)^{|b1 & a2|} X^(a1^a2) Z^(b1^b2)
    sign = 2 * (a.z & b.x).bit_count()
    return PauliOperator(a.n, a.x ^ b.x, a.z ^ b.z, a.phase + b.phase + sign)


def weight(p: PauliOperator) -> int:
    return (p.x | p.z).bit_count()


@dataclass(frozen=True)
class PauliDecomposition:
    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def as_tuple(self) -> tuple[complex, complex, complex, complex]:
        return (self.alpha, self.beta, self.gamma, self.delta)

    def norm2(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.as_tuple()))

    def reconstruct(self) -> np.ndarray:
        return self.alpha * I2 + self.beta * X2 + self.gamma * Y2 + self.delta * Z2


def pauli_decompose(u) -> PauliDecomposition:
    """Coefficients of ``u`` in the basis ``I, X, Y, Z`` (trace inner product)."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise DimensionError(f"expected a 2x2 matrix, got shape {u.shape}")
    return PauliDecomposition(
        alpha=np.trace(u) / 2,
        beta=np.trace(X2 @ u) / 2,
        gamma=np.trace(Y2 @ u) / 2,
        delta=np.trace(Z2 @ u) / 2,
    )


def word_from_string(s: str) -> np.ndarray:
    if any(ch not in "01" for ch in s):
        raise ValueError(f"not a bit string: {s!r}")
    return np.array([int(ch) for ch in s], dtype=np.uint8)


def word_to_string(word) -> str:
    return "".join(str(int(b)) for b in word)


class HammingCode:
    """The [7,4] Hamming code with rows 1111000, 1100110, 1010101 as parity checks.

    The three check rows also generate the even-weight subcode, so the
    logical-zero words of the 7-qubit code are exactly the kernel words of
    even weight.
    """

    CHECK_ROWS = ("1111000", "1100110", "1010101")

    def __init__(self):
        self.parity_check = np.array([word_from_string(r) for r in self.CHECK_ROWS], dtype=np.uint8)
        # generator: even subcode rows plus the all-ones word
        self.generator = np.vstack([self.parity_check, np.ones((1, 7), dtype=np.uint8)])
        # syndrome (as integer s1*4+s2*2+s3) -> 1-based position, 0 for none
        table = np.zeros(8, dtype=np.int64)
        for pos in range(1, 8):
            col = self.parity_check[:, pos - 1]
            table[int(col[0]) * 4 + int(col[1]) * 2 + int(col[2])] = pos
        self.position_of = table
        self.syndrome_table = {
            tuple(int(b) for b in format(s, "03b")): (int(table[s]) or None) for s in range(8)
        }
        self._weights = np.array([4, 2, 1], dtype=np.int64)

    def codewords(self, parity: int | None = None) -> list[str]:
        words = []
        for m in range(16):
            coeffs = np.array([(m >> k) & 1 for k in range(4)], dtype=np.uint8)
            w = coeffs @ self.generator % 2
            if parity is None or int(w.sum()) % 2 == parity:
                words.append(word_to_string(w))
        return sorted(words)

    def syndrome_index(self, words) -> np.ndarray:
        """Vectorised syndromes of ``words`` (shape ``(..., 7)``) as integers 0..7."""
        words = np.asarray(words, dtype=np.int64)
        s = words @ self.parity_check.T.astype(np.int64) % 2
        return s @ self._weights


HAMMING = HammingCode()


def _as_word(word) -> np.ndarray:
    if isinstance(word, str):
        word = word_from_string(word)
    w = np.asarray(word, dtype=np.uint8).ravel()
    if w.shape != (7,):
        raise DimensionError(f"expected a 7-bit word, got length {w.size}")
    if np.any(w > 1):
        raise ValueError("word entries must be 0 or 1")
    return w


def hamming_syndrome(word) -> tuple[int, int, int]:
    w = _as_word(word)
    s = HAMMING.parity_check @ w % 2
    return (int(s[0]), int(s[1]), int(s[2]))


def hamming_correct(word) -> tuple[np.ndarray, int | None]:
    """Flip the bit named by the syndrome.  Weight-2 corruptions miscorrect."""
    w = _as_word(word).copy()
    pos = HAMMING.syndrome_table[hamming_syndrome(w)]
    if pos is not None:
        w[pos - 1] ^= 1
    return w, pos


def codeword_parity(word) -> int:
    w = _as_word(word)
    if any(hamming_syndrome(w)):
        raise PreconditionError(f"{word_to_string(w)} is not a Hamming codeword; correct it first")
    return int(w.sum()) % 2
