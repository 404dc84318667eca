"""Bit-packed stabilizer tableau (destabilizer/stabilizer form).

Rows ``0..n-1`` are destabilizers, rows ``n..2n-1`` stabilizers.  Each row
stores its X and Z parts as little-endian ``uint64`` words, so row products
and commutation checks are word-level bit operations plus popcounts.  Row
letters follow the usual tableau convention where ``x=z=1`` reads as ``Y``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .pauli import PauliOperator

_ONE = np.uint64(1)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a ``(rows, n)`` 0/1 array into ``(rows, ceil(n/64))`` uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    rows, n = bits.shape
    width = max(1, -(-n // 64))
    padded = np.zeros((rows, width * 64), dtype=np.uint8)
    padded[:, :n] = bits
    return np.ascontiguousarray(np.packbits(padded, axis=1, bitorder="little")).view(np.uint64)


def unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype=np.uint64)
    return np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")[:, :n]


def _popcount_rows(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


class StabilizerTableau:
    """Clifford state on ``n`` qubits, initialised to ``|0...0>``."""

    def __init__(self, n: int):
        if n < 0:
            raise DimensionError("negative qubit count")
        self.n = n
        w = max(1, -(-n // 64))
        self.x = np.zeros((2 * n, w), dtype=np.uint64)
        self.z = np.zeros((2 * n, w), dtype=np.uint64)
        self.r = np.zeros(2 * n, dtype=np.uint64)
        for q in range(n):
            word, bit = divmod(q, 64)
            self.x[q, word] |= _ONE << np.uint64(bit)
            self.z[n + q, word] |= _ONE << np.uint64(bit)

    def copy(self) -> StabilizerTableau:
        other = StabilizerTableau.__new__(StabilizerTableau)
        other.n = self.n
        other.x, other.z, other.r = self.x.copy(), self.z.copy(), self.r.copy()
        return other

    # -- column access ---------------------------------------------------

    def _check(self, *qubits: int) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise DimensionError(f"qubit {q} out of range for {self.n} qubits")

    @staticmethod
    def _wb(q: int) -> tuple[int, np.uint64]:
        word, bit = divmod(q, 64)
        return word, np.uint64(bit)

    def _cols(self, q: int):
        w, b = self._wb(q)
        return (self.x[:, w] >> b) & _ONE, (self.z[:, w] >> b) & _ONE, w, b

    # -- gates -----------------------------------------------------------

    def h(self, q: int) -> None:
        self._check(q)
        xq, zq, w, b = self._cols(q)
        self.r ^= xq & zq
        d = (xq ^ zq) << b
        self.x[:, w] ^= d
        self.z[:, w] ^= d

    def s(self, q: int) -> None:
        self._check(q)
        xq, zq, w, b = self._cols(q)
        self.r ^= xq & zq
        self.z[:, w] ^= xq << b

    def s_dag(self, q: int) -> None:
        self._check(q)
        xq, zq, w, b = self._cols(q)
        self.r ^= xq & (zq ^ _ONE)
        self.z[:, w] ^= xq << b

    def pauli_x(self, q: int) -> None:
        self._check(q)
        _, zq, _, _ = self._cols(q)
        self.r ^= zq

    def pauli_z(self, q: int) -> None:
        self._check(q)
        xq, _, _, _ = self._cols(q)
        self.r ^= xq

    def pauli_y(self, q: int) -> None:
        self._check(q)
        xq, zq, _, _ = self._cols(q)
        self.r ^= xq ^ zq

    def cnot(self, c: int, t: int) -> None:
        self._check(c, t)
        if c == t:
            raise DimensionError("CNOT control equals target")
        xc, zc, wc, bc = self._cols(c)
        xt, zt, wt, bt = self._cols(t)
        self.r ^= xc & zt & (xt ^ zc ^ _ONE)
        self.x[:, wt] ^= xc << bt
        self.z[:, wc] ^= zt << bc

    def apply_pauli(self, p: PauliOperator) -> None:
        """Conjugate by ``p``: only sign bits change (global phase dropped)."""
        if p.n != self.n:
            raise DimensionError(f"{p.n}-qubit Pauli on {self.n}-qubit tableau")
        px = pack_bits(p.x_bits()[None, :])[0]
        pz = pack_bits(p.z_bits()[None, :])[0]
        anti = (_popcount_rows(self.x & pz) + _popcount_rows(self.z & px)) & 1
        self.r ^= anti.astype(np.uint64)

    # -- measurement -----------------------------------------------------

    def _rowsum(self, targets: np.ndarray, src: int) -> None:
        """Replace each target row ``h`` by the product ``row[src] * row[h]``."""
        x1, z1 = self.x[src], self.z[src]
        x2, z2 = self.x[targets], self.z[targets]
        self.r[targets] = self._product_sign(x1, z1, self.r[src], x2, z2, self.r[targets])
        self.x[targets] = x2 ^ x1
        self.z[targets] = z2 ^ z1

    @staticmethod
    def _product_sign(x1, z1, r1, x2, z2, r2):
        xo1, yo1, zo1 = x1 & ~z1, x1 & z1, ~x1 & z1
        xo2, yo2, zo2 = x2 & ~z2, x2 & z2, ~x2 & z2
        plus = (yo1 & zo2) | (xo1 & yo2) | (zo1 & xo2)
        minus = (yo1 & xo2) | (xo1 & zo2) | (zo1 & yo2)
        tot = 2 * r1.astype(np.int64) + 2 * r2.astype(np.int64) + _popcount_rows(plus) - _popcount_rows(minus)
        return ((tot % 4) // 2).astype(np.uint64)

    def is_deterministic(self, q: int) -> bool:
        self._check(q)
        xq, _, _, _ = self._cols(q)
        return not xq[self.n:].any()

    def measure_z(self, q: int, rng: np.random.Generator | None = None, forced: int | None = None) -> int:
        """Projective Z measurement.  Random outcomes draw from ``rng`` unless ``forced``."""
        self._check(q)
        n = self.n
        xq, _, w, b = self._cols(q)
        hits = np.flatnonzero(xq[n:]) + n
        if hits.size:
            p = int(hits[0])
            others = np.flatnonzero(xq)
            others = others[others != p]
            if others.size:
                self._rowsum(others, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, w] = _ONE << b
            if forced is None:
                if rng is None:
                    raise ValueError("random measurement outcome needs an rng")
                forced = int(rng.integers(2))
            self.r[p] = np.uint64(forced)
            return int(forced)
        sx = np.zeros(self.x.shape[1], dtype=np.uint64)
        sz = np.zeros_like(sx)
        sr = np.zeros(1, dtype=np.uint64)
        for i in np.flatnonzero(xq[:n]):
            row = i + n
            sr = self._product_sign(self.x[row], self.z[row], self.r[row:row + 1], sx[None, :], sz[None, :], sr)
            sx ^= self.x[row]
            sz ^= self.z[row]
        return int(sr[0])

    def measure_x(self, q: int, rng=None, forced: int | None = None) -> int:
        self.h(q)
        out = self.measure_z(q, rng, forced)
        self.h(q)
        return out

    def reset(self, q: int, rng: np.random.Generator) -> None:
        if self.measure_z(q, rng):
            self.pauli_x(q)

    # -- structure -------------------------------------------------------

    def extend(self, k: int) -> None:
        """Append ``k`` fresh qubits in ``|0>``."""
        if k <= 0:
            return
        n, m = self.n, self.n + k
        xb = unpack_bits(self.x, n)
        zb = unpack_bits(self.z, n)
        new_x = np.zeros((2 * m, m), dtype=np.uint8)
        new_z = np.zeros((2 * m, m), dtype=np.uint8)
        new_r = np.zeros(2 * m, dtype=np.uint64)
        new_x[:n, :n], new_z[:n, :n], new_r[:n] = xb[:n], zb[:n], self.r[:n]
        new_x[m:m + n, :n], new_z[m:m + n, :n], new_r[m:m + n] = xb[n:], zb[n:], self.r[n:]
        for j in range(n, m):
            new_x[j, j] = 1
            new_z[m + j, j] = 1
        self.n = m
        self.x, self.z, self.r = pack_bits(new_x), pack_bits(new_z), new_r

    def row(self, i: int) -> PauliOperator:
        xb = unpack_bits(self.x[i:i + 1], self.n)[0]
        zb = unpack_bits(self.z[i:i + 1], self.n)[0]
        n_y = int((xb & zb).sum())
        return PauliOperator.from_bits(xb, zb, phase=2 * int(self.r[i]) + n_y)

    def stabilizers(self) -> list[PauliOperator]:
        return [self.row(self.n + i) for i in range(self.n)]

    def destabilizers(self) -> list[PauliOperator]:
        return [self.row(i) for i in range(self.n)]

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` if the symplectic structure is broken."""
        n = self.n
        xb = unpack_bits(self.x, n).astype(np.int64)
        zb = unpack_bits(self.z, n).astype(np.int64)
        omega = (xb @ zb.T + zb @ xb.T) % 2
        if omega[n:, n:].any():
            raise AssertionError("stabilizer rows do not commute")
        if omega[:n, :n].any():
            raise AssertionError("destabilizer rows do not commute")
        if not np.array_equal(omega[:n, n:], np.eye(n, dtype=np.int64)):
            raise AssertionError("destabilizer/stabilizer pairing broken")
