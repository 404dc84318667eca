import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftlab.pauli import (
    HAMMING,
    DimensionError,
    PauliOperator,
    PreconditionError,
    codeword_parity,
    hamming_correct,
    hamming_syndrome,
    pauli_decompose,
    pauli_multiply,
    weight,
    word_to_string,
)

EVEN = ["0000000", "1111000", "1100110", "1010101", "0011110", "0101101", "0110011", "1001011"]
ODD = ["1111111", "0000111", "0011001", "0101010", "1100001", "1010010", "1001100", "0110100"]


@st.composite
def paulis(draw, n=None):
    n = draw(st.integers(1, 8)) if n is None else n
    full = (1 << n) - 1
    return PauliOperator(n, draw(st.integers(0, full)), draw(st.integers(0, full)), draw(st.integers(0, 3)))


@st.composite
def pauli_pairs(draw):
    n = draw(st.integers(1, 6))
    return draw(paulis(n)), draw(paulis(n))


def test_x_times_z_is_minus_i_y():
    xz = pauli_multiply(PauliOperator.from_label("X"), PauliOperator.from_label("Z"))
    assert xz.letters() == "Y"
    assert xz.label() == "-iY"
    np.testing.assert_allclose(xz.to_matrix(), -1j * np.array([[0, -1j], [1j, 0]]))


@pytest.mark.parametrize("label", ["X", "YZ", "-iXIZ", "ZZZZ"])
def test_identity_is_neutral(label):
    p = PauliOperator.from_label(label)
    assert pauli_multiply(PauliOperator.identity(p.n), p) == p
    assert pauli_multiply(p, PauliOperator.identity(p.n)) == p


def test_xz_squared():
    a = PauliOperator.from_label("XZ")
    sq = a * a
    assert sq.letters() == "II" and sq.phase == 0


def test_size_mismatch():
    with pytest.raises(DimensionError):
        pauli_multiply(PauliOperator.from_label("X"), PauliOperator.from_label("XX"))


@pytest.mark.parametrize("label,w", [("IIII", 0), ("XYIZ", 3), ("Y", 1), ("ZZZZZZZ", 7)])
def test_weight(label, w):
    assert weight(PauliOperator.from_label(label)) == w


def test_weight_of_codeword_x_mask():
    p = PauliOperator.from_bits([1, 1, 1, 1, 0, 0, 0], [0] * 7)
    assert weight(p) == 4


@settings(max_examples=300, deadline=None)
@given(pauli_pairs())
def test_product_matches_matrix_product(pair):
    a, b = pair
    np.testing.assert_allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(pauli_pairs())
def test_weight_subadditive_and_inverse(pair):
    a, b = pair
    assert weight(a * b) <= weight(a) + weight(b)
    assert (a * b) * b.inverse() == a


@settings(max_examples=200, deadline=None)
@given(pauli_pairs())
def test_commutation_matches_matrices(pair):
    a, b = pair
    ma, mb = a.to_matrix(), b.to_matrix()
    assert a.commutes(b) == np.allclose(ma @ mb, mb @ ma)


@settings(max_examples=100, deadline=None)
@given(paulis(), paulis())
def test_associativity(a, b):
    if a.n != b.n:
        return
    c = PauliOperator.from_label("Y" * a.n)
    assert (a * b) * c == a * (b * c)


def test_decompose_hadamard():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    np.testing.assert_allclose(pauli_decompose(h).as_tuple(), (0, 1 / np.sqrt(2), 0, 1 / np.sqrt(2)), atol=1e-15)


def test_decompose_identity():
    np.testing.assert_allclose(pauli_decompose(np.eye(2)).as_tuple(), (1, 0, 0, 0))


def test_decompose_rz():
    th = 0.2
    d = pauli_decompose(np.diag([1, np.exp(1j * th)]))
    assert d.alpha == pytest.approx(np.exp(1j * th / 2) * np.cos(th / 2), abs=1e-15)
    assert d.delta == pytest.approx(-1j * np.exp(1j * th / 2) * np.sin(th / 2), abs=1e-15)
    assert abs(d.beta) < 1e-15 and abs(d.gamma) < 1e-15


def test_decompose_rejects_non_2x2():
    with pytest.raises(DimensionError):
        pauli_decompose(np.eye(3))


def _random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_decompose_reconstructs_random_unitaries():
    rng = np.random.default_rng(12)
    for _ in range(10_000):
        u = _random_unitary(rng)
        d = pauli_decompose(u)
        assert np.max(np.abs(d.reconstruct() - u)) < 1e-12
        assert abs(d.norm2() - 1) < 1e-12


@pytest.mark.parametrize("word,syn", [("0000000", (0, 0, 0)), ("1111000", (0, 0, 0)), ("0001000", (1, 0, 0))])
def test_syndrome_examples(word, syn):
    assert hamming_syndrome(word) == syn


def test_syndrome_wrong_length():
    with pytest.raises(DimensionError):
        hamming_syndrome("101")


@pytest.mark.parametrize("word", EVEN + ODD)
def test_codewords_unchanged(word):
    fixed, pos = hamming_correct(word)
    assert word_to_string(fixed) == word and pos is None


def test_single_flip_example():
    fixed, pos = hamming_correct("1111001")
    assert word_to_string(fixed) == "1111000" and pos == 7


def test_weight_two_miscorrects():
    fixed, pos = hamming_correct("1100000")
    assert word_to_string(fixed) != "0000000"
    assert hamming_syndrome(fixed) == (0, 0, 0)


@pytest.mark.parametrize("word,parity", [("0000000", 0), ("1111111", 1), ("1010101", 0)])
def test_parity(word, parity):
    assert codeword_parity(word) == parity


def test_parity_needs_codeword():
    with pytest.raises(PreconditionError):
        codeword_parity("1000000")


def test_code_tables_match_listed_words():
    assert HAMMING.codewords(parity=0) == sorted(EVEN)
    assert HAMMING.codewords(parity=1) == sorted(ODD)
    assert not (HAMMING.generator @ HAMMING.parity_check.T % 2).any()
    cols = {tuple(c) for c in HAMMING.parity_check.T}
    assert len(cols) == 7 and (0, 0, 0) not in cols


def test_all_words_exhaustive():
    code = set(EVEN + ODD)
    for bits in itertools.product("01", repeat=7):
        w = "".join(bits)
        assert (hamming_syndrome(w) == (0, 0, 0)) == (w in code)
        near = [c for c in code if sum(a != b for a, b in zip(c, w)) <= 1]
        if near:
            assert word_to_string(hamming_correct(w)[0]) == near[0]


def test_single_flip_syndromes_distinct():
    syns = set()
    for pos in range(7):
        w = ["0"] * 7
        w[pos] = "1"
        fixed, found = hamming_correct("".join(w))
        assert found == pos + 1
        syns.add(hamming_syndrome("".join(w)))
    assert len(syns) == 7
