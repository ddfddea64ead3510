import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfock import DomainError, FockBasis, SizeError, VACUUM, Word, enumerate_basis, index_word, word_index
from qfock.fock import all_words


def test_offsets_and_dimension():
    b = FockBasis(2, 3)
    assert b.offsets == (0, 1, 3, 7, 15)
    assert b.dim == 15
    assert [b.level_dim(n) for n in range(4)] == [1, 2, 4, 8]


def test_ordering_degree_then_lexicographic():
    b = enumerate_basis(2, 2)
    assert [w.letters for w in b.words()] == [(), (0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1)]


def test_vacuum_is_index_zero():
    b = FockBasis(3, 2)
    assert word_index(b, VACUUM) == 0
    assert index_word(b, 0) == VACUUM
    assert b.vacuum()[0] == 1 and b.vacuum().sum() == 1


def test_level_words_match_enumeration():
    b = FockBasis(3, 3)
    for n in range(4):
        words = b.level_words(n)
        assert words.shape == (3**n, n)
        for k, row in enumerate(words):
            assert word_index(b, tuple(row)) == b.offsets[n] + k


def test_degree_of_and_degrees():
    b = FockBasis(2, 3)
    assert [b.degree_of(k) for k in range(b.dim)] == list(b.degrees())
    assert list(b.degrees()[:4]) == [0, 1, 1, 2]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 4), st.data())
def test_index_roundtrip(d, N, data):
    b = FockBasis(d, N)
    k = data.draw(st.integers(0, b.dim - 1))
    w = index_word(b, k)
    assert word_index(b, w) == k
    assert w.degree == b.degree_of(k)


def test_vector_and_max_degree():
    b = FockBasis(2, 3)
    v = b.vector({(0, 1): 2.0, (): 1.0})
    assert v[word_index(b, (0, 1))] == 2 and v[0] == 1
    assert b.max_degree(v) == 2
    assert b.max_degree(b.zeros()) == -1
    assert b.max_degree(b.vector([(1, 1, 0)])) == 3


def test_errors():
    with pytest.raises(DomainError):
        FockBasis(0, 2)
    b = FockBasis(2, 2)
    with pytest.raises(DomainError):
        word_index(b, (0, 0, 0))
    with pytest.raises(DomainError):
        word_index(b, (2,))
    with pytest.raises(DomainError):
        Word((-1,))


def test_budget_refusal():
    with pytest.raises(SizeError):
        FockBasis(3, 14)
    with pytest.raises(SizeError):
        FockBasis(2, 5, budget=10)


def test_word_helpers():
    w = Word((0, 1, 2))
    assert w.degree == 3 and len(w) == 3
    assert w.reversed() == Word((2, 1, 0))
    assert len(list(all_words(2, 2))) == 7


def test_basis_equality_and_hash():
    assert FockBasis(2, 3) == FockBasis(2, 3)
    assert hash(FockBasis(2, 3)) == hash(FockBasis(2, 3))
    assert FockBasis(2, 3) != FockBasis(2, 4)


def test_level_view():
    b = FockBasis(2, 2)
    v = np.arange(b.dim, dtype=float)
    assert list(b.level(v, 1)) == [1.0, 2.0]
