import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfock import DomainError, FockBasis, GramSeries, QMatrix, SizeError, gram_block, gram_naive, gram_recursive
from qfock.qgram import (
    apply_T_k,
    braid_residual,
    compose_word,
    deformed_inner,
    gram_positivity_report,
    inversions,
    phi,
    q_factorial,
    reduced_word,
    reduced_words,
)

from conftest import make_rng


def test_qmatrix_rejects_asymmetric_and_names_pair():
    with pytest.raises(DomainError, match=r"q\[0\]\[1\]"):
        QMatrix([[0.1, 0.2], [0.3, 0.1]])


def test_qmatrix_rejects_unit_modulus():
    with pytest.raises(DomainError, match="not < 1"):
        QMatrix([[1.0]])
    with pytest.raises(DomainError):
        QMatrix([[0.1, 0.2]])


def test_qmatrix_keeps_rationals():
    Q = QMatrix([["1/3", 0], [0, "-1/2"]])
    assert Q.exact_entries[0, 0] == Fraction(1, 3)
    assert Q.entries[1, 1] == -0.5
    assert not Q.is_constant and QMatrix.constant(3, 0.2).is_constant


def test_random_qmatrix_hits_qmax():
    Q = QMatrix.random(3, 0.9, make_rng(1))
    assert Q.qmax == pytest.approx(0.9)
    assert np.array_equal(Q.entries, Q.entries.T)


def test_swap_weights_on_level_two():
    Q = QMatrix([[0.3, -0.2], [-0.2, 0.7]])
    # basis order 00, 01, 10, 11
    expected = np.array(
        [
            [1.3, 0, 0, 0],
            [0, 1, -0.2, 0],
            [0, -0.2, 1, 0],
            [0, 0, 0, 1.7],
        ]
    )
    assert np.allclose(gram_recursive(Q, 2), expected, atol=1e-15)
    assert np.allclose(gram_naive(Q, 2), expected, atol=1e-15)


@pytest.mark.parametrize("q", [-0.7, 0.0, 0.4, 0.95])
def test_single_letter_gives_q_factorial(q):
    Q = QMatrix([[q]])
    for n in range(7):
        assert gram_recursive(Q, n)[0, 0] == pytest.approx(q_factorial(n, q), rel=1e-13)


def test_q_factorial_values():
    assert q_factorial(3, 0.5) == pytest.approx(1 * 1.5 * 1.75)
    assert q_factorial(4, 1.0) == 24
    assert q_factorial(0, 0.3) == 1


def test_free_case_is_identity():
    Q = QMatrix.constant(3, 0.0)
    for n in range(5):
        assert np.array_equal(gram_recursive(Q, n), np.eye(3**n))


def test_constant_q_trace_level_two():
    # tr P_2 = d^2 + q d (only the diagonal words are fixed by the swap)
    Q = QMatrix.constant(3, 0.25)
    assert np.trace(gram_recursive(Q, 2)) == pytest.approx(9 + 0.75)


def test_reduced_words_agree():
    Q = QMatrix.random(2, 0.8, make_rng(3))
    n = 4
    for perm in itertools.permutations(range(n)):
        words = reduced_words(perm)
        assert all(len(w) == inversions(perm) for w in words)
        assert all(compose_word(n, w) == perm for w in words)
        ref = phi(Q, n, words[0])
        for w in words[1:]:
            assert np.allclose(phi(Q, n, w), ref, atol=1e-14)


def test_reduced_word_roundtrip():
    for perm in itertools.permutations(range(4)):
        w = reduced_word(perm)
        assert compose_word(4, w) == perm and len(w) == inversions(perm)
    assert len(reduced_words((2, 1, 0))) == 2


def test_braid_relations_hold():
    Q = QMatrix.random(3, 0.9, make_rng(4))
    assert braid_residual(Q, 4) < 1e-14


def test_T_is_an_involution_up_to_weights():
    # T_k^2 multiplies e_a (x) e_b by q_ab^2
    Q = QMatrix([[0.5, 0.3], [0.3, -0.4]])
    v = np.eye(4)
    TT = apply_T_k(Q, 2, 1, apply_T_k(Q, 2, 1, v))
    assert np.allclose(np.diag(TT), [0.25, 0.09, 0.09, 0.16])


@pytest.mark.parametrize("seed", range(4))
def test_naive_matches_recursive(seed):
    rng = make_rng(seed)
    d = int(rng.integers(1, 4))
    Q = QMatrix.random(d, 0.9, rng)
    for n in range(5 if d == 3 else 6):
        assert np.max(np.abs(gram_naive(Q, n) - gram_recursive(Q, n))) < 1e-12


def test_exact_mode_is_rational_and_matches_float():
    Q = QMatrix([["1/3", "-1/5"], ["-1/5", "1/2"]])
    E = gram_block(Q, 3, exact=True).matrix
    assert isinstance(E[0, 0], Fraction)
    # e0 e0 e0 has norm [3]_q! with q = 1/3
    assert E[0, 0] == (1 + Fraction(1, 3)) * (1 + Fraction(1, 3) + Fraction(1, 9))
    assert all(E[a, b] == E[b, a] for a in range(8) for b in range(8))
    assert np.max(np.abs(E.astype(float) - gram_recursive(Q, 3))) < 1e-14
    N = gram_block(Q, 3, mode="naive", exact=True).matrix
    assert (N == E).all()


def test_size_limits():
    Q = QMatrix.constant(2, 0.1)
    with pytest.raises(SizeError):
        gram_naive(Q, 9)
    with pytest.raises(SizeError):
        gram_block(Q, 13, exact=True)
    with pytest.raises(SizeError):
        gram_block(QMatrix.constant(3, 0.1), 14)
    with pytest.raises(DomainError):
        gram_block(Q, 2, mode="other")


def test_gram_series_caches_blocks():
    Q = QMatrix.random(2, 0.7, make_rng(5))
    s = GramSeries(Q)
    blocks = s.blocks(5)
    assert blocks[3] is s.block(3)
    assert not blocks[3].flags.writeable
    assert np.allclose(blocks[5], gram_recursive(Q, 5))


def test_positivity_report():
    rep = gram_positivity_report(QMatrix.random(3, 0.95, make_rng(6)), 4)
    assert rep.ok and rep.flagged == []
    assert len(rep.mineigs) == 5 and rep.mineigs[0] == 1


def test_deformed_inner():
    Q = QMatrix.constant(2, 0.6)
    b = FockBasis(2, 3)
    x = b.vector({(0, 0): 1})
    assert deformed_inner(Q, b, x, x) == pytest.approx(1.6)
    y = b.vector({(0, 1): 1})
    z = b.vector({(1, 0): 1})
    assert deformed_inner(Q, b, y, z) == pytest.approx(0.6)
    with pytest.raises(DomainError):
        deformed_inner(Q, b, x[:3], x)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.floats(-0.95, 0.95), st.integers(0, 2**32 - 1))
def test_gram_hermitian_positive(d, qmax, seed):
    rng = make_rng(seed)
    Q = QMatrix.random(d, abs(qmax) + 1e-3 if abs(qmax) < 1e-3 else abs(qmax), rng)
    n = 3 if d == 3 else 4
    P = gram_recursive(Q, n)
    assert np.max(np.abs(P - P.T)) < 1e-12
    assert np.linalg.eigvalsh(P)[0] > 0
    b = FockBasis(d, n)
    u = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    v = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    assert deformed_inner(Q, b, u, v) == pytest.approx(np.conj(deformed_inner(Q, b, v, u)), abs=1e-9)
