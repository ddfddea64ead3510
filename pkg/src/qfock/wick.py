"""Wick products, the word-reversal conjugation and commutant checks.

``W(xi)`` is built by the vacuum recursion

    W(Omega) = 1,    W(e (x) eta) = W(e) W(eta) - W(l*(I e) eta),

with ``W(e) = l(e) + l*(I e)``; applied to the vacuum the two annihilation
terms cancel, leaving ``W(xi) Omega = xi``.  The right products use either
the conjugation ``J W(J xi) J`` (mixed models, where ``J`` reverses words) or
the mirror recursion with ``r``, ``r*`` and ``I_r``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import TruncationError, UnsupportedModeError
from .fock import FockBasis, Word, index_word
from .operators import BlockOperator, FockModel, product, reversal_permutation
from .report import CheckReport, residual_check

VACUUM_TOL = 1e-10
CROSSING_TOL = 1e-9
COMMUTANT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class WickOp:
    word: np.ndarray
    operator: BlockOperator
    side: str

    def __matmul__(self, other):
        return self.operator @ other


def conjugate_J(basis: FockBasis, xi: np.ndarray) -> np.ndarray:
    """Reverse every word and conjugate the coefficients."""
    perm = _reversal(basis)
    return np.conj(np.asarray(xi))[perm]


_REV: dict = {}


def _reversal(basis: FockBasis) -> np.ndarray:
    if basis not in _REV:
        _REV[basis] = reversal_permutation(basis)
    return _REV[basis]


def conjugate_operator_J(op: BlockOperator) -> BlockOperator:
    """``J X J`` as a linear operator (``J`` is antilinear)."""
    perm = _reversal(op.basis)
    m = op.matrix.conj()[perm][:, perm].tocsr()
    return BlockOperator(op.basis, m, op.shift_min, op.shift_max, op.headroom, f"J{op.label}J")


def _terms(basis: FockBasis, v: np.ndarray, tol: float = 0.0):
    for k in np.nonzero(np.abs(v) > tol)[0]:
        yield index_word(basis, int(k)).letters, v[k]


def _memo(model: FockModel, key: str) -> dict:
    store = model.__dict__.setdefault("_wick_memo", {})
    return store.setdefault(key, {})


def _check_headroom(model: FockModel, xi: np.ndarray):
    deg = model.basis.max_degree(xi)
    if deg > model.N - 1:
        raise TruncationError(f"Wick product of degree {deg} needs N >= {deg + 1}, have N={model.N}")


def wick_word(model: FockModel, letters: tuple[int, ...]) -> BlockOperator:
    memo = _memo(model, "left")
    if letters in memo:
        return memo[letters]
    basis = model.basis
    if not letters:
        op = BlockOperator.identity(basis, "W()")
    else:
        a, rest = letters[0], letters[1:]
        e = model.letter(a)
        op = model.field(e, "left") @ wick_word(model, rest)
        if rest:
            lowered = model.left_annihilation(model.conj_left(e)).matrix @ basis.vector({rest: 1})
            for w, c in _terms(basis, lowered):
                op = op - c * wick_word(model, w)
    op = BlockOperator(basis, op.matrix, op.shift_min, op.shift_max, op.headroom, f"W{letters}")
    memo[letters] = op
    return op


def right_wick_word(model: FockModel, letters: tuple[int, ...]) -> BlockOperator:
    memo = _memo(model, "right")
    if letters in memo:
        return memo[letters]
    basis = model.basis
    if not letters:
        op = BlockOperator.identity(basis, "Wr()")
    else:
        rest, a = letters[:-1], letters[-1]
        e = model.letter(a)
        op = model.field(e, "right") @ right_wick_word(model, rest)
        if rest:
            lowered = model.right_annihilation(model.conj_right(e)).matrix @ basis.vector({rest: 1})
            for w, c in _terms(basis, lowered):
                op = op - c * right_wick_word(model, w)
    op = BlockOperator(basis, op.matrix, op.shift_min, op.shift_max, op.headroom, f"Wr{letters}")
    memo[letters] = op
    return op


def _combine(basis: FockBasis, xi: np.ndarray, word_op, label: str) -> BlockOperator:
    mat = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    lo, hi, h = 0, 0, 0
    for w, c in _terms(basis, xi):
        op = word_op(w)
        mat = mat + c * op.matrix
        lo, hi, h = min(lo, op.shift_min), max(hi, op.shift_max), max(h, op.headroom)
    return BlockOperator(basis, mat.tocsr(), lo, hi, h, label)


def wick(model: FockModel, xi: np.ndarray) -> WickOp:
    xi = np.asarray(xi)
    _check_headroom(model, xi)
    op = _combine(model.basis, xi, lambda w: wick_word(model, w), "W")
    return WickOp(xi, op, "left")


def right_wick(model: FockModel, xi: np.ndarray, route: str | None = None) -> WickOp:
    """Right Wick product; ``route`` is ``"conjugation"`` or ``"recursion"``.

    The conjugation route needs ``J`` to be the modular conjugation, which
    holds for mixed (tracial) models only; it is their default.
    """
    xi = np.asarray(xi)
    _check_headroom(model, xi)
    route = route or ("conjugation" if getattr(model, "tracial", False) else "recursion")
    basis = model.basis
    if route == "conjugation":
        if not getattr(model, "tracial", False):
            raise UnsupportedModeError("the J-conjugation route needs a tracial (mixed) model")
        Jxi = conjugate_J(basis, xi)
        op = conjugate_operator_J(_combine(basis, Jxi, lambda w: wick_word(model, w), "W"))
    elif route == "recursion":
        op = _combine(basis, xi, lambda w: right_wick_word(model, w), "Wr")
    else:
        raise ValueError(f"unknown route {route!r}")
    return WickOp(xi, op, "right")


# -- crossing formula -------------------------------------------------------------


def crossing_number(I1, I2) -> int:
    """``#{(a, b) in I1 x I2 : b < a}``."""
    return sum(1 for a in I1 for b in I2 if b < a)


def wick_crossing_word(model: FockModel, letters: tuple[int, ...]) -> BlockOperator:
    q = model.crossing_q
    if q is None:
        raise UnsupportedModeError("the crossing formula needs a constant deformation q")
    basis = model.basis
    n = len(letters)
    total = None
    for k in range(n + 1):
        for I1 in itertools.combinations(range(n), k):
            I2 = tuple(p for p in range(n) if p not in I1)
            weight = q ** crossing_number(I1, I2)
            if weight == 0:
                continue
            ops = [model.left_creation(model.letter(letters[p])) for p in I1]
            ops += [model.left_annihilation(model.conj_left(model.letter(letters[p]))) for p in I2]
            term = weight * product(ops) if ops else BlockOperator.identity(basis)
            total = term if total is None else total + term
    return total


def wick_crossing(model: FockModel, xi: np.ndarray) -> WickOp:
    xi = np.asarray(xi)
    _check_headroom(model, xi)
    op = _combine(model.basis, xi, lambda w: wick_crossing_word(model, w), "Wx")
    return WickOp(xi, op, "left")


# -- checks -------------------------------------------------------------------------


def vacuum_fidelity(model: FockModel, max_degree: int, tol: float = VACUUM_TOL, right_route: str | None = None) -> CheckReport:
    """``||W(w) Omega - w||`` and ``||W_r(w) Omega - w||`` for every word up to ``max_degree``."""
    basis = model.basis
    om = model.vacuum()
    worst_l = worst_r = 0.0
    for n in range(max_degree + 1):
        for letters in itertools.product(range(model.d), repeat=n):
            w = basis.vector({letters: 1})
            worst_l = max(worst_l, model.norm(wick(model, w).operator.matrix @ om - w))
            worst_r = max(worst_r, model.norm(right_wick(model, w, right_route).operator.matrix @ om - w))
    return CheckReport(
        [
            residual_check(f"wick/vacuum/left/deg<={max_degree}", worst_l, tol),
            residual_check(f"wick/vacuum/right/deg<={max_degree}", worst_r, tol),
        ]
    )


def crossing_equivalence(model: FockModel, max_degree: int, tol: float = CROSSING_TOL) -> CheckReport:
    """Entrywise distance between the crossing sum and the recursion, on safe columns."""
    basis = model.basis
    worst = 0.0
    for n in range(max_degree + 1):
        for letters in itertools.product(range(model.d), repeat=n):
            a = wick_word(model, letters)
            b = wick_crossing_word(model, letters)
            cols = slice(0, basis.offsets[min(a.safe_degree, b.safe_degree) + 1])
            diff = (a.matrix - b.matrix)[:, cols]
            if diff.nnz:
                worst = max(worst, float(np.max(np.abs(diff.data))))
    return CheckReport([residual_check(f"wick/crossing-vs-recursion/deg<={max_degree}", worst, tol)])


def right_route_agreement(model: FockModel, max_degree: int, tol: float = CROSSING_TOL) -> CheckReport:
    basis = model.basis
    worst = 0.0
    for n in range(max_degree + 1):
        for letters in itertools.product(range(model.d), repeat=n):
            w = basis.vector({letters: 1})
            a = right_wick(model, w, "conjugation").operator
            b = right_wick(model, w, "recursion").operator
            cols = slice(0, basis.offsets[min(a.safe_degree, b.safe_degree) + 1])
            diff = (a.matrix - b.matrix)[:, cols]
            if diff.nnz:
                worst = max(worst, float(np.max(np.abs(diff.data))))
    return CheckReport([residual_check(f"wick/right-routes/deg<={max_degree}", worst, tol)])


def random_fock_vector(basis: FockBasis, max_degree: int, rng: np.random.Generator, min_degree: int = 0) -> np.ndarray:
    v = basis.zeros(complex)
    top = basis.offsets[max_degree + 1]
    lo = basis.offsets[min_degree]
    v[lo:top] = rng.standard_normal(top - lo) + 1j * rng.standard_normal(top - lo)
    return v


def commutant_check(
    model: FockModel,
    left_degree: int,
    right_degree: int,
    trials: int,
    rng: np.random.Generator,
    tol: float = COMMUTANT_TOL,
    right_route: str | None = None,
) -> CheckReport:
    """``max ||[W(xi), W_r(eta)] v||`` over random ``xi, eta, v`` on safe degrees."""
    test_degree = model.N - left_degree - right_degree
    if test_degree < 0:
        raise TruncationError(
            f"commutators of degrees {left_degree}+{right_degree} exceed N={model.N}"
        )
    worst = 0.0
    for _ in range(trials):
        xi = random_fock_vector(model.basis, left_degree, rng)
        eta = random_fock_vector(model.basis, right_degree, rng)
        v = random_fock_vector(model.basis, test_degree, rng)
        v /= model.norm(v)
        A = wick(model, xi).operator
        B = right_wick(model, eta, right_route).operator
        comm = A.matrix @ (B.matrix @ v) - B.matrix @ (A.matrix @ v)
        worst = max(worst, model.norm(comm) / (model.norm(xi) * model.norm(eta)))
    rep = CheckReport([residual_check(f"commutant/deg{left_degree}x{right_degree}", worst, tol)])
    rep.data["test_degree"] = test_degree
    return rep


def word(*letters) -> Word:
    return Word(letters)
