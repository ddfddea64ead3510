"""Creation/annihilation operators, q-Gaussians and vacuum moments of the mixed model."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, TruncationError
from .fock import FockBasis
from .operators import BlockOperator, FockModel, apply_chain, headroom_of_product, removal_operator
from .qgram import GramSeries, QMatrix
from .report import CheckReport, bound_check, identity_check, residual_check

ADJOINT_TOL = 1e-9
COMMUTATOR_SLACK = 1e-12
TRACE_TOL = 1e-8
MOMENT_TOL = 1e-9


class MixedModel(FockModel):
    """Mixed q-Gaussian Fock space over an orthonormal real basis ``e_0 .. e_{d-1}``."""

    def __init__(self, Q: QMatrix, N: int, cache=None, basis: FockBasis | None = None):
        self.Q = Q
        self.basis = basis or FockBasis(Q.d, N)
        if self.basis.d != Q.d:
            raise DomainError(f"basis alphabet {self.basis.d} does not match Q dimension {Q.d}")
        self.grams = GramSeries(Q, cache, self.basis.budget)
        self.crossing_q = float(Q.entries[0, 0]) if Q.is_constant else None
        self._letter_ops: dict = {}
        self.tracial = True

    def gram(self, n: int) -> np.ndarray:
        return self.grams.block(n)

    def one_particle_gram(self) -> np.ndarray:
        return np.eye(self.d)

    def _cached(self, key, build):
        if key not in self._letter_ops:
            self._letter_ops[key] = build()
        return self._letter_ops[key]

    def letter_annihilation(self, i: int, side: str = "left") -> BlockOperator:
        if not 0 <= i < self.d:
            raise DomainError(f"letter {i} outside 0..{self.d - 1}")
        q = self.Q.entries[i]

        def left(words, n, k):
            return (words[:, k] == i) * np.prod(q[words[:, :k]], axis=1)

        def right(words, n, k):
            return (words[:, k] == i) * np.prod(q[words[:, k + 1 :]], axis=1)

        name = f"{'l' if side == 'left' else 'r'}{i}*"
        return self._cached(
            (side, "ann", i), lambda: removal_operator(self.basis, left if side == "left" else right, name)
        )

    def letter_creation(self, i: int, side: str = "left") -> BlockOperator:
        e = self.letter(i)
        op = self.left_creation if side == "left" else self.right_creation
        return self._cached((side, "cre", i), lambda: op(e))

    def _combine(self, f, side) -> BlockOperator:
        f = np.asarray(f)
        out = None
        for i in np.nonzero(f)[0]:
            term = np.conj(f[i]) * self.letter_annihilation(int(i), side)
            out = term if out is None else out + term
        if out is None:
            return BlockOperator(self.basis, self.letter_annihilation(0, side).matrix * 0, -1, -1, 0, "0")
        return out

    def left_annihilation(self, f) -> BlockOperator:
        """``l*(f) = sum_i conj(f_i) l_i*`` (conjugate-linear in ``f``)."""
        return self._combine(f, "left")

    def right_annihilation(self, f) -> BlockOperator:
        return self._combine(f, "right")

    def gaussian(self, i: int, side: str = "left") -> BlockOperator:
        return self._cached(
            (side, "gauss", i),
            lambda: self.letter_creation(i, side) + self.letter_annihilation(i, side),
        )


@lru_cache(maxsize=32)
def _model_for(Q_key, N):
    return MixedModel(QMatrix(Q_key), N)


def mixed_model(Q: QMatrix, basis: FockBasis) -> MixedModel:
    key = tuple(map(tuple, Q.entries.tolist()))
    m = _model_for(key, basis.N)
    return m


def build_generator(Q: QMatrix, basis: FockBasis, side: str, kind: str, i: int) -> BlockOperator:
    if side not in ("left", "right"):
        raise DomainError(f"side must be left or right, got {side!r}")
    if not 0 <= i < Q.d:
        raise DomainError(f"letter {i} outside 0..{Q.d - 1}")
    model = mixed_model(Q, basis)
    if kind == "creation":
        return model.letter_creation(i, side)
    if kind == "annihilation":
        return model.letter_annihilation(i, side)
    if kind == "gaussian":
        return model.gaussian(i, side)
    raise DomainError(f"kind must be creation, annihilation or gaussian, got {kind!r}")


# -- adjointness --------------------------------------------------------------


def adjoint_deviation(model: FockModel, create: BlockOperator, annihilate: BlockOperator) -> float:
    """``max |<c xi, eta> - <xi, a eta>|`` over basis vectors ``xi, eta``."""
    G = model.gram_operator
    lhs = G @ create.matrix  # entry (eta, xi) = <c xi, eta>
    rhs = annihilate.matrix.conj().T @ G  # entry (eta, xi) = <xi, a eta>
    diff = (lhs - rhs).tocoo()
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def gram_adjoint_check(model: FockModel, i: int, tol: float = ADJOINT_TOL) -> CheckReport:
    rep = CheckReport()
    e = model.letter(i)
    for side in ("left", "right"):
        if side == "left":
            c, a = model.left_creation(e), model.left_annihilation(e)
        else:
            c, a = model.right_creation(e), model.right_annihilation(e)
        rep.add(residual_check(f"adjoint/{side}/letter{i}", adjoint_deviation(model, c, a), tol))
    return rep


# -- left-right commutators ------------------------------------------------------------


@dataclass
class CommutatorBlocks:
    i: int
    j: int
    qmax: float
    blocks: list[np.ndarray]
    norms: list[float]
    diagonal_error: list[float] = field(default_factory=list)

    def checks(self, slack: float = COMMUTATOR_SLACK) -> list:
        out = []
        for n, nrm in enumerate(self.norms):
            out.append(bound_check(f"commutator/{self.i},{self.j}/level{n}", nrm, self.qmax**n, slack))
        if self.i != self.j:
            worst = max((float(np.max(np.abs(b))) if b.size else 0.0) for b in self.blocks)
            out.append(residual_check(f"commutator/{self.i},{self.j}/offdiag-vanishing", worst, slack))
        else:
            out.append(
                residual_check(f"commutator/{self.i},{self.i}/diagonal-form", max(self.diagonal_error, default=0.0), slack)
            )
        return out


def commutator_blocks(Q: QMatrix, basis: FockBasis, i: int, j: int, model: MixedModel | None = None) -> CommutatorBlocks:
    """Per-level blocks of ``l_i* r_j - r_j l_i*`` for levels ``0 .. N-1``."""
    model = model or mixed_model(Q, basis)
    li_star = model.letter_annihilation(i, "left")
    rj = model.letter_creation(j, "right")
    D = li_star @ rj - rj @ li_star
    blocks, norms, diag_err = [], [], []
    for n in range(basis.N):
        b = D.block(n, n)
        blocks.append(b)
        norms.append(float(np.linalg.norm(b, 2)))
        if i == j:
            words = basis.level_words(n)
            expected = np.prod(Q.entries[i][words], axis=1) if n else np.ones(1)
            diag_err.append(float(np.max(np.abs(b - np.diag(expected)))))
    return CommutatorBlocks(i, j, Q.qmax, blocks, norms, diag_err)


# -- moments ---------------------------------------------------------------------


def vacuum_moment(ops, model: FockModel | None = None) -> complex:
    """``<(op_1 ... op_m) Omega, Omega>``; refuses products reaching above ``N``."""
    ops = list(ops)
    if not ops:
        return 1.0
    basis = ops[0].basis
    need = headroom_of_product(ops)
    if need > basis.N:
        raise TruncationError(f"moment of {len(ops)} factors needs degree {need} > N={basis.N}")
    v = apply_chain(ops, basis.vacuum(complex))
    val = complex(v[0])
    return val.real if val.imag == 0 else val


def pairings(points):
    points = list(points)
    if not points:
        yield []
        return
    first = points[0]
    for idx in range(1, len(points)):
        rest = points[1:idx] + points[idx + 1 :]
        for p in pairings(rest):
            yield [(first, points[idx])] + p


def crossings(pairing) -> int:
    c = 0
    for (a, b), (x, y) in itertools.combinations(pairing, 2):
        if a < x < b < y or x < a < y < b:
            c += 1
    return c


def pair_partition_moment(Q, i: int, order: int) -> float:
    """``sum over pair partitions of {1..order}`` of ``q^{crossings}`` with ``q = Q[i, i]``.

    ``Q`` may be a :class:`QMatrix` or a plain scalar (then ``i`` is ignored).
    """
    if order % 2:
        raise DomainError(f"order must be even, got {order}")
    if order > 12:
        raise DomainError(f"order limited to 12, got {order}")
    q = float(Q.entries[i, i]) if isinstance(Q, QMatrix) else float(Q)
    total = 0.0
    for p in pairings(range(order)):
        total += q ** crossings(p)
    return total


def moment_check(model: MixedModel, i: int, order: int, tol: float = MOMENT_TOL) -> CheckReport:
    s = model.gaussian(i)
    lhs = vacuum_moment([s] * order)
    rhs = pair_partition_moment(model.Q, i, order)
    return CheckReport([identity_check(f"moment/s{i}^{order}", lhs, rhs, tol)])


# -- traciality ----------------------------------------------------------------


def random_generator_word(rng: np.random.Generator, d: int, max_len: int) -> tuple[int, ...]:
    n = int(rng.integers(1, max_len + 1))
    return tuple(int(x) for x in rng.integers(0, d, size=n))


def traciality_check(
    model: MixedModel,
    trials: int,
    degree_cap: int,
    rng: np.random.Generator,
    tol: float = TRACE_TOL,
) -> CheckReport:
    """``max |phi(ab) - phi(ba)|`` for random products ``a, b`` of the ``s_i``."""
    if 2 * degree_cap > model.N:
        raise TruncationError(f"words of length {degree_cap} need N >= {2 * degree_cap}, have {model.N}")
    worst, witness = 0.0, None
    for _ in range(trials):
        a = random_generator_word(rng, model.d, degree_cap)
        b = random_generator_word(rng, model.d, degree_cap)
        A = [model.gaussian(x) for x in a]
        B = [model.gaussian(x) for x in b]
        dev = abs(vacuum_moment(A + B) - vacuum_moment(B + A))
        if dev >= worst:
            worst, witness = dev, (a, b)
    rep = CheckReport([residual_check("traciality", worst, tol)])
    rep.data["witness"] = witness
    return rep
