"""Yang-Baxter weights and the deformed Gram blocks of the mixed Fock space.

The inner product on level ``n`` is ``<xi, eta> = eta^H P_n xi`` with
``P_n = sum_{sigma in S_n} phi(sigma)``, where ``phi`` sends a reduced word
``s_{i1}...s_{ik}`` to ``T_{i1}...T_{ik}`` and ``T_k`` swaps tensor slots
``k, k+1`` with weight ``q_{ab}``.  Two constructions are provided:

* ``naive``: a depth-first walk over S_n (one ``T`` application per
  permutation), factorial cost, used as the oracle;
* ``recursive``: ``P_n = (1 (x) P_{n-1}) (1 + T_1 + T_1 T_2 + ... + T_1...T_{n-1})``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, SizeError
from .fock import DEFAULT_BUDGET, FockBasis

log = logging.getLogger(__name__)

NAIVE_MAX_DEGREE = 8
EXACT_MAX_BLOCK = 4096
POSITIVITY_FLOOR = 1e-12


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


class QMatrix:
    """Symmetric deformation matrix with entries strictly inside (-1, 1).

    ``entries`` may hold floats, ints, ``Fraction`` objects or strings such as
    ``"1/3"``.  Rational input is kept so Gram blocks can be rebuilt exactly.
    """

    def __init__(self, entries):
        rows = [list(r) for r in entries]
        d = len(rows)
        if d == 0 or any(len(r) != d for r in rows):
            raise DomainError("Q must be a non-empty square matrix")
        exact = None
        try:
            exact = np.array([[_to_fraction(x) for x in r] for r in rows], dtype=object)
        except (TypeError, ValueError):
            exact = None
        values = np.array([[float(_to_fraction(x)) for x in r] for r in rows])
        for i in range(d):
            for j in range(i + 1, d):
                if values[i, j] != values[j, i]:
                    raise DomainError(
                        f"Q is not symmetric: q[{i}][{j}]={values[i, j]} != q[{j}][{i}]={values[j, i]}"
                    )
        bad = np.argwhere(~(np.abs(values) < 1))
        if len(bad):
            i, j = bad[0]
            raise DomainError(f"|q[{i}][{j}]| = {abs(values[i, j])} is not < 1")
        values.setflags(write=False)
        self._values = values
        self._exact = exact

    @classmethod
    def constant(cls, d: int, q) -> "QMatrix":
        return cls([[q] * d for _ in range(d)])

    @classmethod
    def random(cls, d: int, qmax: float, rng: np.random.Generator) -> "QMatrix":
        """Random symmetric matrix whose largest entry in modulus equals ``qmax``."""
        a = rng.uniform(-1, 1, size=(d, d))
        a = (a + a.T) / 2
        a *= qmax / np.max(np.abs(a))
        return cls(a)

    @property
    def d(self) -> int:
        return self._values.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._values

    @property
    def exact_entries(self) -> np.ndarray:
        if self._exact is None:
            raise DomainError("Q has no exact rational representation")
        return self._exact

    @property
    def qmax(self) -> float:
        return float(np.max(np.abs(self._values)))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self._values == self._values[0, 0]))

    def hash(self) -> int:
        from .cache import fnv1a64

        return fnv1a64(np.ascontiguousarray(self._values, dtype="<f8").tobytes())

    def __getitem__(self, ij):
        return self._values[ij]

    def __repr__(self):
        return f"QMatrix({self._values.tolist()})"


# -- Yang-Baxter operator ------------------------------------------------


def apply_T_k(Q: QMatrix, n: int, k: int, v: np.ndarray, exact: bool = False) -> np.ndarray:
    """Apply ``T`` in tensor slots ``k, k+1`` (1-based) to a level-``n`` vector.

    ``v`` may carry trailing axes (columns of a matrix); the action is on the
    leading axis of length ``d**n``.
    """
    if not 1 <= k <= n - 1:
        raise DomainError(f"T_k needs 1 <= k <= n-1, got k={k}, n={n}")
    d = Q.d
    v = np.asarray(v)
    if v.shape[0] != d**n:
        raise DomainError(f"vector length {v.shape[0]} is not d**n = {d**n}")
    tail = v.shape[1:]
    t = np.swapaxes(v.reshape((d,) * n + tail), k - 1, k)
    shape = [1] * (n + len(tail))
    shape[k - 1] = shape[k] = d
    weights = Q.exact_entries if exact else Q.entries
    return (t * weights.reshape(shape)).reshape(v.shape)


# -- permutations ----------------------------------------------------------


def reduced_word(perm: Sequence[int]) -> tuple[int, ...]:
    """Bubble-sort reduced word ``(i1, ..., ik)`` with ``perm = s_{i1} o ... o s_{ik}``.

    Permutations are in one-line notation on ``0..n-1``; ``s_i`` swaps ``i-1, i``.
    """
    p = list(perm)
    swaps = []
    for end in range(len(p) - 1, 0, -1):
        for i in range(end):
            if p[i] > p[i + 1]:
                p[i], p[i + 1] = p[i + 1], p[i]
                swaps.append(i + 1)
    return tuple(reversed(swaps))


def reduced_words(perm: Sequence[int]) -> list[tuple[int, ...]]:
    """Every reduced word of ``perm`` (exponential; meant for small n)."""
    p = tuple(perm)
    descents = [i for i in range(1, len(p)) if p[i - 1] > p[i]]
    if not descents:
        return [()]
    out = []
    for i in descents:
        q = list(p)
        q[i - 1], q[i] = q[i], q[i - 1]
        out.extend(w + (i,) for w in reduced_words(q))
    return out


def compose_word(n: int, word: Sequence[int]) -> tuple[int, ...]:
    """One-line notation of ``s_{i1} o ... o s_{ik}``."""
    p = list(range(n))
    for i in word:
        p[i - 1], p[i] = p[i], p[i - 1]
    return tuple(p)


def inversions(perm: Sequence[int]) -> int:
    return sum(1 for a, b in itertools.combinations(perm, 2) if a > b)


def phi(Q: QMatrix, n: int, word: Sequence[int], exact: bool = False) -> np.ndarray:
    """Matrix of ``T_{i1} ... T_{ik}`` on level ``n``."""
    m = _identity(Q.d**n, exact)
    for i in reversed(word):
        m = apply_T_k(Q, n, i, m, exact)
    return m


def _identity(D: int, exact: bool) -> np.ndarray:
    if not exact:
        return np.eye(D)
    m = np.full((D, D), Fraction(0), dtype=object)
    for i in range(D):
        m[i, i] = Fraction(1)
    return m


def braid_residual(Q: QMatrix, n: int, rng: np.random.Generator | None = None) -> float:
    """Largest violation of the braid relations on random level-``n`` vectors.

    Checks ``T_i T_{i+1} T_i = T_{i+1} T_i T_{i+1}`` and ``T_i T_j = T_j T_i``
    for ``|i - j| >= 2``; by Matsumoto's theorem this makes ``phi`` independent
    of the chosen reduced word.
    """
    rng = rng or np.random.default_rng(0)
    v = rng.standard_normal((Q.d**n, 3))
    T = lambda k, x: apply_T_k(Q, n, k, x)  # noqa: E731
    worst = 0.0
    for i in range(1, n - 1):
        lhs = T(i, T(i + 1, T(i, v)))
        rhs = T(i + 1, T(i, T(i + 1, v)))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    for i in range(1, n):
        for j in range(i + 2, n):
            worst = max(worst, float(np.max(np.abs(T(i, T(j, v)) - T(j, T(i, v))))))
    return worst


def _walk_group(n: int, step: Callable[[int, object], object], start) -> Iterator[object]:
    """Yield ``phi(sigma)`` for every sigma in S_n along a spanning tree.

    Each permutation is reached from its canonical parent (strip the smallest
    left descent), so every value is produced exactly once with one ``step``.
    Only one value per tree depth is alive at a time.
    """

    def smallest_left_descent(pos):
        for j in range(1, n):
            if pos[j - 1] > pos[j]:
                return j
        return None

    def visit(perm, value):
        yield value
        pos = [0] * n
        for idx, v in enumerate(perm):
            pos[v] = idx
        for i in range(1, n):
            if pos[i - 1] < pos[i]:
                child = tuple(i if v == i - 1 else i - 1 if v == i else v for v in perm)
                cpos = list(pos)
                cpos[i - 1], cpos[i] = cpos[i], cpos[i - 1]
                if smallest_left_descent(cpos) == i:
                    yield from visit(child, step(i, value))

    yield from visit(tuple(range(n)), start)


# -- Gram blocks -------------------------------------------------------------


@dataclass
class GramBlock:
    n: int
    matrix: np.ndarray
    exact: bool = False
    cache_hit: bool = field(default=False, compare=False)

    @cached_property
    def mineig(self) -> float:
        m = np.asarray(self.matrix, dtype=float)
        if m.size == 0:
            return float("inf")
        return float(np.linalg.eigvalsh(m)[0])

    def as_float(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)


def _check_budget(d: int, n: int, budget: int):
    if d**n > budget:
        raise SizeError(f"level size d**n = {d}**{n} = {d**n} exceeds budget {budget}")


def gram_naive(Q: QMatrix, n: int, exact: bool = False, check_braid: bool = True) -> np.ndarray:
    """``sum_{sigma in S_n} phi(sigma)`` by walking the whole group."""
    if n > NAIVE_MAX_DEGREE:
        raise SizeError(f"naive Gram limited to n <= {NAIVE_MAX_DEGREE}, got n={n}")
    D = Q.d**n
    if check_braid and n >= 3 and not exact:
        res = braid_residual(Q, n)
        if res > 1e-12:
            raise ConsistencyError(f"braid relation violated at level {n}: residual {res:.3e}")
    start = _identity(D, exact)
    total = start.copy()
    first = True
    for m in _walk_group(n, lambda i, x: apply_T_k(Q, n, i, x, exact), start):
        if first:
            first = False
            continue
        total = total + m
    return total


def right_factor(Q: QMatrix, n: int, exact: bool = False) -> np.ndarray:
    """``1 + T_1 + T_1 T_2 + ... + T_1 ... T_{n-1}`` on level ``n`` (Horner form)."""
    I = _identity(Q.d**n, exact)
    R = I.copy()
    for k in range(n - 1, 0, -1):
        R = I + apply_T_k(Q, n, k, R, exact)
    return R


def gram_step(Q: QMatrix, n: int, prev: np.ndarray, exact: bool = False) -> np.ndarray:
    """Level-``n`` block from the level ``n-1`` block."""
    if n <= 1:
        return _identity(Q.d**n, exact)
    d = Q.d
    R = right_factor(Q, n, exact)
    D1 = d ** (n - 1)
    Rb = R.reshape(d, D1, d**n)
    out = np.empty_like(Rb)
    for a in range(d):
        out[a] = prev @ Rb[a]
    return out.reshape(d**n, d**n)


def gram_recursive(Q: QMatrix, n: int, exact: bool = False) -> np.ndarray:
    P = _identity(1, exact)
    for m in range(1, n + 1):
        P = gram_step(Q, m, P, exact)
    return P


def gram_block(
    Q: QMatrix,
    n: int,
    mode: str = "recursive",
    exact: bool = False,
    budget: int = DEFAULT_BUDGET,
) -> GramBlock:
    if n < 0:
        raise DomainError(f"degree must be >= 0, got {n}")
    _check_budget(Q.d, n, budget)
    if exact and Q.d**n > EXACT_MAX_BLOCK:
        raise SizeError(f"exact mode limited to blocks of size <= {EXACT_MAX_BLOCK}, got {Q.d**n}")
    if mode == "naive":
        return GramBlock(n, gram_naive(Q, n, exact), exact)
    if mode == "recursive":
        return GramBlock(n, gram_recursive(Q, n, exact), exact)
    raise DomainError(f"unknown mode {mode!r}")


class GramSeries:
    """Lazily built Gram blocks ``P_0 .. P_N`` of one ``Q``, optionally disk-cached.

    Blocks are built in increasing order because level ``n`` consumes ``n-1``.
    """

    def __init__(self, Q: QMatrix, cache=None, budget: int = DEFAULT_BUDGET):
        self.Q = Q
        self.cache = cache
        self.budget = budget
        self._blocks: dict[int, np.ndarray] = {}
        self.cache_hits = 0

    def block(self, n: int) -> np.ndarray:
        if n in self._blocks:
            return self._blocks[n]
        _check_budget(self.Q.d, n, self.budget)
        m = None
        if self.cache is not None:
            m = self.cache.load(self.Q, n)
            if m is not None:
                self.cache_hits += 1
        if m is None:
            prev = self.block(n - 1) if n >= 2 else None
            m = gram_step(self.Q, n, prev) if n >= 2 else np.eye(self.Q.d**n)
            if self.cache is not None:
                self.cache.store(self.Q, n, m)
        m.setflags(write=False)
        self._blocks[n] = m
        return m

    def blocks(self, N: int) -> list[np.ndarray]:
        return [self.block(n) for n in range(N + 1)]


def deformed_inner(Q: QMatrix, basis: FockBasis, xi: np.ndarray, eta: np.ndarray, grams: GramSeries | None = None):
    """``sum_n <P_n xi_n, eta_n>_0``, linear in ``xi`` and conjugate-linear in ``eta``."""
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    if xi.shape != (basis.dim,) or eta.shape != (basis.dim,):
        raise DomainError(
            f"vectors of length {xi.shape}, {eta.shape} do not live on {basis!r}"
        )
    if basis.d != Q.d:
        raise DomainError(f"basis alphabet {basis.d} does not match Q dimension {Q.d}")
    grams = grams or GramSeries(Q)
    total = 0
    for n in range(basis.N + 1):
        s = basis.level_slice(n)
        x, y = xi[s], eta[s]
        if not (np.any(x) and np.any(y)):
            continue
        total = total + np.vdot(y, grams.block(n) @ x)
    return total


@dataclass
class PositivityReport:
    mineigs: list[float]
    floor: float = POSITIVITY_FLOOR

    @property
    def flagged(self) -> list[int]:
        return [n for n, e in enumerate(self.mineigs) if e <= self.floor]

    @property
    def ok(self) -> bool:
        return not self.flagged


def gram_positivity_report(Q: QMatrix, N: int, grams: GramSeries | None = None) -> PositivityReport:
    grams = grams or GramSeries(Q)
    return PositivityReport([GramBlock(n, grams.block(n)).mineig for n in range(N + 1)])


def q_factorial(n: int, q: float) -> float:
    """``[n]_q! = prod_{k=1}^n (1 + q + ... + q^{k-1})``."""
    out = 1.0
    for k in range(1, n + 1):
        out *= sum(q**j for j in range(k))
    return out
