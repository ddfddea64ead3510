"""Word enumeration and index bookkeeping for the truncated full Fock space.

The truncated space is the direct sum of the tensor levels ``H^{(x)n}`` for
``n = 0..N`` over a ``d``-letter alphabet.  Words are ordered by degree and
lexicographically inside each degree, so level ``n`` occupies the contiguous
index range ``offset(n) .. offset(n) + d**n``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DomainError, SizeError

DEFAULT_BUDGET = 2_000_000


@dataclass(frozen=True)
class Word:
    """A simple tensor ``e_{j1} (x) ... (x) e_{jn}``; the empty word is the vacuum."""

    letters: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(int(x) for x in self.letters))
        if any(x < 0 for x in self.letters):
            raise DomainError(f"negative letter in {self.letters}")

    @property
    def degree(self) -> int:
        return len(self.letters)

    def reversed(self) -> "Word":
        return Word(self.letters[::-1])

    def __iter__(self):
        return iter(self.letters)

    def __len__(self):
        return len(self.letters)


VACUUM = Word(())


def _letters(w) -> tuple[int, ...]:
    return w.letters if isinstance(w, Word) else tuple(int(x) for x in w)


class FockBasis:
    """Immutable index map for all words of degree at most ``N`` over ``d`` letters."""

    def __init__(self, d: int, N: int, budget: int = DEFAULT_BUDGET):
        if d < 1:
            raise DomainError(f"d must be >= 1, got {d}")
        if N < 0:
            raise DomainError(f"N must be >= 0, got {N}")
        total = sum(d**n for n in range(N + 1))
        if total > budget:
            raise SizeError(
                f"basis too large: d**N = {d}**{N} = {d**N} "
                f"(total dimension {total}) exceeds budget {budget}"
            )
        self._d = d
        self._N = N
        self._budget = budget
        self._offsets = tuple(sum(d**k for k in range(n)) for n in range(N + 2))

    @property
    def d(self) -> int:
        return self._d

    @property
    def N(self) -> int:
        return self._N

    @property
    def budget(self) -> int:
        return self._budget

    @property
    def dim(self) -> int:
        return self._offsets[-1]

    @property
    def offsets(self) -> tuple[int, ...]:
        """Start index of each level; ``offsets[N+1]`` is the total dimension."""
        return self._offsets

    def level_dim(self, n: int) -> int:
        return self._d**n

    def level_slice(self, n: int) -> slice:
        if not 0 <= n <= self._N:
            raise DomainError(f"degree {n} outside 0..{self._N}")
        return slice(self._offsets[n], self._offsets[n + 1])

    def degree_of(self, k: int) -> int:
        if not 0 <= k < self.dim:
            raise DomainError(f"index {k} outside 0..{self.dim - 1}")
        n = 0
        while self._offsets[n + 1] <= k:
            n += 1
        return n

    @lru_cache(maxsize=None)
    def level_words(self, n: int) -> np.ndarray:
        """All level-``n`` words as an ``(d**n, n)`` integer array, in index order."""
        if not 0 <= n <= self._N:
            raise DomainError(f"degree {n} outside 0..{self._N}")
        if n == 0:
            return np.zeros((1, 0), dtype=np.int64)
        grids = np.indices((self._d,) * n).reshape(n, -1).T
        grids.setflags(write=False)
        return grids

    @lru_cache(maxsize=None)
    def degrees(self) -> np.ndarray:
        """Degree of every basis index."""
        out = np.empty(self.dim, dtype=np.int64)
        for n in range(self._N + 1):
            out[self.level_slice(n)] = n
        out.setflags(write=False)
        return out

    def rank_in_level(self, letters: np.ndarray) -> np.ndarray:
        """Lexicographic rank of each row of ``letters`` inside its level."""
        letters = np.asarray(letters, dtype=np.int64)
        n = letters.shape[-1]
        weights = self._d ** np.arange(n - 1, -1, -1, dtype=np.int64)
        return letters @ weights if n else np.zeros(letters.shape[:-1], dtype=np.int64)

    def words(self) -> Iterator[Word]:
        for n in range(self._N + 1):
            for row in self.level_words(n):
                yield Word(tuple(row))

    def __eq__(self, other):
        return (
            isinstance(other, FockBasis)
            and self._d == other._d
            and self._N == other._N
        )

    def __hash__(self):
        return hash((self._d, self._N))

    def __repr__(self):
        return f"FockBasis(d={self._d}, N={self._N}, dim={self.dim})"

    # -- vectors ---------------------------------------------------------

    def zeros(self, dtype=float) -> np.ndarray:
        return np.zeros(self.dim, dtype=dtype)

    def vacuum(self, dtype=float) -> np.ndarray:
        v = self.zeros(dtype)
        v[0] = 1
        return v

    def vector(self, terms: Mapping | Iterable, dtype=complex) -> np.ndarray:
        """Build a coefficient vector from ``{word: coeff}`` (or an iterable of words)."""
        v = self.zeros(dtype)
        items = terms.items() if isinstance(terms, Mapping) else ((w, 1) for w in terms)
        for w, c in items:
            v[word_index(self, w)] += c
        return v

    def level(self, v: np.ndarray, n: int) -> np.ndarray:
        return v[self.level_slice(n)]

    def max_degree(self, v: np.ndarray, tol: float = 0.0) -> int:
        """Highest level carrying a coefficient larger than ``tol`` (``-1`` for zero)."""
        for n in range(self._N, -1, -1):
            if np.any(np.abs(self.level(v, n)) > tol):
                return n
        return -1


def enumerate_basis(d: int, N: int, budget: int = DEFAULT_BUDGET) -> FockBasis:
    return FockBasis(d, N, budget)


def word_index(basis: FockBasis, w: Word | Sequence[int]) -> int:
    letters = _letters(w)
    n = len(letters)
    if n > basis.N:
        raise DomainError(f"word degree {n} exceeds truncation N={basis.N}")
    for x in letters:
        if not 0 <= x < basis.d:
            raise DomainError(f"letter {x} outside 0..{basis.d - 1}")
    rank = 0
    for x in letters:
        rank = rank * basis.d + x
    return basis.offsets[n] + rank


def index_word(basis: FockBasis, k: int) -> Word:
    n = basis.degree_of(k)
    rank = k - basis.offsets[n]
    letters = []
    for _ in range(n):
        rank, x = divmod(rank, basis.d)
        letters.append(x)
    return Word(tuple(reversed(letters)))


def all_words(d: int, max_degree: int, min_degree: int = 0) -> Iterator[Word]:
    for n in range(min_degree, max_degree + 1):
        for letters in itertools.product(range(d), repeat=n):
            yield Word(letters)
