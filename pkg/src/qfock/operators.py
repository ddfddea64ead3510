"""Degree-graded operators on a truncated Fock space and the model interface.

A :class:`BlockOperator` stores one sparse matrix on the whole truncated
space; its ``(m, n)`` block maps level ``n`` into level ``m``.  Besides the
range of degree shifts it records a ``headroom``: the columns of source level
``n`` coincide with the untruncated operator whenever ``n + headroom <= N``.
Products and adjoints propagate the headroom, so truncation artifacts are
detected instead of silently reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, TruncationError
from .fock import FockBasis


@dataclass(frozen=True, eq=False)
class BlockOperator:
    basis: FockBasis
    matrix: sp.csr_matrix
    shift_min: int = 0
    shift_max: int = 0
    headroom: int = 0
    label: str = ""

    @classmethod
    def identity(cls, basis: FockBasis, label: str = "1") -> "BlockOperator":
        return cls(basis, sp.identity(basis.dim, format="csr"), 0, 0, 0, label)

    @classmethod
    def zero(cls, basis: FockBasis, label: str = "0") -> "BlockOperator":
        return cls(basis, sp.csr_matrix((basis.dim, basis.dim)), 0, 0, 0, label)

    @property
    def safe_degree(self) -> int:
        """Largest source degree whose image is exact."""
        return self.basis.N - self.headroom

    def _compatible(self, other: "BlockOperator"):
        if other.basis != self.basis:
            raise DomainError(f"operators live on different bases: {self.basis} vs {other.basis}")

    def __matmul__(self, other):
        if isinstance(other, np.ndarray):
            return self.apply(other)
        self._compatible(other)
        return BlockOperator(
            self.basis,
            (self.matrix @ other.matrix).tocsr(),
            self.shift_min + other.shift_min,
            self.shift_max + other.shift_max,
            max(other.headroom, other.shift_max + self.headroom, 0),
            f"{self.label}*{other.label}",
        )

    def __add__(self, other):
        self._compatible(other)
        return BlockOperator(
            self.basis,
            (self.matrix + other.matrix).tocsr(),
            min(self.shift_min, other.shift_min),
            max(self.shift_max, other.shift_max),
            max(self.headroom, other.headroom),
            f"({self.label}+{other.label})",
        )

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, c):
        return BlockOperator(
            self.basis, (self.matrix * c).tocsr(), self.shift_min, self.shift_max, self.headroom, f"{c}*{self.label}"
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def apply(self, v: np.ndarray, check: bool = True) -> np.ndarray:
        """``self @ v``; refuses vectors with components above the safe degree."""
        v = np.asarray(v)
        if check:
            top = self.basis.max_degree(v)
            if top > self.safe_degree:
                raise TruncationError(
                    f"{self.label or 'operator'}: input degree {top} exceeds safe degree "
                    f"{self.safe_degree} (N={self.basis.N}, headroom={self.headroom})"
                )
        return self.matrix @ v

    def block(self, m: int, n: int) -> np.ndarray:
        return self.matrix[self.basis.level_slice(m), self.basis.level_slice(n)].toarray()

    @property
    def blocks(self) -> dict[tuple[int, int], np.ndarray]:
        """Nonzero ``(target, source)`` blocks."""
        out = {}
        for n in range(self.basis.N + 1):
            for s in range(self.shift_min, self.shift_max + 1):
                m = n + s
                if 0 <= m <= self.basis.N:
                    b = self.block(m, n)
                    if np.any(b):
                        out[(m, n)] = b
        return out

    def conj(self) -> "BlockOperator":
        return BlockOperator(
            self.basis, self.matrix.conj().tocsr(), self.shift_min, self.shift_max, self.headroom, f"conj({self.label})"
        )

    def coordinate_adjoint(self) -> "BlockOperator":
        """Conjugate transpose in the undeformed coordinate inner product."""
        return BlockOperator(
            self.basis,
            self.matrix.conj().T.tocsr(),
            -self.shift_max,
            -self.shift_min,
            max(self.headroom - self.shift_min, 0),
            f"{self.label}^H",
        )

    def restricted_norm(self, m: int, n: int) -> float:
        b = self.block(m, n)
        return float(np.linalg.norm(b, 2)) if b.size else 0.0


def product(ops: Sequence[BlockOperator]) -> BlockOperator:
    out = ops[0]
    for op in ops[1:]:
        out = out @ op
    return out


def headroom_of_product(ops: Sequence[BlockOperator]) -> int:
    """Headroom of ``ops[0] @ ... @ ops[-1]`` without forming the product."""
    h, top = 0, 0
    for op in reversed(ops):
        h = max(h, top + op.headroom)
        top += op.shift_max
    return h


def apply_chain(ops: Sequence[BlockOperator], v: np.ndarray) -> np.ndarray:
    """``ops[0] @ ... @ ops[-1] @ v`` evaluated right to left, with a truncation check."""
    basis = ops[0].basis if ops else None
    if ops:
        top = basis.max_degree(v)
        need = headroom_of_product(ops)
        if top + need > basis.N:
            raise TruncationError(
                f"product of {len(ops)} factors needs degree {top + need} > N={basis.N}"
            )
    for op in reversed(ops):
        v = op.matrix @ v
    return v


def level_words_removed(basis: FockBasis, n: int, k: int) -> np.ndarray:
    """Index (in the whole space) of each level-``n`` word with slot ``k`` deleted."""
    words = basis.level_words(n)
    rest = np.delete(words, k, axis=1)
    return basis.offsets[n - 1] + basis.rank_in_level(rest)


def removal_operator(basis: FockBasis, weight, label: str) -> BlockOperator:
    """Assemble ``w -> sum_k weight(words, k) * (w with slot k removed)``.

    ``weight(words, n, k)`` returns the coefficient of removing slot ``k``
    (0-based) for every level-``n`` word at once.
    """
    rows, cols, vals = [], [], []
    for n in range(1, basis.N + 1):
        words = basis.level_words(n)
        src = basis.offsets[n] + np.arange(len(words))
        for k in range(n):
            w = np.asarray(weight(words, n, k))
            nz = np.nonzero(w)[0]
            if not len(nz):
                continue
            rows.append(level_words_removed(basis, n, k)[nz])
            cols.append(src[nz])
            vals.append(w[nz])
    dtype = np.result_type(*vals) if vals else float
    m = _coo(basis, rows, cols, vals, dtype)
    return BlockOperator(basis, m, -1, -1, 0, label)


def creation_operator(basis: FockBasis, f: np.ndarray, side: str, label: str) -> BlockOperator:
    """``l(f): w -> f (x) w`` or ``r(f): w -> w (x) f``; the top level maps to zero."""
    f = np.asarray(f)
    d = basis.d
    rows, cols, vals = [], [], []
    for n in range(basis.N):
        D = d**n
        src = basis.offsets[n] + np.arange(D)
        for a in np.nonzero(f)[0]:
            if side == "left":
                tgt = basis.offsets[n + 1] + a * D + np.arange(D)
            else:
                tgt = basis.offsets[n + 1] + np.arange(D) * d + a
            rows.append(tgt)
            cols.append(src)
            vals.append(np.full(D, f[a]))
    m = _coo(basis, rows, cols, vals, f.dtype)
    return BlockOperator(basis, m, 1, 1, 1, label)


def _coo(basis, rows, cols, vals, dtype) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix((basis.dim, basis.dim), dtype=dtype)
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
    ).tocsr()


def reversal_permutation(basis: FockBasis) -> np.ndarray:
    """``perm[k]`` is the index of the letter-reversal of word ``k``."""
    perm = np.empty(basis.dim, dtype=np.int64)
    for n in range(basis.N + 1):
        words = basis.level_words(n)
        perm[basis.level_slice(n)] = basis.offsets[n] + basis.rank_in_level(words[:, ::-1])
    return perm


class FockModel:
    """Common interface of the mixed q-Gaussian and q-Araki-Woods models.

    Letters ``e_0 .. e_{d-1}`` are the coordinate basis of the one-particle
    space; ``one_particle_gram()[a, b] = <e_b, e_a>``, so ``<x, y> = y^H B x``.
    Subclasses supply the annihilation weights, the level Gram blocks and the
    two conjugations used by Wick products.
    """

    basis: FockBasis
    crossing_q: float | None = None

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def N(self) -> int:
        return self.basis.N

    # -- to be provided -------------------------------------------------
    def gram(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def one_particle_gram(self) -> np.ndarray:
        raise NotImplementedError

    def left_annihilation(self, f) -> BlockOperator:
        raise NotImplementedError

    def right_annihilation(self, f) -> BlockOperator:
        raise NotImplementedError

    def conj_left(self, f: np.ndarray) -> np.ndarray:
        """The conjugation ``I`` fixing the real subspace generating the left algebra."""
        return np.conj(f)

    def conj_right(self, f: np.ndarray) -> np.ndarray:
        """The conjugation ``I_r`` fixing the real subspace generating the commutant."""
        return np.conj(f)

    # -- shared machinery -------------------------------------------------
    def letter(self, i: int) -> np.ndarray:
        if not 0 <= i < self.d:
            raise DomainError(f"letter {i} outside 0..{self.d - 1}")
        e = np.zeros(self.d)
        e[i] = 1.0
        return e

    def left_creation(self, f) -> BlockOperator:
        return creation_operator(self.basis, np.asarray(f), "left", "l")

    def right_creation(self, f) -> BlockOperator:
        return creation_operator(self.basis, np.asarray(f), "right", "r")

    def field(self, f, side: str = "left") -> BlockOperator:
        """``W(f) = l(f) + l*(I f)`` (left) or ``r(f) + r*(I_r f)`` (right)."""
        f = np.asarray(f)
        if side == "left":
            return self.left_creation(f) + self.left_annihilation(self.conj_left(f))
        return self.right_creation(f) + self.right_annihilation(self.conj_right(f))

    def gram_blocks(self) -> list[np.ndarray]:
        return [self.gram(n) for n in range(self.N + 1)]

    @cached_property
    def gram_operator(self) -> sp.csr_matrix:
        return sp.block_diag(self.gram_blocks(), format="csr")

    @cached_property
    def gram_inverse_operator(self) -> sp.csr_matrix:
        return sp.block_diag([np.linalg.inv(g) for g in self.gram_blocks()], format="csr")

    def inner(self, x: np.ndarray, y: np.ndarray) -> complex:
        """Deformed inner product, linear in ``x``."""
        return np.vdot(y, self.gram_operator @ x)

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(x, x).real, 0.0)))

    def level_norm(self, x: np.ndarray, n: int) -> float:
        s = self.basis.level_slice(n)
        y = x[s]
        return float(np.sqrt(max(np.vdot(y, self.gram(n) @ y).real, 0.0)))

    def adjoint(self, op: BlockOperator) -> BlockOperator:
        """Adjoint with respect to the deformed Gram: ``G^{-1} X^H G``."""
        h = op.coordinate_adjoint()
        m = (self.gram_inverse_operator @ h.matrix @ self.gram_operator).tocsr()
        m.eliminate_zeros()
        return BlockOperator(self.basis, m, h.shift_min, h.shift_max, h.headroom, f"{op.label}^*")

    def operator_level_norm(self, op: BlockOperator, m: int, n: int) -> float:
        """Norm of the ``(m, n)`` block between the deformed Hilbert spaces."""
        b = op.block(m, n)
        if not b.size or not np.any(b):
            return 0.0
        return float(np.linalg.norm(_sqrtm(self.gram(m)) @ b @ _inv_sqrtm(self.gram(n)), 2))

    def vacuum(self) -> np.ndarray:
        return self.basis.vacuum(complex)

    def state(self, op_or_ops) -> complex:
        """Vacuum state ``<X Omega, Omega>`` of an operator or a product."""
        ops = op_or_ops if isinstance(op_or_ops, (list, tuple)) else [op_or_ops]
        v = apply_chain(list(ops), self.vacuum())
        return complex(v[0])


def _sqrtm(g: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(g)
    return (v * np.sqrt(w)) @ v.conj().T


def _inv_sqrtm(g: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(g)
    return (v / np.sqrt(w)) @ v.conj().T


def hermitian_sqrt(g: np.ndarray) -> np.ndarray:
    return _sqrtm(g)


def hermitian_inv_sqrt(g: np.ndarray) -> np.ndarray:
    return _inv_sqrtm(g)
