"""Finite almost-periodic q-Araki-Woods models.

The real Hilbert space is ``H_R = R^d`` with its coordinate basis; ``U_t = A^{it}``
with ``A`` block diagonal: invariant coordinates (``A = 1``) and eigenvalue
pairs ``lambda`` acting on two real coordinates, where the complex vectors
``(e_1 -/+ i e_2)/sqrt(2)`` have eigenvalues ``lambda`` and ``1/lambda``.  On the
complexification the deformed product is

    <x, y>_U = y^H B x,     B = 2 (1 + A^{-1})^{-1} = 2 A (1 + A)^{-1},

and level ``n`` of the Fock space carries ``P_q^{(n)} B^{(x)n}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DegeneracyError, DomainError, PreconditionError
from .fock import FockBasis
from .operators import BlockOperator, FockModel, hermitian_inv_sqrt, hermitian_sqrt, removal_operator
from .qgram import GramSeries, QMatrix
from .qops import pair_partition_moment, random_generator_word, vacuum_moment
from .report import CheckReport, exceed_check, floor_check, identity_check, residual_check
from .wick import right_wick, wick

STRUCTURE_TOL = 1e-10
IR_TOL = 1e-9
MODULAR_TOL = 1e-8
CENTRALIZER_TOL = 1e-8
CHAIN_TOL = 1e-9
COMMUTATION_TOL = 1e-9
NONTRACIAL_THRESHOLD = 1e-3


# -- the one-particle space ------------------------------------------------------


def _parse_blocks(blocks) -> list[tuple[str, float]]:
    out = []
    for b in blocks:
        if isinstance(b, dict):
            if len(b) != 1:
                raise DomainError(f"eigenvalue block {b!r} must have exactly one key")
            (kind, val), = b.items()
        elif isinstance(b, (tuple, list)):
            kind, val = (b[0], b[1] if len(b) > 1 else 1)
        else:
            kind, val = ("pair", b)
        if kind == "invariant":
            for _ in range(int(val)):
                out.append(("invariant", 1.0))
        elif kind == "pair":
            lam = float(val)
            if not lam > 0 or not np.isfinite(lam):
                raise DomainError(f"pair eigenvalue must be positive, got {val!r}")
            out.append(("pair", lam))
        else:
            raise DomainError(f"unknown eigenvalue block kind {kind!r}")
    if not out:
        raise DomainError("at least one eigenvalue block is required")
    return out


def pair_generator(lam: float) -> np.ndarray:
    """``A`` on two real coordinates with eigenvalues ``lam`` and ``1/lam``."""
    s, t = (lam + 1 / lam) / 2, (lam - 1 / lam) / 2
    return np.array([[s, 1j * t], [-1j * t, s]])


def generator_from_blocks(blocks) -> np.ndarray:
    parts = []
    for kind, lam in _parse_blocks(blocks):
        parts.append(np.eye(1, dtype=complex) if kind == "invariant" else pair_generator(lam))
    return sla.block_diag(*parts)


def _hermitian_function(A: np.ndarray, fn) -> np.ndarray:
    w, v = np.linalg.eigh(A)
    return (v * fn(w)) @ v.conj().T


def deformation_gram(A: np.ndarray) -> np.ndarray:
    """``B = 2 A (1 + A)^{-1}``, so that ``<x, y>_U = y^H B x``."""
    return _hermitian_function(A, lambda w: 2 * w / (1 + w))


class AWModel(FockModel):
    """q-Araki-Woods Fock space over ``H_R = R^d`` with generator ``A``."""

    def __init__(self, blocks=None, q: float = 0.0, N: int = 3, A: np.ndarray | None = None, basis: FockBasis | None = None):
        if A is None:
            if blocks is None:
                raise DomainError("give eigenvalue blocks or a generator A")
            self.blocks = _parse_blocks(blocks)
            A = generator_from_blocks(self.blocks)
        else:
            self.blocks = None
        A = np.asarray(A, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DomainError(f"A must be square, got shape {A.shape}")
        if not np.allclose(A, A.conj().T, atol=1e-12):
            raise DomainError("A must be Hermitian")
        w = np.linalg.eigvalsh(A)
        if w.min() <= 0:
            raise DomainError(f"A must be positive definite, smallest eigenvalue {w.min():.3e}")
        q = float(q)
        if not -1 < q < 1:
            raise DomainError(f"q must lie in (-1, 1), got {q}")
        self.A = A
        self.q = q
        self.crossing_q = q
        self.tracial = False
        d = A.shape[0]
        self.basis = basis or FockBasis(d, N)
        if self.basis.d != d:
            raise DomainError(f"basis alphabet {self.basis.d} does not match dim A = {d}")
        self.B = deformation_gram(A)
        self._series = GramSeries(QMatrix.constant(d, q), None, self.basis.budget)
        self._grams: dict[int, np.ndarray] = {}
        self._ops: dict = {}
        self.K = hr_prime_basis(self)

    @property
    def dim_R(self) -> int:
        return self.d

    def one_particle_gram(self) -> np.ndarray:
        return self.B

    def gram(self, n: int) -> np.ndarray:
        if n not in self._grams:
            Bn = np.ones((1, 1), dtype=complex)
            for _ in range(n):
                Bn = np.kron(Bn, self.B)
            g = self._series.block(n) @ Bn
            self._grams[n] = (g + g.conj().T) / 2
        return self._grams[n]

    def U(self, t: float) -> np.ndarray:
        return _hermitian_function(self.A, lambda w: np.exp(1j * t * np.log(w)))

    def aw_inner(self, x, y) -> complex:
        return complex(np.vdot(np.asarray(y), self.B @ np.asarray(x)))

    def _coefficients(self, f) -> np.ndarray:
        """``c_j = <e_j, f>_U``."""
        return np.conj(np.asarray(f)) @ self.B

    def left_annihilation(self, f) -> BlockOperator:
        c, q = self._coefficients(f), self.q
        return removal_operator(self.basis, lambda words, n, k: q**k * c[words[:, k]], "l*")

    def right_annihilation(self, f) -> BlockOperator:
        c, q = self._coefficients(f), self.q
        return removal_operator(self.basis, lambda words, n, k: q ** (n - 1 - k) * c[words[:, k]], "r*")

    def field(self, f, side: str = "left") -> BlockOperator:
        f = np.asarray(f)
        key = (side, f.tobytes(), f.dtype.str)
        if key not in self._ops:
            self._ops[key] = super().field(f, side)
        return self._ops[key]

    def conj_right(self, f) -> np.ndarray:
        """``I_r``: complex conjugation of the coordinates in a real basis of ``H_R'``."""
        K = self.K
        return K @ np.conj(np.linalg.solve(K, np.asarray(f, dtype=complex)))

    def invariant_letters(self, tol: float = 1e-12) -> list[int]:
        e = np.eye(self.d)
        return [i for i in range(self.d) if np.linalg.norm(self.A @ e[i] - e[i]) <= tol]


def aw_inner(model: AWModel, xi, eta) -> complex:
    return model.aw_inner(xi, eta)


# -- H_R' and I_r ----------------------------------------------------------------


def hr_prime_basis(model: AWModel, tol: float = 1e-10) -> np.ndarray:
    """Columns form a real basis of ``H_R'`` (as complex coordinate vectors).

    ``x + i y`` lies in ``H_R'`` iff ``Im <x + i y, e_k>_U = 0`` for every real
    ``e_k``, i.e. ``Im(B) x + Re(B) y = 0``; the kernel is found by SVD.
    """
    B = model.B
    M = np.hstack([B.imag, B.real])
    ns = sla.null_space(M, rcond=tol)
    d = B.shape[0]
    if ns.shape[1] != d:
        raise DegeneracyError(f"H_R' has real dimension {ns.shape[1]}, expected {d}")
    K = ns[:d] + 1j * ns[d:]
    if np.linalg.matrix_rank(K, tol=tol) != d:
        raise DegeneracyError("H_R' basis is not complex-linearly independent")
    return K


def hr_prime_residual(model: AWModel, xi) -> float:
    """``max_k |Im <xi, e_k>_U|``: zero iff ``xi`` is in ``H_R'``."""
    return float(np.max(np.abs((model.B @ np.asarray(xi)).imag)))


def structure_checks(model: AWModel, rng: np.random.Generator, tol: float = STRUCTURE_TOL, samples: int = 10) -> CheckReport:
    """Real-part restriction, ``U_t`` unitarity and the ``A = 1`` degeneration."""
    rep = CheckReport()
    d = model.d
    worst_re = worst_ut = worst_real = 0.0
    for _ in range(samples):
        x, y = rng.standard_normal(d), rng.standard_normal(d)
        worst_re = max(worst_re, abs(model.aw_inner(x, y).real - float(x @ y)))
        u, v = rng.standard_normal(d) + 1j * rng.standard_normal(d), rng.standard_normal(d) + 1j * rng.standard_normal(d)
        t = float(rng.uniform(-5, 5))
        Ut = model.U(t)
        worst_ut = max(worst_ut, abs(model.aw_inner(Ut @ u, Ut @ v) - model.aw_inner(u, v)))
        worst_real = max(worst_real, float(np.max(np.abs(Ut.imag))))
    rep.add(residual_check("aw/real-part-restriction", worst_re, tol))
    rep.add(residual_check("aw/U_t-unitary", worst_ut, tol))
    rep.add(residual_check("aw/U_t-real", worst_real, tol))
    flat = AWModel(A=np.eye(d), q=model.q, N=1)
    rep.add(residual_check("aw/A=1/undeformed-product", float(np.max(np.abs(flat.B - np.eye(d)))), tol))
    rep.add(residual_check("aw/A=1/H_R'=H_R", float(np.max(np.abs(flat.K.imag))), tol))
    K = model.K
    rep.add(residual_check("aw/H_R'-membership", max(hr_prime_residual(model, K[:, j]) for j in range(d)), tol))
    rep.data["dim_R_prime"] = int(K.shape[1])
    return rep


def ir_orthogonality_check(model: AWModel, trials: int, rng: np.random.Generator, tol: float = IR_TOL) -> CheckReport:
    """For ``f`` real and ``e`` orthogonal to it, ``<I_r e, f>_U = 0``."""
    d = model.d
    worst = 0.0
    for _ in range(trials):
        f = rng.standard_normal(d)
        e = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        e = e - model.aw_inner(e, f) / model.aw_inner(f, f) * f
        e /= np.sqrt(model.aw_inner(e, e).real)
        worst = max(worst, abs(model.aw_inner(model.conj_right(e), f)))
    return CheckReport([residual_check(f"aw/I_r-orthogonality/{trials}-trials", worst, tol)])


# -- commutation relations ---------------------------------------------------------


def aw_commutation_check(model: AWModel, f, g, tol: float = COMMUTATION_TOL) -> CheckReport:
    """``[l*(f), r*(g)] = 0`` and ``r*(g) l(f) - l(f) r*(g) = <f, g>_U q^k`` on level ``k``.

    The reverse orientation ``l(f) r*(g) - r*(g) l(f)`` carries the opposite
    sign; it is reported in ``data`` for reference.
    """
    f, g = np.asarray(f, dtype=complex), np.asarray(g, dtype=complex)
    ls, rs, lc = model.left_annihilation(f), model.right_annihilation(g), model.left_creation(f)
    basis = model.basis
    rep = CheckReport()
    D = (ls @ rs - rs @ ls).matrix
    rep.add(residual_check("aw/[l*(f),r*(g)]", float(np.max(np.abs(D.data))) if D.nnz else 0.0, tol))
    C = rs @ lc - lc @ rs
    fg = model.aw_inner(f, g)
    worst, literal = 0.0, []
    for k in range(basis.N):
        b = C.block(k, k)
        target = fg * model.q**k * np.eye(basis.level_dim(k))
        worst = max(worst, float(np.max(np.abs(b - target))))
        literal.append(float(np.max(np.abs(-b - target))))
    rep.add(residual_check("aw/r*(g)l(f)-l(f)r*(g)=<f,g>q^k", worst, tol))
    rep.data["reverse_orientation_residual"] = literal
    rep.data["inner_fg"] = [fg.real, fg.imag]
    return rep


# -- modular data --------------------------------------------------------------------


@dataclass
class ModularData:
    cap: int
    S: np.ndarray  # S v = S @ conj(v) on levels 0..cap
    Delta: np.ndarray
    Jmod: np.ndarray  # J v = Jmod @ conj(v)
    candidate: np.ndarray
    gram: np.ndarray
    report: CheckReport = field(default_factory=CheckReport)


def _kron_power(M: np.ndarray, n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=M.dtype)
    for _ in range(n):
        out = np.kron(out, M)
    return out


def modular_data(model: FockModel, cap: int, tol: float = MODULAR_TOL) -> ModularData:
    """Tomita operator ``W(w) Omega -> W(w)^* Omega`` on words of degree ``<= cap``.

    With ``S v = M conj(v)``, ``Delta = S^* S = G^{-1} conj(M^H G M)`` and the
    polar part is ``J = S Delta^{-1/2}``.  Needs ``2 cap <= N`` so that the
    adjoints are exact on the vacuum.
    """
    basis = model.basis
    if 2 * cap > basis.N:
        raise PreconditionError(f"modular data up to degree {cap} needs N >= {2 * cap}, have {basis.N}")
    dim = basis.offsets[cap + 1]
    M = np.zeros((dim, dim), dtype=complex)
    G = sla.block_diag(*[model.gram(n) for n in range(cap + 1)]).astype(complex)
    Ginv = np.linalg.inv(G)
    for k in range(dim):
        w = np.zeros(basis.dim, dtype=complex)
        w[k] = 1
        W = wick(model, w).operator.matrix
        row0 = W[0, :dim].toarray().ravel()
        M[:, k] = Ginv @ np.conj(row0)
    Delta = Ginv @ np.conj(M.conj().T @ G @ M)
    Gh, Gih = hermitian_sqrt(G), hermitian_inv_sqrt(G)
    X = Gh @ Delta @ Gih
    X = (X + X.conj().T) / 2
    w, V = np.linalg.eigh(X)
    if w.min() <= 1e-12:
        raise DegeneracyError(f"Delta is singular: smallest eigenvalue {w.min():.3e}")
    half = Gih @ ((V * np.sqrt(w)) @ V.conj().T) @ Gh
    ihalf = Gih @ ((V / np.sqrt(w)) @ V.conj().T) @ Gh
    Jm = M @ np.conj(ihalf)
    A = getattr(model, "A", np.eye(model.d))
    cand = sla.block_diag(*[_kron_power(np.linalg.inv(A), n) for n in range(cap + 1)])
    rep = CheckReport()
    eye = np.eye(dim)
    rep.add(residual_check(f"modular/S^2=1/deg<={cap}", float(np.max(np.abs(M @ np.conj(M) - eye))), tol))
    rep.add(floor_check(f"modular/Delta-positive/deg<={cap}", float(w.min()), 1e-12))
    rep.add(residual_check(f"modular/J*Delta^1/2=S/deg<={cap}", float(np.max(np.abs(Jm @ np.conj(half) - M))), tol))
    rep.add(residual_check(f"modular/J-antiunitary/deg<={cap}", float(np.max(np.abs(Jm.conj().T @ G @ Jm - np.conj(G)))), tol))
    rep.add(residual_check(f"modular/J^2=1/deg<={cap}", float(np.max(np.abs(Jm @ np.conj(Jm) - eye))), tol))
    rep.add(residual_check(f"modular/Delta=(A^-1)^n/deg<={cap}", float(np.max(np.abs(Delta - cand))), tol))
    fixes = max(float(np.max(np.abs(M[:, basis.offsets[1] + i] - eye[:, basis.offsets[1] + i]))) for i in range(model.d))
    rep.add(residual_check("modular/S-fixes-real-letters", fixes, tol))
    rep.data["delta_eigenvalues_level1"] = sorted(np.linalg.eigvals(Delta[1 : 1 + model.d, 1 : 1 + model.d]).real.tolist())
    return ModularData(cap, M, Delta, Jm, cand, G, rep)


# -- centralizer and traciality ------------------------------------------------------


def state_commutator(model: FockModel, x: list[BlockOperator], y: list[BlockOperator]) -> float:
    return abs(vacuum_moment(x + y) - vacuum_moment(y + x))


def centralizer_check(
    model: AWModel,
    xi0,
    trials: int,
    rng: np.random.Generator,
    degree_cap: int = 3,
    tol: float = CENTRALIZER_TOL,
    require_invariant: bool = True,
) -> CheckReport:
    """``phi(W(xi0) y) = phi(y W(xi0))`` for random field words ``y``, plus q-semicircular moments."""
    xi0 = np.asarray(xi0, dtype=complex)
    inv_res = float(np.linalg.norm(model.A @ xi0 - xi0))
    if require_invariant and inv_res > 1e-10:
        raise PreconditionError(f"xi0 is not A-invariant (residual {inv_res:.3e})")
    if degree_cap + 1 > model.N:
        raise PreconditionError(f"words of length {degree_cap} need N >= {degree_cap + 1}")
    s0 = model.field(xi0)
    worst, witness = 0.0, None
    for _ in range(trials):
        y = random_generator_word(rng, model.d, degree_cap)
        ops = [model.field(model.letter(a)) for a in y]
        dev = state_commutator(model, [s0], ops)
        if dev >= worst:
            worst, witness = dev, y
    rep = CheckReport([residual_check("centralizer/phi(W(xi0)y)=phi(yW(xi0))", worst, tol)])
    rep.data["witness"] = witness
    nrm = np.sqrt(model.aw_inner(xi0, xi0).real)
    for order in (2, 4):
        if order <= model.N:
            m = vacuum_moment([s0] * order) / nrm**order
            rep.add(identity_check(f"centralizer/moment{order}", m, pair_partition_moment(model.q, 0, order), tol))
    return rep


def nontracial_witness(model: FockModel, max_len: int = 2, threshold: float = NONTRACIAL_THRESHOLD) -> CheckReport:
    """Largest ``|phi(ab) - phi(ba)|`` over field words ``a, b`` up to ``max_len`` letters."""
    worst, witness = 0.0, None
    words = [w for n in range(1, max_len + 1) for w in itertools.product(range(model.d), repeat=n)]
    for a, b in itertools.product(words, repeat=2):
        if len(a) + len(b) > model.N:
            continue
        dev = state_commutator(model, [model.field(model.letter(i)) for i in a], [model.field(model.letter(i)) for i in b])
        if dev > worst:
            worst, witness = dev, (a, b)
    rep = CheckReport([exceed_check("aw/non-traciality-witness", worst, threshold)])
    rep.data["witness"] = witness
    return rep


# -- fixed vectors ---------------------------------------------------------------------


@dataclass
class FixedSubspace:
    level: int
    basis: np.ndarray  # columns, coordinates in the level
    eigen_words: list[tuple[int, ...]]
    eigenvalues: np.ndarray
    report: CheckReport


def fixed_vector_subspace(model: AWModel, n: int, tol: float = 1e-9) -> FixedSubspace:
    """Fixed vectors of ``U_t^{(x)n}``: eigen-words whose eigenvalue product is 1.

    Checked against the kernel of the generator ``sum_k 1 (x) .. log A .. (x) 1``.
    """
    mu, V = np.linalg.eigh(model.A)
    logs = np.log(mu)
    eigen_words = [w for w in itertools.product(range(model.d), repeat=n) if abs(sum(logs[list(w)])) <= tol]
    cols = []
    for w in eigen_words:
        v = np.ones(1, dtype=complex)
        for a in w:
            v = np.kron(v, V[:, a])
        cols.append(v)
    D = model.d**n
    F = np.array(cols).T if cols else np.zeros((D, 0), dtype=complex)
    L = np.zeros((D, D), dtype=complex)
    logA = _hermitian_function(model.A, np.log)
    for k in range(n):
        L += np.kron(np.kron(np.eye(model.d**k), logA), np.eye(model.d ** (n - 1 - k)))
    kernel = sla.null_space(L, rcond=1e-10) if n else np.ones((1, 1))
    rep = CheckReport()
    rep.add(identity_check(f"fixed/level{n}/dimension", F.shape[1], kernel.shape[1], 0))
    if F.shape[1] and kernel.shape[1] == F.shape[1]:
        P1 = F @ np.linalg.pinv(F)
        P2 = kernel @ kernel.conj().T
        rep.add(residual_check(f"fixed/level{n}/span=kernel", float(np.max(np.abs(P1 - P2))), tol))
        Ut = _kron_power(model.U(1.234), n)
        rep.add(residual_check(f"fixed/level{n}/U_t-fixed", float(np.max(np.abs(Ut @ F - F))), tol))
    return FixedSubspace(n, F, eigen_words, mu, rep)


# -- the Wick chain over an invariant vector -----------------------------------------


@dataclass
class Thm44Witness:
    xi0: np.ndarray  # one-particle vector
    eta: np.ndarray  # one-particle vector in H_R'
    xi: np.ndarray  # Fock vector over C xi0
    lam: complex = 0j
    zeta: np.ndarray | None = None


def make_witness(model: AWModel, coeffs, eta=None, xi0=None) -> Thm44Witness:
    """``xi = sum_k coeffs[k] xi0^{(x)k}``; ``eta`` defaults to a real ``H_R'`` vector orthogonal to ``xi0``."""
    if xi0 is None:
        inv = model.invariant_letters()
        if not inv:
            raise PreconditionError("model has no invariant letter")
        xi0 = model.letter(inv[0])
    xi0 = np.asarray(xi0, dtype=complex)
    if eta is None:
        K = model.K
        cand = [K[:, j] for j in range(model.d)]
        cand = [c - model.aw_inner(c, xi0) / model.aw_inner(xi0, xi0) * xi0 for c in cand]
        eta = max(cand, key=lambda c: model.aw_inner(c, c).real)
        eta = eta / np.sqrt(model.aw_inner(eta, eta).real)
    basis = model.basis
    if len(coeffs) > basis.N:
        raise PreconditionError(f"xi of degree {len(coeffs) - 1} does not fit N={basis.N}")
    xi = basis.zeros(complex)
    power = np.ones(1, dtype=complex)
    for k, c in enumerate(coeffs):
        xi[basis.level_slice(k)] += c * power
        power = np.kron(power, xi0)
    lam = complex(xi[0])
    zeta = xi.copy()
    zeta[0] = 0
    return Thm44Witness(xi0, np.asarray(eta, dtype=complex), xi, lam, zeta)


def _embed(basis: FockBasis, f: np.ndarray) -> np.ndarray:
    v = basis.zeros(complex)
    v[basis.level_slice(1)] = f
    return v


def _right_tensor(basis: FockBasis, eta: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """``eta (x) xi`` for a one-particle ``eta``; the top level of ``xi`` must be free."""
    out = basis.zeros(complex)
    for n in range(basis.N):
        out[basis.level_slice(n + 1)] = np.kron(eta, xi[basis.level_slice(n)])
    return out


def thm44_chain_check(model: AWModel, witness: Thm44Witness, tol: float = CHAIN_TOL) -> CheckReport:
    """The computation chain for a vector ``xi`` over ``C xi0`` and ``eta`` in ``H_R'``.

    Equalities: (i) ``W(xi) eta = eta (x) xi``; (ii) the Pythagorean split
    ``||eta (x) xi||^2 = |lambda|^2 ||eta||^2 + ||eta (x) zeta||^2``; (iii) the same with
    ``zeta = 0`` imposed.  The companions ``W(eta) xi = eta (x) xi``,
    ``W_r(xi) eta = eta (x) xi`` and ``W_r(eta) = W_r(eta)^*`` are checked as well.
    """
    basis = model.basis
    xi0, eta, xi = witness.xi0, witness.eta, witness.xi
    deg = basis.max_degree(xi)
    if deg + 1 > basis.N:
        raise PreconditionError(f"xi of degree {deg} needs N >= {deg + 1}")
    pre = {
        "|xi0|=1": abs(np.sqrt(model.aw_inner(xi0, xi0).real) - 1),
        "A xi0 = xi0": float(np.linalg.norm(model.A @ xi0 - xi0)),
        "<eta,xi0>=0": abs(model.aw_inner(eta, xi0)),
        "<I eta,xi0>=0": abs(model.aw_inner(np.conj(eta), xi0)),
        "eta in H_R'": hr_prime_residual(model, eta),
    }
    bad = {k: v for k, v in pre.items() if v > 1e-10}
    if bad:
        raise PreconditionError(f"witness violates {sorted(bad)}")
    rep = CheckReport()
    E = _embed(basis, eta)
    target = _right_tensor(basis, eta, xi)
    lhs = wick(model, xi).operator.matrix @ E
    rep.add(residual_check("chain/(i)W(xi)eta=eta(x)xi", model.norm(lhs - target), tol))
    lam, zeta = witness.lam, witness.zeta
    n_target = model.norm(target) ** 2
    split = abs(lam) ** 2 * model.norm(E) ** 2 + model.norm(_right_tensor(basis, eta, zeta)) ** 2
    rep.add(identity_check("chain/(ii)pythagorean-split", n_target, split, tol, relative=True))
    reduced = _right_tensor(basis, eta, lam * basis.vacuum(complex))
    rep.add(
        identity_check("chain/(iii)zeta=0", model.norm(reduced) ** 2, abs(lam) ** 2 * model.norm(E) ** 2, tol, relative=True)
    )
    rep.add(residual_check("chain/W(eta)xi=eta(x)xi", model.norm(wick(model, E).operator.matrix @ xi - target), tol))
    Wr_xi = right_wick(model, xi, "recursion").operator.matrix
    rep.add(residual_check("chain/W_r(xi)eta=eta(x)xi", model.norm(Wr_xi @ E - target), tol))
    Wr_eta = right_wick(model, E, "recursion").operator
    adj = model.adjoint(Wr_eta)
    top = basis.offsets[min(Wr_eta.safe_degree, adj.safe_degree) + 1]
    diff = (Wr_eta.matrix - adj.matrix)[:, :top]
    rep.add(residual_check("chain/W_r(eta)-self-adjoint", float(np.max(np.abs(diff.data))) if diff.nnz else 0.0, tol))
    rep.data["W(xi)eta-minus-xi(x)eta"] = model.norm(lhs - _left_tensor(basis, xi, eta))
    rep.data["lambda"] = [lam.real, lam.imag]
    rep.data["zeta_norm"] = model.norm(zeta)
    return rep


def _left_tensor(basis: FockBasis, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    out = basis.zeros(complex)
    for n in range(basis.N):
        out[basis.level_slice(n + 1)] = np.kron(xi[basis.level_slice(n)], eta)
    return out


# -- second quantization ---------------------------------------------------------------


def second_quantization(model: FockModel, P: np.ndarray, tol: float = 1e-12) -> BlockOperator:
    """``F(P) = 1 (+) P (+) P(x)P (+) ...`` on the truncated space."""
    P = np.asarray(P)
    d = model.d
    if P.shape != (d, d):
        raise DomainError(f"P must be {d}x{d}, got {P.shape}")
    A = getattr(model, "A", None)
    if A is not None:
        res = float(np.max(np.abs(P @ A - A @ P)))
        if res > tol:
            raise PreconditionError(f"P does not commute with A (residual {res:.3e})")
    blocks = [_kron_power(P.astype(complex), n) for n in range(model.N + 1)]
    m = sp.block_diag(blocks, format="csr")
    m.eliminate_zeros()
    return BlockOperator(model.basis, m, 0, 0, 0, "F(P)")


def projection_checks(model: FockModel, FP: BlockOperator, name: str = "F(P)", tol: float = 1e-10) -> CheckReport:
    """Idempotence and self-adjointness in the deformed Gram."""
    X = FP.matrix
    G = model.gram_operator
    idem = (X @ X - X)
    sa = (G @ X - X.conj().T @ G)
    rep = CheckReport()
    rep.add(residual_check(f"{name}/idempotent", float(np.max(np.abs(idem.data))) if idem.nnz else 0.0, tol))
    rep.add(residual_check(f"{name}/self-adjoint", float(np.max(np.abs(sa.data))) if sa.nnz else 0.0, tol))
    return rep


def letter_projection(d: int, letters) -> np.ndarray:
    P = np.zeros((d, d))
    for i in letters:
        P[i, i] = 1
    return P


def intersection_rank(model: FockModel, P1: np.ndarray, P2: np.ndarray, tol: float = 1e-10) -> int:
    """``dim(range F(P1) cap range F(P2))`` on the truncated space."""
    R1 = second_quantization(model, P1).matrix.toarray()
    R2 = second_quantization(model, P2).matrix.toarray()
    r1 = np.linalg.matrix_rank(R1, tol=tol)
    r2 = np.linalg.matrix_rank(R2, tol=tol)
    r12 = np.linalg.matrix_rank(np.hstack([R1, R2]), tol=tol)
    return int(r1 + r2 - r12)
