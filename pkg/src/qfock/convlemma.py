"""Numerical harness for the commutator-expansion convergence lemma.

Two operator families ``a_1 .. a_r`` and ``b_1 .. b_s`` each shift the degree by
``+-1`` and have commutators ``C_ij = a_i b_j - b_j a_i`` of norm at most ``q^n``
on level ``n``.  With ``K`` a graded subspace such that ``a_i(K) c K`` for
``i < r`` and ``a_r K = 0``, the telescoping expansion gives

    <a_1^* .. a_r^* xi, b_1 .. b_s eta> = sum_n <xi, T_n eta^(n)>,
    T_n = sum_{i,j} a_r .. a_{i+1} b_1 .. b_{j-1} C_ij b_{j+1} .. b_s a_{i-1} .. a_1,

and hence ``|LHS| <= C ||xi|| sum_n q^n ||eta^(n)||``.  Here the level ``m'`` at
which ``C_ij`` acts is tracked exactly and ``C`` is built from measured level
norms of the factors.  Levels start at 0 because the Fock space contains the
vacuum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .arakiwoods import AWModel
from .errors import DomainError, PreconditionError
from .fock import FockBasis
from .operators import BlockOperator, FockModel, apply_chain, headroom_of_product
from .qgram import QMatrix
from .qops import MixedModel
from .report import CheckReport, Check, bound_check, residual_check

HYPOTHESIS_SLACK = 1e-10
EXPANSION_TOL = 1e-9


@dataclass
class ConvSetup:
    name: str
    model: FockModel
    a: list[BlockOperator]
    b: list[BlockOperator]
    K: np.ndarray  # boolean mask over the whole basis
    q: float
    xi: np.ndarray
    eta: np.ndarray
    notes: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.a)

    @property
    def s(self) -> int:
        return len(self.b)


def subfock_mask(basis: FockBasis, letters) -> np.ndarray:
    """Words all of whose letters lie in ``letters`` (the vacuum included)."""
    allowed = np.zeros(basis.d, dtype=bool)
    allowed[list(letters)] = True
    mask = np.zeros(basis.dim, dtype=bool)
    for n in range(basis.N + 1):
        words = basis.level_words(n)
        mask[basis.level_slice(n)] = np.all(allowed[words], axis=1) if n else True
    return mask


def _shift(op: BlockOperator) -> int:
    if op.shift_min != op.shift_max or op.shift_min not in (-1, 1):
        raise DomainError(f"{op.label}: family members must shift the degree by exactly +-1")
    return op.shift_min


def _max_abs(m) -> float:
    return float(np.max(np.abs(m.data))) if m.nnz else 0.0


# -- hypotheses --------------------------------------------------------------------


def commutator(a: BlockOperator, b: BlockOperator) -> BlockOperator:
    return a @ b - b @ a


def commutator_level_norms(setup: ConvSetup, i: int, j: int) -> list[float]:
    """Deformed norms of ``C_ij`` on every level whose image is exact."""
    C = commutator(setup.a[i], setup.b[j])
    model = setup.model
    out = []
    for n in range(min(C.safe_degree, model.N) + 1):
        m = n + _shift(setup.a[i]) + _shift(setup.b[j])
        out.append(model.operator_level_norm(C, m, n) if 0 <= m <= model.N else 0.0)
    return out


def fitted_rate(norms: list[float], floor: float = 1e-13) -> float | None:
    """``exp`` of the least-squares slope of ``log ||C|_n||`` over levels with a nonzero norm."""
    pts = [(n, np.log(v)) for n, v in enumerate(norms) if v > floor]
    if len(pts) < 2:
        return None
    n, y = np.array(pts).T
    slope = np.polyfit(n, y, 1)[0]
    return float(np.exp(slope))


def _safe_columns(op: BlockOperator) -> slice:
    return slice(0, op.basis.offsets[min(op.safe_degree, op.basis.N) + 1])


def validate_setup(setup: ConvSetup, slack: float = HYPOTHESIS_SLACK) -> CheckReport:
    """Measure the lemma's hypotheses: degree shifts, commutator decay, K-invariance and ``a_r K = 0``."""
    rep = CheckReport()
    shifts_ok = {}
    for op in setup.a + setup.b:
        try:
            _shift(op)
            ok = True
        except DomainError:
            ok = False
        shifts_ok[id(op)] = ok
        rep.add(Check(f"{setup.name}/shift/{op.label}", float(op.shift_min), float(op.shift_max), 0.0, ok))
    rates = {}
    for i, j in itertools.product(range(setup.r), range(setup.s)):
        if not (shifts_ok[id(setup.a[i])] and shifts_ok[id(setup.b[j])]):
            continue
        norms = commutator_level_norms(setup, i, j)
        excess = max(v - setup.q**n for n, v in enumerate(norms))
        rep.add(bound_check(f"{setup.name}/decay/a{i + 1}b{j + 1}", excess, 0.0, slack, note=f"levels 0..{len(norms) - 1}"))
        rates[f"a{i + 1}b{j + 1}"] = {"norms": norms, "rate": fitted_rate(norms)}
    K = setup.K
    outside = ~K
    for i, op in enumerate(setup.a[:-1]):
        cols = np.nonzero(K[_safe_columns(op)])[0]
        leak = op.matrix[outside][:, cols]
        rep.add(residual_check(f"{setup.name}/K-invariant/a{i + 1}", _max_abs(leak), 0.0))
    ar = setup.a[-1]
    cols = np.nonzero(K[_safe_columns(ar)])[0]
    rep.add(residual_check(f"{setup.name}/a_r-kills-K", _max_abs(ar.matrix[:, cols]), 0.0))
    for label, v in (("xi", setup.xi), ("eta", setup.eta)):
        rep.add(residual_check(f"{setup.name}/{label}-in-K", float(np.max(np.abs(v[outside]), initial=0.0)), 0.0))
    rep.data["commutator_decay"] = rates
    return rep


# -- the expansion --------------------------------------------------------------------


def _term_chain(setup: ConvSetup, i: int, j: int, C: BlockOperator) -> list[BlockOperator]:
    a, b = setup.a, setup.b
    return list(reversed(a[i + 1 :])) + b[:j] + [C] + b[j + 1 :] + list(reversed(a[:i]))


def commutator_level(setup: ConvSetup, i: int, j: int, n: int) -> int:
    """``m'(i, j, n)``: the level on which ``C_ij`` acts inside the ``(i, j)`` term of ``T_n``."""
    return n + sum(_shift(op) for op in setup.b[j + 1 :]) + sum(_shift(op) for op in setup.a[:i])



def _check_annihilated(setup: ConvSetup, tol: float = 1e-12):
    v = setup.eta
    for op in setup.a:
        v = op.matrix @ v
    res = float(np.max(np.abs(v), initial=0.0))
    if res > tol * (1 + float(np.max(np.abs(setup.eta)))):
        raise PreconditionError(f"{setup.name}: a_r .. a_1 eta != 0 (residual {res:.3e})")


def expansion_terms(setup: ConvSetup) -> dict[int, np.ndarray]:
    """``T_n eta^(n)`` for every level ``n`` carrying part of ``eta``."""
    basis = setup.model.basis
    comms = {(i, j): commutator(setup.a[i], setup.b[j]) for i in range(setup.r) for j in range(setup.s)}
    out = {}
    for n in range(basis.N + 1):
        eta_n = basis.zeros(complex)
        eta_n[basis.level_slice(n)] = setup.eta[basis.level_slice(n)]
        if not np.any(eta_n):
            continue
        total = basis.zeros(complex)
        for (i, j), C in comms.items():
            total += apply_chain(_term_chain(setup, i, j, C), eta_n)
        out[n] = total
    return out


def lhs_value(setup: ConvSetup) -> complex:
    model = setup.model
    adj = [model.adjoint(op) for op in setup.a]
    left = apply_chain(adj, setup.xi)  # a_1^* .. a_r^* xi
    right = apply_chain(setup.b, setup.eta)
    return complex(model.inner(left, right))


def tn_expansion_check(setup: ConvSetup, tol: float = EXPANSION_TOL) -> CheckReport:
    _check_annihilated(setup)
    lhs = lhs_value(setup)
    terms = expansion_terms(setup)
    rhs = complex(sum(setup.model.inner(setup.xi, t) for t in terms.values()))
    diff = abs(lhs - rhs)
    ok = diff <= tol * (1 + abs(lhs))
    rep = CheckReport([Check(f"{setup.name}/expansion", abs(lhs), abs(rhs), tol, bool(ok), note=f"|diff|={diff:.3e}")])
    rep.data.update(lhs=[lhs.real, lhs.imag], rhs=[rhs.real, rhs.imag])
    return rep


# -- the estimate ---------------------------------------------------------------------


def term_bound(setup: ConvSetup, n: int) -> float:
    """``B_n``: a bound for ``||T_n|_{H_n}||`` from factor level norms and ``q^{m'}``."""
    model = setup.model
    total = 0.0
    for i, j in itertools.product(range(setup.r), range(setup.s)):
        C = commutator(setup.a[i], setup.b[j])
        chain = _term_chain(setup, i, j, C)
        level, prod, alive = n, 1.0, True
        for op in reversed(chain):
            target = level + (_shift(setup.a[i]) + _shift(setup.b[j]) if op is C else _shift(op))
            if target < 0 or target > model.N:
                alive = False
                break
            if op is C:
                prod *= setup.q**level
            else:
                prod *= model.operator_level_norm(op, target, level)
            level = target
        if alive:
            total += prod
    return total


def tail_checks(setup: ConvSetup) -> list[Check]:
    model = setup.model
    norms = [model.level_norm(setup.eta, n) for n in range(model.N + 1)]
    sup = max(norms)
    q = setup.q
    out = []
    for N0 in range(model.N + 1):
        tail = sum(q**n * norms[n] for n in range(N0, model.N + 1))
        out.append(bound_check(f"{setup.name}/tail/N0={N0}", tail, sup * q**N0 / (1 - q), 1e-15))
    return out


def conv_bound_check(setup: ConvSetup) -> CheckReport:
    """``|LHS| <= C ||xi|| sum_n q^n ||eta^(n)||`` with ``C = max_n B_n / q^n``."""
    _check_annihilated(setup)
    model = setup.model
    q = setup.q
    if not 0 < q < 1:
        raise DomainError(f"{setup.name}: decay constant must lie in (0, 1), got {q}")
    lhs = abs(lhs_value(setup))
    levels = [n for n in range(model.N + 1) if np.any(setup.eta[model.basis.level_slice(n)])]
    bounds = {n: term_bound(setup, n) for n in levels}
    C = max((bounds[n] / q**n for n in levels), default=0.0)
    weighted = sum(q**n * model.level_norm(setup.eta, n) for n in levels)
    rhs = C * model.norm(setup.xi) * weighted
    rep = CheckReport([bound_check(f"{setup.name}/estimate", lhs, rhs, 1e-12 * (1 + rhs))])
    terms = expansion_terms(setup)
    worst = max(
        (model.norm(terms[n]) - bounds[n] * model.level_norm(setup.eta, n) for n in terms), default=0.0
    )
    rep.add(bound_check(f"{setup.name}/T_n-level-bound", worst, 0.0, 1e-10))
    rep.extend(tail_checks(setup))
    rep.data.update(C=C, lhs=lhs, rhs=rhs, ratio=(lhs / rhs if rhs else 0.0), B_n={str(n): b for n, b in bounds.items()})
    return rep


# -- setups -------------------------------------------------------------------------------


def random_in_mask(basis: FockBasis, mask: np.ndarray, max_degree: int, rng: np.random.Generator, levels=None) -> np.ndarray:
    v = basis.zeros(complex)
    sel = mask & (basis.degrees() <= max_degree)
    if levels is not None:
        sel &= np.isin(basis.degrees(), list(levels))
    k = int(sel.sum())
    v[sel] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return v / np.linalg.norm(v)


def make_setup(
    name: str,
    model: FockModel,
    a: list[BlockOperator],
    b: list[BlockOperator],
    K: np.ndarray,
    q: float,
    rng: np.random.Generator,
    eta_levels=None,
) -> ConvSetup:
    """Draw ``xi, eta`` in ``K`` at the largest degrees the truncation allows."""
    N = model.N
    eta_deg = N - max(headroom_of_product(b), headroom_of_product(list(reversed(a)) + b))
    xi_deg = N - headroom_of_product([model.adjoint(op) for op in a])
    if eta_deg < 0 or xi_deg < 0:
        raise PreconditionError(f"{name}: N={N} leaves no room for the families")
    xi = random_in_mask(model.basis, K, xi_deg, rng)
    eta = random_in_mask(model.basis, K, eta_deg, rng, eta_levels)
    return ConvSetup(name, model, list(a), list(b), K, q, xi, eta, {"xi_degree": xi_deg, "eta_degree": eta_deg})


def _mixed_ops(model: MixedModel, spec: str) -> BlockOperator:
    """``"r0*"``, ``"l1"``, ``"l2*"`` and the like."""
    side = "left" if spec[0] == "l" else "right"
    i = int(spec[1:].rstrip("*"))
    return model.letter_annihilation(i, side) if spec.endswith("*") else model.letter_creation(i, side)


def mixed_setup(name, Q: QMatrix, N: int, a: list[str], b: list[str], K_letters, rng, q=None, eta_levels=None) -> ConvSetup:
    model = MixedModel(Q, N)
    q = Q.qmax if q is None else q
    K = subfock_mask(model.basis, K_letters)
    return make_setup(
        name, model, [_mixed_ops(model, x) for x in a], [_mixed_ops(model, x) for x in b], K, q, rng, eta_levels
    )


def single_letter_setup(Q: QMatrix, N: int, i: int, a_letters: list[int], b_spec: list[str], rng, name=None) -> ConvSetup:
    """a-family ``r*`` on letters staying in ``e_i`` until the last, which differs; ``K = F(C e_i)``."""
    if any(x != i for x in a_letters[:-1]) or a_letters[-1] == i:
        raise DomainError("a-letters must equal i except the last, which must differ")
    return mixed_setup(name or f"letter/Q{Q.d}/i{i}", Q, N, [f"r{x}*" for x in a_letters], b_spec, [i], rng)


def aw_setup(name: str, model: AWModel, g_list, f_spec, rng) -> ConvSetup:
    """a-family ``r*(g)``, b-family from ``l(f)`` / ``l*(f)``; ``K`` is the sub-Fock space of the invariant letters."""
    inv = model.invariant_letters()
    if not inv:
        raise PreconditionError("AW setup needs an invariant letter")
    K = subfock_mask(model.basis, inv)
    a = [model.right_annihilation(np.asarray(g)) for g in g_list]
    b = []
    for kind, f in f_spec:
        f = np.asarray(f)
        b.append(model.left_creation(f) if kind == "l" else model.left_annihilation(f))
    return make_setup(name, model, a, b, K, abs(model.q), rng)


def default_suite(rng: np.random.Generator) -> list[ConvSetup]:
    """The standard collection of setups (mixed, constant-q, free and AW)."""
    out = []
    qc = QMatrix.constant(2, 0.5)
    out.append(mixed_setup("const/r1s1", qc, 6, ["r0*"], ["l0"], [1], rng))
    out.append(mixed_setup("const/r2s2", qc, 6, ["r1*", "r0*"], ["l0", "l1"], [1], rng))
    out.append(mixed_setup("const/single-level", qc, 6, ["r0*"], ["l0", "l0"], [1], rng, eta_levels=[3]))
    Qm = QMatrix.random(2, 0.9, rng)
    out.append(mixed_setup("mixed/d2/r2s2", Qm, 6, ["r1*", "r0*"], ["l0", "l1"], [1], rng))
    Qn = QMatrix([[-0.6, 0.4], [0.4, -0.3]])
    out.append(mixed_setup("mixed/negative", Qn, 6, ["r0*"], ["l0", "l1*", "l0"], [1], rng))
    Q3 = QMatrix.random(3, 0.8, rng)
    out.append(single_letter_setup(Q3, 5, 0, [0, 1], ["l2", "l0*", "l1"], rng, name="letter/d3/i0"))
    out.append(single_letter_setup(Q3, 5, 2, [2, 2, 0], ["l0", "l2"], rng, name="letter/d3/i2"))
    out.append(single_letter_setup(Qm, 6, 0, [1], ["l1", "l0", "l1*"], rng, name="letter/d2/i0"))
    Q0 = QMatrix.constant(2, 0.0)
    out.append(mixed_setup("free/Q=0", Q0, 6, ["r0*"], ["l0", "l1"], [1], rng, q=0.5))
    out.append(mixed_setup("free/disjoint", Q0, 6, ["r0*"], ["l1"], [1], rng, q=0.5))
    aw = AWModel([{"pair": 4.0}, {"invariant": 1}], q=0.4, N=5)
    g = np.array([1.0, 0.0, 0.0])
    f = np.array([0.6, 0.0, 0.8])
    g = g / np.sqrt(aw.aw_inner(g, g).real)
    out.append(aw_setup("aw/r1s2", aw, [g], [("l", f), ("l", np.array([0.0, 1.0, 0.0]))], rng))
    xi0 = aw.letter(2)
    out.append(aw_setup("aw/r2s2", aw, [xi0, g], [("l", aw.letter(0)), ("l*", f)], rng))
    return out


def run_suite(setups: list[ConvSetup]) -> CheckReport:
    rep = CheckReport()
    for st in setups:
        rep.extend(validate_setup(st).checks)
        rep.extend(tn_expansion_check(st).checks)
        b = conv_bound_check(st)
        rep.extend(b.checks)
        rep.data[st.name] = {"C": b.data["C"], "ratio": b.data["ratio"]}
    return rep
