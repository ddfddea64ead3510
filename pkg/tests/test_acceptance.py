"""Acceptance criteria, one test per criterion; each prints a single PASS/FAIL line."""

import resource
import time
import tracemalloc

import numpy as np
import pytest

import qfock.cli as cli
import qfock.qgram as qgram
from qfock import AWModel, MixedModel, QMatrix, SizeError, commutator_blocks, modular_data, thm44_chain_check
from qfock.arakiwoods import (
    centralizer_check,
    ir_orthogonality_check,
    make_witness,
    nontracial_witness,
    structure_checks,
)
from qfock.config import parse_config
from qfock.convlemma import conv_bound_check, default_suite, tn_expansion_check, validate_setup
from qfock.qops import moment_check, traciality_check
from qfock.wick import commutant_check, crossing_equivalence, vacuum_fidelity

from conftest import make_rng


@pytest.fixture
def record(capsys):
    def emit(k: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k:2d}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def failed(rep):
    return [c.line() for c in rep if not c.passed]


def test_criterion_01_gram_oracle(record):
    rng = make_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(20):
        d = 1 + trial % 3
        Q = QMatrix.random(d, float(rng.uniform(0.1, 0.9)), rng)
        for n in range(7):
            worst = max(worst, float(np.max(np.abs(qgram.gram_naive(Q, n) - qgram.gram_recursive(Q, n)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 120
    record(1, ok, f"naive vs recursive max dev {worst:.2e} (tol 1e-10), {elapsed:.1f}s (limit 120s)")
    assert ok


def test_criterion_02_commutator_bound(record):
    rng = make_rng(102)
    N = 7
    bound_excess, exact_dev = -np.inf, 0.0
    for d in (1, 2, 3):
        for Q in (QMatrix.random(d, 0.9, rng), QMatrix.constant(d, 0.6), QMatrix.constant(d, -0.45)):
            m = MixedModel(Q, N)
            for i in range(d):
                for j in range(d):
                    cb = commutator_blocks(Q, m.basis, i, j, m)
                    for n, v in enumerate(cb.norms):
                        bound_excess = max(bound_excess, v - Q.qmax**n)
                    assert all(c.passed for c in cb.checks(1e-12))
                    if Q.is_constant:
                        q = float(Q.entries[0, 0])
                        want = [abs(q) ** n if i == j else 0.0 for n in range(N)]
                        exact_dev = max(exact_dev, max(abs(a - b) for a, b in zip(cb.norms, want)))
    ok = bound_excess <= 1e-12 and exact_dev <= 1e-12
    record(2, ok, f"max(norm - qmax^n) {bound_excess:.2e} (<= 1e-12), constant-q deviation {exact_dev:.2e} (<= 1e-12)")
    assert ok


def test_criterion_03_convergence_skeleton(record):
    setups = default_suite(make_rng(103))
    worst_exp, bad = 0.0, []
    for st in setups:
        hyp = validate_setup(st)
        exp = tn_expansion_check(st)
        bnd = conv_bound_check(st)
        lhs, rhs = complex(*exp.data["lhs"]), complex(*exp.data["rhs"])
        worst_exp = max(worst_exp, abs(lhs - rhs))
        bad += failed(hyp) + failed(exp) + failed(bnd)
    has_letter = any(s.name.startswith("letter") for s in setups)
    ok = len(setups) >= 10 and has_letter and worst_exp <= 1e-9 and not bad
    record(3, ok, f"{len(setups)} setups, expansion residual {worst_exp:.2e} (<= 1e-9), bound failures {len(bad)}")
    assert ok, bad


def test_criterion_04_wick_fidelity(record):
    mixed = MixedModel(QMatrix.random(2, 0.8, make_rng(104)), 4)
    aw = AWModel([{"pair": 4.0}], q=0.35, N=4)
    const = MixedModel(QMatrix.constant(2, 0.55), 4)
    reps = [vacuum_fidelity(mixed, 3), vacuum_fidelity(aw, 3), crossing_equivalence(const, 3), crossing_equivalence(aw, 3)]
    vac = max(c.lhs for r in reps[:2] for c in r)
    cross = max(c.lhs for r in reps[2:] for c in r)
    ok = vac <= 1e-10 and cross <= 1e-9
    record(4, ok, f"vacuum residual {vac:.2e} (<= 1e-10), crossing vs recursion {cross:.2e} (<= 1e-9)")
    assert ok


def test_criterion_05_traciality_split(record):
    mixed = MixedModel(QMatrix.random(2, 0.9, make_rng(105)), 6)
    tr = traciality_check(mixed, 50, 3, make_rng(5))
    aw = AWModel([{"pair": 4.0}], q=0.3, N=4)
    wit = nontracial_witness(aw)
    dev, gap = tr.checks[0].lhs, wit.checks[0].lhs
    ok = dev <= 1e-8 and gap > 1e-3
    record(5, ok, f"mixed |phi(ab)-phi(ba)| {dev:.2e} (<= 1e-8), lambda=4 witness {gap:.3f} (> 1e-3)")
    assert ok


def test_criterion_06_moments(record):
    rng = make_rng(106)
    worst, fourth = 0.0, []
    for Q in (QMatrix([[0.37]]), QMatrix.random(2, 0.9, rng)):
        m = MixedModel(Q, 12)
        for i in range(Q.d):
            for order in range(2, 11, 2):
                c = moment_check(m, i, order).checks[0]
                worst = max(worst, abs(c.lhs - c.rhs))
                if order == 4:
                    fourth.append(abs(c.lhs - (2 + Q.entries[i, i])))
    ok = worst <= 1e-9 and max(fourth) <= 1e-9
    record(6, ok, f"max |phi(s^2k) - pair sum| {worst:.2e} over 2k <= 10, |phi(s^4) - (2+q)| {max(fourth):.2e}")
    assert ok


def test_criterion_07_commutant(record):
    mixed = MixedModel(QMatrix.random(2, 0.8, make_rng(107)), 6)
    aw = AWModel([{"pair": 4.0}, {"invariant": 1}], q=0.3, N=5)
    a = commutant_check(mixed, 2, 2, 30, make_rng(7)).checks[0].lhs
    b = commutant_check(aw, 2, 2, 30, make_rng(8)).checks[0].lhs
    ok = max(a, b) <= 1e-8
    record(7, ok, f"[W(xi), W_r(eta)] mixed {a:.2e}, AW {b:.2e} (<= 1e-8, 30 pairs each)")
    assert ok


def test_criterion_08_aw_structure(record):
    aw = AWModel([{"pair": 4.0}, {"invariant": 1}], q=0.3, N=6)
    st = structure_checks(aw, make_rng(108))
    ir = ir_orthogonality_check(aw, 100, make_rng(9))
    md = modular_data(aw, 3)
    cen = centralizer_check(aw, aw.letter(2), 40, make_rng(10))
    delta = next(c for c in md.report if c.name.startswith("modular/Delta="))
    moments = {c.name: c.lhs for c in cen}
    bad = failed(st) + failed(ir) + failed(md.report) + failed(cen)
    ok = not bad and delta.lhs <= 1e-8
    record(
        8,
        ok,
        f"structure {max(c.lhs for c in st):.1e}, I_r {ir.checks[0].lhs:.1e}, Delta {delta.lhs:.1e}, "
        f"moments {moments['centralizer/moment2']:.6f} {moments['centralizer/moment4']:.6f}",
    )
    assert ok, bad


def test_criterion_09_chain(record):
    aw = AWModel([{"pair": 4.0}, {"invariant": 1}], q=0.3, N=4)
    worst_i, worst_ii, swapped = 0.0, 0.0, 0.0
    bad = []
    for coeffs in ([1.0], [0.7, 0.4], [0.3, -0.5, 0.8]):
        rep = thm44_chain_check(aw, make_witness(aw, coeffs))
        res = {c.name: c for c in rep}
        worst_i = max(worst_i, res["chain/(i)W(xi)eta=eta(x)xi"].lhs)
        ii = res["chain/(ii)pythagorean-split"]
        worst_ii = max(worst_ii, abs(ii.lhs - ii.rhs))
        swapped = max(swapped, rep.data["W(xi)eta-minus-xi(x)eta"])
        bad += failed(rep)
    ok = worst_i <= 1e-9 and worst_ii <= 1e-9
    record(
        9,
        ok,
        f"||W(xi)eta - eta(x)xi|| {worst_i:.2e} (<= 1e-9), split {worst_ii:.2e}; "
        f"||W(xi)eta - xi(x)eta|| {swapped:.2e}",
    )
    assert ok, bad


def test_criterion_10_performance(record, monkeypatch):
    calls = []
    real_naive = qgram.gram_naive

    def spy(Q, n, *args, **kwargs):
        calls.append(n)
        return real_naive(Q, n, *args, **kwargs)

    monkeypatch.setattr(qgram, "gram_naive", spy)
    monkeypatch.setattr(cli, "gram_naive", spy)
    Q = QMatrix.random(2, 0.9, make_rng(110))
    tracemalloc.start()
    t0 = time.perf_counter()
    block = qgram.gram_block(Q, 10)
    elapsed = time.perf_counter() - t0
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
    rep = cli.run("gram", parse_config({"N": 10, "Q": Q.entries.tolist(), "params": {"naive_max": 10}}))
    with pytest.raises(SizeError):
        real_naive(Q, 9)
    limit = 4 * 2**30
    ok = (
        block.matrix.shape == (1024, 1024)
        and elapsed < 60
        and peak < limit
        and rss < limit
        and rep["pass"]
        and max(calls, default=0) <= 8
    )
    record(
        10,
        ok,
        f"n=10 block in {elapsed:.2f}s, traced peak {peak / 2**20:.0f} MiB, max RSS {rss / 2**20:.0f} MiB, "
        f"naive degrees used {sorted(set(calls))}",
    )
    assert ok
