import numpy as np
import pytest

from qfock import DomainError, FockBasis, MixedModel, PreconditionError, QMatrix
from qfock.convlemma import (
    ConvSetup,
    commutator_level,
    commutator_level_norms,
    conv_bound_check,
    default_suite,
    fitted_rate,
    lhs_value,
    make_setup,
    mixed_setup,
    run_suite,
    subfock_mask,
    tail_checks,
    single_letter_setup,
    tn_expansion_check,
    validate_setup,
)

from conftest import make_rng

QC = QMatrix.constant(2, 0.5)


def test_subfock_mask():
    b = FockBasis(2, 3)
    mask = subfock_mask(b, [1])
    assert mask.sum() == 4
    assert mask[0]
    assert mask[b.offsets[3] + 7] and not mask[b.offsets[3] + 6]
    assert subfock_mask(b, [0, 1]).all()


def test_fitted_rate():
    assert fitted_rate([1, 0.5, 0.25, 0.125]) == pytest.approx(0.5)
    assert fitted_rate([1, 0, 0]) is None


def test_constant_q_commutator_decays_exactly():
    st = mixed_setup("c", QC, 6, ["r0*"], ["l0"], [1], make_rng(0))
    norms = commutator_level_norms(st, 0, 0)
    assert np.allclose(norms, [0.5**n for n in range(len(norms))], atol=1e-12)
    rep = validate_setup(st)
    assert rep.ok, [c.line() for c in rep if not c.passed]
    assert rep.data["commutator_decay"]["a1b1"]["rate"] == pytest.approx(0.5)


def test_expansion_and_bound_single_pair():
    st = mixed_setup("c", QC, 6, ["r0*"], ["l0"], [1], make_rng(1))
    assert tn_expansion_check(st).ok
    rep = conv_bound_check(st)
    assert rep.ok
    assert rep.data["lhs"] <= rep.data["rhs"]


def test_single_level_rhs_is_one_term():
    st = mixed_setup("c", QC, 6, ["r0*"], ["l0", "l0"], [1], make_rng(2), eta_levels=[3])
    rep = conv_bound_check(st)
    m = st.model
    expected = rep.data["C"] * m.norm(st.xi) * 0.5**3 * m.level_norm(st.eta, 3)
    assert rep.data["rhs"] == pytest.approx(expected)
    assert list(rep.data["B_n"]) == ["3"]


def test_free_disjoint_letters_give_zero():
    st = mixed_setup("f", QMatrix.constant(2, 0.0), 5, ["r0*"], ["l1"], [1], make_rng(3), q=0.5)
    assert abs(lhs_value(st)) < 1e-14
    assert conv_bound_check(st).ok


def test_commutator_level_tracks_shifts():
    st = mixed_setup("c", QC, 6, ["r1*", "r0*"], ["l0", "l1"], [1], make_rng(4))
    # b_2 raises the degree once and a_1 lowers it once
    assert commutator_level(st, 1, 0, 2) == 2
    assert commutator_level(st, 0, 0, 2) == 3
    assert commutator_level(st, 1, 1, 2) == 1


def test_precondition_a_r_must_kill_K():
    st = mixed_setup("bad", QC, 5, ["r0*"], ["l0"], [0], make_rng(5))
    assert not validate_setup(st).ok
    with pytest.raises(PreconditionError):
        tn_expansion_check(st)


def test_families_must_shift_by_one():
    m = MixedModel(QC, 4)
    K = subfock_mask(m.basis, [1])
    st = make_setup("g", m, [m.letter_annihilation(0, "right")], [m.gaussian(0)], K, 0.5, make_rng(6))
    assert not validate_setup(st).ok
    with pytest.raises(DomainError):
        conv_bound_check(st)


def test_decay_constant_range():
    st = mixed_setup("c", QC, 5, ["r0*"], ["l0"], [1], make_rng(7), q=1.0)
    with pytest.raises(DomainError):
        conv_bound_check(st)


def test_single_letter_setup_rules():
    Q = QMatrix.random(3, 0.8, make_rng(8))
    with pytest.raises(DomainError):
        single_letter_setup(Q, 5, 0, [0, 0], ["l1"], make_rng(0))
    with pytest.raises(DomainError):
        single_letter_setup(Q, 5, 0, [1, 1], ["l1"], make_rng(0))
    st = single_letter_setup(Q, 5, 0, [0, 2], ["l1", "l0"], make_rng(0))
    assert isinstance(st, ConvSetup) and st.r == 2 and st.s == 2
    assert validate_setup(st).ok
    assert tn_expansion_check(st).ok
    assert conv_bound_check(st).ok


def test_tail_bounds():
    st = mixed_setup("c", QC, 6, ["r0*"], ["l0"], [1], make_rng(9))
    assert all(c.passed for c in tail_checks(st))


def test_default_suite_passes():
    setups = default_suite(make_rng(10))
    assert len(setups) >= 10
    assert any(s.name.startswith("letter") for s in setups)
    assert any(s.name.startswith("aw") for s in setups)
    rep = run_suite(setups)
    assert rep.ok, [c.line() for c in rep if not c.passed]
    assert all(0 <= rep.data[s.name]["ratio"] <= 1 for s in setups)
