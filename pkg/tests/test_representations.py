import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isometrize import linalg as la
from isometrize.cesaro import symmetric_average
from isometrize.errors import DoublingFailed, HypothesisFailed, NotApplicable, RelationError
from isometrize.folner import FiniteGroupTable, Heisenberg3, IntLattice, NatLattice, standard_family
from isometrize.representations import (
    Representation,
    bound_scan,
    cert_uniform_bound,
    decay_verdict,
    default_family,
    default_rep_horizon,
    eval_batch,
    folner_gram_pair,
    isometrize_semigroup_rep,
    rep_eval,
    symdiff_decay,
    translated_bound_check,
    unitarize_rep,
)

from helpers import commuting_unitaries, random_conditioned, random_unitary

JORDAN = np.array([[1, 1], [0, 1]], dtype=complex)
S3 = [[0, 1, 2, 3, 4, 5], [1, 0, 3, 2, 5, 4], [2, 4, 0, 5, 1, 3],
      [3, 5, 1, 4, 0, 2], [4, 2, 5, 0, 3, 1], [5, 3, 4, 1, 2, 0]]


def z2_rep(seed, d=3, cond=5.0):
    rng = np.random.default_rng(seed)
    u1, u2 = commuting_unitaries(rng, d)
    ell = random_conditioned(rng, d, cond)
    ell_inv = np.linalg.inv(ell)
    return Representation(IntLattice(2), {"e1": ell @ u1 @ ell_inv, "e2": ell @ u2 @ ell_inv})


def clock_shift(d=3):
    w = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(w ** np.arange(d))
    return shift.astype(complex), clock


def test_default_horizons():
    assert [default_rep_horizon(g) for g in (IntLattice(1), IntLattice(2), IntLattice(3), Heisenberg3())] == \
        [256, 64, 16, 8]
    assert default_rep_horizon(FiniteGroupTable(S3)) == 4


def test_relations_are_checked():
    a, b = random_unitary(np.random.default_rng(0), 3), random_unitary(np.random.default_rng(1), 3)
    with pytest.raises(RelationError):
        Representation(IntLattice(2), {"e1": a, "e2": b})


@given(st.integers(0, 2**32 - 1), st.integers(-6, 6), st.integers(-6, 6))
def test_eval_is_a_homomorphism_on_z2(seed, a, b):
    rep = z2_rep(seed)
    m = rep_eval(rep, (a, b))
    direct = np.linalg.matrix_power(rep.images["e1"], a) if a >= 0 else \
        np.linalg.matrix_power(np.linalg.inv(rep.images["e1"]), -a)
    direct = direct @ (np.linalg.matrix_power(rep.images["e2"], b) if b >= 0 else
                       np.linalg.matrix_power(np.linalg.inv(rep.images["e2"]), -b))
    assert la.op_norm(m - direct) <= 1e-9 * max(1.0, la.op_norm(direct))


def test_heisenberg_clock_shift_is_a_representation():
    x, y = clock_shift(3)
    rep = Representation(Heisenberg3(), {"x": x, "y": y})
    g = rep.descriptor
    elems = g.words(2)
    a, b = elems[:, None, :].repeat(len(elems), 1).reshape(-1, 3), np.tile(elems, (len(elems), 1))
    lhs = eval_batch(rep, g.mul(a, b))
    rhs = eval_batch(rep, a) @ eval_batch(rep, b)
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_finite_group_rep_closure():
    # sign-like rep of S3 through a 1-dimensional character on the table
    g = FiniteGroupTable(S3, "S3")
    sign = {0: 1, 1: -1, 2: -1, 3: 1, 4: 1, 5: -1}
    images = {name: np.array([[sign[int(g.element(name)[0])]]], dtype=complex) for name in g.generators}
    rep = Representation(g, images)
    cert = unitarize_rep(rep)
    assert cert.residual <= 1e-10


def test_folner_gram_matches_symmetric_average():
    rng = np.random.default_rng(7)
    t = random_conditioned(rng, 3, 4.0) @ random_unitary(rng, 3)
    t = t @ random_unitary(rng, 3) @ np.linalg.inv(t)
    rep = Representation(IntLattice(1), {"e1": t})
    fam = standard_family(IntLattice(1))
    for n in (1, 5, 17):
        g = folner_gram_pair(rep, fam, n).gram
        assert la.op_norm(g - symmetric_average(t, n)) <= 1e-12 * la.op_norm(g)


def test_bound_scan_unitary_rep():
    rep = Representation(IntLattice(2), dict(zip(("e1", "e2"), commuting_unitaries(np.random.default_rng(2), 4))))
    scan = bound_scan(rep, n_max=16)
    assert scan.c_est == pytest.approx(1.0)
    assert scan.m_est == pytest.approx(1.0)
    assert scan.lower_ok and not scan.divergent


def test_bound_scan_flags_jordan():
    rep = Representation(IntLattice(1), {"e1": JORDAN})
    assert bound_scan(rep, n_max=128).divergent


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_unitarize_z2(seed):
    rep = z2_rep(seed)
    cert = unitarize_rep(rep)
    assert cert.kind == "unitary"
    assert cert.residual <= 1e-8
    c = cert.bounds["c_est"]
    assert cert.condition_number <= c**2 * (1 + 1e-6)
    ell, ell_inv = cert.transform, np.linalg.inv(cert.transform)
    for m in rep.images.values():
        assert la.unitary_residual(ell @ m @ ell_inv) <= 1e-8


def test_unitarize_heisenberg_clock_shift():
    x, y = clock_shift(3)
    ell = random_conditioned(np.random.default_rng(4), 3, 3.0)
    ell_inv = np.linalg.inv(ell)
    rep = Representation(Heisenberg3(), {"x": ell @ x @ ell_inv, "y": ell @ y @ ell_inv})
    cert = unitarize_rep(rep)
    assert cert.residual <= 1e-8
    assert set(cert.per_generator_residuals) >= {"x", "y"}


def test_unitarize_rejects_jordan():
    rep = Representation(IntLattice(1), {"e1": JORDAN})
    with pytest.raises(HypothesisFailed) as exc:
        unitarize_rep(rep, n_max=128)
    assert list(exc.value.reasons) == ["boundC"]


def test_group_and_semigroup_entry_points_are_separate():
    with pytest.raises(NotApplicable):
        unitarize_rep(Representation(NatLattice(1), {"e1": np.eye(2)}))
    with pytest.raises(NotApplicable):
        isometrize_semigroup_rep(Representation(IntLattice(1), {"e1": np.eye(2)}))


def test_semigroup_swap_scaled():
    t = np.array([[0, 2], [0.5, 0]], dtype=complex)
    cert = isometrize_semigroup_rep(Representation(NatLattice(1), {"e1": t}))
    np.testing.assert_allclose(cert.gram, np.diag([0.625, 2.5]), atol=1e-12)
    assert cert.kind == "isometry"


def test_semigroup_contraction_collapses():
    rep = Representation(NatLattice(1), {"e1": np.diag([0.5, 1.0]).astype(complex)})
    with pytest.raises(HypothesisFailed) as exc:
        isometrize_semigroup_rep(rep)
    assert list(exc.value.reasons) == ["boundC"]


def test_symdiff_decay_closed_form():
    rep = Representation(IntLattice(1), {"e1": np.array([[np.exp(0.7j)]])})
    fam = default_family(rep.descriptor)
    vals = dict(symdiff_decay(rep, fam, 1, [1, 4, 16]))
    for n, v in vals.items():
        assert v == pytest.approx(2 / (2 * n + 1))


def test_symdiff_decay_grows_for_jordan():
    rep = Representation(IntLattice(1), {"e1": JORDAN})
    vals = [v for _, v in symdiff_decay(rep, default_family(rep.descriptor), 1, [8, 16, 32])]
    assert vals[0] < vals[1] < vals[2]
    verdict = decay_verdict(rep, default_family(rep.descriptor), 32, 1.0)
    assert not verdict.ok


def test_cert_uniform_bound():
    rep = z2_rep(11, cond=3.0)
    rep1 = Representation(IntLattice(1), {"e1": rep.images["e1"]})
    fam = default_family(rep1.descriptor)
    c = bound_scan(rep1, fam, 64).c_est
    holds, worst = cert_uniform_bound(rep1, fam, 2, 2.0, c, 32)
    assert holds and worst <= c**2 * np.sqrt(2)
    with pytest.raises(DoublingFailed):
        cert_uniform_bound(rep1, fam, 2, 1.5, c, 32)


def test_translated_bound():
    u = Representation(IntLattice(1), {"e1": np.diag(np.exp([0.3j, 1.1j]))})
    c, ok = translated_bound_check(u, n_max=64)
    assert ok and c == pytest.approx(1.0)
    _, ok = translated_bound_check(Representation(IntLattice(1), {"e1": JORDAN}), n_max=64)
    assert not ok


@given(st.integers(0, 2**32 - 1))
def test_conjugation_preserves_certifiability(seed):
    rng = np.random.default_rng(seed)
    rep = Representation(IntLattice(1), {"e1": random_unitary(rng, 3)})
    m = random_conditioned(rng, 3, 2.0)
    conj = rep.conjugate(m)
    cert = unitarize_rep(conj, n_max=64)
    assert cert.residual <= 1e-8


def test_rep_eval_examples():
    t = random_conditioned(np.random.default_rng(12), 3, 4.0)
    rep = Representation(IntLattice(1), {"e1": t})
    np.testing.assert_allclose(rep_eval(rep, 0), np.eye(3))
    np.testing.assert_allclose(rep_eval(rep, 3), t @ t @ t, rtol=1e-12, atol=1e-12)
    t_inv = np.linalg.inv(t)
    assert la.op_norm(rep_eval(rep, -2) - t_inv @ t_inv) <= 1e-10 * la.op_norm(t_inv) ** 2


def test_trivial_rep_grams_and_certificates():
    g = IntLattice(2)
    rep = Representation(g, {"e1": np.eye(2), "e2": np.eye(2)})
    pair = folner_gram_pair(rep, default_family(g), 5)
    np.testing.assert_allclose(pair.gram, np.eye(2))
    np.testing.assert_allclose(pair.adjoint_gram, np.eye(2))
    np.testing.assert_allclose(unitarize_rep(rep).transform, np.eye(2), atol=1e-12)
    semi = Representation(NatLattice(1), {"e1": np.eye(2)})
    np.testing.assert_allclose(isometrize_semigroup_rep(semi).transform, np.eye(2), atol=1e-12)
    f = FiniteGroupTable(S3, "S3")
    trivial = Representation(f, {k: np.eye(1) for k in f.generators})
    assert all(v == 0.0 for _, v in symdiff_decay(trivial, default_family(f), "g1", [1, 2, 4]))


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 6.0))
def test_bound_scan_within_conjugation_constant(seed, cond):
    rng = np.random.default_rng(seed)
    ell = random_conditioned(rng, 2, cond)
    rep = Representation(IntLattice(1), {"e1": ell @ np.diag([1j, -1]) @ np.linalg.inv(ell)})
    scan = bound_scan(rep, n_max=32)
    assert not scan.divergent and scan.lower_ok
    assert scan.c_est <= cond * (1 + 1e-9)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 4.0))
def test_conjugation_scales_constant_by_at_most_cond(seed, cond):
    rng = np.random.default_rng(seed)
    base = z2_rep(seed, d=2, cond=2.0)
    m = random_conditioned(rng, 2, cond)
    c0 = bound_scan(base, n_max=8).c_est
    c1 = bound_scan(base.conjugate(m), n_max=8).c_est
    assert c1 <= cond * c0 * (1 + 1e-6)


@given(st.integers(0, 2**32 - 1))
def test_constant_never_exceeds_largest_norm_on_the_set(seed):
    rep = z2_rep(seed, d=2, cond=3.0)
    fam = default_family(rep.descriptor)
    scan = bound_scan(rep, fam, 8)
    norms = la.op_norms(eval_batch(rep, fam.set_at(8)))
    assert scan.c_est <= norms.max() * (1 + 1e-12)


def test_heisenberg_rep_through_z2():
    rng = np.random.default_rng(21)
    u1, u2 = commuting_unitaries(rng, 3)
    ell = random_conditioned(rng, 3, 4.0)
    ell_inv = np.linalg.inv(ell)
    rep = Representation(Heisenberg3(), {"x": ell @ u1 @ ell_inv, "y": ell @ u2 @ ell_inv, "z": np.eye(3)})
    assert unitarize_rep(rep).residual <= 1e-6


def test_semigroup_n2_conjugated_unitaries():
    rng = np.random.default_rng(22)
    u1, u2 = commuting_unitaries(rng, 3)
    ell = random_conditioned(rng, 3, 4.0)
    ell_inv = np.linalg.inv(ell)
    rep = Representation(NatLattice(2), {"e1": ell @ u1 @ ell_inv, "e2": ell @ u2 @ ell_inv})
    cert = isometrize_semigroup_rep(rep)
    assert cert.residual <= 1e-6
    assert cert.condition_number <= cert.bounds["M_est"] / cert.bounds["m_est"] * (1 + 1e-6)


def test_uniform_bound_examples():
    fam = default_family(IntLattice(1))
    u = Representation(IntLattice(1), {"e1": np.diag(np.exp([0.4j, 2.2j]))})
    assert cert_uniform_bound(u, fam, 2, 2.0, 1.0, 16)[0]
    rng = np.random.default_rng(23)
    ell = random_conditioned(rng, 3, 5.0)
    conj = Representation(IntLattice(1), {"e1": ell @ random_unitary(rng, 3) @ np.linalg.inv(ell)})
    holds, worst = cert_uniform_bound(conj, fam, 2, 2.0, 5.0, 16)
    assert holds and worst <= 5.0 * (1 + 1e-9)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 5.0))
def test_settled_translated_bound_implies_unitarizable(seed, cond):
    rng = np.random.default_rng(seed)
    ell = random_conditioned(rng, 3, cond)
    rep = Representation(IntLattice(1), {"e1": ell @ random_unitary(rng, 3) @ np.linalg.inv(ell)})
    c, ok = translated_bound_check(rep, n_max=64)
    assert c <= cond * (1 + 1e-9)
    if ok:
        assert unitarize_rep(rep, n_max=64).residual <= 1e-8
