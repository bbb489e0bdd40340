import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isometrize import linalg as la
from isometrize.derivations import (
    DerivationMap,
    build_pi_D,
    derivation_bound_scan,
    extract_inner,
    inner_residual,
    leibniz_check,
    solve_inner,
)
from isometrize.errors import (
    DimensionMismatch,
    HypothesisFailed,
    LeibnizFailed,
    NotApplicable,
    NotInnerAtTolerance,
    SchemaError,
)
from isometrize.folner import Heisenberg3, IntLattice
from isometrize.representations import Representation

from helpers import commuting_unitaries, random_unitary


def random_t(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def unitary_z2(rng, d):
    return Representation(IntLattice(2), dict(zip(("e1", "e2"), commuting_unitaries(rng, d))))


def test_inner_values_on_elements():
    rng = np.random.default_rng(0)
    rep = unitary_z2(rng, 3)
    t = random_t(rng, 3)
    d = DerivationMap.inner(rep, t)
    for g in [(2, -1), (0, 3), (-4, -4)]:
        p = rep.images["e1"]
        a = np.linalg.matrix_power(p, g[0]) if g[0] >= 0 else np.linalg.matrix_power(p.conj().T, -g[0])
        q = rep.images["e2"]
        b = np.linalg.matrix_power(q, g[1]) if g[1] >= 0 else np.linalg.matrix_power(q.conj().T, -g[1])
        pg = a @ b
        assert la.op_norm(d.value(g) - (pg @ t - t @ pg)) <= 1e-11


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_inner_derivation_satisfies_leibniz(seed, dim):
    rng = np.random.default_rng(seed)
    rep = unitary_z2(rng, dim)
    ok, worst = leibniz_check(DerivationMap.inner(rep, random_t(rng, dim)), seed=seed % 1000)
    assert ok and worst <= 1e-9


def test_random_images_fail_leibniz():
    rng = np.random.default_rng(5)
    rep = unitary_z2(rng, 3)
    d = DerivationMap(rep, {"e1": random_t(rng, 3), "e2": random_t(rng, 3)})
    ok, worst = leibniz_check(d)
    assert not ok and worst > 1e-3
    with pytest.raises(LeibnizFailed):
        build_pi_D(d)
    with pytest.raises(LeibnizFailed):
        extract_inner(d)


def test_block_rep_is_upper_triangular():
    rng = np.random.default_rng(1)
    rep = Representation(IntLattice(1), {"e1": random_unitary(rng, 2)})
    d = DerivationMap.inner(rep, random_t(rng, 2))
    pi_d = build_pi_D(d)
    np.testing.assert_array_equal(pi_d.images["e1"][2:, :2], 0)


def test_validation():
    rng = np.random.default_rng(2)
    with pytest.raises(NotApplicable):
        DerivationMap(Representation(IntLattice(1), {"e1": np.diag([2.0, 0.5])}), {"e1": np.zeros((2, 2))})
    rep = Representation(IntLattice(1), {"e1": random_unitary(rng, 2)})
    with pytest.raises(SchemaError):
        DerivationMap(rep, {"e2": np.zeros((2, 2))})
    with pytest.raises(DimensionMismatch):
        DerivationMap(rep, {"e1": np.zeros((3, 3))})


def test_zero_derivation():
    rng = np.random.default_rng(3)
    rep = unitary_z2(rng, 3)
    cert = extract_inner(DerivationMap(rep, {"e1": np.zeros((3, 3)), "e2": np.zeros((3, 3))}))
    np.testing.assert_allclose(cert.T, 0, atol=1e-14)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_extract_inner_recovers_t_up_to_commutant(seed, dim):
    rng = np.random.default_rng(seed)
    rep = unitary_z2(rng, dim)
    t0 = random_t(rng, dim)
    d = DerivationMap.inner(rep, t0)
    cert = extract_inner(d, n_max=16)
    assert cert.residual <= 1e-8
    gap = cert.T - t0
    for p in rep.images.values():
        assert la.op_norm(p @ gap - gap @ p) <= 2e-8 * max(1.0, la.op_norm(t0))
    corr = cert.corroboration
    assert corr["ok"] and corr["residual"] <= 1e-6


def test_solve_inner_is_exact_on_generators():
    rng = np.random.default_rng(9)
    rep = Representation(IntLattice(1), {"e1": random_unitary(rng, 4)})
    d = DerivationMap.inner(rep, random_t(rng, 4))
    t, res = solve_inner(d)
    assert res == pytest.approx(inner_residual(rep, d.images, t))
    assert res <= 1e-12


def test_trivial_rep_derivation_is_not_bounded():
    # pi = 1, D(1) = I gives D(n) = n I, an unbounded derivation
    rep = Representation(IntLattice(1), {"e1": np.eye(2)})
    d = DerivationMap(rep, {"e1": np.eye(2)})
    c, divergent = derivation_bound_scan(d, n_max=64)
    assert divergent
    with pytest.raises(HypothesisFailed) as exc:
        extract_inner(d, n_max=64)
    assert list(exc.value.reasons) == ["derivationBound"]


def test_non_inner_at_tolerance_is_reported():
    rng = np.random.default_rng(4)
    rep = Representation(IntLattice(1), {"e1": random_unitary(rng, 3)})
    d = DerivationMap.inner(rep, random_t(rng, 3))
    with pytest.raises(NotInnerAtTolerance) as exc:
        extract_inner(d, n_max=16, tol=1e-30)
    assert exc.value.certificate is not None


def test_heisenberg_inner_derivation():
    d3 = 3
    w = np.exp(2j * np.pi / d3)
    x = np.roll(np.eye(d3), 1, axis=0).astype(complex)
    y = np.diag(w ** np.arange(d3))
    rep = Representation(Heisenberg3(), {"x": x, "y": y})
    t0 = random_t(np.random.default_rng(6), d3)
    cert = extract_inner(DerivationMap.inner(rep, t0))
    assert cert.residual <= 1e-8


def test_zero_derivation_examples():
    rng = np.random.default_rng(30)
    rep = Representation(IntLattice(1), {"e1": random_unitary(rng, 2)})
    d = DerivationMap(rep, {"e1": np.zeros((2, 2))})
    assert leibniz_check(d) == (True, 0.0)
    pi_d = build_pi_D(d).images["e1"]
    np.testing.assert_array_equal(pi_d[:2, 2:], 0)
    np.testing.assert_array_equal(pi_d[:2, :2], pi_d[2:, 2:])
    assert derivation_bound_scan(d, n_max=16) == (0.0, False)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_inner_derivation_constant_is_at_most_twice_t(seed, dim):
    rng = np.random.default_rng(seed)
    rep = Representation(IntLattice(1), {"e1": random_unitary(rng, dim)})
    t0 = random_t(rng, dim)
    t0 /= la.op_norm(t0)
    d = DerivationMap.inner(rep, t0)
    c, divergent = derivation_bound_scan(d, n_max=32)
    assert not divergent and c <= 2 * (1 + 1e-12)
    pi_d = build_pi_D(d)
    assert la.op_norm(pi_d.images["e1"] @ pi_d.inverse_image("e1") - np.eye(2 * dim)) <= 1e-9


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_corroborating_t_block_diagonalizes_pi_d(seed, dim):
    rng = np.random.default_rng(seed)
    rep = unitary_z2(rng, dim)
    d = DerivationMap.inner(rep, random_t(rng, dim))
    corr = extract_inner(d, n_max=16).corroboration
    assert corr["ok"]
    s = np.block([[np.eye(dim), corr["T"]], [np.zeros((dim, dim)), np.eye(dim)]])
    s_inv = np.block([[np.eye(dim), -corr["T"]], [np.zeros((dim, dim)), np.eye(dim)]])
    for m in build_pi_D(d).images.values():
        assert la.op_norm((s @ m @ s_inv)[:dim, dim:]) <= 1e-8


def test_seed_from_environment(monkeypatch):
    rng = np.random.default_rng(31)
    rep = unitary_z2(rng, 2)
    d = DerivationMap(rep, {"e1": random_t(rng, 2), "e2": random_t(rng, 2)})
    monkeypatch.setenv("ISOMETRIZE_SEED", "17")
    first = leibniz_check(d)
    assert leibniz_check(d) == first
    assert leibniz_check(d, seed=17) == first
