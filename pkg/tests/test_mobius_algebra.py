import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from tractor.mobius_algebra import (AlgebraValidationError, GradedMatrix, SignaturePair, TwoChain, bracket,
                                    check_skew, complex_structure_from_conditions, complex_structure_report,
                                    compose_graded, decompose_graded, dual_plus_basis, embed_minus, embed_plus,
                                    embed_zero, flat_metric, lie_codifferential, lie_differential, OneChain,
                                    normalization_residual, parabolic_embed, project_normal,
                                    random_algebra_element, random_complex_structure, so_basis,
                                    standard_complex_structure, su_residuals, tractor_form,
                                    two_chain_differential, algebra_coordinates)

G13 = flat_metric(1, 3)
vec4 = arrays(float, 4, elements=st.floats(-3, 3, allow_nan=False))


def skew_int(rng, G, n=4):
    S = rng.integers(-3, 4, size=(n, n)).astype(float)
    return np.linalg.inv(G) @ (S - S.T)


def test_signature_pair():
    sp = SignaturePair(1, 3)
    assert sp.n == 4
    assert np.array_equal(sp.metric, np.diag([-1.0, 1, 1, 1]))
    assert np.array_equal(tractor_form(sp.metric)[[0, -1]][:, [0, -1]], [[0, 1], [1, 0]])


def test_decompose_roundtrip(rng):
    for G in (G13, np.array([[2.0, 0.3, 0, 0], [0.3, -1, 0, 0], [0, 0, 1, 0.2], [0, 0, 0.2, 1]])):
        beta = random_algebra_element(rng, G)
        check_skew(beta, G, 1e-12)
        m, A, a, l = decompose_graded(beta, G)
        assert np.allclose(compose_graded(m, A, a, l, G), beta, atol=1e-14)


def test_skew_violation_raises():
    bad = np.zeros((6, 6))
    bad[0, 0] = 1.0
    with pytest.raises(AlgebraValidationError) as exc:
        GradedMatrix(bad, G13)
    assert exc.value.max_violation == pytest.approx(1.0)


def test_bracket_table_exact(rng):
    # integer data keeps every product exact
    J = G13
    for _ in range(20):
        m, m2 = rng.integers(-4, 5, size=(2, 4)).astype(float)
        l = rng.integers(-4, 5, size=4).astype(float)
        A, A2 = skew_int(rng, J), skew_int(rng, J)
        a, a2 = float(rng.integers(-3, 4)), float(rng.integers(-3, 4))
        assert np.array_equal(bracket(embed_zero(A, a, J), embed_zero(A2, a2, J)),
                              embed_zero(A @ A2 - A2 @ A, 0.0, J))
        assert np.array_equal(bracket(embed_zero(A, a, J), embed_minus(m, J)), embed_minus(A @ m + a * m, J))
        assert np.array_equal(bracket(embed_plus(l, J), embed_zero(A, a, J)), embed_plus(l @ A + a * l, J))
        ml = np.outer(m, l)
        assert np.array_equal(bracket(embed_minus(m, J), embed_plus(l, J)),
                              embed_zero(ml - J @ ml.T @ J, l @ m, J))
        assert not bracket(embed_minus(m, J), embed_minus(m2, J)).any()


def test_so_basis_spans():
    B = so_basis(G13)
    assert B.shape == (6, 4, 4)
    coords = np.array([algebra_coordinates(tractor_like, G13) for tractor_like in
                       [random_algebra_element(np.random.default_rng(k), G13) for k in range(15)]])
    assert np.linalg.matrix_rank(coords) == 15


@given(st.integers(0, 2**31 - 1))
def test_jacobi_identity(seed):
    r = np.random.default_rng(seed)
    x, y, z = (random_algebra_element(r, G13) for _ in range(3))
    jac = bracket(x, bracket(y, z)) + bracket(y, bracket(z, x)) + bracket(z, bracket(x, y))
    assert np.abs(jac).max() < 1e-12


@given(st.integers(0, 2**31 - 1))
def test_grading_is_respected(seed):
    r = np.random.default_rng(seed)
    m1, m2, l1, l2 = r.normal(size=(4, 4))
    P = bracket(embed_plus(l1, G13), embed_plus(l2, G13))
    M = bracket(embed_minus(m1, G13), embed_minus(m2, G13))
    assert np.abs(P).max() < 1e-14 and np.abs(M).max() < 1e-14
    mid = bracket(embed_minus(m1, G13), embed_plus(l1, G13))
    mm, _, _, ll = decompose_graded(mid, G13)
    assert np.abs(mm).max() < 1e-14 and np.abs(ll).max() < 1e-14


def _random_two_chain(rng, G):
    n = len(G)
    vals = np.array([random_algebra_element(rng, G) for _ in range(n * n)]).reshape(n, n, n + 2, n + 2)
    return TwoChain(vals - vals.transpose(1, 0, 2, 3), G)


def test_codifferential_basis_independent(rng):
    psi = _random_two_chain(rng, G13)
    ref = lie_codifferential(psi).values
    for _ in range(5):
        B = rng.normal(size=(4, 4))
        assert np.abs(lie_codifferential(psi, B).values - ref).max() < 1e-12


def test_codifferential_zero_and_normal_kernel(rng):
    zero = TwoChain(np.zeros((4, 4, 6, 6)), G13)
    assert not lie_codifferential(zero).values.any()
    psi = project_normal(_random_two_chain(rng, G13))
    res = normalization_residual(psi)
    assert res.codiff_norm < 1e-12 and res.torsion_norm < 1e-12 and res.trace_norm < 1e-12


def test_dual_basis_pairing():
    duals = dual_plus_basis(G13)
    E = np.eye(4)
    for i, eta in enumerate(duals):
        for j in range(4):
            assert np.trace(embed_minus(E[j], G13) @ eta) == pytest.approx(float(i == j), abs=1e-14)


def test_lie_differential_of_bracket_chain_is_closed(rng):
    # d(d phi) is not needed; check d applied to a constant one-chain gives the bracket formula
    phi = OneChain(np.array([random_algebra_element(rng, G13) for _ in range(4)]), G13)
    dphi = lie_differential(phi)
    assert np.allclose(dphi.values, -dphi.values.transpose(1, 0, 2, 3))
    three = two_chain_differential(_random_two_chain(rng, G13))
    v = three.values
    assert np.allclose(v, -v.transpose(1, 0, 2, 3, 4)) and np.allclose(v, -v.transpose(0, 2, 1, 3, 4))


def test_complex_structure_examples():
    rep = complex_structure_report(np.zeros((6, 6)), G13)
    assert not rep.is_complex_structure and rep.pairing_residual == pytest.approx(1.0)
    J = standard_complex_structure(G13)
    rep = complex_structure_report(J, G13)
    assert rep.is_complex_structure and rep.square_residual < 1e-14
    assert rep.adapted_complement.shape == (4, 2)


def test_complex_structure_with_a_one():
    rng = np.random.default_rng(5)
    beta = random_complex_structure(rng, G13, a=1.0)
    rep = complex_structure_report(beta, G13)
    m, A, a, l = decompose_graded(beta, G13)
    v = -np.linalg.solve(G13, l)
    assert a == pytest.approx(1.0)
    assert m @ G13 @ v == pytest.approx(2.0)
    assert rep.is_complex_structure


def test_eigenvalue_sign_of_v():
    # v = -G^{-1} l^T is the (-a)-eigenvector; the (+a) reading fails
    beta = random_complex_structure(np.random.default_rng(1), G13, a=0.7)
    m, A, a, l = decompose_graded(beta, G13)
    v = -np.linalg.solve(G13, l)
    assert np.linalg.norm(A @ v + a * v) < 1e-12
    assert np.linalg.norm(A @ v - a * v) > 0.1


def test_report_names_failed_condition():
    m = np.array([1.0, 1.0, 0, 0]) / np.sqrt(2)
    v = np.array([-1.0, 1.0, 0, 0]) / np.sqrt(2)
    I = np.zeros((4, 4))
    beta = complex_structure_from_conditions(m, v, 0.0, I, G13)     # A^2 = 0 on the complement
    rep = complex_structure_report(beta, G13)
    assert not rep.is_complex_structure
    assert any("restriction condition" in c for c in rep.failed_conditions)


def test_wrong_signature_for_complex_structure():
    with pytest.raises(ValueError):
        standard_complex_structure(flat_metric(0, 4))


def test_su_residuals():
    J = standard_complex_structure(G13)
    c, t = su_residuals(J, J)
    assert c < 1e-14 and t == pytest.approx(-6.0)
    I6 = 0.3 * J
    assert su_residuals(J, I6)[0] < 1e-14


@given(vec4, st.floats(0.2, 5.0))
def test_parabolic_embed_preserves_form(x, alpha):
    beta = np.eye(4)
    M = parabolic_embed(beta, alpha, x, G13)
    Jh = tractor_form(G13)
    assert np.abs(M.T @ Jh @ M - Jh).max() < 1e-9 * (1 + x @ x) ** 2


def test_parabolic_embed_rejects():
    with pytest.raises(ValueError):
        parabolic_embed(np.eye(4), 0.0, np.zeros(4), G13)
    with pytest.raises(ValueError):
        parabolic_embed(2 * np.eye(4), 1.0, np.zeros(4), G13)


@given(st.integers(0, 2**31 - 1))
def test_random_complex_structures_from_group_conjugation(seed):
    r = np.random.default_rng(seed)
    J0 = standard_complex_structure(G13)
    g = expm(0.4 * random_algebra_element(r, G13))
    J = g @ J0 @ np.linalg.inv(g)
    rep = complex_structure_report(J, G13, 1e-8)
    assert rep.is_complex_structure, rep.failed_conditions
