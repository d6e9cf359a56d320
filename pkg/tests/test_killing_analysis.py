import logging

import numpy as np
import pytest

from tractor.catalog import catalog_rescalings
from tractor.chart_geometry import VectorFieldSpec, conformal_rescale
from tractor.mobius_algebra import complex_structure_report
from tractor.killing_analysis import (lemma_residuals, normalized_complex_structure, sparling_report,
                                      splitting_operator)

X0 = np.array([0.1, -0.2, 0.3, 0.05])


def test_translation_splits_to_constant(flat):
    c = splitting_operator(flat.chart, flat.field("T1")).components(X0)
    assert np.array_equal(c["xi"], np.eye(4)[1])
    assert not c["phi_ss"].any() and c["phi_c"] == 0 and not np.abs(c["eta"]).max() > 1e-12


def test_dilation_grading_element(flat):
    A = splitting_operator(flat.chart, flat.field("D"))
    M = A.matrix(X0)
    assert M[0, 0] == pytest.approx(-1.0) and M[-1, -1] == pytest.approx(1.0)
    # matches the hand computation nabla_X A_Q = (1 - c) X with c = div / n = 1
    assert np.abs(A.covariant_derivative(X0, np.eye(4)[2])).max() < 1e-9


def test_rotation_constant(flat):
    A = splitting_operator(flat.chart, flat.field("R12"))
    M0, M1 = A.matrix(X0), A.matrix(-X0)
    assert np.abs(M0[1:-1, 1:-1] - M1[1:-1, 1:-1]).max() < 1e-12
    assert abs(M0[2, 3]) == pytest.approx(1.0) and M0[3, 2] == pytest.approx(-M0[2, 3])


def test_lemma_flat_all_generators(flat):
    for name, V in flat.distinguished_fields.items():
        r = lemma_residuals(flat.chart, V, X0)
        assert r.lm1_residual <= 1e-7 and r.parallel_residual <= 1e-7, name
        assert r.warning is None


def test_lemma_special_conformal_on_sphere(sphere):
    for name in ("K0", "D", "R01"):
        lm1, par = lemma_residuals(sphere.chart, sphere.field(name), X0)
        assert lm1 <= 1e-5 and par <= 1e-5, name


def test_lemma_fefferman(heisenberg, berger):
    for entry in (heisenberg, berger):
        r = lemma_residuals(entry.chart, entry.field("j"), entry.base_point)
        assert r.lm1_residual <= 1e-4 and r.parallel_residual <= 1e-4
        assert r.conformal_killing_residual <= 1e-6


def test_lemma_warns_for_non_killing(flat, caplog):
    V = VectorFieldSpec(lambda x: np.array([x[1] ** 2, 0.0, 0.0, 0.0]),
                        lambda x: np.array([[0, 2 * x[1], 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0.0]]))
    with caplog.at_level(logging.WARNING):
        r = lemma_residuals(flat.chart, V, np.array([0.1, 0.5, 0, 0]))
    assert r.warning is not None and "not conformal Killing" in r.warning
    assert r.parallel_residual > 0.1


def test_sparling_flat_null_field_fails_ric(flat):
    cert = sparling_report(flat.chart, flat.field("j"), flat.default_grid(2))
    assert not cert.passed
    assert cert.failed_conditions == ["ric_positive"]
    assert cert.normalization_scale is None


def test_sparling_heisenberg(heisenberg):
    cert = sparling_report(heisenberg.chart, heisenberg.field("j"), heisenberg.default_grid(2))
    assert cert.passed and cert.verdict["dj_identity"]
    assert cert.ric_jj_normalized == pytest.approx(2.0, abs=1e-6)
    assert np.allclose(cert.dj_values, -1.0, atol=1e-6)


def test_sparling_tolerance_monotone(berger):
    grid = berger.default_grid(2)
    j = berger.field("j")
    verdicts = [sparling_report(berger.chart, j, grid, tol=t).passed for t in (1e-14, 1e-10, 1e-5, 1e-2)]
    # once it passes at some tolerance it passes at every looser one
    first = verdicts.index(True)
    assert all(verdicts[first:])


def test_splitting_gauge_robust(heisenberg):
    """A conformal rescaling keeps j conformal Killing and A_Q parallel."""
    phi = catalog_rescalings(4)[1]
    ch = conformal_rescale(heisenberg.chart, phi)
    r = lemma_residuals(ch, heisenberg.field("j"), heisenberg.base_point)
    assert r.conformal_killing_residual <= 1e-6 and r.parallel_residual <= 1e-4


def test_normalized_J_complex_everywhere(heisenberg):
    for x in heisenberg.default_grid(2):
        J = normalized_complex_structure(heisenberg.chart, heisenberg.field("j"), x)
        rep = complex_structure_report(J.matrix, J.metric, 1e-6)
        assert rep.is_complex_structure
        assert np.abs(J.matrix @ J.matrix + np.eye(6)).max() < 1e-6


def test_normalized_J_rejects_nonpositive(flat):
    with pytest.raises(ValueError, match="not positive"):
        normalized_complex_structure(flat.chart, flat.field("j"), X0)
