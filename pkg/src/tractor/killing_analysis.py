"""Splitting operator for conformal Killing fields, invariance residuals and Sparling certificates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chart_geometry import (Chart, VectorFieldSpec, conformal_killing_residual, curvature_suite,
                             lie_derivative_metric, point_curvature, vector_derivatives)
from .mobius_algebra import complex_structure_report
from .tractor_bundle import (AdjointTractorMatrix, adjoint_covariant_derivative,
                             assembled_curvature_matrices)

logger = logging.getLogger(__name__)


def _split_at(chart: Chart, V: VectorFieldSpec, x) -> tuple[AdjointTractorMatrix, np.ndarray, float]:
    pc = point_curvature(chart, x)
    n = len(pc.g)
    d = vector_derivatives(pc, V, chart.fd_step)
    nab, g, ginv = d.nabla, pc.g, pc.ginv
    phi_ss = 0.5 * (nab - ginv @ nab.T @ g)
    DV = (d.rough_laplacian + pc.scal * d.value / (2 * (n - 1))) / (n - 2)
    # centre coefficient div/n: the value for which conformal Killing fields satisfy nabla A_Q = -Omega(V, .)
    A = AdjointTractorMatrix(d.value.copy(), phi_ss, d.divergence / n, g @ DV, g)
    return A, DV, d.divergence


@dataclass(frozen=True)
class SplittingResult:
    """A_Q as an evaluator over the chart: ``result(x)`` gives the adjoint tractor at x."""

    chart: Chart
    field: VectorFieldSpec

    def __call__(self, x) -> AdjointTractorMatrix:
        return _split_at(self.chart, self.field, np.asarray(x, float))[0]

    def matrix(self, x) -> np.ndarray:
        return self(x).matrix

    def components(self, x) -> dict:
        A, DV, div = _split_at(self.chart, self.field, np.asarray(x, float))
        return {"xi": A.xi, "phi_ss": A.phi, "phi_c": A.phi_c, "eta": A.eta, "D": DV, "divergence": div}

    def covariant_derivative(self, x, X) -> np.ndarray:
        return adjoint_covariant_derivative(self.chart, self.matrix, x, X)


def splitting_operator(chart: Chart, V: VectorFieldSpec) -> SplittingResult:
    return SplittingResult(chart, V)


@dataclass(frozen=True)
class LemmaResiduals:
    lm1_residual: float
    parallel_residual: float
    curvature_residual: float          # ||Omega(V, .)||
    conformal_killing_residual: float
    warning: Optional[str] = None

    def __iter__(self):
        yield self.lm1_residual
        yield self.parallel_residual


def lemma_residuals(chart: Chart, V: VectorFieldSpec, x, X=None, ck_tol: float = 1e-6,
                    parallel_tol: float = 1e-6) -> LemmaResiduals:
    """||nabla_X A_Q + Omega(V, X)|| and ||nabla_X A_Q||, maximised over the coordinate basis when X is None."""
    x = np.asarray(x, float)
    n = len(x)
    ck, _ = conformal_killing_residual(chart, V, x)
    warning = None
    if ck > ck_tol:
        warning = f"field is not conformal Killing at this point (residual {ck:.3e}); residuals are diagnostic only"
        logger.warning(warning)
    dirs = np.eye(n) if X is None else np.atleast_2d(np.asarray(X, float))
    A = splitting_operator(chart, V)
    v = np.asarray(V.value(x), float)
    Om = assembled_curvature_matrices(chart, x)
    OmV = np.einsum("i,ijab->jab", v, Om)
    lm1 = par = curv = 0.0
    for Xd in dirs:
        DA = A.covariant_derivative(x, Xd)
        OVX = np.einsum("j,jab->ab", Xd, OmV)
        lm1 = max(lm1, float(np.abs(DA + OVX).max()))
        par = max(par, float(np.abs(DA).max()))
        curv = max(curv, float(np.abs(OVX).max()))
    if par <= parallel_tol and curv > max(parallel_tol, 10 * lm1):
        w = f"parallel A_Q with Omega(V, .) = {curv:.3e} contradicts nabla A_Q = -Omega(V, .)"
        warning = w if warning is None else warning + "; " + w
        logger.warning(w)
    return LemmaResiduals(lm1, par, curv, ck, warning)


# ---------------------------------------------------------------------------
# Sparling certificate


CONDITIONS = ("killing", "lightlike", "weyl", "cotton", "ric_positive")


@dataclass
class SparlingCertificate:
    killing_residual: float
    lightlike_residual: float
    weyl_residual: float
    cotton_residual: float
    divergence_residual: float
    ric_jj: list
    verdict: dict
    tol: float
    normalization_scale: Optional[float] = None
    ric_jj_normalized: Optional[float] = None
    dj_identity_residual: Optional[float] = None     # max |g(cj, D(cj)) + 1 + div(cj)^2|
    dj_values: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.verdict.values())

    @property
    def failed_conditions(self) -> list:
        return [k for k, v in self.verdict.items() if not v]


def _interior(j, T2form):
    # T2form[i, j, ...] antisymmetric in (i, j); contract the first slot
    return np.einsum("i,ij...->j...", j, T2form)


def sparling_report(chart: Chart, j: VectorFieldSpec, sample_grid, tol: float = 1e-5,
                    constancy_tol: float = 1e-6) -> SparlingCertificate:
    grid = np.atleast_2d(np.asarray(sample_grid, float))
    for p in grid:
        chart.check_domain(p)
    n = chart.dim
    records = []
    for p in grid:
        s = curvature_suite(chart, p)
        v = np.asarray(j.value(p), float)
        records.append({
            "x": p.tolist(),
            "killing": float(np.abs(lie_derivative_metric(chart, j, p)).max()),
            "lightlike": abs(float(v @ s.g @ v)),
            # W(j, X) as endomorphism: weyl13[l, k, i, j]
            "weyl": float(np.abs(np.einsum("i,lkij->jlk", v, s.weyl13)).max()),
            "cotton": float(np.abs(_interior(v, s.cotton)).max()),
            "divergence": abs(vector_derivatives(s, j, chart.fd_step).divergence),
            "ric_jj": float(v @ s.ricci @ v),
        })
    kill, light, weyl, cot, div_max = (max(r[k] for r in records)
                                       for k in ("killing", "lightlike", "weyl", "cotton", "divergence"))
    ric = [r["ric_jj"] for r in records]
    verdict = {
        "killing": kill <= tol,
        "lightlike": light <= tol,
        "weyl": weyl <= tol,
        "cotton": cot <= tol,
        "ric_positive": min(ric) > 0,
    }
    cert = SparlingCertificate(kill, light, weyl, cot, div_max, ric, verdict, tol, records=records)
    if min(ric) > 0 and max(ric) - min(ric) <= constancy_tol * max(1.0, abs(max(ric))):
        c = float(np.sqrt((n - 2) / np.mean(ric)))
        cert.normalization_scale = c
        cert.ric_jj_normalized = float(c * c * np.mean(ric))
        if verdict["killing"] and div_max <= tol:
            cj = j.scaled(c)
            vals, res = [], 0.0
            for p in grid:
                _, DV, dv = _split_at(chart, cj, p)
                val = float(np.asarray(cj.value(p)) @ chart.metric(p) @ DV)
                vals.append(val)
                res = max(res, abs(val + 1 + dv * dv))
            cert.dj_values = vals
            cert.dj_identity_residual = res
            cert.verdict["dj_identity"] = res <= tol
    return cert


def normalized_complex_structure(chart: Chart, j: VectorFieldSpec, x, tol: float = 1e-4) -> AdjointTractorMatrix:
    """J = A_Q(c j) with c chosen so Ric(cj, cj) = n - 2; raises ValueError if J^2 != -id."""
    x = np.asarray(x, float)
    pc = point_curvature(chart, x)
    v = np.asarray(j.value(x), float)
    rjj = float(v @ pc.ricci @ v)
    if not rjj > 0:
        raise ValueError(f"Ric(j, j) = {rjj:.3e} is not positive; no normalization exists")
    c = np.sqrt((chart.dim - 2) / rjj)
    A = splitting_operator(chart, j.scaled(c))(x)
    rep = complex_structure_report(A.matrix, A.metric, tol)
    if not rep.is_complex_structure:
        raise ValueError("A_Q(c j) is not a complex structure: " + "; ".join(rep.failed_conditions))
    return A
