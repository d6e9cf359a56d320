"""Finite-difference tensor calculus on a single metric chart.

Index conventions (coordinates x^0 .. x^{n-1}):

* ``dg[k, i, j] = d_k g_ij`` and ``ddg[k, l, i, j] = d_k d_l g_ij``
* ``gamma[k, i, j] = Gamma^k_ij``
* ``riemann[l, k, i, j] = R^l_kij`` with R(d_i, d_j) d_k = R^l_kij d_l and
  R(X, Y) Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
* ``ricci[j, k] = R^i_kij`` (trace over the first slot pair)
* ``schouten = (scal / (2(n-1)) g - Ric) / (n-2)``; note the sign, it is the
  negative of the more common Schouten tensor
* ``weyl13`` shares the layout of ``riemann``; ``weyl04[i, j, k, l] = g(W(d_i, d_j) d_k, d_l)``
* ``cotton[i, j, k] = (nabla_i K)(d_j, d_k) - (nabla_j K)(d_i, d_k)``
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

MIN_FD_STEP = 1e-8


class SingularMetricError(ArithmeticError):
    def __init__(self, x, cond):
        super().__init__(f"metric is singular or ill-conditioned at {np.round(x, 6).tolist()} "
                         f"(condition number {cond:.3e})")
        self.condition_number = cond


class DomainError(ValueError):
    pass


class MetricJet(NamedTuple):
    g: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray


@dataclass(frozen=True)
class Chart:
    """A coordinate patch carrying a pseudo-Riemannian metric.

    ``jet`` is an optional analytic hook returning ``(g, dg, ddg)`` at a point;
    without it both derivative orders come from central differences with
    ``fd_step``.  Quantities that differentiate curvature (Cotton-York, the
    tractor connection) use ``outer_step``.
    """

    metric: Callable[[np.ndarray], np.ndarray]
    signature: tuple[int, int]
    domain: tuple[np.ndarray, np.ndarray]
    jet: Optional[Callable[[np.ndarray], MetricJet]] = None
    fd_step: float = 1e-4
    name: str = "chart"
    coordinates: tuple[str, ...] = ()
    max_condition: float = 1e8

    def __post_init__(self):
        if not self.fd_step >= MIN_FD_STEP:
            raise ValueError(f"fd_step {self.fd_step} below {MIN_FD_STEP} is rejected")
        lo, hi = (np.asarray(b, dtype=float) for b in self.domain)
        object.__setattr__(self, "domain", (lo, hi))
        if lo.shape != (self.dim,) or hi.shape != (self.dim,):
            raise ValueError("domain box must match the chart dimension")

    @property
    def dim(self) -> int:
        return int(sum(self.signature))

    @property
    def outer_step(self) -> float:
        # noisy finite-difference jets need a wider stencil one level up
        return self.fd_step if self.jet is not None else max(10 * self.fd_step, 1e-3)

    def with_fd_step(self, h: float) -> "Chart":
        return replace(self, fd_step=h)

    def contains(self, x, margin: float = 0.0) -> bool:
        lo, hi = self.domain
        return bool(np.all(x >= lo - margin) and np.all(x <= hi + margin))

    def check_domain(self, x) -> None:
        if not self.contains(np.asarray(x), margin=1e-9 + 4 * self.outer_step):
            raise DomainError(f"point {np.round(x, 6).tolist()} outside chart domain of {self.name}")

    def grid(self, counts, margin: float = 0.0) -> np.ndarray:
        """Row-major uniform grid over the domain box shrunk by ``margin``."""
        lo, hi = self.domain
        counts = np.broadcast_to(np.asarray(counts, dtype=int), (self.dim,))
        axes = [np.linspace(a + margin, b - margin, c) if c > 1 else np.array([(a + b) / 2])
                for a, b, c in zip(lo, hi, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def fd_metric_jet(metric, x, h) -> MetricJet:
    x = np.asarray(x, dtype=float)
    n = len(x)
    g0 = np.asarray(metric(x), dtype=float)
    E = np.eye(n) * h
    plus = [np.asarray(metric(x + E[k])) for k in range(n)]
    minus = [np.asarray(metric(x - E[k])) for k in range(n)]
    dg = np.array([(plus[k] - minus[k]) / (2 * h) for k in range(n)])
    ddg = np.zeros((n, n, n, n))
    for k in range(n):
        ddg[k, k] = (plus[k] - 2 * g0 + minus[k]) / h ** 2
        for l in range(k + 1, n):
            v = (metric(x + E[k] + E[l]) - metric(x + E[k] - E[l])
                 - metric(x - E[k] + E[l]) + metric(x - E[k] - E[l])) / (4 * h * h)
            ddg[k, l] = ddg[l, k] = v
    return MetricJet(g0, dg, ddg)


def metric_jet(chart: Chart, x) -> MetricJet:
    x = np.asarray(x, dtype=float)
    if chart.jet is not None:
        g, dg, ddg = chart.jet(x)
        return MetricJet(np.asarray(g, float), np.asarray(dg, float), np.asarray(ddg, float))
    return fd_metric_jet(chart.metric, x, chart.fd_step)


def inverse_metric(g: np.ndarray, x=None, max_condition: float = 1e8) -> np.ndarray:
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularMetricError(x if x is not None else np.zeros(len(g)), cond)
    return np.linalg.inv(g)


def signature_of(g: np.ndarray) -> tuple[int, int]:
    ev = np.linalg.eigvalsh(0.5 * (g + g.T))
    return int(np.sum(ev < 0)), int(np.sum(ev > 0))


def validate_point(chart: Chart, x) -> float:
    """Check symmetry, invertibility and signature at x; return the condition number."""
    g = np.asarray(chart.metric(np.asarray(x, float)), float)
    if np.abs(g - g.T).max() > 1e-12 * max(1.0, np.abs(g).max()):
        raise ValueError(f"metric not symmetric at {x}")
    inverse_metric(g, x, chart.max_condition)
    sig = signature_of(g)
    if sig != tuple(chart.signature):
        raise ValueError(f"signature {sig} at {np.round(x, 6).tolist()} differs from declared {chart.signature}")
    return float(np.linalg.cond(g))


def _gamma_from_jet(g, dg, ginv):
    # Gamma^k_ij = 1/2 g^km (d_i g_mj + d_j g_mi - d_m g_ij)
    lower = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)  # [m, i, j]
    return np.einsum("km,mij->kij", ginv, lower)


def christoffels(chart: Chart, x) -> np.ndarray:
    g, dg, _ = metric_jet(chart, x)
    return _gamma_from_jet(g, dg, inverse_metric(g, x, chart.max_condition))


def christoffel_jet(jet: MetricJet, ginv: np.ndarray):
    """Gamma and its coordinate derivative dGamma[m, k, i, j] = d_m Gamma^k_ij."""
    g, dg, ddg = jet
    gamma = _gamma_from_jet(g, dg, ginv)
    lower = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
    # d_a of the lowered symbol
    dlower = 0.5 * (ddg.transpose(0, 2, 1, 3) + ddg.transpose(0, 2, 3, 1) - ddg)  # [a, m, i, j]
    dginv = -np.einsum("kp,apq,qm->akm", ginv, dg, ginv)
    dgamma = np.einsum("akm,mij->akij", dginv, lower) + np.einsum("km,amij->akij", ginv, dlower)
    return gamma, dgamma


def riemann_from(gamma, dgamma):
    # R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
    t1 = np.einsum("iljk->lkij", dgamma)
    t2 = np.einsum("jlik->lkij", dgamma)
    t3 = np.einsum("lim,mjk->lkij", gamma, gamma)
    t4 = np.einsum("ljm,mik->lkij", gamma, gamma)
    return t1 - t2 + t3 - t4


def schouten_part(K, g, ginv):
    """Schouten contribution to R(d_i, d_j) d_k, laid out like the Riemann tensor.

    K(X,Z) Y - K(Y,Z) X + g(X,Z) K(Y)^# - g(Y,Z) K(X)^#
    """
    n = len(g)
    d = np.eye(n)
    Kup = ginv @ K  # Kup[l, j] = K^l_j
    return (np.einsum("ik,lj->lkij", K, d) - np.einsum("jk,li->lkij", K, d)
            + np.einsum("ik,lj->lkij", g, Kup) - np.einsum("jk,li->lkij", g, Kup))


@dataclass
class PointCurvature:
    """Curvature data at one point that only needs the metric 2-jet."""

    x: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray
    gamma: np.ndarray
    dgamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scal: float
    schouten: np.ndarray
    weyl13: np.ndarray
    weyl04: np.ndarray
    condition_number: float


def point_curvature(chart: Chart, x) -> PointCurvature:
    x = np.asarray(x, dtype=float)
    jet = metric_jet(chart, x)
    g = jet.g
    n = len(g)
    if n < 3:
        raise ValueError("curvature suite needs dimension >= 3")
    ginv = inverse_metric(g, x, chart.max_condition)
    gamma, dgamma = christoffel_jet(jet, ginv)
    R = riemann_from(gamma, dgamma)
    ric = np.einsum("ikij->jk", R)
    ric = 0.5 * (ric + ric.T)
    scal = float(np.einsum("jk,jk->", ginv, ric))
    K = (scal / (2 * (n - 1)) * g - ric) / (n - 2)
    W = R - schouten_part(K, g, ginv)
    W04 = np.einsum("lkij,lm->ijkm", W, g)
    return PointCurvature(x, g, ginv, jet.dg, gamma, dgamma, R, ric, scal, K, W, W04,
                          float(np.linalg.cond(g)))


def central_difference(f, x, i, h):
    """Fourth-order central difference of f along coordinate i."""
    e = np.zeros(len(x))
    e[i] = h
    return (8 * (f(x + e) - f(x - e)) - (f(x + 2 * e) - f(x - 2 * e))) / (12 * h)


def schouten_at(chart: Chart, x) -> np.ndarray:
    return point_curvature(chart, x).schouten


@dataclass
class CurvatureSuite(PointCurvature):
    cotton: np.ndarray = field(default=None)
    schouten_derivative: np.ndarray = field(default=None)  # [i, j, k] = (nabla_i K)_jk


def curvature_suite(chart: Chart, x) -> CurvatureSuite:
    x = np.asarray(x, dtype=float)
    chart.check_domain(x)
    pc = point_curvature(chart, x)
    n = len(x)
    h = chart.outer_step
    dK = np.array([central_difference(lambda y: schouten_at(chart, y), x, i, h) for i in range(n)])
    K = pc.schouten
    # (nabla_i K)_jk = d_i K_jk - Gamma^m_ij K_mk - Gamma^m_ik K_jm
    nablaK = dK - np.einsum("mij,mk->ijk", pc.gamma, K) - np.einsum("mik,jm->ijk", pc.gamma, K)
    C = nablaK - nablaK.transpose(1, 0, 2)
    return CurvatureSuite(**pc.__dict__, cotton=C, schouten_derivative=nablaK)


# ---------------------------------------------------------------------------
# conformal rescaling


@dataclass(frozen=True)
class ScalarField:
    """A smooth function on the chart with optional analytic gradient and Hessian."""

    value: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "phi"

    def jet(self, x, h: float = 1e-4):
        x = np.asarray(x, dtype=float)
        f = float(self.value(x))
        n = len(x)
        E = np.eye(n) * h
        if self.gradient is not None:
            df = np.asarray(self.gradient(x), float)
        else:
            df = np.array([(self.value(x + E[k]) - self.value(x - E[k])) / (2 * h) for k in range(n)])
        if self.hessian is not None:
            ddf = np.asarray(self.hessian(x), float)
        elif self.gradient is not None:
            ddf = np.array([(self.gradient(x + E[k]) - self.gradient(x - E[k])) / (2 * h) for k in range(n)])
            ddf = 0.5 * (ddf + ddf.T)
        else:
            ddf = np.zeros((n, n))
            for k in range(n):
                for l in range(n):
                    ddf[k, l] = (self.value(x + E[k] + E[l]) - self.value(x + E[k] - E[l])
                                 - self.value(x - E[k] + E[l]) + self.value(x - E[k] - E[l])) / (4 * h * h)
        return f, df, ddf


def conformal_rescale(chart: Chart, phi: ScalarField) -> Chart:
    """The chart with metric exp(2 phi) g."""

    def metric(x):
        return np.exp(2.0 * phi.value(x)) * chart.metric(x)

    jet = None
    if chart.jet is not None and phi.gradient is not None and phi.hessian is not None:
        def jet(x):
            g, dg, ddg = chart.jet(x)
            f, df, ddf = phi.jet(x)
            w = np.exp(2 * f)
            new_dg = w * (2 * df[:, None, None] * g + dg)
            new_ddg = w * ((4 * np.einsum("k,l->kl", df, df) + 2 * ddf)[:, :, None, None] * g
                           + 2 * np.einsum("k,lij->klij", df, dg)
                           + 2 * np.einsum("l,kij->klij", df, dg)
                           + ddg)
            return MetricJet(w * g, new_dg, new_ddg)

    return replace(chart, metric=metric, jet=jet, name=f"{chart.name}*exp(2{phi.name})")


# ---------------------------------------------------------------------------
# vector fields


@dataclass(frozen=True)
class VectorFieldSpec:
    """A vector field with optional analytic Jacobian J[i, j] = d_j V^i and Hessian H[i, j, k]."""

    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "V"

    def scaled(self, c: float) -> "VectorFieldSpec":
        return VectorFieldSpec(
            lambda x: c * np.asarray(self.value(x)),
            None if self.jacobian is None else (lambda x: c * np.asarray(self.jacobian(x))),
            None if self.hessian is None else (lambda x: c * np.asarray(self.hessian(x))),
            name=f"{c:g}*{self.name}",
        )

    def jet(self, x, h: float = 1e-4):
        x = np.asarray(x, dtype=float)
        v = np.asarray(self.value(x), float)
        n = len(x)
        E = np.eye(n) * h
        if self.jacobian is not None:
            J = np.asarray(self.jacobian(x), float)
        else:
            J = np.array([(np.asarray(self.value(x + E[k])) - np.asarray(self.value(x - E[k]))) / (2 * h)
                          for k in range(n)]).T
        if self.hessian is not None:
            H = np.asarray(self.hessian(x), float)
        elif self.jacobian is not None:
            H = np.array([(np.asarray(self.jacobian(x + E[k])) - np.asarray(self.jacobian(x - E[k]))) / (2 * h)
                          for k in range(n)]).transpose(1, 2, 0)
            H = 0.5 * (H + H.transpose(0, 2, 1))
        else:
            H = np.zeros((n, n, n))
            for k in range(n):
                for l in range(n):
                    H[:, k, l] = (np.asarray(self.value(x + E[k] + E[l])) - self.value(x + E[k] - E[l])
                                  - self.value(x - E[k] + E[l]) + self.value(x - E[k] - E[l])) / (4 * h * h)
        return v, J, H


def lie_derivative_metric(chart: Chart, V: VectorFieldSpec, x) -> np.ndarray:
    g, dg, _ = metric_jet(chart, x)
    v, J, _ = V.jet(x, chart.fd_step)
    return np.einsum("k,kij->ij", v, dg) + np.einsum("kj,ki->ij", g, J) + np.einsum("ik,kj->ij", g, J)


def covariant_jacobian(gamma, v, J) -> np.ndarray:
    """nablaV[i, j] = (nabla_j V)^i."""
    return J + np.einsum("ijk,k->ij", gamma, v)


def divergence(chart: Chart, V: VectorFieldSpec, x) -> float:
    gamma = christoffels(chart, x)
    v, J, _ = V.jet(x, chart.fd_step)
    return float(np.trace(covariant_jacobian(gamma, v, J)))


def conformal_killing_residual(chart: Chart, V: VectorFieldSpec, x) -> tuple[float, float]:
    """(||L_V g - (2/n) div(V) g||, div V) at x."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(chart.metric(x), float)
    div = divergence(chart, V, x)
    L = lie_derivative_metric(chart, V, x)
    return float(np.linalg.norm(L - (2.0 / len(x)) * div * g)), div


def killing_residual(chart: Chart, V: VectorFieldSpec, x) -> float:
    return float(np.linalg.norm(lie_derivative_metric(chart, V, x)))


@dataclass
class VectorDerivatives:
    value: np.ndarray
    nabla: np.ndarray          # [i, j] = (nabla_j V)^i
    nabla2: np.ndarray         # [i, j, k] = (nabla_k nabla_j V)^i
    rough_laplacian: np.ndarray
    divergence: float


def vector_derivatives(pc: PointCurvature, V: VectorFieldSpec, h: float) -> VectorDerivatives:
    v, J, H = V.jet(pc.x, h)
    gamma, dgamma = pc.gamma, pc.dgamma
    nab = covariant_jacobian(gamma, v, J)
    # d_k (nabla V)^i_j = H[i, j, k] + dGamma[k, i, j, l] V^l + Gamma^i_jl J[l, k]
    dnab = H + np.einsum("kijl,l->ijk", dgamma, v) + np.einsum("ijl,lk->ijk", gamma, J)
    # (nabla_k nabla V)^i_j = d_k nab^i_j + Gamma^i_kl nab^l_j - Gamma^l_kj nab^i_l
    nab2 = dnab + np.einsum("ikl,lj->ijk", gamma, nab) - np.einsum("lkj,il->ijk", gamma, nab)
    lap = np.einsum("jk,ijk->i", pc.ginv, nab2)
    return VectorDerivatives(v, nab, nab2, lap, float(np.trace(nab)))
