"""The normal tractor connection in the gauge of a chart metric.

Matrices act on tractor components (d; tau; b) where tau carries coordinate
components.  Connection matrices Gamma_i satisfy nabla_i t = d_i t + Gamma_i t.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .chart_geometry import (Chart, DomainError, central_difference, curvature_suite,
                             point_curvature)
from .conventions import COTTON_SLOT_SIGN
from .mobius_algebra import (algebra_coordinates, complex_structure_report,
                             compose_graded, su_residuals, tractor_form)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-6
RANK_ABS_FLOOR = 1e-7


@dataclass(frozen=True)
class TractorTriple:
    d: float
    tau: np.ndarray
    b: float

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.d], self.tau, [self.b]])

    @classmethod
    def from_vector(cls, t) -> "TractorTriple":
        t = np.asarray(t, dtype=float)
        return cls(float(t[0]), t[1:-1].copy(), float(t[-1]))

    def pairing(self, other: "TractorTriple", g: np.ndarray) -> float:
        return self.d * other.b + self.b * other.d + self.tau @ g @ other.tau


@dataclass(frozen=True)
class AdjointTractorMatrix:
    """Gauge form (xi, phi, phi_c, eta) of an adjoint tractor.

    ``phi`` is the full middle block.  For algebra elements it is g-skew; for
    connection matrices in a coordinate frame it holds the Christoffel
    endomorphism and is not.
    """

    xi: np.ndarray
    phi: np.ndarray
    phi_c: float
    eta: np.ndarray
    metric: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return compose_graded(self.xi, self.phi, self.phi_c, self.eta, self.metric)

    @property
    def phi_ss(self) -> np.ndarray:
        return self.phi

    @property
    def projection(self) -> np.ndarray:
        return self.xi

    @classmethod
    def from_matrix(cls, M: np.ndarray, metric: np.ndarray) -> "AdjointTractorMatrix":
        return cls(M[1:-1, 0].copy(), M[1:-1, 1:-1].copy(), float(M[-1, -1]), M[0, 1:-1].copy(),
                   np.asarray(metric, float))

    def skew_residual(self) -> float:
        J = tractor_form(self.metric)
        M = self.matrix
        return float(np.abs(M.T @ J + J @ M).max())

    def act(self, t) -> np.ndarray:
        return self.matrix @ (t.vector if isinstance(t, TractorTriple) else np.asarray(t))


# ---------------------------------------------------------------------------
# connection


def _connection_from(pc, n) -> np.ndarray:
    out = np.empty((n, n + 2, n + 2))
    E = np.eye(n)
    for i in range(n):
        out[i] = compose_graded(E[i], pc.gamma[:, i, :], 0.0, pc.schouten[i], pc.g)
    return out


def connection_matrices(chart: Chart, x) -> np.ndarray:
    """Gamma_i for X = d_i, shape (n, n+2, n+2)."""
    x = np.asarray(x, dtype=float)
    return _connection_from(point_curvature(chart, x), len(x))


def tractor_connection_matrix(chart: Chart, x, X) -> AdjointTractorMatrix:
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    pc = point_curvature(chart, x)
    return AdjointTractorMatrix(X.copy(), np.einsum("kij,i->kj", pc.gamma, X), 0.0, X @ pc.schouten, pc.g)


def connection_along(chart: Chart, x, v) -> np.ndarray:
    return np.tensordot(v, connection_matrices(chart, x), axes=(0, 0))


def tractor_covariant_derivative(chart: Chart, t: Callable, x, X, h: Optional[float] = None) -> TractorTriple:
    """nabla_X t for a tractor field t: x -> components (d, tau..., b)."""
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    h = chart.outer_step if h is None else h
    dt = (np.asarray(t(x + h * X)) - np.asarray(t(x - h * X))) / (2 * h)
    return TractorTriple.from_vector(dt + connection_along(chart, x, X) @ np.asarray(t(x)))


def adjoint_covariant_derivative(chart: Chart, A: Callable, x, X, h: Optional[float] = None) -> np.ndarray:
    """nabla_X A = X(A) + [Gamma(X), A] for an adjoint tractor field A: x -> matrix."""
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    h = chart.outer_step if h is None else h
    dA = (np.asarray(A(x + h * X)) - np.asarray(A(x - h * X))) / (2 * h)
    G = connection_along(chart, x, X)
    A0 = np.asarray(A(x))
    return dA + G @ A0 - A0 @ G


# ---------------------------------------------------------------------------
# curvature


class CurvatureMismatchError(ArithmeticError):
    def __init__(self, assembled, other, rel):
        super().__init__(f"tractor curvature methods disagree (relative error {rel:.3e})")
        self.assembled = assembled
        self.other = other
        self.relative_error = rel


def assembled_curvature_matrices(chart: Chart, x, suite=None) -> np.ndarray:
    """Omega_ij from Weyl and Cotton-York, shape (n, n, n+2, n+2)."""
    s = curvature_suite(chart, x) if suite is None else suite
    n = len(s.g)
    out = np.zeros((n, n, n + 2, n + 2))
    for i in range(n):
        for j in range(n):
            out[i, j] = compose_graded(np.zeros(n), s.weyl13[:, :, i, j], 0.0,
                                       COTTON_SLOT_SIGN * s.cotton[i, j], s.g)
    return out


def commutator_curvature_matrices(chart: Chart, x, h: Optional[float] = None) -> np.ndarray:
    """Omega_ij = d_i Gamma_j - d_j Gamma_i + [Gamma_i, Gamma_j] with fourth-order differences."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    h = chart.outer_step if h is None else h
    G0 = connection_matrices(chart, x)
    dG = np.array([central_difference(lambda y: connection_matrices(chart, y), x, i, h) for i in range(n)])
    out = np.zeros((n, n, n + 2, n + 2))
    for i in range(n):
        for j in range(i + 1, n):
            v = dG[i, j] - dG[j, i] + G0[i] @ G0[j] - G0[j] @ G0[i]
            out[i, j] = v
            out[j, i] = -v
    return out


def tractor_curvature(chart: Chart, x, X, Y, method: str = "assembled") -> AdjointTractorMatrix:
    x = np.asarray(x, dtype=float)
    if method == "assembled":
        Om = assembled_curvature_matrices(chart, x)
    elif method == "commutator":
        Om = commutator_curvature_matrices(chart, x)
    elif method == "transport":
        return AdjointTractorMatrix.from_matrix(transport_curvature(chart, x, X, Y),
                                                np.asarray(chart.metric(x), float))
    else:
        raise ValueError(f"unknown curvature method {method!r}; use assembled, commutator or transport")
    M = np.einsum("i,j,ijab->ab", np.asarray(X, float), np.asarray(Y, float), Om)
    return AdjointTractorMatrix.from_matrix(M, np.asarray(chart.metric(x), float))


def curvature_cross_check(chart: Chart, x, rel_tol: float = 1e-3, abs_tol: float = 1e-5):
    """Compare assembled and commutator curvature; raise on mismatch.

    Returns (assembled, commutator, relative error).
    """
    A = assembled_curvature_matrices(chart, x)
    C = commutator_curvature_matrices(chart, x)
    diff = np.linalg.norm(A - C)
    scale = np.linalg.norm(A)
    rel = diff / scale if scale > abs_tol else 0.0
    if diff > abs_tol and rel > rel_tol:
        raise CurvatureMismatchError(A, C, rel)
    return A, C, rel


# ---------------------------------------------------------------------------
# parallel transport


@dataclass(frozen=True)
class Polyline:
    """Piecewise-linear path through the given vertices."""

    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.atleast_2d(np.asarray(self.vertices, dtype=float)))

    def reversed(self) -> "Polyline":
        return Polyline(self.vertices[::-1])

    @classmethod
    def segment(cls, a, b) -> "Polyline":
        return cls(np.array([a, b], dtype=float))

    @classmethod
    def rectangle(cls, base, u, v) -> "Polyline":
        base = np.asarray(base, float)
        return cls(np.array([base, base + u, base + u + v, base + v, base]))


def _rk4_segment(chart: Chart, a, b, steps, T):
    v = b - a
    if not np.any(v):
        return T
    dt = 1.0 / steps

    def rhs(s, M):
        return -connection_along(chart, a + s * v, v) @ M

    for k in range(steps):
        s = k * dt
        k1 = rhs(s, T)
        k2 = rhs(s + dt / 2, T + dt / 2 * k1)
        k3 = rhs(s + dt / 2, T + dt / 2 * k2)
        k4 = rhs(s + dt, T + dt * k3)
        T = T + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return T


def parallel_transport(chart: Chart, curve, steps: int = 32) -> np.ndarray:
    """Transport matrix along ``curve`` (a Polyline, or a callable s -> point on [0, 1]).

    ``steps`` fourth-order Runge-Kutta steps are taken per polyline segment.
    """
    if steps < 16:
        raise ValueError("parallel transport needs at least 16 steps")
    if not isinstance(curve, Polyline):
        s = np.linspace(0.0, 1.0, steps + 1)
        curve = Polyline(np.array([curve(si) for si in s]))
        steps_per = 1
    else:
        steps_per = steps
    verts = curve.vertices
    for p in verts:
        if not chart.contains(p, margin=1e-12):
            raise DomainError(f"curve leaves the domain of {chart.name} at {np.round(p, 6).tolist()}")
    N = chart.dim + 2
    T = np.eye(N)
    for a, b in zip(verts[:-1], verts[1:]):
        T = _rk4_segment(chart, a, b, steps_per, T)
    return T


def transport_defect(chart: Chart, curve: Polyline, T: np.ndarray) -> float:
    """||T^T J_end T - J_start|| for the gauge tractor forms at the path ends."""
    Js = tractor_form(chart.metric(curve.vertices[0]))
    Je = tractor_form(chart.metric(curve.vertices[-1]))
    return float(np.abs(T.T @ Je @ T - Js).max())


def log_near_identity(T: np.ndarray, max_terms: int = 200) -> np.ndarray:
    """Matrix logarithm by the series in E = T - I; requires ||E|| < 0.5."""
    E = T - np.eye(len(T))
    if np.linalg.norm(E, 2) >= 0.5:
        raise ValueError("series logarithm needs ||T - I|| < 0.5")
    out = np.zeros_like(E)
    P = np.eye(len(T))
    for k in range(1, max_terms + 1):
        P = P @ E
        term = P / k * (1 if k % 2 else -1)
        out += term
        if np.abs(term).max() < 1e-18:
            break
    return out


def loop_logarithm(chart: Chart, base, u, v, steps: int = 16, min_size: float = 1e-6):
    """log of the holonomy of the rectangle base -> base+u -> base+u+v -> base+v -> base.

    Shrinks (u, v) by 1/2 until the series logarithm applies.  Returns (log, scale)
    where scale is the applied shrink factor.
    """
    scale = 1.0
    while True:
        T = parallel_transport(chart, Polyline.rectangle(base, scale * u, scale * v), steps)
        try:
            return log_near_identity(T), scale
        except ValueError:
            scale *= 0.5
            if scale * max(np.linalg.norm(u), np.linalg.norm(v)) < min_size:
                raise ArithmeticError("loop size underflow while shrinking for the matrix logarithm")


def transport_curvature(chart: Chart, x, X, Y, eps: float = 1e-2, steps: int = 16) -> np.ndarray:
    """Omega(X, Y) from small centred loops, Richardson-extrapolated in the loop size."""
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)

    def estimate(e):
        corner = x - 0.5 * e * (X + Y)
        L, sc = loop_logarithm(chart, corner, e * X, e * Y, steps)
        P = parallel_transport(chart, Polyline.segment(corner, x), steps)
        # holonomy of the loop traversed (X then Y) is exp(-e^2 Omega)
        return -P @ L @ np.linalg.inv(P) / (sc * e) ** 2

    return (4 * estimate(eps / 2) - estimate(eps)) / 3


# ---------------------------------------------------------------------------
# holonomy


@dataclass(frozen=True)
class HolonomyStrategy:
    method: str = "both"               # "curvature-span", "loops" or "both"
    n_points: int = 6
    radius: float = 0.25
    loop_size: float = 0.05
    transport_steps: int = 32
    loop_steps: int = 16
    seed: int = 0
    rank_tol: float = RANK_TOL
    abs_floor: float = RANK_ABS_FLOOR
    curvature_method: str = "assembled"


@dataclass
class HolonomyReport:
    base_point: np.ndarray
    samples: list
    rank: int
    singular_values: list
    strategy_ranks: dict
    strategy_singular_values: dict
    skew_residual: float
    classification: Optional[str] = None
    u_compatible: Optional[bool] = None
    su_compatible: Optional[bool] = None
    J_used: Optional[AdjointTractorMatrix] = None
    residuals: dict = field(default_factory=dict)
    metric: Optional[np.ndarray] = None


def numerical_rank(samples: Sequence[np.ndarray], metric, rank_tol=RANK_TOL, abs_floor=RANK_ABS_FLOOR):
    if not samples:
        return 0, []
    coords = np.array([algebra_coordinates(S, metric) for S in samples])
    sv = np.linalg.svd(coords, compute_uv=False)
    sv = np.sort(sv)[::-1]
    thresh = max(rank_tol * sv[0], abs_floor)
    return int(np.sum(sv > thresh)), [float(s) for s in sv]


def sample_points(chart: Chart, x0, strategy: HolonomyStrategy) -> np.ndarray:
    rng = np.random.default_rng(strategy.seed)
    lo, hi = chart.domain
    pad = 2 * strategy.loop_size + 4 * chart.outer_step
    pts = [np.asarray(x0, float)]
    while len(pts) < strategy.n_points:
        p = x0 + strategy.radius * rng.uniform(-1.0, 1.0, size=len(x0))
        pts.append(np.clip(p, lo + pad, hi - pad))
    return np.array(pts)


def holonomy_algebra_estimate(chart: Chart, x0, strategy: HolonomyStrategy = HolonomyStrategy(),
                              points=None) -> HolonomyReport:
    """Span of curvature and loop samples transported to x0.

    ``points`` overrides the seeded sample points; x0 itself is always included.
    """
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    g0 = np.asarray(chart.metric(x0), float)
    J0 = tractor_form(g0)
    if points is None:
        pts = sample_points(chart, x0, strategy)
    else:
        pts = np.vstack([x0[None, :], np.atleast_2d(np.asarray(points, float))])
        for p in pts:
            chart.check_domain(p)
    back = []
    for p in pts:
        if np.allclose(p, x0):
            back.append(np.eye(n + 2))
        else:
            back.append(parallel_transport(chart, Polyline.segment(p, x0), strategy.transport_steps))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    by_method: dict[str, list] = {}
    if strategy.method in ("curvature-span", "both"):
        out = []
        for p, P in zip(pts, back):
            if strategy.curvature_method == "commutator":
                Om = commutator_curvature_matrices(chart, p)
            else:
                Om = assembled_curvature_matrices(chart, p)
            Pinv = np.linalg.inv(P)
            out.extend(P @ Om[i, j] @ Pinv for i, j in pairs)
        by_method["curvature-span"] = out
    if strategy.method in ("loops", "both"):
        out = []
        E = np.eye(n) * strategy.loop_size
        for p, P in zip(pts, back):
            Pinv = np.linalg.inv(P)
            for i, j in pairs:
                L, sc = loop_logarithm(chart, p, E[i], E[j], strategy.loop_steps)
                out.append(P @ L @ Pinv / (sc * strategy.loop_size) ** 2)
        by_method["loops"] = out
    if not by_method:
        raise ValueError(f"unknown holonomy strategy {strategy.method!r}")
    ranks, svs = {}, {}
    for k, samples in by_method.items():
        ranks[k], svs[k] = numerical_rank(samples, g0, strategy.rank_tol, strategy.abs_floor)
    all_samples = [S for k in sorted(by_method) for S in by_method[k]]
    rank, sv = numerical_rank(all_samples, g0, strategy.rank_tol, strategy.abs_floor)
    skew = max(float(np.abs(S.T @ J0 + J0 @ S).max()) for S in all_samples)
    if len(set(ranks.values())) > 1:
        logger.warning("holonomy strategies disagree on rank: %s", ranks)
    return HolonomyReport(x0, all_samples, rank, sv, ranks, svs, skew, metric=g0)


class ClassificationError(ValueError):
    pass


def classify_holonomy(report: HolonomyReport, J=None, candidate=None, tol: float = 1e-4) -> HolonomyReport:
    """Fill the u(p,q)/su(p,q) verdict of a holonomy report.

    ``J`` is a complex structure at the base point (matrix or AdjointTractorMatrix).
    Without it, ``candidate = (chart, killing_field)`` is turned into one through the
    splitting operator; if that fails the verdict is based on the rank alone.
    """
    g0 = report.metric
    Jm = None
    if J is not None:
        Jm = J.matrix if isinstance(J, AdjointTractorMatrix) else np.asarray(J, float)
        csr = complex_structure_report(Jm, g0, tol)
        if not csr.is_complex_structure:
            raise ClassificationError("supplied J is not a complex structure: " + "; ".join(csr.failed_conditions))
    elif candidate is not None:
        from .killing_analysis import normalized_complex_structure
        chart, field_ = candidate
        try:
            Jm = normalized_complex_structure(chart, field_, report.base_point, tol=tol).matrix
        except ValueError as exc:
            logger.info("no complex structure constructible: %s", exc)
            Jm = None
    if Jm is not None:
        comm = [su_residuals(Jm, S) for S in report.samples]
        max_comm = max((c for c, _ in comm), default=0.0)
        max_tr = max((abs(t) for _, t in comm), default=0.0)
        report.residuals = {"max_commutator": max_comm, "max_complex_trace": max_tr}
        report.u_compatible = max_comm <= tol
        report.su_compatible = report.u_compatible and max_tr <= tol
        report.J_used = AdjointTractorMatrix.from_matrix(Jm, g0)
    else:
        report.u_compatible = report.su_compatible = False if report.rank > 0 else None
    if report.rank == 0:
        report.classification = "flat"
        if Jm is not None:
            report.u_compatible = report.su_compatible = True
    elif report.su_compatible:
        report.classification = "su(p,q)-compatible"
    elif report.u_compatible:
        report.classification = "u(p,q)-compatible"
    else:
        report.classification = "generic"
    return report
