"""Linear algebra of the |1|-graded Lie algebra so(r+1, s+1).

Matrices act on R^{n+2} with basis order (e_-, e_1, ..., e_n, e_+) and the
scalar product <x, y> = x_- y_+ + x_+ y_- + x^T G y, where G is either the
flat form diag(-I_r, I_s) or the metric of a chart at a point.  A general
algebra element has the block form

    [[-a,  l,          0       ],
     [ m,  A,         -G^{-1}l^T],
     [ 0, -m^T G,      a       ]]

with m in g_{-1}, (A, a) in g_0 = so(G) + R and l in g_1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import null_space

DEFAULT_TOL = 1e-10


class AlgebraValidationError(ValueError):
    """Raised when a matrix is not skew with respect to the tractor form."""

    def __init__(self, message: str, max_violation: float, index: tuple[int, int]):
        super().__init__(f"{message} (max violation {max_violation:.3e} at entry {index})")
        self.max_violation = max_violation
        self.index = index


@dataclass(frozen=True)
class SignaturePair:
    """Signature (r, s) of the flat model, r negative and s positive directions."""

    r: int
    s: int

    def __post_init__(self):
        if self.r < 0 or self.s < 0:
            raise ValueError("signature entries must be non-negative")
        if self.r + self.s < 3:
            raise ValueError(f"need n = r + s >= 3, got {self.r + self.s}")

    @property
    def n(self) -> int:
        return self.r + self.s

    @property
    def metric(self) -> np.ndarray:
        return np.diag([-1.0] * self.r + [1.0] * self.s)

    @property
    def unitary_type(self) -> tuple[int, int] | None:
        """(p, q) with (r+1, s+1) = (2p, 2q), or None if no complex structure exists."""
        if (self.r + 1) % 2 or (self.s + 1) % 2:
            return None
        return (self.r + 1) // 2, (self.s + 1) // 2


def flat_metric(r: int, s: int) -> np.ndarray:
    return SignaturePair(r, s).metric


def tractor_form(metric: np.ndarray) -> np.ndarray:
    """The (n+2)x(n+2) matrix of the tractor scalar product for a metric G."""
    G = np.asarray(metric, dtype=float)
    n = G.shape[0]
    J = np.zeros((n + 2, n + 2))
    J[0, -1] = J[-1, 0] = 1.0
    J[1:-1, 1:-1] = G
    return J


def skew_violation(beta: np.ndarray, metric: np.ndarray) -> np.ndarray:
    J = tractor_form(metric)
    return beta.T @ J + J @ beta


def check_skew(beta: np.ndarray, metric: np.ndarray, tol: float = DEFAULT_TOL) -> None:
    viol = np.abs(skew_violation(beta, metric))
    scale = max(1.0, float(np.abs(beta).max()))
    idx = np.unravel_index(int(np.argmax(viol)), viol.shape)
    if viol[idx] > tol * scale:
        raise AlgebraValidationError("matrix is not skew w.r.t. the tractor form",
                                     float(viol[idx]), (int(idx[0]), int(idx[1])))


class GradedParts(NamedTuple):
    m: np.ndarray
    A: np.ndarray
    a: float
    l: np.ndarray


def compose_graded(m, A, a, l, metric) -> np.ndarray:
    G = np.asarray(metric, dtype=float)
    n = G.shape[0]
    beta = np.zeros((n + 2, n + 2))
    beta[0, 0] = -a
    beta[0, 1:-1] = l
    beta[1:-1, 0] = m
    beta[1:-1, 1:-1] = A
    beta[1:-1, -1] = -np.linalg.solve(G, np.asarray(l, dtype=float))
    beta[-1, 1:-1] = -np.asarray(m, dtype=float) @ G
    beta[-1, -1] = a
    return beta


def decompose_graded(beta: np.ndarray, metric: np.ndarray, tol: float = DEFAULT_TOL,
                     validate: bool = True) -> GradedParts:
    beta = np.asarray(beta, dtype=float)
    if validate:
        check_skew(beta, metric, tol)
    return GradedParts(beta[1:-1, 0].copy(), beta[1:-1, 1:-1].copy(),
                       float(beta[-1, -1]), beta[0, 1:-1].copy())


def embed_minus(m, metric) -> np.ndarray:
    n = len(m)
    return compose_graded(m, np.zeros((n, n)), 0.0, np.zeros(n), metric)


def embed_zero(A, a, metric) -> np.ndarray:
    n = np.asarray(A).shape[0]
    return compose_graded(np.zeros(n), A, a, np.zeros(n), metric)


def embed_plus(l, metric) -> np.ndarray:
    n = len(l)
    return compose_graded(np.zeros(n), np.zeros((n, n)), 0.0, l, metric)


def grade_projections(beta: np.ndarray, metric: np.ndarray):
    """Split beta into its (g_-1, g_0, g_1) components as full matrices."""
    m, A, a, l = decompose_graded(beta, metric, validate=False)
    return embed_minus(m, metric), embed_zero(A, a, metric), embed_plus(l, metric)


@dataclass(frozen=True)
class GradedMatrix:
    """An element of so(r+1, s+1) together with the metric defining its grading."""

    entries: np.ndarray
    metric: np.ndarray

    def __post_init__(self):
        check_skew(np.asarray(self.entries, dtype=float), self.metric)

    @classmethod
    def from_parts(cls, m, A, a, l, metric) -> "GradedMatrix":
        return cls(compose_graded(m, A, a, l, metric), np.asarray(metric, dtype=float))

    @property
    def parts(self) -> GradedParts:
        return decompose_graded(self.entries, self.metric, validate=False)

    @property
    def m(self):
        return self.parts.m

    @property
    def A(self):
        return self.parts.A

    @property
    def a(self):
        return self.parts.a

    @property
    def l(self):
        return self.parts.l


def bracket(beta1: np.ndarray, beta2: np.ndarray) -> np.ndarray:
    return beta1 @ beta2 - beta2 @ beta1


def so_basis(metric: np.ndarray) -> np.ndarray:
    """Basis of so(G) as an array (k, n, n), k = n(n-1)/2: elements G^{-1}(E_ij - E_ji)."""
    G = np.asarray(metric, dtype=float)
    n = G.shape[0]
    Ginv = np.linalg.inv(G)
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            S = np.zeros((n, n))
            S[i, j], S[j, i] = 1.0, -1.0
            out.append(Ginv @ S)
    return np.array(out)


def algebra_coordinates(beta: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Coordinates of beta in so(tractor_form(G)): upper triangle of J beta."""
    S = tractor_form(metric) @ beta
    iu = np.triu_indices(S.shape[0], 1)
    return S[iu]


def random_algebra_element(rng: np.random.Generator, metric: np.ndarray) -> np.ndarray:
    """Uniform [-1, 1] entries, then projected to be skew w.r.t. the tractor form."""
    N = np.asarray(metric).shape[0] + 2
    J = tractor_form(metric)
    M = rng.uniform(-1.0, 1.0, size=(N, N))
    # beta = J^{-1} S with S antisymmetric
    S = J @ M
    S = 0.5 * (S - S.T)
    return np.linalg.solve(J, S)


# ---------------------------------------------------------------------------
# chains on g_-1 with values in g


@dataclass(frozen=True)
class OneChain:
    """Linear map g_-1 -> g stored on the standard basis: values[i] = phi(xi_i)."""

    values: np.ndarray
    metric: np.ndarray

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.tensordot(X, self.values, axes=(0, 0))


@dataclass(frozen=True)
class TwoChain:
    """Antisymmetric bilinear map on g_-1: values[i, j] = psi(xi_i, xi_j)."""

    values: np.ndarray
    metric: np.ndarray

    def __post_init__(self):
        v = self.values
        if np.abs(v + v.transpose(1, 0, 2, 3)).max(initial=0.0) > 1e-12 * max(1.0, np.abs(v).max(initial=0.0)):
            raise ValueError("two-chain values must be antisymmetric")

    def __call__(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.einsum("i,j,ijab->ab", X, Y, self.values)

    @classmethod
    def from_upper(cls, upper: dict, n: int, metric) -> "TwoChain":
        N = n + 2
        vals = np.zeros((n, n, N, N))
        for (i, j), v in upper.items():
            vals[i, j] = v
            vals[j, i] = -v
        return cls(vals, np.asarray(metric, dtype=float))


@dataclass(frozen=True)
class ThreeChain:
    values: np.ndarray
    metric: np.ndarray = field(repr=False)


def _minus_basis(metric, basis=None):
    G = np.asarray(metric, dtype=float)
    n = G.shape[0]
    B = np.eye(n) if basis is None else np.asarray(basis, dtype=float)
    return [embed_minus(B[:, i], G) for i in range(n)], B


def lie_differential(phi: OneChain) -> TwoChain:
    G = phi.metric
    xs, _ = _minus_basis(G)
    n = len(xs)
    N = n + 2
    vals = np.zeros((n, n, N, N))
    for i in range(n):
        for j in range(i + 1, n):
            v = bracket(xs[i], phi.values[j]) - bracket(xs[j], phi.values[i])
            vals[i, j] = v
            vals[j, i] = -v
    return TwoChain(vals, G)


def dual_plus_basis(metric, basis=None) -> list[np.ndarray]:
    """Elements eta_i of g_1 with tr(xi_i eta_j) = delta_ij for xi_i = basis columns in g_-1."""
    G = np.asarray(metric, dtype=float)
    n = G.shape[0]
    B = np.eye(n) if basis is None else np.asarray(basis, dtype=float)
    # tr(embed_minus(m) embed_plus(l)) = 2 l(m)
    L = 0.5 * np.linalg.inv(B)
    return [embed_plus(L[i], G) for i in range(n)]


def lie_codifferential(psi: TwoChain, basis=None) -> OneChain:
    """X -> sum_i [eta_i, psi(xi_i, X)], evaluated on the standard basis of g_-1."""
    G = psi.metric
    n = G.shape[0]
    B = np.eye(n) if basis is None else np.asarray(basis, dtype=float)
    etas = dual_plus_basis(G, B)
    out = np.zeros((n,) + psi.values.shape[2:])
    for k in range(n):
        acc = np.zeros(psi.values.shape[2:])
        for i in range(n):
            # psi(xi_i, e_k) by linearity in the first slot
            val = np.tensordot(B[:, i], psi.values[:, k], axes=(0, 0))
            acc += bracket(etas[i], val)
        out[k] = acc
    return OneChain(out, G)


def two_chain_differential(psi: TwoChain) -> ThreeChain:
    """(X, Y, Z) -> -sum_cycl [psi(X, Y), Z] on the standard basis."""
    G = psi.metric
    xs, _ = _minus_basis(G)
    n = len(xs)
    N = n + 2
    vals = np.zeros((n, n, n, N, N))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                vals[i, j, k] = -(bracket(psi.values[i, j], xs[k])
                                  + bracket(psi.values[j, k], xs[i])
                                  + bracket(psi.values[k, i], xs[j]))
    return ThreeChain(vals, G)


def chain_parts(psi: TwoChain):
    """Graded parts of each value: torsion (n,n,n), so-part (n,n,n,n), centre (n,n), g_1 part (n,n,n)."""
    v = psi.values
    return v[:, :, 1:-1, 0], v[:, :, 1:-1, 1:-1], v[:, :, -1, -1], v[:, :, 0, 1:-1]


def trace_contraction(psi: TwoChain) -> np.ndarray:
    """(X, Z) -> sum_i eta_i(phi(xi_i, X) Z) for the g_0 part phi = A + a id."""
    _, A, a, _ = chain_parts(psi)
    n = A.shape[0]
    phi = A + a[:, :, None, None] * np.eye(n)
    # standard basis: eta_i(w) = w_i / 2 under the trace-form duality
    return 0.5 * np.einsum("ixiz->xz", phi)


class NormalizationResidual(NamedTuple):
    codiff_norm: float
    torsion_norm: float
    trace_norm: float


def normalization_residual(psi: TwoChain) -> NormalizationResidual:
    codiff = lie_codifferential(psi)
    torsion, _, _, _ = chain_parts(psi)
    return NormalizationResidual(float(np.linalg.norm(codiff.values)),
                                 float(np.linalg.norm(torsion)),
                                 float(np.linalg.norm(trace_contraction(psi))))


def project_normal(psi: TwoChain) -> TwoChain:
    """Drop the torsion part and project the g_0 part onto the trace-free subspace."""
    G = psi.metric
    n = G.shape[0]
    so = so_basis(G)
    k = len(so)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    # parameters per pair: so-coefficients (k) and centre (1)
    ncols = len(pairs) * (k + 1)
    cols = []
    for p_idx, (i, j) in enumerate(pairs):
        for c in range(k + 1):
            A = so[c] if c < k else np.zeros((n, n))
            a = 0.0 if c < k else 1.0
            unit = TwoChain.from_upper({(i, j): embed_zero(A, a, G)}, n, G)
            cols.append(trace_contraction(unit).ravel())
    C = np.array(cols).T
    assert C.shape[1] == ncols
    # current g_0 parameters
    coords = []
    Ginv_so = np.array([(G @ b)[np.triu_indices(n, 1)] for b in so])
    for (i, j) in pairs:
        A = psi.values[i, j, 1:-1, 1:-1]
        a = psi.values[i, j, -1, -1]
        # A = G^{-1} S with S antisymmetric; coefficients are the upper triangle of G A
        coef = np.linalg.solve(Ginv_so.T, (G @ A)[np.triu_indices(n, 1)])
        coords.extend(list(coef) + [a])
    coords = np.array(coords)
    coords = coords - np.linalg.pinv(C) @ (C @ coords)
    upper = {}
    for p_idx, (i, j) in enumerate(pairs):
        c = coords[p_idx * (k + 1):(p_idx + 1) * (k + 1)]
        A = np.tensordot(c[:k], so, axes=(0, 0))
        l = psi.values[i, j, 0, 1:-1]
        upper[(i, j)] = compose_graded(np.zeros(n), A, c[k], l, G)
    return TwoChain.from_upper(upper, n, G)


# ---------------------------------------------------------------------------
# complex structures


@dataclass
class ComplexStructureReport:
    is_complex_structure: bool
    square_residual: float
    eigenvector_residuals: tuple[float, float]
    lightlike_residuals: tuple[float, float]
    pairing_residual: float
    restriction_residual: float
    adapted_complement: np.ndarray
    failed_conditions: list[str]


def complex_structure_report(beta: np.ndarray, metric: np.ndarray,
                             tol: float = DEFAULT_TOL) -> ComplexStructureReport:
    """Check beta^2 = -id through the three block conditions on (m, v = -G^{-1} l^T, A, a).

    ``m`` is an ``a``-eigenvector of ``A`` and ``v`` a ``(-a)``-eigenvector, both
    lightlike, with g(m, v) = 1 + a^2, and A^2 = -id on span{m, v}^perp.
    """
    G = np.asarray(metric, dtype=float)
    n = G.shape[0]
    if (n + 2) % 2:
        raise ValueError("complex structures need n + 2 even")
    m, A, a, l = decompose_graded(beta, G, validate=False)
    v = -np.linalg.solve(G, l)
    eig = (float(np.linalg.norm(A @ m - a * m)), float(np.linalg.norm(A @ v + a * v)))
    light = (float(abs(m @ G @ m)), float(abs(v @ G @ v)))
    pairing = float(abs(m @ G @ v - (1.0 + a * a)))
    constraints = np.vstack([m @ G, v @ G])
    W = null_space(constraints)
    if W.shape[1] != n - 2:
        restriction = float("inf")
    else:
        restriction = float(np.linalg.norm((A @ A + np.eye(n)) @ W))
    sq = float(np.linalg.norm(beta @ beta + np.eye(n + 2)))
    failed = []
    if max(eig) > tol or max(light) > tol:
        failed.append("eigenvector condition: m, v lightlike eigenvectors of A for a, -a")
    if pairing > tol:
        failed.append("pairing condition: g(m, v) = 1 + a^2")
    if restriction > tol:
        failed.append("restriction condition: A^2 = -id on span{m, v}^perp")
    return ComplexStructureReport(
        is_complex_structure=not failed,
        square_residual=sq,
        eigenvector_residuals=eig,
        lightlike_residuals=light,
        pairing_residual=pairing,
        restriction_residual=restriction,
        adapted_complement=W,
        failed_conditions=failed,
    )


def su_residuals(J: np.ndarray, A: np.ndarray) -> tuple[float, float]:
    """(||JA - AJ||, tr(J A)); A lies in su relative to J iff both vanish.

    For A commuting with J the curvature of the canonical complex line
    bundle evaluates to (i/2) tr(J A).
    """
    return float(np.linalg.norm(J @ A - A @ J)), float(np.trace(J @ A))


def parabolic_embed(beta: np.ndarray, alpha: float, x: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Image of (beta, alpha, x) in P inside O(tractor_form(G))."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    G = np.asarray(metric, dtype=float)
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    n = G.shape[0]
    if np.abs(beta.T @ G @ beta - G).max() > 1e-10:
        raise ValueError("beta must be orthogonal w.r.t. the metric")
    Ginv_x = np.linalg.solve(G, x)
    M = np.zeros((n + 2, n + 2))
    M[0, 0] = 1.0 / alpha
    M[0, 1:-1] = x
    M[0, -1] = -0.5 * alpha * x @ Ginv_x
    M[1:-1, 1:-1] = beta
    M[1:-1, -1] = -alpha * beta @ Ginv_x
    M[-1, -1] = alpha
    return M


def orthonormal_frame(metric: np.ndarray) -> np.ndarray:
    """P with P^T G P = diag(-I_r, I_s), negative directions first."""
    G = np.asarray(metric, dtype=float)
    w, U = np.linalg.eigh(G)
    order = np.argsort(w)
    return U[:, order] / np.sqrt(np.abs(w[order]))


def complex_structure_from_conditions(m, v, a: float, I_perp, metric) -> np.ndarray:
    """beta built from lightlike m, v with g(m, v) = 1 + a^2 and a complex structure on span{m, v}^perp.

    ``I_perp`` is an n x n g-skew map with I^2 = -id on the complement and zero on span{m, v}.
    """
    G = np.asarray(metric, dtype=float)
    m = np.asarray(m, float)
    v = np.asarray(v, float)
    gmv = m @ G @ v
    A = a * (np.outer(m, G @ v) - np.outer(v, G @ m)) / gmv + np.asarray(I_perp, float)
    return compose_graded(m, A, a, -(G @ v), G)


def _canonical_conditions(metric, a, rng=None):
    G = np.asarray(metric, dtype=float)
    n = len(G)
    r = int(np.sum(np.linalg.eigvalsh(G) < 0))
    s = n - r
    if r < 1 or s < 1 or (r - 1) % 2 or (s - 1) % 2:
        raise ValueError(f"complex tractor structures need signature (2p-1, 2q-1), got ({r}, {s})")
    E = np.eye(n)
    m0 = (E[0] + E[r]) / np.sqrt(2)
    v0 = (1 + a * a) * (-E[0] + E[r]) / np.sqrt(2)
    I0 = np.zeros((n, n))
    rest = [i for i in range(n) if i not in (0, r)]
    for i, j in zip(rest[0::2], rest[1::2]):
        I0[j, i], I0[i, j] = 1.0, -1.0
    P = orthonormal_frame(G)
    if rng is not None:
        # random element of the identity component of O(G)
        S = random_algebra_element(rng, G)[1:-1, 1:-1]
        from scipy.linalg import expm
        R = expm(0.5 * S) @ P
    else:
        R = P
    return R @ m0, R @ v0, R @ I0 @ np.linalg.inv(R)


def standard_complex_structure(metric) -> np.ndarray:
    """A fixed complex structure in so(tractor_form(G)) with a = 0."""
    m, v, I = _canonical_conditions(metric, 0.0)
    return complex_structure_from_conditions(m, v, 0.0, I, metric)


def random_complex_structure(rng: np.random.Generator, metric, a: float | None = None) -> np.ndarray:
    """Complex structure from randomly placed block data (m, v, a, I_perp)."""
    a = float(rng.uniform(-2, 2)) if a is None else a
    m, v, I = _canonical_conditions(metric, a, rng)
    return complex_structure_from_conditions(m, v, a, I, metric)
