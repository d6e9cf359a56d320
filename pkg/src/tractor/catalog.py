"""Built-in metric charts with analytic 2-jets, distinguished vector fields and expected results.

Entries
-------
flat(r, s)
    Constant diag(-I_r, I_s).  Ships the full conformal Killing algebra.
sphere_round
    Stereographic round S^4, g = 4 |dx|^2 / (1 + |x|^2)^2 on [-1, 1]^4.
conformally_flat(r, s, amp)
    exp(2 phi) times the flat metric for an analytic phi.
perturbed_flat(eps, seed, r, s, modes)
    eta + eps * sum_m H_m sin(k_m . x) with seeded symmetric H_m and wave vectors k_m.
heisenberg_fefferman
    Coordinates (x, y, u, gamma), theta = du + x dy - y dx,
    g = dx^2 + dy^2 + c (theta dgamma + dgamma theta).  The constant c is fixed so
    that Ric(d_gamma, d_gamma) = n - 2.
berger_fefferman(lam)
    Fefferman metric of the left-invariant pseudo-Hermitian structure
    theta = -e^3, theta^1 = lam^{1/2} e^1 + i lam^{-1/2} e^2 on SU(2), with
    Tanaka-Webster connection form -i (lam + 1/lam) theta and Webster curvature
    R = lam + 1/lam.  In the coframe (e^1, e^2, e^3, dgamma):
    g = lam (e^1)^2 + (e^2)^2 / lam + kappa (e^3)^2 - (2/3) e^3 dgamma,
    kappa = (lam + 1/lam) / 2.  The coordinates are the product chart
    exp(x1 E1) exp(x2 E2) exp(x3 E3) with E_k = -i sigma_k.

Both Fefferman entries are accepted only if their Sparling certificate passes on the
default grid at construction time; the formulas above are never trusted on their own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .chart_geometry import (Chart, MetricJet, ScalarField, VectorFieldSpec, conformal_rescale,
                             point_curvature, signature_of)
from .mobius_algebra import flat_metric


class CatalogError(ValueError):
    pass


class SparlingGateError(RuntimeError):
    def __init__(self, name, certificate):
        super().__init__(f"{name}: Sparling gate failed on {certificate.failed_conditions}")
        self.certificate = certificate


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    params: dict
    chart: Chart
    distinguished_fields: dict
    reference: dict
    certificate: Optional[object] = None
    notes: str = ""

    def field(self, name: str) -> VectorFieldSpec:
        try:
            return self.distinguished_fields[name]
        except KeyError:
            raise CatalogError(f"entry {self.name} has no field {name!r}; "
                               f"valid fields: {sorted(self.distinguished_fields)}") from None

    def default_grid(self, counts=2, margin_frac: float = 0.1) -> np.ndarray:
        lo, hi = self.chart.domain
        return self.chart.grid(counts, float(margin_frac * np.min(hi - lo)))

    @property
    def base_point(self) -> np.ndarray:
        lo, hi = self.chart.domain
        return 0.5 * (lo + hi) + 0.05 * (hi - lo) * np.linspace(0.3, -0.2, len(lo))


# ---------------------------------------------------------------------------
# vector fields on flat space


def _const_field(v, name):
    v = np.asarray(v, float)
    n = len(v)
    return VectorFieldSpec(lambda x: v.copy(), lambda x: np.zeros((n, n)), lambda x: np.zeros((n, n, n)), name)


def _linear_field(M, name):
    M = np.asarray(M, float)
    n = len(M)
    return VectorFieldSpec(lambda x: M @ x, lambda x: M.copy(), lambda x: np.zeros((n, n, n)), name)


def _special_conformal(c, G, name):
    """V_c = 2 g(x, c) x - g(x, x) c."""
    c = np.asarray(c, float)
    Gc = G @ c
    n = len(c)
    I = np.eye(n)

    def value(x):
        return 2 * (x @ Gc) * x - (x @ G @ x) * c

    def jac(x):
        return 2 * np.outer(x, Gc) + 2 * (x @ Gc) * I - 2 * np.outer(c, G @ x)

    def hess(x):
        return (2 * np.einsum("j,ik->ijk", Gc, I) + 2 * np.einsum("k,ij->ijk", Gc, I)
                - 2 * np.einsum("i,jk->ijk", c, G))

    return VectorFieldSpec(value, jac, hess, name)


def flat_conformal_killing(G) -> dict:
    """The (n+1)(n+2)/2 generators: translations, g-rotations, dilation, special conformal."""
    G = np.asarray(G, float)
    n = len(G)
    Ginv = np.linalg.inv(G)
    out = {}
    for i in range(n):
        out[f"T{i}"] = _const_field(np.eye(n)[i], f"T{i}")
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j], E[j, i] = 1.0, -1.0
            out[f"R{i}{j}"] = _linear_field(Ginv @ E, f"R{i}{j}")
    out["D"] = _linear_field(np.eye(n), "D")
    for i in range(n):
        out[f"K{i}"] = _special_conformal(np.eye(n)[i], G, f"K{i}")
    return out


# ---------------------------------------------------------------------------
# scalar rescalings


def _wave_phi(n, amp):
    k = np.array([0.7, 1.1, -0.4, 0.9, 0.5, -0.8])[:n]
    w = np.array([0.3, -0.5, 0.8, 0.2, -0.4, 0.6])[:n]
    return ScalarField(
        lambda x: amp * (np.sin(k @ x) + 0.5 * (w @ x) ** 2),
        lambda x: amp * (np.cos(k @ x) * k + (w @ x) * w),
        lambda x: amp * (-np.sin(k @ x) * np.outer(k, k) + np.outer(w, w)),
        name="wave")


def _bump_phi(n, amp):
    def val(x):
        return amp * np.exp(-0.5 * x @ x)

    return ScalarField(val, lambda x: -val(x) * x,
                       lambda x: val(x) * (np.outer(x, x) - np.eye(n)), name="bump")


def catalog_rescalings(n: int = 4) -> list[ScalarField]:
    """Conformal factors phi (metric exp(2 phi) g) used for invariance checks."""
    return [_wave_phi(n, 0.3), _bump_phi(n, 0.4)]


# ---------------------------------------------------------------------------
# entries


def _constant_jet(G):
    n = len(G)
    z1, z2 = np.zeros((n, n, n)), np.zeros((n, n, n, n))
    return lambda x: MetricJet(G.copy(), z1, z2)


def _flat(r=1, s=3) -> CatalogEntry:
    r, s = int(r), int(s)
    G = flat_metric(r, s)
    n = r + s
    ch = Chart(lambda x: G.copy(), (r, s), (-np.ones(n), np.ones(n)), jet=_constant_jet(G), name="flat")
    fields = flat_conformal_killing(G)
    if r >= 1 and s >= 1:
        v = np.zeros(n)
        v[0] = v[r] = 1.0
        fields["j"] = _const_field(v, "j")
    return CatalogEntry("flat", {"r": r, "s": s}, ch, fields, {
        "signature": (r, s), "rank": 0, "class": "flat", "conformally_flat": True,
        "provenance": "constant metric: Christoffels and curvature vanish"})


def _euclid_chart(n):
    G = np.eye(n)
    return Chart(lambda x: G.copy(), (0, n), (-np.ones(n), np.ones(n)), jet=_constant_jet(G), name="euclid")


def _sphere_round() -> CatalogEntry:
    n = 4
    phi = ScalarField(
        lambda x: np.log(2.0) - np.log1p(x @ x),
        lambda x: -2 * x / (1 + x @ x),
        lambda x: -2 * np.eye(n) / (1 + x @ x) + 4 * np.outer(x, x) / (1 + x @ x) ** 2,
        name="stereo")
    ch = conformal_rescale(_euclid_chart(n), phi)
    from dataclasses import replace
    ch = replace(ch, name="sphere_round")
    return CatalogEntry("sphere_round", {}, ch, flat_conformal_killing(np.eye(n)), {
        "signature": (0, 4), "rank": 0, "class": "flat", "conformally_flat": True,
        "scal": 12.0, "ricci_over_g": 3.0, "schouten_over_g": -0.5,
        "provenance": "unit round sphere: Ric = 3 g, scal = 12, Schouten K = -g/2; conformally flat"})


def _conformally_flat(r=1, s=3, amp=0.3) -> CatalogEntry:
    r, s = int(r), int(s)
    base = _flat(r, s)
    from dataclasses import replace
    ch = replace(conformal_rescale(base.chart, _wave_phi(r + s, float(amp))), name="conformally_flat")
    fields = {k: v for k, v in base.distinguished_fields.items() if k != "j"}
    return CatalogEntry("conformally_flat", {"r": r, "s": s, "amp": float(amp)}, ch, fields, {
        "signature": (r, s), "rank": 0, "class": "flat", "conformally_flat": True,
        "provenance": "Weyl and tractor curvature are conformally invariant and vanish for the flat metric"})


def _perturbed_flat(eps=0.01, seed=7, r=1, s=3, modes=3) -> CatalogEntry:
    r, s, modes, seed, eps = int(r), int(s), int(modes), int(seed), float(eps)
    n = r + s
    G = flat_metric(r, s)
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(modes, n, n))
    H = H + H.transpose(0, 2, 1)
    H /= np.abs(H).max(axis=(1, 2), keepdims=True)
    K = 1.5 * rng.normal(size=(modes, n))

    def jet(x):
        ph = K @ x
        sn, cs = np.sin(ph), np.cos(ph)
        g = G + eps * np.einsum("m,mij->ij", sn, H)
        dg = eps * np.einsum("m,mk,mij->kij", cs, K, H)
        ddg = -eps * np.einsum("m,mk,ml,mij->klij", sn, K, K, H)
        return MetricJet(g, dg, ddg)

    ch = Chart(lambda x: jet(x).g, (r, s), (-np.ones(n), np.ones(n)), jet=jet, name="perturbed_flat")
    return CatalogEntry("perturbed_flat", {"eps": eps, "seed": seed, "r": r, "s": s, "modes": modes}, ch, {}, {
        "signature": (r, s), "rank_min": 1, "class": "generic", "conformally_flat": False,
        "provenance": "generic small perturbation: Weyl nonzero, no Killing candidate"})


def _heisenberg_chart(c):
    E = np.eye(4)
    S01 = np.outer(E[1], E[3]) + np.outer(E[3], E[1])
    S00 = np.outer(E[0], E[3]) + np.outer(E[3], E[0])
    dg = np.zeros((4, 4, 4))
    dg[0] = c * S01
    dg[1] = -c * S00
    ddg = np.zeros((4, 4, 4, 4))

    def jet(x):
        th = np.array([-x[1], x[0], 1.0, 0.0])
        g = np.diag([1.0, 1.0, 0.0, 0.0]) + c * (np.outer(th, E[3]) + np.outer(E[3], th))
        return MetricJet(g, dg, ddg)

    return Chart(lambda x: jet(x).g, (1, 3), (-np.ones(4), np.ones(4)), jet=jet,
                 name="heisenberg_fefferman", coordinates=("x", "y", "u", "gamma"))


def _vertical():
    return _const_field([0.0, 0.0, 0.0, 1.0], "j")


def _heisenberg_fefferman() -> CatalogEntry:
    j = _vertical()
    x0 = np.zeros(4)
    v = j.value(x0)
    ric1 = float(v @ point_curvature(_heisenberg_chart(1.0), x0).ricci @ v)
    # Ric(d_gamma, d_gamma) scales like c^2
    c = float(np.sqrt(2.0 / ric1))
    ch = _heisenberg_chart(c)
    return CatalogEntry("heisenberg_fefferman", {}, ch, {"j": j}, {
        "signature": (1, 3), "rank": 0, "class": "flat", "u_compatible": True, "su_compatible": True,
        "conformally_flat": True, "scale": c,
        "provenance": "Fefferman space of the flat Heisenberg CR structure; conformally flat, "
                      "so trivially su-compatible with rank 0"}, notes=f"scale constant c = {c:.12g}")


_EPS3 = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS3[_a, _b, _c], _EPS3[_a, _c, _b] = 1.0, -1.0
# ad(E_k) in the basis E_1..E_3: [E_k, E_j] = 2 eps_kjl E_l
_AD = [2 * _EPS3[k].T for k in range(3)]


def _berger_chart(lam, kappa=None):
    # kappa is the coefficient fixed by the Sparling gate; override only for scans
    kappa = 0.5 * (lam + 1.0 / lam) if kappa is None else kappa
    Q = np.zeros((4, 4))
    Q[0, 0], Q[1, 1], Q[2, 2] = lam, 1.0 / lam, kappa
    Q[2, 3] = Q[3, 2] = -1.0 / 3.0
    A2, A3 = _AD[1], _AD[2]
    e = np.eye(3)

    def jet(x):
        R3, R2 = expm(-x[2] * A3), expm(-x[1] * A2)
        F = np.eye(4)
        dF = np.zeros((4, 4, 4))
        ddF = np.zeros((4, 4, 4, 4))
        F[:3, 0], F[:3, 1], F[:3, 2] = R3 @ R2 @ e[0], R3 @ e[1], e[2]
        dF[2, :3, 0] = -A3 @ R3 @ R2 @ e[0]
        dF[1, :3, 0] = -R3 @ A2 @ R2 @ e[0]
        dF[2, :3, 1] = -A3 @ R3 @ e[1]
        ddF[2, 2, :3, 0] = A3 @ A3 @ R3 @ R2 @ e[0]
        ddF[1, 1, :3, 0] = R3 @ A2 @ A2 @ R2 @ e[0]
        ddF[1, 2, :3, 0] = ddF[2, 1, :3, 0] = A3 @ R3 @ A2 @ R2 @ e[0]
        ddF[2, 2, :3, 1] = A3 @ A3 @ R3 @ e[1]
        QF = Q @ F
        g = F.T @ QF
        dg = np.einsum("kai,aj->kij", dF, QF)
        dg = dg + dg.transpose(0, 2, 1)
        ddg = (np.einsum("klai,aj->klij", ddF, QF)
               + np.einsum("kai,ab,lbj->klij", dF, Q, dF))
        ddg = ddg + ddg.transpose(0, 1, 3, 2)
        return MetricJet(g, dg, ddg)

    lo = np.array([-0.5, -0.5, -0.5, -1.0])
    return Chart(lambda x: jet(x).g, (1, 3), (lo, -lo), jet=jet, name="berger_fefferman",
                 coordinates=("x1", "x2", "x3", "gamma"))


def _berger_fefferman(lam=1.2) -> CatalogEntry:
    lam = float(lam)
    if not lam > 0:
        raise CatalogError("berger_fefferman needs lam > 0")
    flat_case = abs(lam - 1.0) < 1e-12
    ref = {"signature": (1, 3), "u_compatible": True, "su_compatible": True,
           "conformally_flat": flat_case,
           "provenance": "Fefferman space of a left-invariant CR structure on S^3; "
                         "lam = 1 is the CR sphere (conformally flat)"}
    ref.update({"rank": 0, "class": "flat"} if flat_case else {"rank_min": 1, "class": "su(p,q)-compatible"})
    return CatalogEntry("berger_fefferman", {"lam": lam}, _berger_chart(lam), {"j": _vertical()}, ref)


_BUILDERS = {
    "flat": (_flat, {"r": 1, "s": 3}),
    "sphere_round": (_sphere_round, {}),
    "conformally_flat": (_conformally_flat, {"r": 1, "s": 3, "amp": 0.3}),
    "perturbed_flat": (_perturbed_flat, {"eps": 0.01, "seed": 7, "r": 1, "s": 3, "modes": 3}),
    "heisenberg_fefferman": (_heisenberg_fefferman, {}),
    "berger_fefferman": (_berger_fefferman, {"lam": 1.2}),
}
FEFFERMAN = ("heisenberg_fefferman", "berger_fefferman")
NAMES = tuple(_BUILDERS)


def validate_signature(entry: CatalogEntry, counts: int = 4) -> int:
    """Check invertibility and declared signature on a counts^n grid; returns points checked."""
    ch = entry.chart
    pts = entry.default_grid(counts, 0.0)
    for p in pts:
        g = np.asarray(ch.metric(p), float)
        if np.linalg.cond(g) > ch.max_condition or signature_of(g) != tuple(ch.signature):
            raise CatalogError(f"{entry.name}: metric degenerate or of wrong signature at {p.tolist()}")
    return len(pts)


def _freeze(params: dict) -> tuple:
    return tuple(sorted(params.items()))


def get_chart(name: str, params: Optional[dict] = None) -> CatalogEntry:
    if name not in _BUILDERS:
        raise CatalogError(f"unknown catalog entry {name!r}; valid names: {', '.join(NAMES)}")
    builder, defaults = _BUILDERS[name]
    params = dict(params or {})
    bad = sorted(set(params) - set(defaults))
    if bad:
        raise CatalogError(f"{name}: unknown parameter(s) {bad}; valid parameters: {sorted(defaults)}")
    merged = {**defaults, **params}
    return _build(name, _freeze(merged))


@lru_cache(maxsize=32)
def _build(name, frozen) -> CatalogEntry:
    builder, _ = _BUILDERS[name]
    entry = builder(**dict(frozen))
    validate_signature(entry)
    if name in FEFFERMAN:
        from dataclasses import replace
        from .killing_analysis import sparling_report
        cert = sparling_report(entry.chart, entry.field("j"), entry.default_grid(2))
        if not cert.passed:
            raise SparlingGateError(name, cert)
        entry = replace(entry, certificate=cert)
    return entry


def reference_data(name: str, params: Optional[dict] = None) -> dict:
    return dict(get_chart(name, params).reference)
