"""Acceptance criteria 1 to 10.  Each test prints one PASS/FAIL line via ``record_criterion``."""

import subprocess
import sys
import time

import numpy as np
from scipy.linalg import expm, null_space

from conftest import record_criterion
from tractor.catalog import NAMES, catalog_rescalings
from tractor.chart_geometry import conformal_rescale, curvature_suite, point_curvature
from tractor.cli import GridSpec, RunConfig, run_task, serialize_report
from tractor.killing_analysis import lemma_residuals, normalized_complex_structure, sparling_report
from tractor.mobius_algebra import (TwoChain, bracket, chain_parts, complex_structure_report, embed_minus,
                                    embed_plus, embed_zero, flat_metric, lie_codifferential,
                                    normalization_residual, project_normal, random_algebra_element,
                                    random_complex_structure, standard_complex_structure, trace_contraction)
from tractor.tractor_bundle import (HolonomyStrategy, assembled_curvature_matrices, classify_holonomy,
                                    commutator_curvature_matrices, holonomy_algebra_estimate)

G13 = flat_metric(1, 3)


def _two_chain(rng, G):
    n = len(G)
    vals = np.zeros((n, n, n + 2, n + 2))
    for i in range(n):
        for j in range(i + 1, n):
            vals[i, j] = random_algebra_element(rng, G)
            vals[j, i] = -vals[i, j]
    return TwoChain(vals, G)


def _codiff_kernel(G):
    """Null space of the codifferential on Lambda^2 g_-1^* (x) g, via its matrix on a basis."""
    n, N = len(G), len(G) + 2
    Jt = np.block([[np.zeros((1, 1)), np.zeros((1, n)), np.ones((1, 1))],
                   [np.zeros((n, 1)), G, np.zeros((n, 1))],
                   [np.ones((1, 1)), np.zeros((1, n)), np.zeros((1, 1))]])
    alg = []
    for a in range(N):
        for b in range(a + 1, N):
            S = np.zeros((N, N))
            S[a, b], S[b, a] = 1.0, -1.0
            alg.append(np.linalg.solve(Jt, S))
    basis = []
    for i in range(n):
        for j in range(i + 1, n):
            for X in alg:
                v = np.zeros((n, n, N, N))
                v[i, j], v[j, i] = X, -X
                basis.append(v)
    basis = np.array(basis)
    M = np.array([lie_codifferential(TwoChain(v, G)).values.ravel() for v in basis]).T
    K = null_space(M)
    return basis, K


def test_criterion_01_algebra_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    exact = True
    for _ in range(100):
        m = rng.integers(-4, 5, size=4).astype(float)
        l = rng.integers(-4, 5, size=4).astype(float)
        S = rng.integers(-3, 4, size=(4, 4)).astype(float)
        A = np.linalg.inv(G13) @ (S - S.T)
        a = float(rng.integers(-3, 4))
        ml = np.outer(m, l)
        exact &= np.array_equal(bracket(embed_zero(A, a, G13), embed_minus(m, G13)), embed_minus(A @ m + a * m, G13))
        exact &= np.array_equal(bracket(embed_plus(l, G13), embed_zero(A, a, G13)), embed_plus(l @ A + a * l, G13))
        exact &= np.array_equal(bracket(embed_minus(m, G13), embed_plus(l, G13)),
                                embed_zero(ml - G13 @ ml.T @ G13, l @ m, G13))
        exact &= not bracket(embed_minus(m, G13), embed_minus(l, G13)).any()
        exact &= not bracket(embed_plus(m, G13), embed_plus(l, G13)).any()

    basis_dev = 0.0
    norm_dev = 0.0
    generic_ok = True
    for _ in range(100):
        psi = _two_chain(rng, G13)
        ref = lie_codifferential(psi).values
        B = rng.normal(size=(4, 4))
        basis_dev = max(basis_dev, float(np.abs(lie_codifferential(psi, B).values - ref).max()))
        r = normalization_residual(project_normal(psi))
        norm_dev = max(norm_dev, r.codiff_norm, r.torsion_norm, r.trace_norm)
        rg = normalization_residual(psi)
        generic_ok &= rg.codiff_norm > 1e-3 and (rg.torsion_norm > 1e-3 or rg.trace_norm > 1e-3)

    # the converse direction: random kernel elements of the codifferential have no torsion and no trace
    basis, K = _codiff_kernel(G13)
    for _ in range(100):
        v = np.tensordot(K @ rng.normal(size=K.shape[1]), basis, axes=(0, 0))
        psi = TwoChain(v, G13)
        tor = np.linalg.norm(chain_parts(psi)[0])
        tr = np.linalg.norm(trace_contraction(psi))
        norm_dev = max(norm_dev, tor, tr)
    elapsed = time.perf_counter() - t0
    ok = exact and basis_dev <= 1e-12 and norm_dev <= 1e-10 and generic_ok and elapsed <= 5
    record_criterion(1, ok, f"table exact={exact}, basis dev {basis_dev:.1e}, normalization dev {norm_dev:.1e}, "
                            f"kernel dim {K.shape[1]}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_lemma1_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    sq = 0.0
    for _ in range(100):
        beta = random_complex_structure(rng, G13)
        sq = max(sq, float(np.abs(beta @ beta + np.eye(6)).max()))
    J0 = standard_complex_structure(G13)
    cond = 0.0
    recovered = True
    for _ in range(100):
        g = expm(0.4 * random_algebra_element(rng, G13))
        J = g @ J0 @ np.linalg.inv(g)
        rep = complex_structure_report(J, G13, 1e-8)
        recovered &= rep.is_complex_structure
        cond = max(cond, *rep.eigenvector_residuals, *rep.lightlike_residuals, rep.pairing_residual,
                   rep.restriction_residual)
    elapsed = time.perf_counter() - t0
    ok = sq <= 1e-10 and recovered and cond <= 1e-8 and elapsed <= 5
    record_criterion(2, ok, f"max |beta^2 + id| {sq:.1e}, max condition residual {cond:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_03_curvature_gate(flat, sphere, perturbed):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_rel = 0.0
    small = 0.0
    literal = 0.0
    for entry in (flat, sphere, perturbed):
        lo, hi = entry.chart.domain
        for x in rng.uniform(0.8 * lo, 0.8 * hi, size=(20, 4)):
            A = assembled_curvature_matrices(entry.chart, x)
            C = commutator_curvature_matrices(entry.chart, x)
            if entry is perturbed:
                worst_rel = max(worst_rel, np.linalg.norm(A - C) / np.linalg.norm(C))
                L = A.copy()
                L[:, :, 0, 1:-1] *= -1
                L[:, :, 1:-1, -1] *= -1
                literal = max(literal, np.linalg.norm(L - C) / np.linalg.norm(C))
            else:
                small = max(small, float(np.abs(A).max()), float(np.abs(C).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-3 and small <= 1e-5 and elapsed <= 60
    record_criterion(3, ok, f"eta=+C: max rel {worst_rel:.1e}; flat/sphere |Omega| {small:.1e}; "
                            f"literal eta=-C rel {literal:.2f} (sign flip, see conventions); {elapsed:.1f}s")
    assert ok


def test_criterion_04_normalization_numeric():
    worst = {}
    for name in NAMES:
        rep = run_task(RunConfig("normalization-check", name, grid=GridSpec.parse("2")))
        worst[name] = max(rep.summary["max_torsion"], rep.summary["max_trace"])
    ok = max(worst.values()) <= 1e-5
    record_criterion(4, ok, "max torsion/trace " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def _weyl_identity_residual(pc):
    W = pc.weyl04
    gi = pc.ginv
    res = [np.abs(W + W.transpose(1, 0, 2, 3)).max(), np.abs(W + W.transpose(0, 1, 3, 2)).max(),
           np.abs(W - W.transpose(2, 3, 0, 1)).max(),
           np.abs(W + W.transpose(1, 2, 0, 3) + W.transpose(2, 0, 1, 3)).max(),
           np.abs(W + W.transpose(0, 2, 3, 1) + W.transpose(0, 3, 1, 2)).max()]
    for a, b in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]:
        res.append(np.abs(_pair_trace(W, gi, a, b)).max())
    return float(max(res))


def _pair_trace(W, gi, a, b):
    idx = "ijkl"
    ia, ib = idx[a], idx[b]
    out = "".join(c for c in idx if c not in (ia, ib))
    return np.einsum(f"{ia}{ib},{idx}->{out}", gi, W)


def test_criterion_05_weyl_properties(perturbed, berger, heisenberg):
    ident = 0.0
    inv = 0.0
    rng = np.random.default_rng(5)
    for entry in (perturbed, berger, heisenberg):
        lo, hi = entry.chart.domain
        for x in rng.uniform(0.7 * lo, 0.7 * hi, size=(5, 4)):
            pc = point_curvature(entry.chart, x)
            ident = max(ident, _weyl_identity_residual(pc))
            for phi in catalog_rescalings(4):
                W1 = point_curvature(conformal_rescale(entry.chart, phi), x).weyl13
                inv = max(inv, float(np.abs(W1 - pc.weyl13).max()))
    x = berger.base_point
    C0 = curvature_suite(berger.chart, x).cotton
    C1 = curvature_suite(conformal_rescale(berger.chart, catalog_rescalings(4)[0]), x).cotton
    witness = float(np.abs(C1 - C0).max())
    ok = ident <= 1e-6 and inv <= 1e-5 and witness > 1e-3
    record_criterion(5, ok, f"identities {ident:.1e}, Weyl invariance {inv:.1e}, Cotton change {witness:.2e}")
    assert ok


def test_criterion_06_flat_killing_suite(flat):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    gens = {k: v for k, v in flat.distinguished_fields.items() if k != "j"}
    worst = 0.0
    for x in rng.uniform(-0.7, 0.7, size=(4, 4)):
        for V in gens.values():
            worst = max(worst, lemma_residuals(flat.chart, V, x).parallel_residual)
    elapsed = time.perf_counter() - t0
    ok = len(gens) == 15 and worst <= 1e-6 and elapsed <= 30
    record_criterion(6, ok, f"{len(gens)} generators, max parallel residual {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_07_sparling_heisenberg(heisenberg):
    t0 = time.perf_counter()
    cert = sparling_report(heisenberg.chart, heisenberg.field("j"), heisenberg.default_grid(3))
    elapsed = time.perf_counter() - t0
    res = max(cert.killing_residual, cert.lightlike_residual, cert.weyl_residual, cert.cotton_residual)
    dj = max(abs(v + 1) for v in cert.dj_values)
    ok = (cert.passed and res <= 1e-5 and abs(cert.ric_jj_normalized - 2) <= 1e-5 and dj <= 1e-5
          and elapsed <= 60)
    record_criterion(7, ok, f"residuals {res:.1e}, Ric(j,j) normalized {cert.ric_jj_normalized:.8f}, "
                            f"max |g(j,Dj)+1| {dj:.1e}, {len(cert.records)} points, {elapsed:.1f}s")
    assert ok


def test_criterion_08_berger_end_to_end(berger):
    t0 = time.perf_counter()
    ch, j = berger.chart, berger.field("j")
    gate = berger.certificate is not None and berger.certificate.passed
    sq = 0.0
    par = 0.0
    curv = 0.0
    for x in berger.default_grid(2)[::3]:
        J = normalized_complex_structure(ch, j, x)
        rep = complex_structure_report(J.matrix, J.metric, 1e-4)
        sq = max(sq, rep.square_residual if rep.is_complex_structure else np.inf)
        par = max(par, lemma_residuals(ch, j, x).parallel_residual)
        curv = max(curv, float(np.abs(assembled_curvature_matrices(ch, x)).max()))
    hol = holonomy_algebra_estimate(ch, berger.base_point, HolonomyStrategy())
    classify_holonomy(hol, candidate=(ch, j))
    comm, trace = hol.residuals["max_commutator"], hol.residuals["max_complex_trace"]
    elapsed = time.perf_counter() - t0
    ok = (gate and sq <= 1e-4 and par <= 1e-4 and curv > 1e-3 and comm <= 1e-4 and trace <= 1e-4
          and hol.su_compatible and elapsed <= 300)
    record_criterion(8, ok, f"gate passed={gate} (no fallback), |J^2+id| {sq:.1e}, parallel {par:.1e}, "
                            f"|Omega| {curv:.2f}, holonomy rank {hol.rank}, [A,J] {comm:.1e}, tr(JA) {trace:.1e}, "
                            f"class {hol.classification}, {elapsed:.1f}s")
    assert ok


def test_criterion_09_negative_control(perturbed, flat):
    t0 = time.perf_counter()
    hp = holonomy_algebra_estimate(perturbed.chart, perturbed.base_point, HolonomyStrategy())
    classify_holonomy(hp)
    hf = holonomy_algebra_estimate(flat.chart, flat.base_point, HolonomyStrategy())
    classify_holonomy(hf)
    elapsed = time.perf_counter() - t0
    ok = hp.rank >= 1 and hp.classification == "generic" and hf.rank == 0 and elapsed <= 120
    record_criterion(9, ok, f"perturbed rank {hp.rank} ({hp.classification}), flat rank {hf.rank}, {elapsed:.1f}s")
    assert ok


def test_criterion_10_determinism(tmp_path):
    cfg = RunConfig("holonomy-estimate", "perturbed_flat", grid=GridSpec.parse("1"), seed=11)
    same_inproc = serialize_report(run_task(cfg)) == serialize_report(run_task(cfg))
    outs, codes = [], []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        proc = subprocess.run([sys.executable, "-m", "tractor", "holonomy-estimate", "--metric", "berger_fefferman",
                               "--grid", "2", "--seed", "3", "--out", str(out)], capture_output=True)
        codes.append(proc.returncode)
        outs.append(out.read_bytes())
    ok = same_inproc and outs[0] == outs[1] and codes == [0, 0]
    record_criterion(10, ok, f"in-process identical={same_inproc}, CLI byte-identical={outs[0] == outs[1]}, "
                             f"exit codes {codes}")
    assert ok
