"""Command-line task runner.

    tractor <task> --metric <name> [--param k=v ...] --grid <spec> [--fd-step F]
            [--transport-steps N] [--seed S] [--field NAME] [--tol T] [--config FILE] --out <path>

Grid spec: ``COUNTS`` or ``COUNTS:LO:HI`` where COUNTS is one integer or a comma list
(one per axis) and LO, HI are comma lists giving the box.  Without a box the entry's
domain shrunk by 10% is used.  Points are ordered row-major.

A JSON config file may carry any of the flag names (dashes or underscores) plus
``params`` as an object; values from the file win over command-line flags.

Exit codes: 0 pass or report-only, 1 verdict fail, 2 configuration error,
3 numerical or IO failure (including NaN in a report).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .catalog import CatalogError, NAMES, SparlingGateError, get_chart
from .chart_geometry import DomainError, SingularMetricError, curvature_suite
from .conventions import CONVENTIONS_HASH
from .killing_analysis import lemma_residuals, normalized_complex_structure, sparling_report
from .mobius_algebra import standard_complex_structure, su_residuals
from .tractor_bundle import (CurvatureMismatchError, HolonomyStrategy, assembled_curvature_matrices,
                             classify_holonomy, commutator_curvature_matrices, holonomy_algebra_estimate)

SCHEMA_VERSION = 1
TASKS = ("curvature-report", "normalization-check", "holonomy-estimate", "sparling-check", "su-check",
         "lemma-residuals")
DEFAULT_TOL = {"curvature-report": 1e-3, "normalization-check": 1e-5, "holonomy-estimate": 1e-4,
               "sparling-check": 1e-5, "su-check": 1e-4, "lemma-residuals": 1e-4}

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

logger = logging.getLogger("tractor")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    counts: tuple
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None

    @classmethod
    def parse(cls, spec) -> "GridSpec":
        if isinstance(spec, dict):
            return cls(tuple(np.atleast_1d(spec["counts"]).tolist()),
                       tuple(spec["lo"]) if spec.get("lo") is not None else None,
                       tuple(spec["hi"]) if spec.get("hi") is not None else None)
        parts = str(spec).split(":")
        if len(parts) not in (1, 3):
            raise ConfigError(f"bad grid spec {spec!r}; expected COUNTS or COUNTS:LO:HI")
        try:
            counts = tuple(int(c) for c in parts[0].split(","))
            lo = hi = None
            if len(parts) == 3:
                lo = tuple(float(v) for v in parts[1].split(","))
                hi = tuple(float(v) for v in parts[2].split(","))
        except ValueError as exc:
            raise ConfigError(f"bad grid spec {spec!r}: {exc}") from None
        return cls(counts, lo, hi)

    def points(self, entry) -> np.ndarray:
        ch = entry.chart
        n = ch.dim
        counts = self.counts * n if len(self.counts) == 1 else self.counts
        if len(counts) != n or any(c < 1 for c in counts):
            raise ConfigError(f"grid needs {n} positive counts, got {list(self.counts)}")
        if self.lo is None:
            lo, hi = ch.domain
            margin = 0.1 * (hi - lo)
            lo, hi = lo + margin, hi - margin
        else:
            lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
            if lo.shape != (n,) or hi.shape != (n,) or np.any(hi < lo):
                raise ConfigError("grid box must give n lower and n upper bounds with lo <= hi")
        axes = [np.linspace(a, b, c) if c > 1 else np.array([(a + b) / 2]) for a, b, c in zip(lo, hi, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def echo(self) -> dict:
        return {"counts": list(self.counts), "lo": None if self.lo is None else list(self.lo),
                "hi": None if self.hi is None else list(self.hi)}


@dataclass
class RunConfig:
    task: str
    metric: str
    params: dict = field(default_factory=dict)
    grid: GridSpec = field(default_factory=lambda: GridSpec((2,)))
    fd_step: float = 1e-4
    transport_steps: int = 32
    seed: int = 0
    out: Optional[str] = None
    field: Optional[str] = None
    tol: Optional[float] = None

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; valid tasks: {', '.join(TASKS)}")
        if self.metric not in NAMES:
            raise ConfigError(f"unknown metric {self.metric!r}; valid names: {', '.join(NAMES)}")
        if not (self.fd_step > 0 and self.transport_steps > 0 and self.seed >= 0):
            raise ConfigError("fd_step and transport_steps must be positive and seed non-negative")
        if self.fd_step < 1e-8:
            raise ConfigError(f"fd_step {self.fd_step} below 1e-8 is rejected")
        if self.transport_steps < 16:
            raise ConfigError("transport_steps must be at least 16")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.task in ("sparling-check", "lemma-residuals") and not self.field:
            raise ConfigError(f"task {self.task} needs --field")

    @property
    def tolerance(self) -> float:
        return DEFAULT_TOL[self.task] if self.tol is None else self.tol

    def echo(self) -> dict:
        d = asdict(self)
        d["grid"] = self.grid.echo()
        d.pop("out")
        d["tol"] = self.tolerance
        return d


@dataclass
class Report:
    config: dict
    records: list
    summary: dict
    verdict: str            # "pass", "fail" or "report-only"

    @property
    def exit_code(self) -> int:
        return EXIT_FAIL if self.verdict == "fail" else EXIT_PASS

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "tool_version": __version__,
                "conventions_hash": CONVENTIONS_HASH, "config": self.config, "records": self.records,
                "summary": self.summary, "verdict": self.verdict, "exit_code": self.exit_code}


# ---------------------------------------------------------------------------
# tasks


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TRACTOR_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, pts):
    threads = _threads()
    if threads == 1:
        return [fn(p) for p in pts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, pts))


def _task_curvature(cfg, entry, pts):
    ch, tol = entry.chart, cfg.tolerance

    def record(p):
        s = curvature_suite(ch, p)
        A = assembled_curvature_matrices(ch, p, s)
        C = commutator_curvature_matrices(ch, p)
        scale = float(np.linalg.norm(A))
        diff = float(np.linalg.norm(A - C))
        return {"x": p.tolist(), "weyl_max": float(np.abs(s.weyl13).max()),
                "cotton_max": float(np.abs(s.cotton).max()), "scal": s.scal,
                "condition_number": s.condition_number,
                "omega_max": float(np.abs(A).max()), "method_difference": diff,
                "method_relative_difference": diff / scale if scale > 1e-5 else 0.0}

    recs = _map(record, pts)
    summary = {k: max(r[k] for r in recs) for k in
               ("weyl_max", "cotton_max", "omega_max", "method_difference", "method_relative_difference")}
    ok = all(r["method_difference"] <= 1e-5 or r["method_relative_difference"] <= tol for r in recs)
    summary["conventions_gate"] = "pass" if ok else "fail"
    return recs, summary, "pass" if ok else "fail"


def _task_normalization(cfg, entry, pts):
    ch, tol = entry.chart, cfg.tolerance
    n = ch.dim

    def record(p):
        Om = commutator_curvature_matrices(ch, p)
        torsion = float(np.abs(Om[:, :, 1:-1, 0]).max())
        trace = float(np.abs(np.trace(Om[:, :, 1:-1, 1:-1], axis1=2, axis2=3) + n * Om[:, :, -1, -1]).max())
        return {"x": p.tolist(), "torsion_max": torsion, "trace_max": trace}

    recs = _map(record, pts)
    summary = {"max_torsion": max(r["torsion_max"] for r in recs),
               "max_trace": max(r["trace_max"] for r in recs)}
    ok = summary["max_torsion"] <= tol and summary["max_trace"] <= tol
    return recs, summary, "pass" if ok else "fail"


def _task_holonomy(cfg, entry, pts):
    ch = entry.chart
    strategy = HolonomyStrategy(transport_steps=cfg.transport_steps, seed=cfg.seed)
    rep = holonomy_algebra_estimate(ch, entry.base_point, strategy, points=pts)
    name = cfg.field or ("j" if "j" in entry.distinguished_fields and entry.name in
                         ("heisenberg_fefferman", "berger_fefferman") else None)
    candidate = (ch, entry.field(name)) if name else None
    classify_holonomy(rep, candidate=candidate, tol=cfg.tolerance)
    recs = [{"x": p.tolist()} for p in np.vstack([entry.base_point[None, :], pts])]
    ref = entry.reference
    summary = {"rank": rep.rank, "singular_values": sorted(rep.singular_values, reverse=True),
               "strategy_ranks": rep.strategy_ranks, "classification": rep.classification,
               "u_compatible": rep.u_compatible, "su_compatible": rep.su_compatible,
               "residuals": rep.residuals, "skew_residual": rep.skew_residual,
               "base_point": entry.base_point.tolist(), "field": name,
               "expected": {k: ref[k] for k in ("rank", "rank_min", "class") if k in ref}}
    ok = len(set(rep.strategy_ranks.values())) == 1
    if "rank" in ref:
        ok &= rep.rank == ref["rank"]
    if "rank_min" in ref:
        ok &= rep.rank >= ref["rank_min"]
    if "class" in ref:
        ok &= rep.classification == ref["class"]
    summary["matches_reference"] = bool(ok)
    return recs, summary, "pass" if ok else "fail"


def _task_sparling(cfg, entry, pts):
    cert = sparling_report(entry.chart, entry.field(cfg.field), pts, tol=cfg.tolerance)
    summary = {"killing_residual": cert.killing_residual, "lightlike_residual": cert.lightlike_residual,
               "weyl_residual": cert.weyl_residual, "cotton_residual": cert.cotton_residual,
               "divergence_residual": cert.divergence_residual,
               "ric_jj_min": min(cert.ric_jj), "ric_jj_max": max(cert.ric_jj),
               "normalization_scale": cert.normalization_scale, "ric_jj_normalized": cert.ric_jj_normalized,
               "dj_identity_residual": cert.dj_identity_residual, "conditions": cert.verdict,
               "failed_conditions": cert.failed_conditions}
    return cert.records, summary, "pass" if cert.passed else "fail"


def _task_su(cfg, entry, pts):
    ch, tol = entry.chart, cfg.tolerance
    n = ch.dim

    def record(p):
        if cfg.field:
            J = normalized_complex_structure(ch, entry.field(cfg.field), p, tol).matrix
            source = cfg.field
        else:
            J = standard_complex_structure(ch.metric(p))
            source = "standard"
        Om = assembled_curvature_matrices(ch, p)
        res = [su_residuals(J, Om[i, j]) for i in range(n) for j in range(i + 1, n)]
        return {"x": p.tolist(), "J": source, "commutator_residual": max(c for c, _ in res),
                "trace_residual": max(abs(t) for _, t in res)}

    recs = _map(record, pts)
    summary = {"max_commutator_residual": max(r["commutator_residual"] for r in recs),
               "max_trace_residual": max(r["trace_residual"] for r in recs)}
    summary["u_compatible"] = summary["max_commutator_residual"] <= tol
    summary["su_compatible"] = summary["u_compatible"] and summary["max_trace_residual"] <= tol
    return recs, summary, "pass" if summary["su_compatible"] else "fail"


def _task_lemma(cfg, entry, pts):
    ch, tol = entry.chart, cfg.tolerance
    V = entry.field(cfg.field)

    def record(p):
        r = lemma_residuals(ch, V, p)
        return {"x": p.tolist(), "lm1_residual": r.lm1_residual, "parallel_residual": r.parallel_residual,
                "curvature_residual": r.curvature_residual,
                "conformal_killing_residual": r.conformal_killing_residual, "warning": r.warning}

    recs = _map(record, pts)
    summary = {k: max(r[k] for r in recs) for k in
               ("lm1_residual", "parallel_residual", "curvature_residual", "conformal_killing_residual")}
    summary["warnings"] = sum(r["warning"] is not None for r in recs)
    ok = summary["lm1_residual"] <= tol and summary["warnings"] == 0
    return recs, summary, "pass" if ok else "fail"


_TASKS = {"curvature-report": _task_curvature, "normalization-check": _task_normalization,
          "holonomy-estimate": _task_holonomy, "sparling-check": _task_sparling, "su-check": _task_su,
          "lemma-residuals": _task_lemma}


def run_task(cfg: RunConfig) -> Report:
    cfg.validate()
    try:
        entry = get_chart(cfg.metric, cfg.params)
    except CatalogError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.fd_step != entry.chart.fd_step:
        from dataclasses import replace
        entry = replace(entry, chart=entry.chart.with_fd_step(cfg.fd_step))
    if cfg.field is not None:
        try:
            entry.field(cfg.field)
        except CatalogError as exc:
            raise ConfigError(str(exc)) from None
    pts = cfg.grid.points(entry)
    for p in pts:
        try:
            entry.chart.check_domain(p)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
    recs, summary, verdict = _TASKS[cfg.task](cfg, entry, pts)
    return Report(cfg.echo(), recs, summary, verdict)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def serialize_report(report: Report) -> str:
    """Sorted keys, shortest round-trip floats; NaN or infinity raise ValueError."""
    return json.dumps(_plain(report.to_dict()), sort_keys=True, allow_nan=False, indent=1) + "\n"


def emit_report(report: Report, path) -> None:
    text = serialize_report(report)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# argument handling


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tractor", description="Conformal tractor calculus checks on catalog metrics.")
    p.add_argument("task", nargs="?", help=f"one of: {', '.join(TASKS)}")
    p.add_argument("--metric", help=f"catalog entry: {', '.join(NAMES)}")
    p.add_argument("--param", action="append", default=None, metavar="K=V", help="entry parameter (repeatable)")
    p.add_argument("--grid", help="COUNTS or COUNTS:LO:HI")
    p.add_argument("--fd-step", type=float)
    p.add_argument("--transport-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--field", help="distinguished vector field of the entry")
    p.add_argument("--tol", type=float)
    p.add_argument("--config", help="JSON config file; its values win over flags")
    p.add_argument("--out", help="report path (JSON)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    merged = {}
    if args.param:
        params = {}
        for item in args.param:
            if "=" not in item:
                raise ConfigError(f"--param expects K=V, got {item!r}")
            k, v = item.split("=", 1)
            params[k.strip()] = _parse_value(v.strip())
        merged["params"] = params
    for key in ("task", "metric", "grid", "fd_step", "transport_steps", "seed", "field", "tol", "out"):
        val = getattr(args, key)
        if val is not None:
            merged[key] = val
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in file_cfg.items():
            merged[k.replace("-", "_")] = v
    allowed = {"task", "metric", "params", "grid", "fd_step", "transport_steps", "seed", "field", "tol", "out"}
    unknown = sorted(set(merged) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; valid keys: {sorted(allowed)}")
    for req in ("task", "metric"):
        if req not in merged:
            raise ConfigError(f"missing {req}; valid {req}s: {', '.join(TASKS if req == 'task' else NAMES)}")
    if "grid" in merged:
        merged["grid"] = GridSpec.parse(merged["grid"])
    if not isinstance(merged.get("params", {}), dict):
        raise ConfigError("params must be a key/value mapping")
    try:
        for key, typ in (("fd_step", float), ("tol", float), ("transport_steps", int), ("seed", int)):
            if merged.get(key) is not None:
                merged[key] = typ(merged[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(**merged)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        report = run_task(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SparlingGateError as exc:
        print(f"catalog construction failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArithmeticError, np.linalg.LinAlgError, SingularMetricError, CurvatureMismatchError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        text = serialize_report(report)
    except ValueError as exc:
        print(f"report rejected: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write report: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    else:
        sys.stdout.write(text)
    print(f"{cfg.task} on {cfg.metric}: {report.verdict}", file=sys.stderr)
    return report.exit_code
