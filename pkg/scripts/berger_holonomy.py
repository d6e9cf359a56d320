"""Holonomy algebra of the Berger Fefferman family as the squashing parameter varies.

For each lam we build the entry (which runs the Sparling gate), estimate the
holonomy algebra at the base point and test it against the normalized complex
structure A_Q(c j).  Expect rank 0 at lam = 1 and rank 8 = dim su(1, 2) otherwise.

    python scripts/berger_holonomy.py --lams 0.8 1.0 1.2 1.5
"""

import argparse
import json
import time
from dataclasses import asdict, dataclass, field

from tractor.catalog import get_chart
from tractor.tractor_bundle import HolonomyStrategy, classify_holonomy, holonomy_algebra_estimate


@dataclass
class BergerSweepConfig:
    lams: list = field(default_factory=lambda: [0.8, 1.0, 1.2, 1.5])
    n_points: int = 6
    transport_steps: int = 32
    seed: int = 0


def run(cfg: BergerSweepConfig) -> list:
    out = []
    for lam in cfg.lams:
        t0 = time.perf_counter()
        entry = get_chart("berger_fefferman", {"lam": lam})
        strat = HolonomyStrategy(n_points=cfg.n_points, transport_steps=cfg.transport_steps, seed=cfg.seed)
        rep = holonomy_algebra_estimate(entry.chart, entry.base_point, strat)
        classify_holonomy(rep, candidate=(entry.chart, entry.field("j")))
        out.append({"lam": lam, "rank": rep.rank, "strategy_ranks": rep.strategy_ranks,
                    "classification": rep.classification, "su_compatible": rep.su_compatible,
                    "max_commutator": rep.residuals.get("max_commutator"),
                    "max_complex_trace": rep.residuals.get("max_complex_trace"),
                    "weyl_residual_along_j": entry.certificate.weyl_residual,
                    "seconds": round(time.perf_counter() - t0, 2)})
    return out


def main():
    ap = argparse.ArgumentParser(description="Berger Fefferman holonomy sweep")
    ap.add_argument("--lams", type=float, nargs="+", default=BergerSweepConfig().lams)
    ap.add_argument("--n-points", type=int, default=BergerSweepConfig.n_points)
    ap.add_argument("--json", action="store_true", help="print JSON instead of a table")
    args = ap.parse_args()
    cfg = BergerSweepConfig(lams=args.lams, n_points=args.n_points)
    rows = run(cfg)
    if args.json:
        print(json.dumps({"config": asdict(cfg), "rows": rows}, indent=1))
        return
    for r in rows:
        print(f"lam={r['lam']:<5} rank={r['rank']:<2} {r['classification']:<20} "
              f"[A,J]={r['max_commutator']:.1e} tr(JA)={r['max_complex_trace']:.1e} ({r['seconds']}s)")


if __name__ == "__main__":
    main()
