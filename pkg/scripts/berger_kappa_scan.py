"""Scan the gamma-gamma-free coefficient kappa of the Berger Fefferman coframe metric.

Only kappa = (lam + 1/lam)/2 makes the vertical field pass the Sparling
conditions; elsewhere the Weyl and Cotton contractions with j are O(|kappa - kappa*|).

    python scripts/berger_kappa_scan.py --lam 1.2
"""

import argparse
from dataclasses import dataclass

import numpy as np

from tractor.catalog import CatalogEntry, _berger_chart, _vertical
from tractor.killing_analysis import sparling_report


@dataclass
class KappaScanConfig:
    lam: float = 1.2
    offsets: tuple = (-0.2, -0.05, -0.01, 0.0, 0.01, 0.05, 0.2)
    grid_counts: int = 2


def run(cfg: KappaScanConfig) -> list:
    k_star = 0.5 * (cfg.lam + 1 / cfg.lam)
    rows = []
    for d in cfg.offsets:
        ch = _berger_chart(cfg.lam, k_star + d)
        entry = CatalogEntry("berger_scan", {}, ch, {"j": _vertical()}, {})
        cert = sparling_report(ch, entry.field("j"), entry.default_grid(cfg.grid_counts))
        rows.append((k_star + d, d, cert.weyl_residual, cert.cotton_residual, float(np.mean(cert.ric_jj)),
                     cert.passed))
    return rows


def main():
    ap = argparse.ArgumentParser(description="Sparling residuals against the Berger kappa coefficient")
    ap.add_argument("--lam", type=float, default=KappaScanConfig.lam)
    args = ap.parse_args()
    print(f"{'kappa':>8s} {'offset':>8s} {'|i_j W|':>10s} {'|i_j C|':>10s} {'Ric(j,j)':>10s}  gate")
    for k, d, w, c, r, ok in run(KappaScanConfig(lam=args.lam)):
        print(f"{k:8.4f} {d:8.3f} {w:10.2e} {c:10.2e} {r:10.4f}  {'pass' if ok else 'fail'}")


if __name__ == "__main__":
    main()
