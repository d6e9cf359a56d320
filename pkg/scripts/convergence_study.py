"""Discretization studies: RK4 transport order and finite-difference step sensitivity.

    python scripts/convergence_study.py
"""

import argparse
from dataclasses import dataclass, replace

import numpy as np

from tractor.catalog import get_chart
from tractor.tractor_bundle import Polyline, assembled_curvature_matrices, parallel_transport


@dataclass
class ConvergenceConfig:
    entry: str = "berger_fefferman"
    steps: tuple = (16, 32, 64, 128)
    reference_steps: int = 2048
    fd_steps: tuple = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5)


def transport_order(cfg: ConvergenceConfig):
    ch = get_chart(cfg.entry).chart
    lo, hi = ch.domain
    path = Polyline.segment(0.6 * lo, 0.7 * hi)
    ref = parallel_transport(ch, path, cfg.reference_steps)
    errs = [float(np.abs(parallel_transport(ch, path, k) - ref).max()) for k in cfg.steps]
    return list(zip(cfg.steps, errs, [None] + [a / b for a, b in zip(errs, errs[1:])]))


def fd_sensitivity(cfg: ConvergenceConfig):
    """Curvature from finite-difference metric jets against the analytic jet."""
    entry = get_chart(cfg.entry)
    x = entry.base_point
    exact = assembled_curvature_matrices(entry.chart, x)
    out = []
    for h in cfg.fd_steps:
        ch = replace(entry.chart, jet=None).with_fd_step(h)
        out.append((h, float(np.abs(assembled_curvature_matrices(ch, x) - exact).max())))
    return out


def main():
    ap = argparse.ArgumentParser(description="transport and finite-difference convergence")
    ap.add_argument("--entry", default=ConvergenceConfig.entry)
    cfg = ConvergenceConfig(entry=ap.parse_args().entry)
    print("RK4 transport: steps, max error, error ratio (16 expected)")
    for k, e, r in transport_order(cfg):
        print(f"  {k:5d} {e:10.3e} {'' if r is None else f'{r:6.1f}'}")
    print("finite-difference jet: step, max curvature error")
    for h, e in fd_sensitivity(cfg):
        print(f"  {h:8.1e} {e:10.3e}")


if __name__ == "__main__":
    main()
