"""Compare the assembled tractor curvature against the commutator curvature for both Cotton slot signs.

    python scripts/sign_gate.py --points 20 --seed 3
"""

import argparse
from dataclasses import dataclass

import numpy as np

from tractor.catalog import get_chart
from tractor.tractor_bundle import assembled_curvature_matrices, commutator_curvature_matrices


@dataclass
class SignGateConfig:
    entries: tuple = ("perturbed_flat", "berger_fefferman", "heisenberg_fefferman", "sphere_round")
    points: int = 20
    seed: int = 3
    margin: float = 0.8


def flip_cotton(Om):
    out = Om.copy()
    out[:, :, 0, 1:-1] *= -1
    out[:, :, 1:-1, -1] *= -1
    return out


def run(cfg: SignGateConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    rows = {}
    for name in cfg.entries:
        ch = get_chart(name).chart
        lo, hi = ch.domain
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        plus, minus, scale = [], [], []
        for x in mid + cfg.margin * half * rng.uniform(-1, 1, size=(cfg.points, ch.dim)):
            A = assembled_curvature_matrices(ch, x)
            C = commutator_curvature_matrices(ch, x)
            nc = max(np.linalg.norm(C), 1e-300)
            plus.append(np.linalg.norm(A - C) / nc)
            minus.append(np.linalg.norm(flip_cotton(A) - C) / nc)
            scale.append(np.linalg.norm(C))
        rows[name] = (max(scale), max(plus), max(minus))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=SignGateConfig.points)
    ap.add_argument("--seed", type=int, default=SignGateConfig.seed)
    args = ap.parse_args()
    rows = run(SignGateConfig(points=args.points, seed=args.seed))
    print(f"{'entry':24s} {'max |Omega|':>12s} {'rel err +C':>12s} {'rel err -C':>12s}")
    for name, (s, p, m) in rows.items():
        print(f"{name:24s} {s:12.3e} {p:12.3e} {m:12.3e}")
    print("(relative errors are meaningless where |Omega| is at round-off level)")


if __name__ == "__main__":
    main()
