"""How the quadrature rule changes the matrix diagnostics for oscillatory alpha.

With alpha = 2 + sin(100 pi x) sin(100 pi y) the coefficient oscillates many
times per element on coarse meshes, so low-order rules alias badly.  This
prints ||A_FE - A_FVE||_2 per h and the Example-4 skew norm at alpha1 = 1 for
a few (triangle degree, segment points) pairs.

    python3 scripts/quadrature_study.py
"""

import numpy as np

from crfve.harness.config import config_from_dict
from crfve.harness.experiments import run_matrix_diagnostics

RULES = [(2, 2), (5, 3), (10, 8), (14, 12)]
NS = [8, 16, 32, 64, 128]


def main():
    print("||A_FE - A_FVE||_2, alpha = 2 + sin(100 pi x) sin(100 pi y)")
    print("rule      " + "".join(f"   h=1/{n:<5d}" for n in NS))
    for tri, seg in RULES:
        cfg = config_from_dict({"coefficient": {"frequency": 100},
                                "quadrature": {"triangle_degree": tri, "segment_points": seg}})
        vals = [r["perturbation_norm"] for r in run_matrix_diagnostics(cfg, ns=NS)]
        print(f"({tri:2d},{seg:2d})  " + "".join(f"{v:12.3e}" for v in vals), flush=True)

    print("\n||A - A^T||_2, Example 4, n = 32, alpha1 = 1, by segment points")
    for seg in (1, 2, 3, 4, 6, 8, 12):
        cfg = config_from_dict({"preset": 4, "mesh": {"n": 32},
                                "quadrature": {"triangle_degree": 10, "segment_points": seg}})
        row, = run_matrix_diagnostics(cfg, alpha1=[1.0])
        print(f"  {seg:2d} points: {row['skew_norm']:.4e}", flush=True)


if __name__ == "__main__":
    np.set_printoptions(precision=3)
    main()
