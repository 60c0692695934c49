"""Compare the two readings of the interior average in I_A.

By default the subdomain average runs over interface midpoints only; with
``average_outer`` the midpoints on the outer boundary (where u = 0) are
counted too, which shrinks the average near the boundary.

    python3 scripts/coarse_average_variant.py
"""

from crfve.harness.config import config_from_dict
from crfve.harness.experiments import run_scaling_table

PAIRS = [(16, 4), (32, 4), (64, 4), (32, 8), (64, 8)]


def main():
    print(f"{'n':>4} {'M':>3} | {'iters':>5} {'c_p':>10} | {'iters':>5} {'c_p':>10}   "
          "(interface only | with outer midpoints)")
    tables = []
    for outer in (False, True):
        cfg = config_from_dict({"coefficient": {"frequency": 100},
                                "partition": {"average_outer": outer}})
        tables.append(run_scaling_table(cfg, k=2, pairs=PAIRS))
    for a, b in zip(*tables):
        print(f"{a['n']:4d} {a['m']:3d} | {a['iterations']:5d} {a['cp']:10.3e} | "
              f"{b['iterations']:5d} {b['cp']:10.3e}", flush=True)


if __name__ == "__main__":
    main()
