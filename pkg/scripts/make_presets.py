"""Regenerate the example geometry presets shipped with the harness.

Each preset is a runnable config (4x4 subdomains) whose rectangles lie on
its reference grid.  Run from the repository root:

    python scripts/make_presets.py
"""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "crfve" / "harness" / "presets"
M = 4


def example1(g=32):
    """Inclusions and channels strictly inside each subdomain, away from the
    layer of triangles touching the subdomain boundary."""
    s = g // M
    rects = []
    for J in range(M):
        for I in range(M):
            x, y = I * s, J * s
            rects.append([x + 2, x + 4, y + 2, y + 4])     # square inclusion
            rects.append([x + 1, x + 7, y + 5, y + 6])     # horizontal channel
            rects.append([x + 5, x + 6, y + 1, y + 4])     # vertical channel
    return g, rects, "inclusions and channels in the interior of every subdomain"


def example2(g=32):
    """Inclusions straddling the subdomain interfaces."""
    s = g // M
    rects = []
    for J in range(1, M):
        for I in range(1, M):
            cx, cy = I * s, J * s                          # interior crosspoints
            rects.append([cx - 2, cx + 2, cy - 2, cy + 2])
    for I in range(1, M):
        for J in range(M):
            c, mid = I * s, J * s + s // 2                # edge midpoints
            rects.append([c - 1, c + 1, mid - 1, mid + 1])
            rects.append([mid - 1, mid + 1, c - 1, c + 1])
    return g, rects, "inclusions centred on subdomain crosspoints and interface edges"


def example3(g=16):
    """Checkerboard of whole subdomains."""
    s = g // M
    rects = [[I * s, (I + 1) * s, J * s, (J + 1) * s]
             for J in range(M) for I in range(M) if (I + J) % 2 == 0]
    return g, rects, "alpha1 on every other subdomain (checkerboard)"


def example4(g=16):
    """Long channels crossing several interfaces."""
    rects = [[1, 15, 2, 3], [1, 15, 10, 11],               # horizontal
             [6, 7, 1, 15], [13, 14, 1, 15]]               # vertical
    return g, rects, "channels crossing subdomain interfaces"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for k, make in enumerate([example1, example2, example3, example4], start=1):
        g, rects, text = make()
        cfg = {
            "description": f"Example {k}: {text}",
            "mesh": {"n": g},
            "partition": {"m": M},
            "coefficient": {
                "base": "sinusoidal",
                "frequency": 100,
                "grid": g,
                "inclusions": [[c / g for c in r] for r in rects],
            },
            "solver": {"k": 2, "rtol": 1e-6, "maxit": 1000},
            "sweep": {"alpha1": [1, 10, 100, 1000, 10000, 100000, 1000000]},
        }
        (OUT / f"example{k}.json").write_text(json.dumps(cfg, indent=1) + "\n")
        print(f"example{k}.json: {len(rects)} rectangles on a {g}x{g} grid")


if __name__ == "__main__":
    main()
