"""Command line: ``crfve <command> --config cfg.json --out result.csv``.

Exit status is 0 when every row converged, 2 when any row hit ``maxit`` (or
an eigenvalue estimate did not converge), 1 on bad input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .experiments import (run_convergence_study, run_iteration_table, run_matrix_diagnostics,
                          run_mesh_info, run_scaling_table, run_spectrum_dump, write_rows,
                          write_spectrum)

log = logging.getLogger("crfve")

EXIT_OK, EXIT_BAD_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


def spectrum_paths(out) -> tuple[Path, Path]:
    """``spec.csv`` becomes ``spec_fve.csv`` and ``spec_precond.csv``."""
    out = Path(out)
    suffix = out.suffix or ".csv"
    return (out.with_name(f"{out.stem}_fve{suffix}"),
            out.with_name(f"{out.stem}_precond{suffix}"))


def _cmd_spectrum(cfg, out):
    eig_a, eig_t = run_spectrum_dump(cfg, cap=int(cfg.sweep.get("cap", 3000)))
    pa, pt = spectrum_paths(out)
    write_spectrum(eig_a, pa)
    write_spectrum(eig_t, pt)
    log.info("wrote %s and %s", pa, pt)
    return []


COMMANDS = {
    "mesh-info": (run_mesh_info, "mesh, dual mesh and partition statistics"),
    "diagnostics": (run_matrix_diagnostics,
                    "non-symmetry norms per alpha1, or ||A_FE - A_FVE||_2 per n"),
    "iterations": (run_iteration_table, "GMRES iteration counts over an alpha1 sweep"),
    "scaling": (run_scaling_table, "iterations and c_p over an (h, H) grid"),
    "convergence": (run_convergence_study, "broken-H1 errors for a manufactured solution"),
    "spectrum": (None, "dense eigenvalues of A_FVE and of the preconditioned operator"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crfve", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None,
                       help="output CSV (defaults to output.path of the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, TypeError) as exc:
        print(f"crfve: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    out = args.out or cfg.output_path
    if out is None:
        print("crfve: no output path (use --out or output.path)", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        if args.command == "spectrum":
            rows = _cmd_spectrum(cfg, out)
        else:
            rows = COMMANDS[args.command][0](cfg)
            write_rows(rows, out)
            log.info("wrote %d rows to %s", len(rows), out)
    except ValueError as exc:
        print(f"crfve: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    failed = [r for r in rows if not r.get("converged", True)]
    if failed:
        print(f"crfve: {len(failed)} of {len(rows)} rows did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
