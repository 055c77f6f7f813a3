#!/usr/bin/env python3
"""Numerical property battery on two basis families.

Runs the lifting-bound and coercivity checks on (a) the adaptive local
basis family built from the configured problem and (b) a broken Legendre
family on the same mesh, then the estimator reliability check on the
configured basis ladder. Prints one line per check.

Usage: python3 scripts/run_property_battery.py [--config configs/twowell.ini]
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from albdg.cli import _build_problem, _linear_reference, load_run_config
from albdg.model import build_ionic_potential, scf_solve
from albdg.properties import (broken_legendre_family, check_coercivity,
                              check_lifting_bound, check_reliability)


def show(result) -> None:
    status = "pass" if result.passed else "FAIL"
    print(f"  [{status}] {result.name:<16} samples={result.samples:<4} "
          f"max_violation={result.max_violation:+.3e}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/twowell.ini")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    run = load_run_config(args.config, seed_override=args.seed)
    domain, mesh, builder, spec, scf, penalty = _build_problem(run)

    state = scf_solve(spec, scf, builder, penalty, counts=run.budget,
                      n_eigen=run.n_eigen)
    print("adaptive local basis family:")
    show(check_lifting_bound(state.family, seed=run.seed))
    show(check_coercivity(state.family, penalty, seed=run.seed))

    legendre = broken_legendre_family(mesh, min(run.budget, 10))
    print("broken Legendre family:")
    show(check_lifting_bound(legendre, seed=run.seed))
    show(check_coercivity(legendre, penalty, seed=run.seed))

    if run.refine is not None and run.kappa == 0.0 and run.c_x == 0.0:
        j0 = run.refine["initial_counts"][0]
        cap = run.refine["j_max"] or run.budget
        ladder = sorted({min(j0 + k * run.refine["b_step"], cap)
                         for k in range(run.refine["steps"])})
        reference = _linear_reference(run, spec, scf)
        print(f"estimator reliability on ladder {ladder}:")
        show(check_reliability(spec, scf, builder, penalty, ladder,
                               run.n_eigen, reference, seed=run.seed))
    return 0


if __name__ == "__main__":
    sys.exit(main())
