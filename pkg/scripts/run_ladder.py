#!/usr/bin/env python3
"""Basis-ladder convergence study.

Solves the configured problem at a ladder of per-element basis counts and
prints, for each rung: eigenvalue errors against a fine-grid reference,
the estimator rollup, and the efficiency ratios |delta eps_i| / eta_i^2.

Usage: python3 scripts/run_ladder.py [--config configs/twowell.ini]
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from albdg.cli import _build_problem, _oracle_grid, load_run_config
from albdg.estimator import build_constants, build_report
from albdg.model import scf_reference, scf_solve


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/twowell.ini")
    args = ap.parse_args()

    run = load_run_config(args.config)
    domain, mesh, builder, spec, scf, penalty = _build_problem(run)
    _, ev_ref, _ = scf_reference(spec, scf, domain, grid=_oracle_grid(run),
                                 n_eigen=run.n_eigen)
    print(f"reference eigenvalues: {[f'{v:.8f}' for v in ev_ref]}")

    if run.refine is not None:
        j0 = run.refine["initial_counts"][0]
        cap = run.refine["j_max"] or run.budget
        ladder = sorted({min(j0 + k * run.refine["b_step"], cap)
                         for k in range(run.refine["steps"])})
    else:
        ladder = [run.budget]

    header = f"{'J':>4} {'dof':>6} {'max|d_eps|':>12} {'eta2':>12} ratios"
    print(header)
    for j in ladder:
        state = scf_solve(spec, scf, builder, penalty, counts=j,
                          n_eigen=run.n_eigen)
        report = build_report(state.solution,
                              state.v_elements,
                              build_constants(state.family, penalty))
        errs = [abs(a - b) for a, b in
                zip(state.solution.eigenvalues, ev_ref)]
        ratios = [e / max(h2, 1e-300)
                  for e, h2 in zip(errs, report.eta_i2)]
        print(f"{j:>4} {state.family.total_dof:>6} {max(errs):>12.3e} "
              f"{report.eta2:>12.3e} "
              + " ".join(f"{r:.2e}" for r in ratios))
    return 0


if __name__ == "__main__":
    sys.exit(main())
