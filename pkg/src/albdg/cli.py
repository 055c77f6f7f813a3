"""Config-driven command line front end.

Subcommands: solve (one SCF run at fixed counts), adapt (threshold-driven
and uniform refinement side by side), oracle (fine-grid reference bundle
with hash-keyed caching), report (plot-ready CSV tables from a history
directory). Configs are INI files with named sections; all outputs are
deterministic given (config, seed) and each file gets a .meta.json sidecar
carrying the config hash and package version.

Heavy numerical imports happen inside the command functions so that the
--threads flag can pin the BLAS/OpenMP pool sizes before numpy loads.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError, NumericalError

THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                   "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")
ORACLE_SELF_TOL = 1e-8


# ---------------------------------------------------------------- config

def _parse_scalars(text: str, cast, where: str) -> List:
    out = []
    for tok in text.replace(",", " ").split():
        try:
            out.append(cast(tok))
        except ValueError as exc:
            raise ConfigError(f"{where}: cannot parse {tok!r}") from exc
    return out


class _Sections:
    """Typed accessors over a parsed INI file with section.key diagnostics."""

    def __init__(self, parser: configparser.ConfigParser):
        self._cp = parser

    def has(self, section: str) -> bool:
        return self._cp.has_section(section)

    def raw(self, section: str, key: str, required: bool = False,
            default: Optional[str] = None) -> Optional[str]:
        if self._cp.has_option(section, key):
            val = self._cp.get(section, key).strip()
            if val:
                return val
        if required:
            raise ConfigError(f"[{section}] {key}: required field is missing")
        return default

    def floats(self, section, key, required=False, default=None):
        raw = self.raw(section, key, required)
        if raw is None:
            return default
        return _parse_scalars(raw, float, f"[{section}] {key}")

    def ints(self, section, key, required=False, default=None):
        raw = self.raw(section, key, required)
        if raw is None:
            return default
        return _parse_scalars(raw, int, f"[{section}] {key}")

    def one_float(self, section, key, required=False, default=None):
        vals = self.floats(section, key, required)
        if vals is None:
            return default
        if len(vals) != 1:
            raise ConfigError(f"[{section}] {key}: expected one number")
        return vals[0]

    def one_int(self, section, key, required=False, default=None):
        vals = self.ints(section, key, required)
        if vals is None:
            return default
        if len(vals) != 1:
            raise ConfigError(f"[{section}] {key}: expected one integer")
        return vals[0]

    def boolean(self, section, key, default: bool) -> bool:
        raw = self.raw(section, key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")

    def choice(self, section, key, options, default):
        raw = self.raw(section, key)
        if raw is None:
            return default
        if raw not in options:
            raise ConfigError(
                f"[{section}] {key}: must be one of {options}, got {raw!r}")
        return raw


@dataclass
class RunConfig:
    """Validated, plain-python view of one run configuration file."""
    dim: int
    lengths: List[float]
    global_grid: List[int]
    elements: List[int]
    lgl_order: List[int]
    budget: int
    counts: List[int]
    seam_blend: bool
    wells: List[Tuple[Tuple[float, ...], float, float]]
    constant_shift: float
    electrons: int
    mixing: float
    tol: float
    max_iter: int
    kappa: float
    c_x: float
    freeze_basis_after: Optional[int]
    n_eigen: int
    gamma: float
    penalty_mode: str
    refine: Optional[Dict]
    oracle_multiplier: int
    output_dir: str
    seed: int
    config_hash: str = ""
    config_path: str = ""


def _parse_wells(raw: Optional[str], dim: int) -> List[Tuple]:
    if raw is None:
        return []
    wells = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        nums = _parse_scalars(line, float, f"[potential] wells line {lineno}")
        if len(nums) != dim + 2:
            raise ConfigError(
                f"[potential] wells line {lineno}: expected {dim + 2} numbers "
                f"(center x{dim}, depth, width), got {len(nums)}")
        wells.append((tuple(nums[:dim]), nums[dim], nums[dim + 1]))
    return wells


def _per_axis(values: Optional[List], dim: int, where: str,
              required: bool = False, default=None) -> Optional[List]:
    if values is None:
        if required:
            raise ConfigError(f"{where}: required field is missing")
        values = default
    if values is None:
        return None
    if len(values) == 1:
        return list(values) * dim
    if len(values) != dim:
        raise ConfigError(f"{where}: expected 1 or {dim} entries, got {len(values)}")
    return list(values)


def load_run_config(path, out_override: Optional[str] = None,
                    seed_override: Optional[int] = None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=str(p))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    s = _Sections(cp)

    dim = s.one_int("domain", "dim", required=True)
    if dim not in (1, 2, 3):
        raise ConfigError(f"[domain] dim: must be 1, 2 or 3, got {dim}")
    lengths = _per_axis(s.floats("domain", "lengths", required=True), dim,
                        "[domain] lengths")
    grid = _per_axis(s.ints("domain", "global_grid", required=True), dim,
                     "[domain] global_grid")
    for g in grid:
        if g < 8 or g % 2:
            raise ConfigError(
                f"[domain] global_grid: counts must be even and >= 8, got {g}")

    elements = _per_axis(s.ints("mesh", "elements", required=True), dim,
                         "[mesh] elements")
    order = _per_axis(s.ints("mesh", "lgl_order", required=True), dim,
                      "[mesh] lgl_order")
    n_elem = 1
    for e in elements:
        if e < 1:
            raise ConfigError("[mesh] elements: entries must be >= 1")
        n_elem *= e

    budget = s.one_int("basis", "budget", required=True)
    if budget < 1:
        raise ConfigError(f"[basis] budget: must be >= 1, got {budget}")
    counts = s.ints("basis", "counts", default=[budget])
    if len(counts) == 1:
        counts = counts * n_elem
    if len(counts) != n_elem:
        raise ConfigError(
            f"[basis] counts: expected 1 or {n_elem} entries, got {len(counts)}")
    if min(counts) < 0 or max(counts) > budget:
        raise ConfigError(
            f"[basis] counts: entries must lie in [0, budget={budget}]")
    seam_blend = s.boolean("basis", "seam_blend", True)

    wells = _parse_wells(s.raw("potential", "wells"), dim)
    shift = s.one_float("potential", "constant_shift", default=0.0)
    electrons = s.one_int("potential", "electrons", default=1)
    if electrons < 1:
        raise ConfigError(f"[potential] electrons: must be >= 1, got {electrons}")

    mixing = s.one_float("scf", "mixing", default=0.5)
    tol = s.one_float("scf", "tol", default=1e-6)
    max_iter = s.one_int("scf", "max_iter", default=100)
    kappa = s.one_float("scf", "kappa", default=0.0)
    c_x = s.one_float("scf", "c_x", default=0.0)
    freeze = s.one_int("scf", "freeze_basis_after", default=None)
    n_eigen = s.one_int("scf", "n_eigen", default=electrons)
    if n_eigen < electrons:
        raise ConfigError(
            f"[scf] n_eigen: must cover the {electrons} occupied states")
    if sum(counts) < n_eigen:
        raise ConfigError(
            f"[basis] counts: total {sum(counts)} cannot hold "
            f"n_eigen={n_eigen} eigenpairs")

    gamma = s.one_float("penalty", "gamma", default=20.0)
    pmode = s.choice("penalty", "mode", ("formula", "cj_condition"), "formula")

    refine = None
    if s.has("refine"):
        j_max = s.one_int("refine", "j_max", default=None)
        if j_max is not None and j_max > budget:
            raise ConfigError(
                f"[refine] j_max: {j_max} exceeds [basis] budget {budget}")
        initial = s.ints("refine", "initial_counts", default=[12])
        if len(initial) == 1:
            initial = initial * n_elem
        if len(initial) != n_elem:
            raise ConfigError(
                f"[refine] initial_counts: expected 1 or {n_elem} entries")
        refine = {
            "eps_min": s.one_float("refine", "eps_min", required=True),
            "eps_max": s.one_float("refine", "eps_max", required=True),
            "b_step": s.one_int("refine", "b_step", required=True),
            "steps": s.one_int("refine", "steps", required=True),
            "initial_counts": initial,
            "j_max": j_max,
            "mode": s.choice("refine", "mode", ("nonuniform", "uniform"),
                             "nonuniform"),
        }
        if refine["eps_min"] >= refine["eps_max"]:
            raise ConfigError("[refine] eps_min: must be smaller than eps_max")

    mult = s.one_int("oracle", "grid_multiplier", default=2)
    if mult < 1:
        raise ConfigError(f"[oracle] grid_multiplier: must be >= 1, got {mult}")

    outdir = out_override or s.raw("output", "directory", default="out")
    seed = seed_override if seed_override is not None else s.one_int(
        "run", "seed", default=0)

    return RunConfig(
        dim=dim, lengths=lengths, global_grid=grid, elements=elements,
        lgl_order=order, budget=budget, counts=counts, seam_blend=seam_blend,
        wells=wells, constant_shift=shift, electrons=electrons,
        mixing=mixing, tol=tol, max_iter=max_iter, kappa=kappa, c_x=c_x,
        freeze_basis_after=freeze, n_eigen=n_eigen, gamma=gamma,
        penalty_mode=pmode, refine=refine, oracle_multiplier=mult,
        output_dir=str(outdir), seed=seed,
        config_hash=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        config_path=str(p))


# ---------------------------------------------------------------- helpers

def _version() -> str:
    from . import __version__
    return __version__


def _meta(run: RunConfig) -> Dict:
    return {"config_sha256": run.config_hash, "version": _version()}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                    encoding="ascii")


def _write_sidecars(paths: List[Path], run: RunConfig) -> None:
    for p in paths:
        _write_json(p.with_name(p.name + ".meta.json"), _meta(run))


def _write_density(outdir: Path, name: str, rho, lengths) -> List[Path]:
    import numpy as np
    dens = np.ascontiguousarray(rho, dtype="<f8")
    bin_path = outdir / f"{name}.bin"
    bin_path.write_bytes(dens.tobytes())
    side = outdir / f"{name}.json"
    _write_json(side, {"dims": [int(n) for n in dens.shape],
                       "lengths": [float(x) for x in lengths],
                       "dtype": "<f8", "order": "C"})
    return [bin_path, side]


def _build_problem(run: RunConfig):
    """Domain, mesh, family builder, model spec and solver configs."""
    from .basis import FamilyBuilder
    from .dg import PenaltyConfig
    from .mesh import Domain, build_mesh
    from .model import PotentialSpec, SCFConfig

    domain = Domain(dim=run.dim, lengths=tuple(run.lengths),
                    global_grid=tuple(run.global_grid))
    mesh = build_mesh(domain, tuple(run.elements), tuple(run.lgl_order))
    builder = FamilyBuilder(mesh, budget=run.budget,
                            seam_blend=run.seam_blend)
    spec = PotentialSpec(wells=run.wells, constant_shift=run.constant_shift,
                         electrons=run.electrons)
    scf = SCFConfig(mixing=run.mixing, tol=run.tol, max_iter=run.max_iter,
                    kappa=run.kappa, c_x=run.c_x,
                    freeze_basis_after=run.freeze_basis_after)
    penalty = PenaltyConfig(gamma=run.gamma, mode=run.penalty_mode)
    return domain, mesh, builder, spec, scf, penalty


def _oracle_key(run: RunConfig) -> str:
    payload = {
        "lengths": run.lengths, "grid": run.global_grid,
        "wells": [[list(c), d, w] for c, d, w in run.wells],
        "constant_shift": run.constant_shift, "electrons": run.electrons,
        "mixing": run.mixing, "tol": run.tol, "max_iter": run.max_iter,
        "kappa": run.kappa, "c_x": run.c_x, "n_eigen": run.n_eigen,
        "grid_multiplier": run.oracle_multiplier,
    }
    blob = json.dumps(payload, sort_keys=True).encode("ascii")
    return hashlib.sha256(blob).hexdigest()[:16]


def _oracle_grid(run: RunConfig) -> Tuple[int, ...]:
    return tuple(run.oracle_multiplier * g for g in run.global_grid)


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


# --------------------------------------------------------------- commands

def cmd_solve(run: RunConfig, with_properties: bool = False) -> int:
    import numpy as np

    from .estimator import build_constants, build_report, summary_dict, \
        write_report_csv
    from .model import scf_solve

    domain, mesh, builder, spec, scf, penalty = _build_problem(run)
    state = scf_solve(spec, scf, builder, penalty,
                      counts=np.asarray(run.counts), n_eigen=run.n_eigen)
    constants = build_constants(state.family, penalty)
    report = build_report(state.solution, state.v_elements, constants)

    outdir = Path(run.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    eig_path = outdir / "eigenvalues.csv"
    with open(eig_path, "w", encoding="ascii", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["i", "eigenvalue"])
        for i, val in enumerate(state.solution.eigenvalues):
            w.writerow([i, repr(float(val))])
    written.append(eig_path)

    est_path = outdir / "estimator.csv"
    write_report_csv(report, est_path)
    written.append(est_path)

    sum_path = outdir / "estimator_summary.json"
    _write_json(sum_path, summary_dict(report))
    written.append(sum_path)

    written.extend(_write_density(outdir, "density", state.rho, run.lengths))

    run_path = outdir / "run.json"
    _write_json(run_path, {
        "counts": list(run.counts),
        "realized_counts": [int(c) for c in state.family.counts],
        "total_dof": int(state.family.total_dof),
        "eigenvalues": [float(x) for x in state.solution.eigenvalues],
        "scf_iterations": state.iterations,
        "scf_residual": float(state.residuals[-1]),
        "eta2": float(report.eta2),
        "seed": run.seed,
    })
    written.append(run_path)

    if with_properties:
        written.append(_run_properties(run, state, builder, spec, scf,
                                       penalty, outdir))

    _write_sidecars(written, run)
    for p in written:
        print(f"wrote {p}")
    return 0


def _run_properties(run: RunConfig, state, builder, spec, scf, penalty,
                    outdir: Path) -> Path:
    """Lemma battery on the solved family; ladder check when configured."""
    from .properties import (check_coercivity, check_lifting_bound,
                             check_reliability)

    results = [
        check_lifting_bound(state.family, samples=100, seed=run.seed),
        check_coercivity(state.family, penalty, samples=100, seed=run.seed),
    ]
    if run.refine is not None and len(set(run.refine["initial_counts"])) == 1:
        j0 = run.refine["initial_counts"][0]
        cap = run.refine["j_max"] or run.budget
        ladder = []
        for step in range(run.refine["steps"]):
            j = min(j0 + step * run.refine["b_step"], cap)
            if j not in ladder:
                ladder.append(j)
        reference = _linear_reference(run, spec, scf)
        results.append(check_reliability(
            spec, scf, builder, penalty, ladder, run.n_eigen, reference,
            seed=run.seed))
    payload = {"results": [r.to_dict() for r in results],
               "all_passed": all(r.passed for r in results)}
    path = outdir / "properties.json"
    _write_json(path, payload)
    return path


def _linear_reference(run: RunConfig, spec, scf):
    from .mesh import Domain
    from .local_solver import solve_reference
    from .model import build_ionic_potential
    domain = Domain(dim=run.dim, lengths=tuple(run.lengths),
                    global_grid=tuple(run.global_grid))
    if run.kappa != 0.0 or run.c_x != 0.0:
        raise ConfigError(
            "reliability ladder needs a linear problem (kappa = c_x = 0)")
    v_ion = build_ionic_potential(spec, domain)
    return solve_reference(domain, v_ion, run.n_eigen,
                           grid=_oracle_grid(run))


def cmd_adapt(run: RunConfig) -> int:
    import numpy as np

    from .model import scf_reference
    from .refine import RefinementConfig, run_adaptive, run_uniform, \
        write_history

    if run.refine is None:
        raise ConfigError("[refine] section is required for the adapt command")
    domain, mesh, builder, spec, scf, penalty = _build_problem(run)

    rho_ref, ev_ref, _ = scf_reference(spec, scf, domain,
                                       grid=_oracle_grid(run),
                                       n_eigen=run.n_eigen)
    cfg = RefinementConfig(
        eps_min=run.refine["eps_min"], eps_max=run.refine["eps_max"],
        b_step=run.refine["b_step"], steps=run.refine["steps"],
        initial_counts=run.refine["initial_counts"],
        j_max=run.refine["j_max"], mode=run.refine["mode"])

    outdir = Path(run.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    histories = {}
    for name, runner in (("nonuniform", run_adaptive), ("uniform", run_uniform)):
        hist = runner(spec, scf, builder, penalty, cfg, n_eigen=run.n_eigen,
                      oracle_eigenvalues=ev_ref)
        write_history(hist, outdir / name, meta=_meta(run))
        histories[name] = hist
        print(f"wrote {outdir / name} ({len(hist)} steps)")

    sum_path = outdir / "summary.csv"
    with open(sum_path, "w", encoding="ascii", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["step", "dof_uniform", "dof_nonuniform", "err_uniform",
                    "err_nonuniform", "eta2_uniform", "eta2_nonuniform"])
        for ru, rn in zip(histories["uniform"].steps,
                          histories["nonuniform"].steps):
            w.writerow([ru.step, ru.total_dof, rn.total_dof,
                        repr(float(ru.eigsum_error)),
                        repr(float(rn.eigsum_error)),
                        repr(float(ru.report.eta2)),
                        repr(float(rn.report.eta2))])
    _write_sidecars([sum_path], run)
    print(f"wrote {sum_path}")
    return 0


def cmd_oracle(run: RunConfig) -> int:
    from .model import scf_reference

    domain, mesh, builder, spec, scf, penalty = _build_problem(run)
    outdir = Path(run.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    key = _oracle_key(run)
    bundle_path = outdir / "oracle.json"
    if bundle_path.is_file():
        try:
            existing = json.loads(bundle_path.read_text(encoding="ascii"))
        except json.JSONDecodeError:
            existing = {}
        if existing.get("key") == key:
            print("oracle cache: hit")
            return 0
    print("oracle cache: miss")

    grid = _oracle_grid(run)
    rho, ev, iters = scf_reference(spec, scf, domain, grid=grid,
                                   n_eigen=run.n_eigen)
    fine = tuple(2 * g for g in grid)
    _, ev_fine, _ = scf_reference(spec, scf, domain, grid=fine,
                                  n_eigen=run.n_eigen)
    drift = float(max(abs(a - b) for a, b in zip(ev, ev_fine)))
    if drift > ORACLE_SELF_TOL:
        raise NumericalError(
            f"oracle self-convergence failed: grid doubling moved "
            f"eigenvalues by {drift:.3e} > {ORACLE_SELF_TOL}")

    written = [bundle_path]
    _write_json(bundle_path, {
        "key": key,
        "grid": [int(g) for g in grid],
        "eigenvalues": [float(x) for x in ev],
        "iterations": iters,
        "self_convergence": drift,
    })
    written.extend(_write_density(outdir, "oracle_density", rho, run.lengths))
    _write_sidecars(written, run)
    for p in written:
        print(f"wrote {p}")
    return 0


def _planewave_ladder(run: RunConfig, floor: float = 0.0):
    """Planewave-count equivalents: eigenvalue-sum error per Fourier grid.

    Truth is the oracle-grid solve; each rung reports (occupied-sum error,
    planewave count at the rung's Nyquist cutoff). Stops once the ladder
    is at least as accurate as every history step (err <= floor).
    """
    import math

    from .local_solver import planewave_count
    from .model import scf_reference

    domain, mesh, builder, spec, scf, penalty = _build_problem(run)
    n_occ = run.electrons
    _, truth, _ = scf_reference(spec, scf, domain, grid=_oracle_grid(run),
                                n_eigen=run.n_eigen)
    truth_sum = float(sum(truth[:n_occ]))

    base = run.global_grid[0]
    cap = run.oracle_multiplier * base
    sizes = []
    n = 8
    while n < cap:
        sizes.append(n)
        n = int(1.25 * n)
        n += n % 2
    ladder = []
    for n0 in sizes:
        scaled = [int(round(n0 * g / base)) for g in run.global_grid]
        grid = tuple(max(8, m + m % 2) for m in scaled)
        _, ev, _ = scf_reference(spec, scf, domain, grid=grid,
                                 n_eigen=run.n_eigen)
        err = abs(float(sum(ev[:n_occ])) - truth_sum)
        e_cut = 0.5 * (math.pi * grid[0] / run.lengths[0]) ** 2
        count = planewave_count(e_cut, domain.volume, run.dim)
        ladder.append((err, count))
        if err <= floor:
            break
    return ladder


def cmd_report(run: RunConfig) -> int:
    from .refine import read_history_dir

    hist_dir = Path(run.output_dir)
    data = read_history_dir(hist_dir)
    steps = data["steps"]

    pw_ladder = None
    errs = [s["eigsum_error"] for s in steps if "eigsum_error" in s]
    if errs:
        pw_ladder = _planewave_ladder(run, floor=min(errs))

    report_dir = hist_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    err_path = report_dir / "error_vs_dof.csv"
    with open(err_path, "w", encoding="ascii", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["step", "total_dof", "eta2", "eigsum_error",
                    "planewave_count"])
        for s in steps:
            err = s.get("eigsum_error")
            pw = ""
            if err is not None and pw_ladder is not None:
                matches = [count for lerr, count in pw_ladder if lerr <= err]
                pw = repr(float(matches[0] if matches else pw_ladder[-1][1]))
            w.writerow([s["step"], s["total_dof"],
                        repr(float(s["estimator"]["eta2"])),
                        "" if err is None else repr(float(err)), pw])
    written.append(err_path)

    quin_path = report_dir / "quintiles.csv"
    with open(quin_path, "w", encoding="ascii", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["step", "q20", "q40", "q60", "q80", "q100"])
        for s in steps:
            w.writerow([s["step"]] + [repr(float(q))
                                      for q in s["estimator"]["quintiles"]])
    written.append(quin_path)

    heat_path = report_dir / "heatmap.csv"
    with open(heat_path, "w", encoding="ascii", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["step", "element", "eta_K2"])
        for s in steps:
            for k, val in enumerate(s["estimator"]["eta_K2"]):
                w.writerow([s["step"], k, repr(float(val))])
    written.append(heat_path)

    _write_sidecars(written, run)
    for p in written:
        print(f"wrote {p}")
    return 0


# ------------------------------------------------------------------ main

def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--threads", type=int, default=None,
                   help="pin BLAS/OpenMP thread pools")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="albdg",
        description="Adaptive local basis DG eigensolver front end")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="single SCF run at fixed counts")
    _add_common_flags(p_solve)
    p_solve.add_argument("--properties", action="store_true",
                         help="also run the numerical property battery")
    p_adapt = sub.add_parser("adapt",
                             help="adaptive and uniform refinement runs")
    _add_common_flags(p_adapt)
    p_oracle = sub.add_parser("oracle", help="fine-grid reference bundle")
    _add_common_flags(p_oracle)
    p_report = sub.add_parser("report",
                              help="plot-ready CSVs from a history directory")
    _add_common_flags(p_report)

    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("config error: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in THREAD_ENV_VARS:
            os.environ[var] = str(args.threads)

    try:
        run = load_run_config(args.config, out_override=args.out,
                              seed_override=args.seed)
        if args.command == "solve":
            return cmd_solve(run, with_properties=args.properties)
        if args.command == "adapt":
            return cmd_adapt(run)
        if args.command == "oracle":
            return cmd_oracle(run)
        return cmd_report(run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
