"""Adaptive basis refinement driver and its uniform baseline.

The outer loop is the same for both modes: run the SCF at the current
per-element basis counts, build the a posteriori report, update the counts
from the element rollups, repeat. Histories record one entry per step and
serialize to a directory whose bytes depend only on the run inputs (wall
times are kept in memory for logging but never written).
"""
from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .errors import ConfigError, NonConvergenceError, NumericalError
from .estimator import (EstimatorReport, build_constants, build_report,
                        summary_dict, write_report_csv)
from .model import PotentialSpec, SCFConfig, scf_solve

MODES = ("nonuniform", "uniform")


@dataclass(frozen=True)
class RefinementConfig:
    """Thresholds and step schedule for the count-update rule.

    eps_min/eps_max act on the squared element rollups eta_K^2. j_max
    defaults to the local solve budget when left as None; the runners
    resolve it before the first step so refine_counts stays pure.
    """
    eps_min: float
    eps_max: float
    b_step: int
    steps: int
    initial_counts: object = 12
    j_max: Optional[int] = None
    mode: str = "nonuniform"

    def __post_init__(self):
        if not (self.eps_min > 0 and math.isfinite(self.eps_min)):
            raise ConfigError(f"eps_min must be positive, got {self.eps_min}")
        if not (self.eps_max > self.eps_min and math.isfinite(self.eps_max)):
            raise ConfigError(
                f"eps_max must exceed eps_min={self.eps_min}, got {self.eps_max}")
        if int(self.b_step) < 1:
            raise ConfigError(f"b_step must be >= 1, got {self.b_step}")
        if int(self.steps) < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.j_max is not None and int(self.j_max) < 0:
            raise ConfigError(f"j_max must be >= 0, got {self.j_max}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")


def refine_counts(counts, eta_k2, config: RefinementConfig) -> np.ndarray:
    """One application of the threshold rule, clamped to [0, j_max].

    Pure: the next counts depend only on the arguments, so a logged history
    can be replayed exactly. config.j_max must be resolved (not None).
    """
    if config.j_max is None:
        raise ConfigError("refine_counts needs a resolved j_max")
    counts = np.asarray(counts, dtype=int)
    eta = np.asarray(eta_k2, dtype=float)
    if counts.shape != eta.shape:
        raise ConfigError(
            f"counts shape {counts.shape} != eta_K2 shape {eta.shape}")
    out = counts.copy()
    out[eta < config.eps_min] -= int(config.b_step)
    out[eta > config.eps_max] += int(config.b_step)
    return np.clip(out, 0, int(config.j_max))


def uniform_counts(counts, config: RefinementConfig) -> np.ndarray:
    """Baseline rule: add b_step everywhere, same clamp."""
    if config.j_max is None:
        raise ConfigError("uniform_counts needs a resolved j_max")
    counts = np.asarray(counts, dtype=int)
    return np.clip(counts + int(config.b_step), 0, int(config.j_max))


@dataclass
class StepRecord:
    """One refinement step. wall_time is diagnostic only, never serialized."""
    step: int
    counts: np.ndarray            # requested per-element counts (rule state)
    realized_counts: np.ndarray   # counts the basis build actually delivered
    total_dof: int
    eigenvalues: np.ndarray
    report: EstimatorReport
    scf_iterations: int
    scf_residual: float
    oracle_errors: Optional[np.ndarray] = None
    eigsum_error: Optional[float] = None
    wall_time: float = 0.0


@dataclass
class RefinementHistory:
    mode: str
    electrons: int
    steps: List[StepRecord] = field(default_factory=list)
    density: Optional[np.ndarray] = None
    domain: object = None

    def __len__(self) -> int:
        return len(self.steps)

    def total_dofs(self) -> List[int]:
        return [rec.total_dof for rec in self.steps]


class RefinementAborted(NumericalError):
    """SCF failed mid-run; carries whatever steps completed."""

    def __init__(self, message: str, history: RefinementHistory,
                 residual: float):
        super().__init__(message)
        self.history = history
        self.residual = residual


def _resolve_initial(cfg: RefinementConfig, n_elements: int,
                     j_max: int) -> np.ndarray:
    counts = np.asarray(cfg.initial_counts, dtype=int)
    if counts.ndim == 0:
        counts = np.full(n_elements, int(counts))
    if counts.shape != (n_elements,):
        raise ConfigError(
            f"initial_counts needs {n_elements} entries, got shape {counts.shape}")
    if counts.min() < 0 or counts.max() > j_max:
        raise ConfigError(
            f"initial_counts must lie in [0, {j_max}], got "
            f"[{counts.min()}, {counts.max()}]")
    return counts


def _run_loop(spec: PotentialSpec, scf: SCFConfig, builder, penalty,
              cfg: RefinementConfig, update, mode: str,
              n_eigen: Optional[int],
              oracle_eigenvalues: Optional[np.ndarray]) -> RefinementHistory:
    j_max = int(cfg.j_max) if cfg.j_max is not None else int(builder.budget)
    if j_max > builder.budget:
        raise ConfigError(
            f"j_max={j_max} exceeds local solve budget {builder.budget}")
    resolved = dataclasses.replace(cfg, j_max=j_max)
    counts = _resolve_initial(resolved, builder.mesh.n_elements, j_max)
    n_occ = spec.electrons
    if n_eigen is None:
        n_eigen = n_occ
    if oracle_eigenvalues is not None:
        oracle_eigenvalues = np.asarray(oracle_eigenvalues, dtype=float)
        if oracle_eigenvalues.size < n_eigen:
            raise ConfigError(
                f"oracle supplies {oracle_eigenvalues.size} eigenvalues, "
                f"need {n_eigen}")

    history = RefinementHistory(mode=mode, electrons=n_occ,
                                domain=builder.mesh.domain)
    rho = None
    for step in range(resolved.steps):
        t0 = time.perf_counter()
        try:
            state = scf_solve(spec, scf, builder, penalty, counts=counts,
                              n_eigen=n_eigen, rho0=rho)
        except NonConvergenceError as exc:
            raise RefinementAborted(
                f"SCF did not converge at refinement step {step}: {exc}",
                history=history, residual=exc.residual) from exc
        rho = state.rho
        constants = build_constants(state.family, penalty)
        report = build_report(state.solution, state.v_elements, constants,
                              step=step)
        errors = None
        eigsum = None
        if oracle_eigenvalues is not None:
            ref = oracle_eigenvalues[:n_eigen]
            errors = np.abs(state.solution.eigenvalues - ref)
            eigsum = abs(float(np.sum(
                state.solution.eigenvalues[:n_occ] - ref[:n_occ])))
        history.steps.append(StepRecord(
            step=step,
            counts=counts.copy(),
            realized_counts=state.family.counts.copy(),
            total_dof=int(state.family.total_dof),
            eigenvalues=state.solution.eigenvalues.copy(),
            report=report,
            scf_iterations=state.iterations,
            scf_residual=float(state.residuals[-1]),
            oracle_errors=errors,
            eigsum_error=eigsum,
            wall_time=time.perf_counter() - t0))
        if step < resolved.steps - 1:
            counts = update(counts, report.eta_k2, resolved)
    history.density = rho
    return history


def run_adaptive(spec: PotentialSpec, scf: SCFConfig, builder, penalty,
                 cfg: RefinementConfig, n_eigen: Optional[int] = None,
                 oracle_eigenvalues=None) -> RefinementHistory:
    """Threshold-driven redistribution of per-element basis counts."""
    def update(counts, eta_k2, resolved):
        return refine_counts(counts, eta_k2, resolved)
    return _run_loop(spec, scf, builder, penalty, cfg, update, "nonuniform",
                     n_eigen, oracle_eigenvalues)


def run_uniform(spec: PotentialSpec, scf: SCFConfig, builder, penalty,
                cfg: RefinementConfig, n_eigen: Optional[int] = None,
                oracle_eigenvalues=None) -> RefinementHistory:
    """Baseline: every element gains b_step functions per step."""
    def update(counts, eta_k2, resolved):
        return uniform_counts(counts, resolved)
    return _run_loop(spec, scf, builder, penalty, cfg, update, "uniform",
                     n_eigen, oracle_eigenvalues)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                    encoding="ascii")


def _step_payload(rec: StepRecord) -> Dict:
    payload = {
        "step": rec.step,
        "counts": [int(c) for c in rec.counts],
        "realized_counts": [int(c) for c in rec.realized_counts],
        "total_dof": rec.total_dof,
        "eigenvalues": [float(x) for x in rec.eigenvalues],
        "scf_iterations": rec.scf_iterations,
        "scf_residual": float(rec.scf_residual),
        "estimator": summary_dict(rec.report),
    }
    if rec.oracle_errors is not None:
        payload["oracle_errors"] = [float(x) for x in rec.oracle_errors]
        payload["eigsum_error"] = float(rec.eigsum_error)
    return payload


def write_history(history: RefinementHistory, outdir,
                  meta: Optional[Dict] = None) -> List[Path]:
    """Serialize a history to a directory of deterministic files.

    Layout: step_NNN.json per step, estimator.csv with every (step, i, K)
    term, density.bin (little-endian float64, C order) with density.json
    describing dims/lengths/dtype, and summary.json. When meta is given,
    every written file gains a <name>.meta.json sidecar with that payload.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    for rec in history.steps:
        p = out / f"step_{rec.step:03d}.json"
        _write_json(p, _step_payload(rec))
        written.append(p)

    csv_path = out / "estimator.csv"
    write_report_csv([rec.report for rec in history.steps], csv_path)
    written.append(csv_path)

    if history.density is not None:
        dens = np.ascontiguousarray(history.density, dtype="<f8")
        bin_path = out / "density.bin"
        bin_path.write_bytes(dens.tobytes())
        written.append(bin_path)
        sidecar = {
            "dims": [int(n) for n in dens.shape],
            "lengths": [float(x) for x in history.domain.lengths],
            "dtype": "<f8",
            "order": "C",
        }
        side_path = out / "density.json"
        _write_json(side_path, sidecar)
        written.append(side_path)

    last = history.steps[-1]
    summary = {
        "mode": history.mode,
        "electrons": history.electrons,
        "steps": len(history.steps),
        "final_counts": [int(c) for c in last.counts],
        "final_realized_counts": [int(c) for c in last.realized_counts],
        "final_total_dof": last.total_dof,
        "final_eigenvalues": [float(x) for x in last.eigenvalues],
        "final_eta2": float(last.report.eta2),
        "total_dofs": history.total_dofs(),
    }
    if last.eigsum_error is not None:
        summary["final_eigsum_error"] = float(last.eigsum_error)
    sum_path = out / "summary.json"
    _write_json(sum_path, summary)
    written.append(sum_path)

    if meta is not None:
        for p in list(written):
            mp = p.with_name(p.name + ".meta.json")
            _write_json(mp, meta)
            written.append(mp)
    return written


def read_history_dir(path) -> Dict:
    """Load a serialized history back as plain dictionaries and arrays."""
    root = Path(path)
    step_files = sorted(p for p in root.glob("step_*.json")
                        if not p.name.endswith(".meta.json"))
    if not step_files:
        raise ConfigError(f"no step files found under {root}")
    steps = [json.loads(p.read_text(encoding="ascii")) for p in step_files]
    out = {"steps": steps}
    sum_path = root / "summary.json"
    if sum_path.exists():
        out["summary"] = json.loads(sum_path.read_text(encoding="ascii"))
    side_path = root / "density.json"
    bin_path = root / "density.bin"
    if side_path.exists() and bin_path.exists():
        sidecar = json.loads(side_path.read_text(encoding="ascii"))
        dens = np.frombuffer(bin_path.read_bytes(), dtype=sidecar["dtype"])
        out["density"] = dens.reshape(sidecar["dims"])
        out["density_sidecar"] = sidecar
    return out
