"""Shared fixtures: model problems reused across test modules.

Session-scoped because the two-well ladder, the demo refinement runs and
the nonlinear SCF solve are the expensive parts of the suite; every test
that consumes them treats them as read-only.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from albdg.basis import FamilyBuilder
from albdg.dg import PenaltyConfig
from albdg.estimator import build_constants, build_report
from albdg.mesh import Domain, build_mesh
from albdg.model import (PotentialSpec, SCFConfig, build_ionic_potential,
                         scf_reference, scf_solve)
from albdg.local_solver import solve_reference

TWO_PI = 2.0 * np.pi
LADDER = (8, 12, 16, 20, 24, 28)


@pytest.fixture(scope="session")
def repo_root():
    return REPO


@pytest.fixture(scope="session")
def penalty():
    return PenaltyConfig(gamma=20.0)


# ------------------------------------------------------------ free particle

@pytest.fixture(scope="session")
def free_problem():
    domain = Domain(dim=1, lengths=(TWO_PI,), global_grid=(64,))
    mesh = build_mesh(domain, (4,), (16,))
    builder = FamilyBuilder(mesh, budget=10)
    spec = PotentialSpec(wells=[], electrons=1)
    scf = SCFConfig(tol=1e-10)
    return domain, mesh, builder, spec, scf


@pytest.fixture(scope="session")
def free_state(free_problem, penalty):
    domain, mesh, builder, spec, scf = free_problem
    return scf_solve(spec, scf, builder, penalty, counts=9, n_eigen=5)


# ----------------------------------------------------------- two-well model

def _twowell_spec(kappa=0.0, c_x=0.0):
    spec = PotentialSpec(
        wells=[((2.0,), 22.0, 0.2), ((5.2,), 11.0, 0.28)], electrons=2)
    scf = SCFConfig(mixing=0.5, tol=1e-8 if kappa else 1e-10,
                    max_iter=200, kappa=kappa, c_x=c_x)
    return spec, scf


@pytest.fixture(scope="session")
def twowell_problem():
    domain = Domain(dim=1, lengths=(8.0,), global_grid=(128,))
    mesh = build_mesh(domain, (4,), (48,))
    builder = FamilyBuilder(mesh, budget=28)
    spec, scf = _twowell_spec()
    return domain, mesh, builder, spec, scf


@pytest.fixture(scope="session")
def twowell_reference(twowell_problem):
    """Fine-grid spectral eigenpairs of the linear two-well Hamiltonian."""
    domain, mesh, builder, spec, scf = twowell_problem
    v_ion = build_ionic_potential(spec, domain)
    return solve_reference(domain, v_ion, 4, grid=(256,))


@pytest.fixture(scope="session")
def twowell_ladder(twowell_problem, penalty):
    """J -> (solved SCF state, estimator report) along the basis ladder."""
    domain, mesh, builder, spec, scf = twowell_problem
    out = {}
    for j in LADDER:
        state = scf_solve(spec, scf, builder, penalty, counts=j, n_eigen=4)
        report = build_report(state.solution, state.v_elements,
                              build_constants(state.family, penalty))
        out[j] = (state, report)
    return out


@pytest.fixture(scope="session")
def twowell_scf(twowell_problem, penalty):
    """Nonlinear two-well solve plus its independent spectral SCF oracle."""
    domain, mesh, builder, _, _ = twowell_problem
    spec, scf = _twowell_spec(kappa=0.1, c_x=0.1)
    state = scf_solve(spec, scf, builder, penalty, counts=28, n_eigen=4)
    rho_ref, ev_ref, iters = scf_reference(spec, scf, domain, grid=(128,),
                                           n_eigen=4)
    return state, rho_ref, ev_ref, iters


# ------------------------------------------------------------- demo problem

@pytest.fixture(scope="session")
def demo_config_path(repo_root):
    return repo_root / "configs" / "demo.ini"


@pytest.fixture(scope="session")
def demo_histories(demo_config_path, tmp_path_factory):
    """Both refinement modes on the shipped well-cluster demo config."""
    from albdg.cli import cmd_adapt, load_run_config
    out = tmp_path_factory.mktemp("demo_adapt")
    run = load_run_config(demo_config_path, out_override=str(out))
    assert cmd_adapt(run) == 0
    return out
