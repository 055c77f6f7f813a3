"""Tests for the count-update rules and the adaptive refinement driver."""

import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from albdg.errors import ConfigError
from albdg.model import PotentialSpec, SCFConfig
from albdg.refine import (
    RefinementAborted,
    RefinementConfig,
    read_history_dir,
    refine_counts,
    run_adaptive,
    run_uniform,
    uniform_counts,
    write_history,
)

BAND = dict(eps_min=1e-2, eps_max=1.0, b_step=5, steps=3, j_max=40)


# ---------------------------------------------------------------------------
# the update rules in isolation
# ---------------------------------------------------------------------------


def test_threshold_rule_worked_example():
    cfg = RefinementConfig(**BAND)
    counts = [25, 25, 25]
    eta_k2 = [1e-3, 2.0, 0.5]  # below band, above band, in band
    assert refine_counts(counts, eta_k2, cfg).tolist() == [20, 30, 25]


def test_counts_clamp_to_valid_range():
    cfg = RefinementConfig(**BAND)
    got = refine_counts([2, 38], [1e-3, 2.0], cfg)
    assert got.tolist() == [0, 40]


def test_in_band_estimates_are_a_fixed_point():
    cfg = RefinementConfig(**BAND)
    counts = np.array([7, 19, 40])
    got = refine_counts(counts, [0.5, 0.5, 0.5], cfg)
    assert np.array_equal(got, counts)


def test_rule_requires_resolved_budget_and_matching_shapes():
    unresolved = RefinementConfig(eps_min=1e-2, eps_max=1.0, b_step=5, steps=3)
    with pytest.raises(ConfigError):
        refine_counts([1, 2], [0.5, 0.5], unresolved)
    with pytest.raises(ConfigError):
        uniform_counts([1, 2], unresolved)
    cfg = RefinementConfig(**BAND)
    with pytest.raises(ConfigError):
        refine_counts([1, 2, 3], [0.5, 0.5], cfg)


def test_uniform_rule_adds_everywhere():
    cfg = RefinementConfig(eps_min=1e-2, eps_max=1.0, b_step=4, steps=3,
                           j_max=40)
    assert uniform_counts([0, 10, 38], cfg).tolist() == [4, 14, 40]


@pytest.mark.parametrize("bad", [
    dict(eps_min=0.0),
    dict(eps_min=-1.0),
    dict(eps_max=1e-3),        # <= eps_min
    dict(b_step=0),
    dict(steps=0),
    dict(j_max=-1),
    dict(mode="aggressive"),
])
def test_config_validation(bad):
    kwargs = dict(eps_min=1e-2, eps_max=1.0, b_step=5, steps=3)
    kwargs.update(bad)
    with pytest.raises(ConfigError):
        RefinementConfig(**kwargs)


@settings(max_examples=50, deadline=None)
@given(
    counts=st.lists(st.integers(min_value=0, max_value=40), min_size=1,
                    max_size=8),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
    b_step=st.integers(min_value=1, max_value=7),
)
def test_threshold_rule_is_pure_and_directionally_correct(counts, seed,
                                                          b_step):
    cfg = RefinementConfig(eps_min=1e-2, eps_max=1.0, b_step=b_step, steps=1,
                           j_max=40)
    rng = np.random.default_rng(seed)
    eta = 10.0 ** rng.uniform(-4, 2, size=len(counts))
    first = refine_counts(counts, eta, cfg)
    again = refine_counts(counts, eta, cfg)
    assert np.array_equal(first, again)
    assert first.min() >= 0 and first.max() <= 40
    for c_old, c_new, e in zip(counts, first, eta):
        if e < cfg.eps_min:
            assert c_new <= c_old
        elif e > cfg.eps_max:
            assert c_new >= c_old
        else:
            assert c_new == c_old


# ---------------------------------------------------------------------------
# the driver on a real problem
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def short_histories(twowell_problem, twowell_reference, penalty):
    domain, mesh, builder, spec, scf = twowell_problem
    ev_ref = twowell_reference.eigenvalues
    cfg = RefinementConfig(eps_min=1e-8, eps_max=3e-4, b_step=4, steps=3,
                           initial_counts=8)
    adaptive = run_adaptive(spec, scf, builder, penalty, cfg, n_eigen=4,
                            oracle_eigenvalues=ev_ref)
    uniform = run_uniform(spec, scf, builder, penalty, cfg, n_eigen=4,
                          oracle_eigenvalues=ev_ref)
    return cfg, adaptive, uniform


def test_adaptive_history_replays_from_its_own_reports(short_histories,
                                                       twowell_problem):
    cfg, adaptive, _ = short_histories
    builder = twowell_problem[2]
    resolved = dataclasses.replace(cfg, j_max=builder.budget)
    assert len(adaptive) == 3
    for prev, nxt in zip(adaptive.steps, adaptive.steps[1:]):
        replay = refine_counts(prev.counts, prev.report.eta_k2, resolved)
        assert np.array_equal(replay, nxt.counts)


def test_history_records_are_consistent(short_histories):
    _, adaptive, _ = short_histories
    for rec in adaptive.steps:
        assert rec.total_dof == int(np.sum(rec.realized_counts))
        assert np.isfinite(rec.scf_residual)
        assert rec.oracle_errors is not None
        assert rec.eigsum_error >= 0.0
        assert rec.report.eta2 >= 0.0
    assert adaptive.total_dofs() == [r.total_dof for r in adaptive.steps]
    assert adaptive.density is not None


def test_uniform_counts_dominate_adaptive_elementwise(short_histories):
    _, adaptive, uniform = short_histories
    assert uniform.mode == "uniform" and adaptive.mode == "nonuniform"
    for rec_a, rec_u in zip(adaptive.steps, uniform.steps):
        assert np.all(rec_u.counts >= rec_a.counts)
        assert rec_u.total_dof >= rec_a.total_dof


def test_estimator_decreases_under_uniform_enrichment(short_histories):
    _, _, uniform = short_histories
    eta2 = [rec.report.eta2 for rec in uniform.steps]
    assert eta2[-1] < eta2[0]


def test_history_round_trip(short_histories, tmp_path):
    _, adaptive, _ = short_histories
    meta = {"config_sha256": "ab" * 32, "version": "test"}
    written = write_history(adaptive, tmp_path / "run", meta=meta)
    loaded = read_history_dir(tmp_path / "run")

    assert len(loaded["steps"]) == len(adaptive.steps)
    for rec, payload in zip(adaptive.steps, loaded["steps"]):
        assert payload["counts"] == [int(c) for c in rec.counts]
        assert np.allclose(payload["eigenvalues"], rec.eigenvalues,
                           atol=0, rtol=0)
        assert "wall_time" not in payload
    assert loaded["summary"]["final_total_dof"] == adaptive.steps[-1].total_dof
    assert np.array_equal(loaded["density"], adaptive.density)
    assert loaded["density_sidecar"]["dtype"] == "<f8"

    # every data file gains a sidecar carrying the provided metadata
    data_files = [p for p in written if not p.name.endswith(".meta.json")]
    for p in data_files:
        side = p.with_name(p.name + ".meta.json")
        assert side.exists()
        assert json.loads(side.read_text()) == meta


def test_reading_an_empty_directory_fails(tmp_path):
    with pytest.raises(ConfigError):
        read_history_dir(tmp_path)


def test_unstable_scf_aborts_with_partial_history(twowell_problem, penalty):
    domain, mesh, builder, spec, _ = twowell_problem
    hot_spec = PotentialSpec(wells=spec.wells, electrons=2)
    hot = SCFConfig(mixing=1.0, tol=1e-12, max_iter=3, kappa=5.0, c_x=2.0)
    cfg = RefinementConfig(eps_min=1e-8, eps_max=3e-4, b_step=4, steps=2,
                           initial_counts=8)
    with pytest.raises(RefinementAborted) as err:
        run_adaptive(hot_spec, hot, builder, penalty, cfg, n_eigen=4)
    assert "step 0" in str(err.value)
    assert err.value.residual > 0.0
    assert len(err.value.history) == 0


def test_driver_validates_inputs(twowell_problem, twowell_reference, penalty):
    domain, mesh, builder, spec, scf = twowell_problem
    ev_ref = twowell_reference.eigenvalues
    over = RefinementConfig(eps_min=1e-8, eps_max=3e-4, b_step=4, steps=2,
                            initial_counts=8, j_max=builder.budget + 1)
    with pytest.raises(ConfigError):
        run_adaptive(spec, scf, builder, penalty, over, n_eigen=4)
    wrong_len = RefinementConfig(eps_min=1e-8, eps_max=3e-4, b_step=4,
                                 steps=2, initial_counts=[8, 8])
    with pytest.raises(ConfigError):
        run_adaptive(spec, scf, builder, penalty, wrong_len, n_eigen=4)
    too_big = RefinementConfig(eps_min=1e-8, eps_max=3e-4, b_step=4, steps=2,
                               initial_counts=builder.budget + 1)
    with pytest.raises(ConfigError):
        run_adaptive(spec, scf, builder, penalty, too_big, n_eigen=4)
    ok = RefinementConfig(eps_min=1e-8, eps_max=3e-4, b_step=4, steps=2,
                          initial_counts=8)
    with pytest.raises(ConfigError):
        run_adaptive(spec, scf, builder, penalty, ok, n_eigen=6,
                     oracle_eigenvalues=ev_ref[:4])
