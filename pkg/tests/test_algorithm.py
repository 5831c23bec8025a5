import json

import numpy as np
import pytest

from irsbf.algorithm import AlgorithmOptions, candidate_phases, initial_point, run_algorithm1, run_robust
from irsbf.channel import generate_channels
from irsbf.rates import weighted_sum_rate
from irsbf.scenario import default_geometry, desk_config

FAST = AlgorithmOptions(r_max=3, mc_samples=500)


def _channels(seed):
    cfg = desk_config(seed=seed)
    geom = default_geometry(cfg)
    return cfg, geom, generate_channels(cfg, geom)


@pytest.mark.parametrize("seed", range(3))
def test_single_outer_iteration_never_worse(seed):
    cfg, geom, ch = _channels(seed)
    init, *_ = initial_point(ch, cfg, lambda x: weighted_sum_rate(ch, x, cfg.weights))
    rec = run_algorithm1(cfg, geom, ch, AlgorithmOptions(r_max=1))
    assert rec.history[0] == pytest.approx(init, rel=1e-12)
    assert rec.rate >= init
    assert rec.outer_iterations == 1


@pytest.mark.parametrize("seed", range(3))
def test_history_is_best_so_far(seed):
    cfg, geom, ch = _channels(seed)
    rec = run_algorithm1(cfg, geom, ch)
    h = rec.history
    assert all(b >= a for a, b in zip(h, h[1:]))
    assert len(rec.raw_history) == len(h) == rec.outer_iterations + 1
    np.testing.assert_allclose(h, np.maximum.accumulate(rec.raw_history))
    assert rec.rate == pytest.approx(weighted_sum_rate(ch, rec.solution, cfg.weights), rel=1e-12)
    rec.solution.check(cfg.p_max)
    assert len(rec.per_user) == cfg.n_users and sum(rec.per_user) == pytest.approx(
        sum(weighted_sum_rate(ch, rec.solution, np.eye(cfg.n_users)[m]) for m in range(cfg.n_users)))


def test_runs_are_reproducible():
    cfg, geom, ch = _channels(4)
    a = run_algorithm1(cfg, geom, ch)
    b = run_algorithm1(cfg, geom, ch)
    assert a.history == b.history and a.raw_history == b.raw_history
    assert np.array_equal(a.solution.digital, b.solution.digital)
    assert np.array_equal(a.solution.phases, b.solution.phases)


def test_generated_channels_when_omitted():
    cfg, geom, ch = _channels(2)
    assert run_algorithm1(cfg, options=FAST).history == run_algorithm1(cfg, geom, ch, FAST).history


def test_record_collects_certificates_and_inner_rows():
    cfg, geom, ch = _channels(0)
    rec = run_algorithm1(cfg, geom, ch, FAST)
    assert len(rec.inner) == 2 * rec.outer_iterations
    assert rec.certificates
    assert {"outer", "m", "k", "rank_ratio", "rank_ok", "complementarity"} <= set(rec.certificates[0])
    assert len(rec.rank_ratios) == rec.outer_iterations * cfg.n_users * cfg.n_subcarriers
    assert [row["loop"] for row in rec.inner[:2]] == ["digital", "reflect"]
    assert all(row["iterations"] <= 15 for row in rec.inner)
    off = run_algorithm1(cfg, geom, ch, AlgorithmOptions(r_max=3, certificates=False))
    assert not off.certificates and off.history == rec.history


def test_candidate_starts_are_unit_modulus():
    _, _, ch = _channels(0)
    for phi in candidate_phases(ch):
        np.testing.assert_allclose(np.abs(phi), 1.0, atol=1e-12)


def test_identity_start_option():
    cfg, geom, ch = _channels(1)
    rec = run_algorithm1(cfg, geom, ch, AlgorithmOptions(r_max=2, init="ones"))
    assert np.isfinite(rec.rate)
    with pytest.raises(ValueError):
        run_algorithm1(cfg, geom, ch, AlgorithmOptions(r_max=1, init="nope"))


# -- robust ------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(2))
def test_robust_zero_ball_matches_perfect(seed):
    cfg, geom, ch = _channels(seed)
    perfect = run_algorithm1(cfg, geom, ch, FAST)
    robust = run_robust(cfg, geom, ch, eps=0.0, options=FAST)
    assert robust.rate == pytest.approx(perfect.rate, rel=1e-3)
    assert robust.certified_rate == pytest.approx(robust.rate)
    assert robust.mc_mean == pytest.approx(robust.rate, rel=1e-9)


@pytest.mark.parametrize("seed", range(2))
def test_certified_rate_is_a_lower_bound(seed):
    cfg, geom, ch = _channels(seed)
    rec = run_robust(cfg, geom, ch, eps=0.02, options=FAST)
    assert rec.certified_rate <= rec.mc_mean
    assert rec.mc_min >= rec.certified_rate * (1 - 1e-3)
    h = rec.history
    assert all(b >= a for a, b in zip(h, h[1:]))
    rec.solution.check(cfg.p_max)


def test_robust_draws_its_own_estimate():
    cfg = desk_config(seed=3)
    rec = run_robust(cfg, eps=0.01, options=AlgorithmOptions(r_max=2, mc_samples=100))
    assert rec.epsilon == 0.01 and np.isfinite(rec.certified_rate)
    with pytest.raises(ValueError):
        run_robust(cfg, eps=-1.0, options=FAST)


def test_json_record_fields():
    cfg, geom, ch = _channels(0)
    rec = run_robust(cfg, geom, ch, eps=0.01, options=AlgorithmOptions(r_max=2, mc_samples=100,
                                                                      soundness_samples=200))
    data = json.loads(rec.to_json())
    for key in ("config", "epsilon", "rate_bps", "certified_rate_bps", "monte_carlo_bps", "per_user_bps",
                "history_bps", "outer_iterations", "wall_time_s", "inner", "soundness", "solution"):
        assert key in data
    assert data["config"]["n_tx"] == cfg.n_tx
    assert len(data["solution"]["phases_rad"]) == cfg.n_irs
    assert data["solution"]["total_power_w"] <= cfg.p_max * (1 + 1e-6)
    assert data["soundness"] and all(row["ok"] for row in data["soundness"])
