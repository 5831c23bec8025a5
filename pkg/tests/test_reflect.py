import itertools

import numpy as np
import pytest

from conftest import crandn, random_unit_phases
from irsbf.algorithm import initial_point
from irsbf.channel import generate_channels
from irsbf.conic import NONNEG, PSD, SOC
from irsbf.rates import BeamformingSolution, weighted_sum_rate
from irsbf.reflect import (ReflectLift, build_reflect_lift, build_reflection_subproblem, init_reflect_state,
                           lifted_score, project_unit_modulus, recover_phases, sca_reflect_loop)
from irsbf.scenario import default_geometry, desk_config


def random_lift(rng, M=2, K=2, n=4):
    return ReflectLift(cross=3 * crandn(rng, M, M, K, n))


def lifted_objective(lift, W, weights):
    C = np.einsum("mjki,mjkl->mjkil", lift.cross.conj(), lift.cross)
    A = np.real(np.einsum("mjkil,li->mjk", C, W))
    sig = np.einsum("mmk->mk", A)
    return float(np.asarray(weights) @ np.log2(1 + sig / (A.sum(axis=1) - sig + 1.0)).sum(axis=1))


def test_lift_identity_on_random_phases(desk, rng):
    cfg, _, ch = desk
    F = np.exp(2j * np.pi * rng.uniform(size=(cfg.n_tx, cfg.n_rf))) / 4
    v = crandn(rng, cfg.n_users, cfg.n_subcarriers, cfg.n_rf)
    lift = build_reflect_lift(ch, F, v, cfg.p_max, ch.noise_power)
    scale = np.sqrt(cfg.p_max / ch.noise_power)
    for _ in range(5):
        phi = random_unit_phases(rng, cfg.n_irs)
        for m in range(cfg.n_users):
            for k in range(cfg.n_subcarriers):
                z = ch.u_gain[m, k] * ch.h_bs_irs[k] @ F @ v[m, k] * scale
                direct = ch.g_irs_user[m, k] @ np.diag(phi) @ z
                assert lift.c_vectors[m, k] @ phi == pytest.approx(direct, rel=1e-12)
                ones = np.ones(cfg.n_irs)
                assert lift.c_vectors[m, k] @ ones == pytest.approx(ch.g_irs_user[m, k] @ z, rel=1e-12)


def test_single_element_lift(rng):
    lift = random_lift(rng, M=1, K=1, n=1)
    assert lift.c_vectors.shape == (1, 1, 1)
    phi = np.exp(0.4j) * np.ones(1)
    assert lift.amplitudes(phi)[0, 0, 0] == pytest.approx(lift.cross[0, 0, 0, 0] * phi[0])


def test_lift_consistency(rng):
    lift = random_lift(rng)
    c = lift.c_vectors[1, 0]
    C = np.outer(c.conj(), c)
    for _ in range(10):
        phi = random_unit_phases(rng, 4)
        assert np.real(np.trace(C @ np.outer(phi, phi.conj()))) == pytest.approx(abs(c @ phi) ** 2, rel=1e-12)


def test_subproblem_structure(rng):
    lift = random_lift(rng)
    prog = build_reflection_subproblem(lift, init_reflect_state(lift, np.ones(4, dtype=complex)), [1, 1])
    assert prog.count(PSD) == 1 and prog.count(PSD, 4) == 1
    diag = [c for c in prog.constraints if c.name.startswith("diag[")]
    assert len(diag) == 4
    assert prog.count(NONNEG) + len(diag) == 3 * 2 * 2 + 4
    assert prog.count(SOC) == 4


def test_identity_start_feasible(rng):
    lift = random_lift(rng)
    state = init_reflect_state(lift, np.ones(4, dtype=complex))
    np.testing.assert_allclose(np.diag(state.origin), 1.0)
    assert np.all(state.t > 0) and np.all(state.b >= 1.0)


def test_loop_monotone_unit_diagonal(rng):
    lift = random_lift(rng)
    res = sca_reflect_loop(lift, init_reflect_state(lift, np.ones(4, dtype=complex)), [1, 1])
    hist = res.state.objective_history
    assert all(b >= a - 1e-7 for a, b in zip(hist, hist[1:]))
    np.testing.assert_allclose(np.diag(res.omega).real, 1.0, atol=1e-8)
    assert np.linalg.eigvalsh(res.omega)[0] >= -1e-8
    assert len(res.trace) <= 15


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("n_irs", [2, 3])
def test_single_user_matches_exhaustive_search(seed, n_irs):
    cfg = desk_config(seed=seed, n_users=1, n_subcarriers=1, n_irs=n_irs)
    ch = generate_channels(cfg, default_geometry(cfg))
    _, phases, sol, v = initial_point(ch, cfg, lambda x: weighted_sum_rate(ch, x, cfg.weights), "ones")
    lift = build_reflect_lift(ch, sol.analog, v, cfg.p_max, ch.noise_power)
    res = sca_reflect_loop(lift, init_reflect_state(lift, phases), cfg.weights)
    score = lifted_score(lift, cfg.weights)
    phi = recover_phases(res.omega, score=score)
    levels = np.exp(2j * np.pi * np.arange(16) / 16)
    best = max(score(np.array(c)) for c in itertools.product(levels, repeat=n_irs))
    assert score(phi) >= 0.98 * best


def test_recover_exact_lift(rng):
    phi0 = random_unit_phases(rng, 5)
    phi = recover_phases(np.outer(phi0, phi0.conj()))
    c = phi @ phi0.conj()
    np.testing.assert_allclose(phi, c / abs(c) * phi0, atol=1e-10)


def test_recover_identity_is_unit_modulus(rng):
    lift = random_lift(rng)
    phi = recover_phases(np.eye(4), score=lifted_score(lift, [1, 1]), rng=rng)
    np.testing.assert_allclose(np.abs(phi), 1.0, atol=0)


def test_projection_rules():
    out = project_unit_modulus(np.array([2.0, 0.0, -3j]))
    np.testing.assert_array_equal(out, [1.0, 1.0, -1j])
    phi = np.exp(1j * np.array([0.1, 2.0, -1.0]))
    assert np.allclose(np.diag(np.outer(phi, phi.conj())), 1.0)
    x = np.array([1.0, 0.5])
    assert not np.allclose(np.diag(np.outer(x, x)), 1.0)


def test_global_phase_invariance(desk, rng):
    cfg, _, ch = desk
    F = np.exp(2j * np.pi * rng.uniform(size=(cfg.n_tx, cfg.n_rf))) / 4
    v = 1e-2 * crandn(rng, cfg.n_users, cfg.n_subcarriers, cfg.n_rf)
    phi = random_unit_phases(rng, cfg.n_irs)
    a = weighted_sum_rate(ch, BeamformingSolution(F, v, phi), [1, 1])
    for theta in np.linspace(0, 2 * np.pi, 5):
        b = weighted_sum_rate(ch, BeamformingSolution(F, v, np.exp(1j * theta) * phi), [1, 1])
        assert b == pytest.approx(a, rel=1e-12)


def test_projection_close_to_lifted_objective():
    worst = 1.0
    for seed in range(50):
        cfg = desk_config(seed=seed)
        ch = generate_channels(cfg, default_geometry(cfg))
        _, phases, sol, v = initial_point(ch, cfg, lambda x: weighted_sum_rate(ch, x, cfg.weights))
        lift = build_reflect_lift(ch, sol.analog, v, cfg.p_max, ch.noise_power)
        res = sca_reflect_loop(lift, init_reflect_state(lift, phases), cfg.weights)
        score = lifted_score(lift, cfg.weights)
        phi = recover_phases(res.omega, score=score)
        worst = min(worst, score(phi) / lifted_objective(lift, res.omega, cfg.weights))
    assert worst >= 0.95
