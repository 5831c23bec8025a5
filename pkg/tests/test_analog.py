import numpy as np
import pytest

from conftest import crandn
from irsbf.analog import analog_phases, average_gram, capacity_proxy, reference_digital


def test_single_subcarrier_gram(rng):
    H = crandn(rng, 1, 3, 5)
    np.testing.assert_allclose(average_gram(H).sigma, H[0].conj().T @ H[0], atol=1e-14)


def test_zero_channel_gram():
    assert not np.any(average_gram(np.zeros((4, 2, 6))).sigma)


def test_gram_naive_triple_loop(rng):
    H = crandn(rng, 3, 2, 4)
    naive = np.zeros((4, 4), dtype=complex)
    for k in range(3):
        for i in range(4):
            for j in range(4):
                naive[i, j] += sum(np.conj(H[k, m, i]) * H[k, m, j] for m in range(2)) / 3
    np.testing.assert_allclose(average_gram(H).sigma, naive, atol=1e-12)


def test_gram_properties_and_scale(rng):
    H = crandn(rng, 5, 2, 8)
    g = average_gram(H, p_max=2.0, n_rf=2)
    np.testing.assert_allclose(g.sigma, g.sigma.conj().T, atol=1e-12)
    w = np.linalg.eigvalsh(g.sigma)
    assert w[0] >= -1e-10 * w[-1]
    assert np.trace(g.sigma).real == pytest.approx(np.mean(np.sum(np.abs(H) ** 2, axis=(1, 2))))
    assert g.lambda_scale == pytest.approx(np.sqrt(2.0 / (5 * 8 * 2)))
    with pytest.raises(ValueError):
        average_gram(H[0])


def test_diagonal_gram_gives_zero_phases():
    F = analog_phases(np.diag([5.0, 4.0, 3.0, 2.0, 1.0]), 3)
    np.testing.assert_allclose(F, np.full((5, 3), 1 / np.sqrt(5)), atol=1e-15)


def test_rank_one_gram_follows_channel_phases(rng):
    h = crandn(rng, 6)
    F = analog_phases(np.outer(h, h.conj()), 2)
    rel = np.angle(F[:, 0] * np.conj(F[0, 0]))
    np.testing.assert_allclose(np.exp(1j * rel), np.exp(1j * np.angle(h * np.conj(h[0]))), atol=1e-10)


def test_entry_modulus_and_scale_invariance(rng):
    G = crandn(rng, 8, 8)
    sigma = G @ G.conj().T
    F = analog_phases(sigma, 3)
    np.testing.assert_allclose(np.abs(F), 1 / np.sqrt(8), rtol=0, atol=1e-15)
    np.testing.assert_allclose(analog_phases(7.5 * sigma, 3), F, atol=1e-12)
    with pytest.raises(ValueError):
        analog_phases(sigma, 9)


def test_ties_are_deterministic():
    a = analog_phases(np.eye(4), 2)
    b = analog_phases(np.eye(4).copy(), 2)
    assert np.array_equal(a, b)


def test_design_beats_random_phases(rng):
    H = crandn(rng, 4, 2, 16)
    gram = average_gram(H, p_max=1.0, n_rf=2)
    F = analog_phases(gram, 2)
    ours = capacity_proxy(F, gram, 1e-2)
    rand = [capacity_proxy(np.exp(2j * np.pi * rng.uniform(size=(16, 2))) / 4, gram, 1e-2) for _ in range(100)]
    assert ours > np.mean(rand)


def test_reference_digital_single_stream(rng):
    F = np.exp(2j * np.pi * rng.uniform(size=(8, 1))) / np.sqrt(8)
    hF = crandn(rng, 1, 1) @ np.ones((1, 1))
    V = reference_digital(hF, F, 0.3)
    assert np.linalg.norm(F @ V) ** 2 == pytest.approx(0.3)
    h = crandn(rng, 1, 8)
    F2 = np.exp(2j * np.pi * rng.uniform(size=(8, 2))) / np.sqrt(8)
    V2 = reference_digital(h @ F2, F2, 0.3)
    # single user, two streams at equal power: stream 1 is the best direction
    G = F2.conj().T @ F2
    best = 0.3 / 2 * np.real(h @ F2 @ np.linalg.solve(G, F2.conj().T @ h.conj().T))[0, 0]
    assert abs(h @ F2 @ V2[:, 0]) ** 2 == pytest.approx(best, rel=1e-10)
    assert np.linalg.norm(F2 @ V2) ** 2 == pytest.approx(0.3)


def test_reference_digital_orthonormal_analog(rng):
    n = 8
    F = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(2)) / n) / np.sqrt(n)
    np.testing.assert_allclose(F.conj().T @ F, np.eye(2), atol=1e-14)
    hF = crandn(rng, 2, 2)
    V = reference_digital(hF, F, 1.0)
    _, _, Vh = np.linalg.svd(hF)
    np.testing.assert_allclose(V, np.sqrt(0.5) * Vh.conj().T, atol=1e-12)


def test_reference_digital_rejects_rank_deficient(rng):
    F = np.ones((4, 2)) / 2
    with pytest.raises(ValueError):
        reference_digital(crandn(rng, 2, 2), F, 1.0)


def test_gram_deviation_shrinks_with_antennas():
    dev = {16: [], 64: []}
    for seed in range(100):
        rng = np.random.default_rng(seed)
        for n in dev:
            G = crandn(rng, n, n)
            F = analog_phases(G @ G.conj().T, 2)
            dev[n].append(np.linalg.norm(F.conj().T @ F - np.eye(2)))
    assert np.mean(dev[64]) < np.mean(dev[16])
