"""Analog beamformer from the subcarrier-averaged channel Gram matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class GramAverage:
    sigma: np.ndarray
    lambda_scale: float = 1.0


def average_gram(effective, p_max=None, n_rf=None):
    """Mean of ``H_k^H H_k`` over the leading axis of ``effective`` (K, M, N_TX).

    With ``p_max`` and ``n_rf`` the equal-power scale
    ``sqrt(p_max / (K * N_TX * N_RF))`` is attached as ``lambda_scale``.
    """
    H = np.asarray(effective, dtype=complex)
    if H.ndim != 3:
        raise ValueError("expected stacked matrices of shape (K, M, N_TX)")
    K, _, n_tx = H.shape
    sigma = np.einsum("kmi,kmj->ij", H.conj(), H) / K
    sigma = 0.5 * (sigma + sigma.conj().T)
    lam = 1.0 if p_max is None else float(np.sqrt(p_max / (K * n_tx * n_rf)))
    return GramAverage(sigma=sigma, lambda_scale=lam)


def _phase_key(v):
    return tuple(np.round(np.angle(v), 12))


def sorted_eigenvectors(sigma):
    """Eigenvectors by descending eigenvalue, each normalised so its largest
    entry is real positive; exact ties ordered by the entries' phases."""
    w, U = np.linalg.eigh(np.asarray(sigma, dtype=complex))
    order = np.argsort(-w, kind="stable")
    w, U = w[order], U[:, order]
    for j in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, j]) > np.abs(U[:, j]).max() * (1 - 1e-9)))
        U[:, j] *= np.exp(-1j * np.angle(U[i, j]))
    scale = max(abs(w[0]), 1e-300) if len(w) else 1.0
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and abs(w[stop] - w[start]) <= 1e-12 * scale:
            stop += 1
        if stop - start > 1:
            idx = sorted(range(start, stop), key=lambda j: _phase_key(U[:, j]))
            U[:, start:stop] = U[:, idx]
        start = stop
    return w, U


def phase_of(z):
    """Angle with the convention angle(0) = 0."""
    z = np.asarray(z)
    return np.where(np.abs(z) > 0, np.angle(z), 0.0)


def analog_phases(gram, n_rf):
    """``F(i, j) = exp(j * angle(S(i, j))) / sqrt(N_TX)`` from the leading eigenvectors."""
    sigma = gram.sigma if isinstance(gram, GramAverage) else np.asarray(gram)
    n_tx = sigma.shape[0]
    if n_rf > n_tx:
        raise ValueError("n_rf exceeds the number of antennas")
    _, U = sorted_eigenvectors(sigma)
    return np.exp(1j * phase_of(U[:, :n_rf])) / np.sqrt(n_tx)


def capacity_proxy(F, gram, delta2):
    """``log det(I + (lambda / delta2) F^H Sigma F)`` in nats."""
    M = np.eye(F.shape[1]) + (gram.lambda_scale / delta2) * (F.conj().T @ gram.sigma @ F)
    sign, logdet = np.linalg.slogdet(M)
    return float(logdet)


def reference_digital(h_eff_f, F, power):
    """Equal-power eigenmode precoder ``(F^H F)^{-1/2} U_e Gamma_e`` for one subcarrier.

    ``h_eff_f`` is the (M, N_RF) product of the stacked effective channel and
    ``F``; ``power`` is the per-subcarrier budget on ``||F V||_F^2``.
    """
    G = F.conj().T @ F
    if np.linalg.matrix_rank(G) < G.shape[0]:
        raise ValueError("analog beamformer is rank deficient")
    G_isqrt = scipy.linalg.fractional_matrix_power(G, -0.5)
    _, _, Vh = np.linalg.svd(np.asarray(h_eff_f) @ G_isqrt)
    n_rf = F.shape[1]
    U_e = Vh.conj().T[:, :n_rf]          # full basis, also when M < N_RF
    return np.sqrt(power / n_rf) * (G_isqrt @ U_e)
