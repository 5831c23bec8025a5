"""Effective channels, SINR and achievable rates of a hybrid beamforming solution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import sample_ball


@dataclass(frozen=True)
class BeamformingSolution:
    """analog (N_TX, N_RF), digital (M, K, N_RF), phases (N_IRS,) with |phi_i| = 1."""

    analog: np.ndarray
    digital: np.ndarray
    phases: np.ndarray

    def total_power(self):
        x = np.einsum("tr,mkr->mkt", self.analog, self.digital)
        return float(np.sum(np.abs(x) ** 2))

    def check(self, p_max, tol=1e-6):
        """Raise ``ValueError`` if a constraint of the joint design is violated."""
        n_tx = self.analog.shape[0]
        if not np.allclose(np.abs(self.analog), 1 / np.sqrt(n_tx), rtol=0, atol=1e-12):
            raise ValueError("analog entries must have modulus 1/sqrt(N_TX)")
        if not np.allclose(np.abs(self.phases), 1.0, rtol=0, atol=1e-12):
            raise ValueError("reflection coefficients must be unit-modulus")
        if self.total_power() > p_max * (1 + tol):
            raise ValueError(f"total power {self.total_power():.6g} exceeds {p_max:.6g}")


def effective_channel(ch, phases, m, k):
    """Row ``u_m[k] g_m[k] diag(phases) H[k]`` of length N_TX."""
    return ch.u_gain[m, k] * (ch.g_irs_user[m, k] * phases) @ ch.h_bs_irs[k]


def effective_channels(ch, phases):
    """All effective rows, shape (M, K, N_TX)."""
    return ch.u_gain[..., None] * np.einsum("mki,i,kit->mkt", ch.g_irs_user, phases, ch.h_bs_irs)


def gain_matrix(ch, sol, g=None):
    """``A[..., m, j, k] = h_m[k] F v_j[k]``; ``g`` may carry leading sample axes."""
    g = ch.g_irs_user if g is None else g
    w = np.einsum("kit,tr,jkr->jki", ch.h_bs_irs, sol.analog, sol.digital)
    return ch.u_gain[:, None, :] * np.einsum("...mki,i,jki->...mjk", g, sol.phases, w)


def sinr_from_gains(A, noise):
    p = np.abs(A) ** 2
    sig = np.diagonal(p, axis1=-3, axis2=-2)            # (..., K, M)
    sig = np.moveaxis(sig, -1, -2)                       # (..., M, K)
    interf = p.sum(axis=-2) - sig
    return sig / (interf + noise)


def sinr(ch, sol, delta2=None):
    """Per-user, per-subcarrier SINR, shape (M, K)."""
    noise = ch.noise_power if delta2 is None else delta2
    return sinr_from_gains(gain_matrix(ch, sol), noise)


def rate_matrix(ch, sol, delta2=None):
    """Rates ``R_m[k]`` in bit/s, shape (M, K)."""
    return ch.spacing * np.log2(1 + sinr(ch, sol, delta2))


def user_rate(ch, sol, m, k, delta2=None):
    noise = ch.noise_power if delta2 is None else delta2
    h = effective_channel(ch, sol.phases, m, k)
    amp = h @ sol.analog @ sol.digital[:, k, :].T
    sig = abs(amp[m]) ** 2
    interf = float(np.sum(np.abs(amp) ** 2) - sig)
    return ch.spacing * np.log2(1 + sig / (interf + noise))


def per_user_rates(ch, sol, delta2=None):
    return rate_matrix(ch, sol, delta2).sum(axis=1)


def weighted_sum_rate(ch, sol, weights, delta2=None):
    """``sum_m alpha_m sum_k R_m[k]`` in bit/s."""
    return float(np.asarray(weights, dtype=float) @ per_user_rates(ch, sol, delta2))


@dataclass(frozen=True)
class MonteCarloRate:
    mean: float
    min: float


def robust_rate_mc(ch, sol, eps, n_samples, rng, weights=None, batch=256):
    """Weighted sum rate over ``n_samples`` IRS->user channels ``g_est + delta``
    with ``delta`` uniform in the ball ``||delta||^2 <= eps`` (independent per link)."""
    if eps < 0 or n_samples < 1:
        raise ValueError("need eps >= 0 and n_samples >= 1")
    weights = np.ones(ch.n_users) if weights is None else np.asarray(weights, dtype=float)
    total, worst, done = 0.0, np.inf, 0
    while done < n_samples:
        s = min(batch, n_samples - done)
        delta = sample_ball(rng, (s, ch.n_users, ch.n_subcarriers), ch.n_irs, eps)
        A = gain_matrix(ch, sol, ch.g_irs_user[None] + delta)
        r = ch.spacing * np.log2(1 + sinr_from_gains(A, ch.noise_power))
        wsr = np.einsum("m,smk->s", weights, r)
        total += float(wsr.sum())
        worst = min(worst, float(wsr.min()))
        done += s
    return MonteCarloRate(mean=total / n_samples, min=worst)
