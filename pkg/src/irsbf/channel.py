"""Line-of-sight THz channels of the BS -> IRS -> user links."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .scenario import SPEED_OF_LIGHT, noise_power_per_subcarrier, subcarrier_frequencies


def steering_vector(n, psi):
    """Uniform linear array response ``exp(j*pi*i*psi) / sqrt(n)``, i = 0..n-1."""
    if n < 1:
        raise ValueError("array needs at least one element")
    return np.exp(1j * np.pi * np.arange(n) * psi) / np.sqrt(n)


def path_gain(f, dist, tau):
    """Free-space spreading times molecular absorption, ``c/(4 pi f d) e^{-tau d / 2}``."""
    if f <= 0 or dist <= 0:
        raise ValueError("frequency and distance must be positive")
    if tau < 0:
        raise ValueError("absorption must be non-negative")
    return SPEED_OF_LIGHT / (4 * np.pi * f * dist) * np.exp(-0.5 * tau * dist)


def cascaded_gain(cfg, geom, m, k):
    """Cascaded BS-IRS-user amplitude gain ``u_m[k]`` on subcarrier ``k`` (0-based)."""
    if not 0 <= m < cfg.n_users or not 0 <= k < cfg.n_subcarriers:
        raise IndexError(f"user {m} / subcarrier {k} out of range")
    f = subcarrier_frequencies(cfg)[k]
    d, dm = geom.d_bs_irs, geom.d_irs_user[m]
    loss = cfg.chi * SPEED_OF_LIGHT / (8 * np.sqrt(np.pi ** 3) * f * d * dm)
    return cfg.g_t * cfg.g_r * loss * np.exp(-0.5 * cfg.absorption * (d + dm))


@dataclass(frozen=True)
class ChannelSet:
    """Per-subcarrier channels.

    h_bs_irs    (K, N_IRS, N_TX)  unit-Frobenius rank-one BS->IRS matrices
    g_irs_user  (M, K, N_IRS)     IRS->user row vectors
    u_gain      (M, K)            cascaded amplitude gains
    freqs       (K,)              subcarrier frequencies [Hz]
    spacing                       subcarrier bandwidth B/K [Hz]
    noise_power                   noise power per subcarrier [W]
    """

    h_bs_irs: np.ndarray
    g_irs_user: np.ndarray
    u_gain: np.ndarray
    freqs: np.ndarray
    spacing: float = 1.0
    noise_power: float = 1.0

    @property
    def n_users(self):
        return self.g_irs_user.shape[0]

    @property
    def n_subcarriers(self):
        return self.h_bs_irs.shape[0]

    @property
    def n_irs(self):
        return self.h_bs_irs.shape[1]

    @property
    def n_tx(self):
        return self.h_bs_irs.shape[2]

    def with_g(self, g):
        g = np.asarray(g, dtype=complex)
        if g.shape != self.g_irs_user.shape:
            raise ValueError("IRS->user channel shape mismatch")
        return replace(self, g_irs_user=g)


@dataclass(frozen=True)
class CsiError:
    """Estimation errors on the IRS->user links, ``g = g_est + delta_g``."""

    delta_g: np.ndarray
    bound: float


def generate_channels(cfg, geom):
    if geom.n_users != cfg.n_users:
        raise ValueError("geometry and config disagree on the number of users")
    freqs = subcarrier_frequencies(cfg)
    scale = 2 * geom.antenna_spacing * freqs / SPEED_OF_LIGHT
    theta = scale * np.sin(geom.aod_bs)
    phi = scale * np.sin(geom.aoa_irs)
    H = np.stack([
        np.outer(steering_vector(cfg.n_irs, phi[k]), steering_vector(cfg.n_tx, theta[k]).conj())
        for k in range(cfg.n_subcarriers)
    ])
    user_psi = scale[None, :] * np.sin(np.asarray(geom.aoa_user))[:, None]
    g = np.stack([[steering_vector(cfg.n_irs, user_psi[m, k]) for k in range(cfg.n_subcarriers)]
                  for m in range(cfg.n_users)])
    u = np.array([[cascaded_gain(cfg, geom, m, k) for k in range(cfg.n_subcarriers)]
                  for m in range(cfg.n_users)], dtype=complex)
    return ChannelSet(h_bs_irs=H, g_irs_user=g, u_gain=u, freqs=freqs,
                      spacing=cfg.subcarrier_spacing, noise_power=noise_power_per_subcarrier(cfg))


def sample_ball(rng, shape, n, radius2):
    """Uniform samples in the complex ball ``{x in C^n : ||x||^2 <= radius2}``.

    ``shape`` is the batch shape (a tuple); the result has shape ``shape + (n,)``.
    """
    shape = tuple(shape)
    if radius2 == 0:
        return np.zeros(shape + (n,), dtype=complex)
    z = rng.standard_normal(shape + (n, 2))
    z = z[..., 0] + 1j * z[..., 1]
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    r = np.sqrt(radius2) * rng.uniform(size=shape + (1,)) ** (1.0 / (2 * n))
    return z * r


def sample_csi_error(cfg, rng):
    if cfg.epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    delta = sample_ball(rng, (cfg.n_users, cfg.n_subcarriers), cfg.n_irs, cfg.epsilon)
    return CsiError(delta_g=delta, bound=cfg.epsilon)


def estimated_channels(ch, err):
    """Channel set seen by the designer: the stored links minus the error."""
    return ch.with_g(ch.g_irs_user - err.delta_g)


def dump_channels(ch, out=None):
    """Write the channel set as CSV rows ``kind,m,k,i,j,re,im``; returns text if ``out`` is None."""
    buf = io.StringIO() if out is None else out
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "m", "k", "i", "j", "re", "im"])
    w.writerow(["spacing", "", "", "", "", repr(float(ch.spacing)), "0.0"])
    w.writerow(["noise", "", "", "", "", repr(float(ch.noise_power)), "0.0"])
    for k in range(ch.n_subcarriers):
        w.writerow(["freq", "", k, "", "", repr(float(ch.freqs[k])), "0.0"])
        for i in range(ch.n_irs):
            for j in range(ch.n_tx):
                z = ch.h_bs_irs[k, i, j]
                w.writerow(["H", "", k, i, j, repr(float(z.real)), repr(float(z.imag))])
    for m in range(ch.n_users):
        for k in range(ch.n_subcarriers):
            z = ch.u_gain[m, k]
            w.writerow(["u", m, k, "", "", repr(float(z.real)), repr(float(z.imag))])
            for i in range(ch.n_irs):
                z = ch.g_irs_user[m, k, i]
                w.writerow(["g", m, k, i, "", repr(float(z.real)), repr(float(z.imag))])
    if out is None:
        return buf.getvalue()
    return None


def load_channels(text):
    """Inverse of :func:`dump_channels`."""
    rows = list(csv.DictReader(io.StringIO(text)))
    ks = [int(r["k"]) for r in rows if r["kind"] == "freq"]
    K = max(ks) + 1
    n_irs = max(int(r["i"]) for r in rows if r["kind"] == "H") + 1
    n_tx = max(int(r["j"]) for r in rows if r["kind"] == "H") + 1
    M = max((int(r["m"]) for r in rows if r["kind"] == "u"), default=-1) + 1
    freqs = np.zeros(K)
    H = np.zeros((K, n_irs, n_tx), dtype=complex)
    g = np.zeros((M, K, n_irs), dtype=complex)
    u = np.zeros((M, K), dtype=complex)
    spacing = noise = 1.0
    for r in rows:
        z = float(r["re"]) + 1j * float(r["im"])
        if r["kind"] == "spacing":
            spacing = z.real
            continue
        if r["kind"] == "noise":
            noise = z.real
            continue
        k = int(r["k"])
        if r["kind"] == "freq":
            freqs[k] = z.real
        elif r["kind"] == "H":
            H[k, int(r["i"]), int(r["j"])] = z
        elif r["kind"] == "u":
            u[int(r["m"]), k] = z
        elif r["kind"] == "g":
            g[int(r["m"]), k, int(r["i"])] = z
        else:
            raise ValueError(f"unknown row kind {r['kind']!r}")
    return ChannelSet(h_bs_irs=H, g_irs_user=g, u_gain=u, freqs=freqs, spacing=spacing, noise_power=noise)
