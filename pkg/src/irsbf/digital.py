"""Perfect-CSI digital beamforming: SCA over a semidefinite relaxation.

All subproblems work in normalised units: ``V' = V / P_max`` and effective
rows scaled by ``sqrt(P_max) / delta``, so the noise power is one and the
power budget reads ``sum Tr(F^H F V') <= 1``.  Interference-plus-noise values
``b`` in :class:`ScaState` are in units of the noise power.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conic import NONNEG, PSD, ConicProgram, extract_rank_one
from .rates import effective_channels
from .sca import ScaState, add_log_epigraph, add_pair_bound, run_sca

DIGITAL_MAX_ITER = 15
DIGITAL_TOL = 1e-4
# blocks carrying at most this share of the (unit) budget are treated as switched off
ZERO_BLOCK_SHARE = 1e-6


def scaled_rows(ch, F, phases, p_max, delta2):
    """Effective rows ``h_m[k] F`` scaled by ``sqrt(p_max) / delta``, shape (M, K, N_RF)."""
    return effective_channels(ch, phases) @ F * np.sqrt(p_max / delta2)


def _sinr_parts(hbar, v):
    """Signal and interference (noise excluded) for normalised rows and vectors."""
    amp = np.einsum("mkr,jkr->mjk", hbar, v)
    p = np.abs(amp) ** 2
    sig = np.einsum("mmk->mk", p)
    return sig, p.sum(axis=1) - sig


def matched_filter(hbar, gram):
    """Vectors ``c h^H`` with one common scale ``c`` spending the (normalised) unit budget."""
    v = hbar.conj().copy()
    total = float(np.real(np.einsum("mki,ij,mkj->", v.conj(), gram, v)))
    return v / np.sqrt(total) if total > 0 else v


def init_sca_state(hbar, gram, v=None):
    """Start point from digital vectors ``v`` (matched filter when omitted)."""
    v = matched_filter(hbar, gram) if v is None else v
    sig, interf = _sinr_parts(hbar, v)
    origin = np.einsum("mki,mkj->mkij", v, v.conj())
    return ScaState.at_point(sig / (interf + 1.0), interf + 1.0, sig, origin=origin)


def build_digital_subproblem(hbar, gram, state, weights):
    """Convex subproblem around ``(state.t, state.b)``.

    Blocks: one PSD ``V[m,k]`` of side N_RF per user and subcarrier; non-negative
    scalars ``t``, ``b``, an interference slack per pair and one power slack;
    one rotated quadratic cone per pair for the product bound and one
    exponential cone per pair for the log objective.

    Every pair is expressed in units of its expansion point: the blocks hold
    ``t / t0``, ``b / b0`` and ``V / sigma`` with ``sigma = t0 b0 / ||h||^2``,
    so weak and strong pairs are equally well conditioned.  The scales are kept
    in ``prog.meta``.
    """
    if np.any(state.t <= 0) or np.any(state.b <= 0):
        raise ValueError("SCA state must be strictly positive")
    M, K, n_rf = hbar.shape
    H = np.einsum("mki,mkj->mkij", hbar.conj(), hbar)
    t0, b0 = state.t, state.b
    rho = t0 * b0
    gain = np.sum(np.abs(hbar) ** 2, axis=-1)
    sigma = np.where(gain > 0, rho / np.where(gain > 0, gain, 1.0), rho)

    prog = ConicProgram("digital")
    V = {(m, k): prog.add_block(f"V[{m},{k}]", PSD, n_rf) for m in range(M) for k in range(K)}
    t = {(m, k): prog.add_block(f"t[{m},{k}]", NONNEG) for m in range(M) for k in range(K)}
    b = {(m, k): prog.add_block(f"b[{m},{k}]", NONNEG) for m in range(M) for k in range(K)}
    s_int = {(m, k): prog.add_block(f"s_int[{m},{k}]", NONNEG) for m in range(M) for k in range(K)}
    s_pow = prog.add_block("s_pow", NONNEG)

    prog.add_constraint([(V[mk], sigma[mk] * gram) for mk in V] + [(s_pow, 0, 1.0)], 1.0, name="power")
    for m in range(M):
        for k in range(K):
            terms = [(V[j, k], (sigma[j, k] / b0[m, k]) * H[m, k]) for j in range(M) if j != m]
            terms += [(s_int[m, k], 0, 1.0), (b[m, k], 0, -1.0)]
            prog.add_constraint(terms, -1.0 / b0[m, k], name=f"interf[{m},{k}]")
            add_pair_bound(prog, f"sca[{m},{k}]", b[m, k], t[m, k], t0[m, k], b0[m, k],
                                [(V[m, k], sigma[m, k] * H[m, k])], state.active[m, k])
            add_log_epigraph(prog, f"log[{m},{k}]", t[m, k], weights[m], t_scale=t0[m, k])
    def signal(sol):
        return np.array([[sigma[m, k] * np.real(hbar[m, k] @ sol.value(f"V[{m},{k}]") @ hbar[m, k].conj())
                          for k in range(K)] for m in range(M)])

    prog.meta.update(kind="digital", hbar=hbar, gram=gram, H=H, M=M, K=K,
                     t0=t0.copy(), b0=b0.copy(), rho=rho, sigma=sigma, signal=signal)
    return prog


def read_matrices(prog, sol, name="V"):
    """Lifted beamformers in normalised power units, shape (M, K, N_RF, N_RF)."""
    M, K, sigma = prog.meta["M"], prog.meta["K"], prog.meta["sigma"]
    return np.array([[sigma[m, k] * sol.value(f"{name}[{m},{k}]") for k in range(K)]
                     for m in range(M)])


@dataclass
class DigitalResult:
    """``V`` holds the normalised lifted beamformers (M, K, N_RF, N_RF).

    ``prog`` and ``sol`` belong to the last accepted subproblem; both are
    ``None`` when no step was accepted and ``V`` is the starting point.
    """

    V: np.ndarray
    state: ScaState
    prog: ConicProgram
    sol: object
    trace: list = field(default_factory=list)


def sca_digital_loop(hbar, gram, init, weights, max_iter=DIGITAL_MAX_ITER, tol=DIGITAL_TOL,
                     tol_solver=1e-10):
    def build(state):
        return build_digital_subproblem(hbar, gram, state, weights)

    prog, sol, trace = run_sca("digital", init, build, weights,
                               max_iter=max_iter, tol=tol, tol_solver=tol_solver)
    V = init.origin if sol is None else read_matrices(prog, sol)
    return DigitalResult(V=V, state=init, prog=prog, sol=sol, trace=trace)


def subcarrier_score(hbar, weights, k):
    """Weighted log-SINR sum on subcarrier ``k`` for normalised vectors (M, N_RF)."""
    weights = np.asarray(weights, dtype=float)

    def score(vk):
        amp = hbar[:, k, :] @ vk.T
        p = np.abs(amp) ** 2
        sig = np.diag(p)
        return float(weights @ np.log2(1 + sig / (p.sum(axis=1) - sig + 1.0)))
    return score


def recover_digital_vectors(V, gram, hbar=None, weights=None, n_draws=200, rng=None, scorer=None):
    """Rank-one vectors from lifted blocks, then one joint scale making the budget tight.

    Blocks that are not rank one go through Gaussian randomisation scored by the
    weighted rate on their subcarrier: ``scorer(k)`` returns that score for an
    (M, N_RF) array, by default :func:`subcarrier_score` (needs ``hbar`` and
    ``weights``).  Each candidate is rescaled to the power ``Tr(F^H F V)`` of
    its block before scoring.  Blocks whose power is at most
    ``ZERO_BLOCK_SHARE`` of the budget give zero vectors: their direction is
    solver residue.  Vectors are returned in normalised units (budget one).
    """
    if scorer is None and hbar is not None and weights is not None:
        def scorer(k):
            return subcarrier_score(hbar, weights, k)
    M, K, n_rf, _ = V.shape
    v = np.zeros((M, K, n_rf), dtype=complex)
    power = np.maximum(np.real(np.einsum("ij,mkji->mk", gram, V)), 0.0)
    live = power > ZERO_BLOCK_SHARE * max(power.sum(), 1.0)
    for m in range(M):
        for k in range(K):
            if live[m, k]:
                v[m, k] = extract_rank_one(V[m, k])
    for m in range(M):
        for k in range(K):
            if not live[m, k]:
                continue
            target = power[m, k]

            def fit(x, target=target):
                pw = float(np.real(x.conj() @ gram @ x))
                return x * np.sqrt(target / pw) if pw > 0 else x

            v[m, k] = fit(v[m, k])
            if scorer is None:
                continue
            base = scorer(k)

            def score(x, m=m, k=k, fit=fit, base=base):
                vk = v[:, k].copy()
                vk[m] = fit(x)
                return base(vk)

            v[m, k] = fit(extract_rank_one(V[m, k], score=score, n_draws=n_draws, rng=rng))
    total = float(np.real(np.einsum("mki,ij,mkj->", v.conj(), gram, v)))
    if total > 0:
        v *= np.sqrt(1.0 / total)
    return v


@dataclass(frozen=True)
class Theorem1Certificate:
    rank_ok: bool
    theta_rank: int
    v_rank: int
    complementarity: float
    theta_min_eig: float
    theta: np.ndarray


def theta_matrix(prog, sol, m, k):
    """``xi F^H F + sum_{j != m} psi_j H_j - nu H_m`` from the equality multipliers."""
    meta = prog.meta
    H, gram, M = meta["H"], meta["gram"], meta["M"]
    xi = sol.dual(prog, "power")
    nu = 0.0
    if prog.has_constraint(f"sca[{m},{k}].0"):
        nu = (sol.dual(prog, f"sca[{m},{k}].0") + sol.dual(prog, f"sca[{m},{k}].3")) / meta["rho"][m, k]
    theta = xi * gram - nu * H[m, k]
    for j in range(M):
        if j != m:
            psi = sol.dual(prog, f"interf[{j},{k}]") / meta["b0"][j, k]
            theta = theta + psi * H[j, k]
    return theta


def numerical_rank(X, rtol):
    w = np.linalg.eigvalsh(0.5 * (X + X.conj().T))
    top = max(abs(w[-1]), abs(w[0]))
    if top == 0:
        return 0
    return int(np.sum(w > rtol * top))


def verify_theorem1_certificate(prog, sol, m, k, comp_tol=1e-6, rank_rtol=1e-5):
    """Check that the dual matrix annihilates ``V[m,k]`` and has the expected rank."""
    if sol.y is None:
        raise ValueError("solution carries no dual values")
    theta = theta_matrix(prog, sol, m, k)
    Vmk = prog.meta["sigma"][m, k] * sol.value(f"V[{m},{k}]")
    n_rf = Vmk.shape[0]
    budget = max(1.0, float(np.real(np.trace(prog.meta["gram"]))))
    v_rank = numerical_rank(Vmk, rank_rtol)
    if np.linalg.norm(Vmk) <= 1e-7 * budget:
        v_rank = 0
    # a switched-off block is residue: measure it against the budget, not its own norm
    scale = np.linalg.norm(theta) * (np.linalg.norm(Vmk) if v_rank else budget)
    comp = float(np.linalg.norm(theta @ Vmk) / scale) if scale > 0 else 0.0
    th_rank = numerical_rank(theta, rank_rtol)
    wmin = float(np.linalg.eigvalsh(theta)[0])
    psd = wmin >= -1e-6 * max(np.linalg.norm(theta), 1e-300)
    expected = n_rf - 1 if v_rank == 1 else n_rf
    rank_ok = bool(psd and comp <= comp_tol and v_rank <= 1 and th_rank == expected)
    return Theorem1Certificate(rank_ok=rank_ok, theta_rank=th_rank, v_rank=v_rank,
                               complementarity=comp, theta_min_eig=wmin, theta=theta)
