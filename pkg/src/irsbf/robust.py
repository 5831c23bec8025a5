"""Robust digital and reflection design for bounded IRS->user CSI errors.

The true link is ``g = g_est + dg`` with ``||dg||^2 <= eps``.  Worst-case
signal and interference conditions become linear matrix inequalities through
the S-procedure.  Every LMI is written over the normalised ball
``dg = sqrt(eps) y`` with ``||y|| <= 1``; the multiplier of the normalised
form equals ``eps`` times the multiplier of the original one, and the form
stays valid at ``eps = 0``.

Units follow the perfect-CSI modules: powers are normalised by the noise
power and the budget is one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channel import sample_ball
from .conic import NONNEG, PSD, ConicProgram
from .sca import (ScaState, SubproblemError, UncertaintyTooLarge, add_log_epigraph, add_pair_bound,
                  run_sca)

ROBUST_MAX_ITER = 15
ROBUST_TOL = 1e-4


# ---------------------------------------------------------------------------
# S-procedure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SProcedureInput:
    """Quadratic ``f(x) = x q2 x^H + 2 Re(p2 x^H) + e2`` required to stay
    non-negative on the ball ``x x^H <= radius2`` (``x`` a row vector)."""

    q2: np.ndarray
    p2: np.ndarray
    e2: float
    radius2: float

    def __post_init__(self):
        q2 = np.atleast_2d(np.asarray(self.q2, dtype=complex))
        p2 = np.asarray(self.p2, dtype=complex).reshape(-1)
        if q2.shape[0] != q2.shape[1] or q2.shape[0] != p2.size:
            raise ValueError("q2 must be square and match p2")
        if not np.allclose(q2, q2.conj().T, atol=1e-12 * max(1.0, np.abs(q2).max())):
            raise ValueError("q2 must be Hermitian")
        if self.radius2 < 0:
            raise ValueError("radius2 must be non-negative")
        object.__setattr__(self, "q2", q2)
        object.__setattr__(self, "p2", p2)
        object.__setattr__(self, "e2", float(np.real(self.e2)))

    @property
    def n(self):
        return self.p2.size

    def __call__(self, x):
        """``f`` at the rows of ``x`` (shape (..., n))."""
        x = np.asarray(x, dtype=complex)
        quad = np.real(np.einsum("...i,ij,...j->...", x, self.q2, x.conj()))
        return quad + 2 * np.real(x @ self.p2.conj()) + self.e2


def s_procedure_matrix(inp, beta):
    """``[[beta I + q2, p2^H], [p2, e2 - beta radius2]]``."""
    n = inp.n
    B = np.zeros((n + 1, n + 1), dtype=complex)
    B[:n, :n] = beta * np.eye(n) + inp.q2
    B[:n, n] = inp.p2.conj()
    B[n, :n] = inp.p2
    B[n, n] = inp.e2 - beta * inp.radius2
    return B


def _corner(n):
    E = np.zeros((n + 1, n + 1))
    E[n, n] = 1.0
    return E


def _multiplier_pattern(n, radius2=1.0):
    D = np.eye(n + 1)
    D[n, n] = -radius2
    return D


def s_procedure_lmi(prog, name, inp, beta_block):
    """PSD block of side ``n + 1`` equal to :func:`s_procedure_matrix` with the
    multiplier taken from ``beta_block`` (entry 0); certifies ``f >= 0`` on the ball."""
    const = s_procedure_matrix(inp, 0.0)
    return prog.add_lmi(name, inp.n + 1, constant=const,
                        scalar_terms=[(beta_block, 0, _multiplier_pattern(inp.n, inp.radius2))])


def s_procedure_certifies(inp, beta, tol=1e-9):
    """Whether the block is PSD for ``beta >= 0`` (relative tolerance ``tol``)."""
    B = s_procedure_matrix(inp, beta)
    w = np.linalg.eigvalsh(B)
    return bool(beta >= 0 and w[0] >= -tol * max(1.0, np.abs(w).max()))


def implication_margin(inp, rng, n_samples=10_000):
    """Smallest ``f`` over uniform samples of the ball (and the origin)."""
    x = sample_ball(rng, (n_samples,), inp.n, inp.radius2)
    return float(min(np.min(inp(x)), inp.e2))


# ---------------------------------------------------------------------------
# Exact worst cases over the ball
# ---------------------------------------------------------------------------

def worst_case_signal(g, w, eps):
    """``min_{||d||^2 <= eps} |(g + d) w|^2 = max(|g w| - sqrt(eps) ||w||, 0)^2``."""
    g, w = np.asarray(g), np.asarray(w)
    return float(max(abs(g @ w) - np.sqrt(eps) * np.linalg.norm(w), 0.0) ** 2)


def worst_case_interference(g, A, eps):
    """``max_{||d||^2 <= eps} ||(g + d) A||^2`` for a matrix ``A`` (N, J).

    The maximiser lies on the sphere and solves ``(g + d) A A^H = lam d``; the
    multiplier comes from the secular equation in the eigenbasis of ``A A^H``.
    """
    g = np.asarray(g, dtype=complex)
    A = np.asarray(A, dtype=complex).reshape(g.size, -1)
    W = A @ A.conj().T
    nominal = float(np.real(g @ W @ g.conj()))
    if eps == 0 or not np.any(A):
        return nominal
    w, U = np.linalg.eigh(0.5 * (W + W.conj().T))
    w = np.maximum(w, 0.0)
    c = g @ U
    top = w[-1]
    wc2 = (w * np.abs(c)) ** 2

    def excess(d):              # ||d||^2 - eps at lam = top + d
        return float(np.sum(wc2 / (top - w + d) ** 2)) - eps

    scale = max(top, 1e-300)
    d_hi = np.sqrt(np.sum(wc2) / eps) + 1e-12 * scale
    d_lo = 1e-14 * scale
    if excess(d_lo) > 0:
        d = brentq(excess, d_lo, d_hi, xtol=1e-15 * scale, rtol=1e-15, maxiter=500)
        lam = top + d
        return float(np.sum(w * np.abs(c) ** 2 * (lam / (lam - w)) ** 2))
    # hard case: the leading eigenvector absorbs the remaining radius
    rest = w < top * (1 - 1e-12)
    y2 = np.zeros_like(w)
    y2[rest] = wc2[rest] / (top - w[rest]) ** 2
    value = np.sum(w[rest] * (np.abs(c[rest]) + np.sqrt(y2[rest])) ** 2)
    lead = ~rest
    spare = max(eps - y2.sum(), 0.0)
    value += top * (np.sqrt(np.sum(np.abs(c[lead]) ** 2)) + np.sqrt(spare)) ** 2
    return float(value)


def worst_case_parts(g, amps_own, amps_other, eps):
    """Worst-case signal and interference of one pair.

    ``amps_own`` is the vector ``w`` with received amplitude ``g w``;
    ``amps_other`` (N, J) stacks the interfering vectors.
    """
    return worst_case_signal(g, amps_own, eps), worst_case_interference(g, amps_other, eps)


def lifted_worst_signal(Q):
    """Largest ``mu`` admitted by the signal LMI for a fixed lifted term ``Q = L X L^H``.

    With ``Q = [[A, p], [p^H, c]]`` the LMI holds iff
    ``mu <= c - beta - p^H (A + beta I)^{-1} p`` for some ``beta >= 0``; the
    right-hand side is concave in ``beta`` and maximised on a bracket.
    """
    Q = 0.5 * (Q + Q.conj().T)
    n = Q.shape[0] - 1
    lam, U = np.linalg.eigh(Q[:n, :n])
    lam = np.maximum(lam, 0.0)
    q2 = np.abs(U.conj().T @ Q[:n, n]) ** 2
    c = float(np.real(Q[n, n]))
    if not np.any(q2 > 0):
        return c

    def slope(beta):
        return float(np.sum(q2 / (lam + beta) ** 2)) - 1.0

    hi = np.sqrt(q2.sum()) + 1.0          # slope(hi) < 0
    lo = 1e-30 * hi
    beta = brentq(slope, lo, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=500) if slope(lo) > 0 else 0.0
    return float(c - beta - np.sum(q2 / np.maximum(lam + beta, lo)))


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------

@dataclass
class RobustState(ScaState):
    """SCA point for the robust subproblems: ``tau`` (stored as ``t``),
    ``theta`` (stored as ``b``), the worst-case signal ``mu`` and the
    S-procedure multipliers of the last solve."""

    mu: np.ndarray | None = None
    beta_sig: np.ndarray | None = None
    beta_int: np.ndarray | None = None

    def __post_init__(self):
        super().__post_init__()
        shape = self.t.shape
        self.mu = np.zeros(shape) if self.mu is None else np.asarray(self.mu, dtype=float)
        self.beta_sig = np.zeros(shape) if self.beta_sig is None else np.asarray(self.beta_sig, dtype=float)
        self.beta_int = np.zeros(shape) if self.beta_int is None else np.asarray(self.beta_int, dtype=float)

    @property
    def tau(self):
        return self.t

    @property
    def theta(self):
        return self.b

    @classmethod
    def from_worst_case(cls, signal, interference, origin=None):
        signal = np.asarray(signal, dtype=float)
        theta = np.asarray(interference, dtype=float) + 1.0
        state = cls.at_point(signal / theta, theta, signal, origin=origin)
        state.mu = signal.copy()
        return state


# ---------------------------------------------------------------------------
# Robust digital subproblem
# ---------------------------------------------------------------------------

def xi_matrices(ch, F, phases, p_max, delta2):
    """``Xi_m[k] = u_m[k] Phi H[k] F`` scaled by ``sqrt(p_max) / delta``, shape (M, K, N_IRS, N_RF)."""
    HF = np.einsum("kit,tr->kir", ch.h_bs_irs, F) * phases[None, :, None]
    return ch.u_gain[:, :, None, None] * HF[None] * np.sqrt(p_max / delta2)


def digital_worst_case(xi, g_est, v, eps):
    """Worst-case signal and interference (M, K) for normalised vectors ``v``."""
    M, K = g_est.shape[:2]
    sig, intf = np.zeros((M, K)), np.zeros((M, K))
    for m in range(M):
        for k in range(K):
            own = xi[m, k] @ v[m, k]
            other = np.stack([xi[m, k] @ v[j, k] for j in range(M) if j != m], axis=1) \
                if M > 1 else np.zeros((xi.shape[2], 0))
            sig[m, k], intf[m, k] = worst_case_parts(g_est[m, k], own, other, eps)
    return sig, intf


def init_robust_digital_state(xi, g_est, v, eps):
    sig, intf = digital_worst_case(xi, g_est, v, eps)
    origin = np.einsum("mki,mkj->mkij", v, v.conj())
    return RobustState.from_worst_case(sig, intf, origin=origin)


def _ball_map(g, X, eps):
    """``[sqrt(eps) X; g X]``: maps a lifted variable into the normalised-ball LMI."""
    return np.vstack([np.sqrt(eps) * X, (g @ X)[None, :]])


def build_robust_digital_subproblem(xi, g_est, gram, state, eps, weights):
    """Robust counterpart of the digital subproblem around ``state``.

    Per pair: a PSD block ``V[m,k]`` (side N_RF), a signal LMI ``sig[m,k]``
    and an interference LMI ``int[m,k]`` (side N_IRS + 1) with their own
    multipliers, the product bound over ``(tau, theta, mu)`` and the log
    objective.  Scalars per pair: ``tau``, ``theta``, ``mu``, ``beta_sig``,
    ``beta_int``; one power slack.  Scaling follows the perfect-CSI builder:
    ``tau / tau0``, ``theta / theta0``, ``mu / rho``, ``V / sigma``; the signal
    LMI is divided by ``rho`` and the interference LMI by ``theta0``.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if np.any(state.t <= 0) or np.any(state.b <= 0):
        raise ValueError("SCA state must be strictly positive")
    M, K, n_irs, n_rf = xi.shape
    t0, b0 = state.t, state.b
    rho = t0 * b0
    L = np.array([[_ball_map(g_est[m, k], xi[m, k], eps) for k in range(K)] for m in range(M)])
    gain = np.array([[np.sum(np.abs(g_est[m, k] @ xi[m, k]) ** 2) for k in range(K)] for m in range(M)])
    sigma = np.where(gain > 0, rho / np.where(gain > 0, gain, 1.0), rho)
    D = _multiplier_pattern(n_irs)
    E = _corner(n_irs)

    prog = ConicProgram("robust-digital")
    pairs = [(m, k) for m in range(M) for k in range(K)]
    V = {mk: prog.add_block("V[%d,%d]" % mk, PSD, n_rf) for mk in pairs}
    tau = {mk: prog.add_block("tau[%d,%d]" % mk, NONNEG) for mk in pairs}
    theta = {mk: prog.add_block("theta[%d,%d]" % mk, NONNEG) for mk in pairs}
    mu = {mk: prog.add_block("mu[%d,%d]" % mk, NONNEG) for mk in pairs}
    bs = {mk: prog.add_block("beta_sig[%d,%d]" % mk, NONNEG) for mk in pairs}
    bi = {mk: prog.add_block("beta_int[%d,%d]" % mk, NONNEG) for mk in pairs}
    s_pow = prog.add_block("s_pow", NONNEG)

    prog.add_constraint([(V[mk], sigma[mk] * gram) for mk in pairs] + [(s_pow, 0, 1.0)], 1.0, name="power")
    for m, k in pairs:
        prog.add_lmi(f"sig[{m},{k}]", n_irs + 1,
                     scalar_terms=[(bs[m, k], 0, D), (mu[m, k], 0, -E)],
                     matrix_terms=[(V[m, k], np.sqrt(sigma[m, k] / rho[m, k]) * L[m, k], 1.0)])
        prog.add_lmi(f"int[{m},{k}]", n_irs + 1, constant=-E / b0[m, k],
                     scalar_terms=[(bi[m, k], 0, D), (theta[m, k], 0, E)],
                     matrix_terms=[(V[j, k], np.sqrt(sigma[j, k] / b0[m, k]) * L[m, k], -1.0)
                                   for j in range(M) if j != m])
        add_pair_bound(prog, f"sca[{m},{k}]", theta[m, k], tau[m, k], t0[m, k], b0[m, k],
                       [(mu[m, k], 0, rho[m, k])], state.active[m, k])
        add_log_epigraph(prog, f"log[{m},{k}]", tau[m, k], weights[m], t_scale=t0[m, k])

    def signal(sol):
        return np.array([[lifted_worst_signal(L[m, k] @ (sigma[m, k] * sol.value(f"V[{m},{k}]"))
                                              @ L[m, k].conj().T) for k in range(K)] for m in range(M)])

    prog.meta.update(kind="robust-digital", M=M, K=K, eps=eps, xi=xi, g_est=g_est, gram=gram,
                     t0=t0.copy(), b0=b0.copy(), rho=rho, sigma=sigma, signal=signal,
                     t_name="tau", b_name="theta")
    return prog


def read_robust_matrices(prog, sol):
    M, K, sigma = prog.meta["M"], prog.meta["K"], prog.meta["sigma"]
    return np.array([[sigma[m, k] * sol.value(f"V[{m},{k}]") for k in range(K)] for m in range(M)])


# ---------------------------------------------------------------------------
# Robust reflection subproblem
# ---------------------------------------------------------------------------

def z_vectors(ch, F, v, p_max, delta2):
    """``z[m, j, k] = u_m[k] H[k] F v_j[k]`` scaled by ``sqrt(p_max) / delta``, shape (M, M, K, N_IRS)."""
    w = np.einsum("kit,tr,jkr->jki", ch.h_bs_irs, F, v)
    return ch.u_gain[:, None, :, None] * w[None] * np.sqrt(p_max / delta2)


def reflect_worst_case(z, g_est, phases, eps):
    M, _, K, _ = z.shape
    sig, intf = np.zeros((M, K)), np.zeros((M, K))
    for m in range(M):
        for k in range(K):
            own = z[m, m, k] * phases
            other = np.stack([z[m, j, k] * phases for j in range(M) if j != m], axis=1) \
                if M > 1 else np.zeros((z.shape[3], 0))
            sig[m, k], intf[m, k] = worst_case_parts(g_est[m, k], own, other, eps)
    return sig, intf


def init_robust_reflect_state(z, g_est, phases, eps):
    sig, intf = reflect_worst_case(z, g_est, phases, eps)
    return RobustState.from_worst_case(sig, intf, origin=np.outer(phases, np.conj(phases)))


def build_robust_reflection_subproblem(z, g_est, state, eps, weights):
    """Robust reflection subproblem over ``Omega = phi phi^H`` (unit diagonal).

    ``Z_j = diag(z[m, j, k])`` enters both LMIs of pair ``(m, k)``: the signal
    LMI uses ``j = m`` and the interference LMI sums ``j != m``.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if np.any(state.t <= 0) or np.any(state.b <= 0):
        raise ValueError("SCA state must be strictly positive")
    M, _, K, n = z.shape
    t0, b0 = state.t, state.b
    rho = t0 * b0
    D = _multiplier_pattern(n)
    E = _corner(n)

    prog = ConicProgram("robust-reflect")
    omega = prog.add_block("Omega", PSD, n)
    pairs = [(m, k) for m in range(M) for k in range(K)]
    tau = {mk: prog.add_block("tau[%d,%d]" % mk, NONNEG) for mk in pairs}
    theta = {mk: prog.add_block("theta[%d,%d]" % mk, NONNEG) for mk in pairs}
    mu = {mk: prog.add_block("mu[%d,%d]" % mk, NONNEG) for mk in pairs}
    bs = {mk: prog.add_block("beta_sig[%d,%d]" % mk, NONNEG) for mk in pairs}
    bi = {mk: prog.add_block("beta_int[%d,%d]" % mk, NONNEG) for mk in pairs}
    for i in range(n):
        Ei = np.zeros((n, n))
        Ei[i, i] = 1.0
        prog.add_constraint([(omega, Ei)], 1.0, name=f"diag[{i}]")
    Lsig = {(m, k): _ball_map(g_est[m, k], np.diag(z[m, m, k]), eps) for m, k in pairs}
    for m, k in pairs:
        prog.add_lmi(f"sig[{m},{k}]", n + 1,
                     scalar_terms=[(bs[m, k], 0, D), (mu[m, k], 0, -E)],
                     matrix_terms=[(omega, Lsig[m, k] / np.sqrt(rho[m, k]), 1.0)])
        prog.add_lmi(f"int[{m},{k}]", n + 1, constant=-E / b0[m, k],
                     scalar_terms=[(bi[m, k], 0, D), (theta[m, k], 0, E)],
                     matrix_terms=[(omega, _ball_map(g_est[m, k], np.diag(z[m, j, k]), eps) / np.sqrt(b0[m, k]),
                                    -1.0) for j in range(M) if j != m])
        add_pair_bound(prog, f"sca[{m},{k}]", theta[m, k], tau[m, k], t0[m, k], b0[m, k],
                       [(mu[m, k], 0, rho[m, k])], state.active[m, k])
        add_log_epigraph(prog, f"log[{m},{k}]", tau[m, k], weights[m], t_scale=t0[m, k])

    def signal(sol):
        W = sol.value("Omega")
        return np.array([[lifted_worst_signal(Lsig[m, k] @ W @ Lsig[m, k].conj().T) for k in range(K)]
                         for m in range(M)])

    prog.meta.update(kind="robust-reflect", M=M, K=K, eps=eps, z=z, g_est=g_est,
                     t0=t0.copy(), b0=b0.copy(), rho=rho, signal=signal,
                     t_name="tau", b_name="theta")
    return prog


# ---------------------------------------------------------------------------
# Loop and checks
# ---------------------------------------------------------------------------

@dataclass
class RobustResult:
    """``matrices`` is V (M, K, N_RF, N_RF) or Omega (N, N); ``prog``/``sol``
    belong to the last accepted step (``None`` if none was accepted)."""

    matrices: np.ndarray
    state: RobustState
    prog: ConicProgram | None
    sol: object
    trace: list = field(default_factory=list)


def robust_sca_loop(label, build, init, weights, max_iter=ROBUST_MAX_ITER, tol=ROBUST_TOL,
                    tol_solver=1e-10):
    """Run the SCA iteration on a robust builder; infeasibility means the
    uncertainty ball is too large for any beamformer."""
    if not np.any(init.active):
        raise UncertaintyTooLarge(label, 0, "uncertainty too large: no pair keeps a positive worst-case signal")
    try:
        prog, sol, trace = run_sca(label, init, build, weights, max_iter=max_iter, tol=tol,
                                   tol_solver=tol_solver)
    except SubproblemError as exc:
        if exc.status == "infeasible":
            raise UncertaintyTooLarge(label, exc.iteration, f"uncertainty too large ({exc.status})") from exc
        raise
    if sol is None:
        return RobustResult(init.origin, init, None, None, trace)
    M, K = prog.meta["M"], prog.meta["K"]
    rho, b0 = prog.meta["rho"], prog.meta["b0"]
    init.mu = prog.meta["signal"](sol)
    init.beta_sig = np.array([[rho[m, k] * sol.value(f"beta_sig[{m},{k}]")[0] for k in range(K)]
                              for m in range(M)])
    init.beta_int = np.array([[b0[m, k] * sol.value(f"beta_int[{m},{k}]")[0] for k in range(K)]
                              for m in range(M)])
    if prog.meta["kind"] == "robust-digital":
        mats = read_robust_matrices(prog, sol)
    else:
        mats = sol.value("Omega")
    return RobustResult(mats, init, prog, sol, trace)


def lmi_inputs(prog, sol):
    """Rebuild every S-procedure implication of a solved robust subproblem
    from its primal values, in the normalised-ball coordinates.

    Returns ``(name, SProcedureInput, beta)`` triples where ``beta`` is the
    solved multiplier in the same (unscaled) units as the input.
    """
    meta = prog.meta
    M, K, eps, g_est = meta["M"], meta["K"], meta["eps"], meta["g_est"]
    rho, b0 = meta["rho"], meta["b0"]
    out = []
    if meta["kind"] == "robust-digital":
        V = read_robust_matrices(prog, sol)
        xi = meta["xi"]

        def lifted(m, j, k):
            return xi[m, k] @ V[j, k] @ xi[m, k].conj().T
    else:
        W = sol.value("Omega")
        z = meta["z"]

        def lifted(m, j, k):
            Z = np.diag(z[m, j, k])
            return Z @ W @ Z.conj().T
    for m in range(M):
        for k in range(K):
            g = g_est[m, k]
            mu = rho[m, k] * sol.value(f"mu[{m},{k}]")[0]
            theta = b0[m, k] * sol.value(f"theta[{m},{k}]")[0]
            Vh = lifted(m, m, k)
            sig = SProcedureInput(q2=eps * Vh, p2=np.sqrt(eps) * (g @ Vh),
                                  e2=np.real(g @ Vh @ g.conj()) - mu, radius2=1.0)
            out.append((f"sig[{m},{k}]", sig, rho[m, k] * sol.value(f"beta_sig[{m},{k}]")[0]))
            Vc = sum((lifted(m, j, k) for j in range(M) if j != m), np.zeros_like(Vh))
            intf = SProcedureInput(q2=-eps * Vc, p2=-np.sqrt(eps) * (g @ Vc),
                                   e2=theta - 1.0 - np.real(g @ Vc @ g.conj()), radius2=1.0)
            out.append((f"int[{m},{k}]", intf, b0[m, k] * sol.value(f"beta_int[{m},{k}]")[0]))
    return out


def monte_carlo_soundness(prog, sol, rng, n_samples=10_000, tol=1e-7):
    """For every LMI of a solved robust subproblem: is the block PSD at the
    solved multiplier, and does the implied inequality hold on ``n_samples``
    ball points?  Returns rows ``{name, psd, margin, scale, ok}``."""
    rows = []
    for name, inp, beta in lmi_inputs(prog, sol):
        psd = s_procedure_certifies(inp, beta, tol=1e-7)
        margin = implication_margin(inp, rng, n_samples)
        scale = max(1.0, abs(inp.e2), float(np.abs(inp.q2).max()), float(np.abs(inp.p2).max(initial=0.0)))
        ok = (not psd) or margin >= -tol * scale
        rows.append({"name": name, "psd": psd, "margin": margin, "scale": scale, "ok": bool(ok)})
    return rows


# ---------------------------------------------------------------------------
# Certified rates of a concrete solution
# ---------------------------------------------------------------------------

def certified_sinr(ch_est, sol, eps):
    """Worst-case SINR lower bound per pair: smallest signal over the ball over
    the largest interference over the ball plus noise."""
    xi = xi_matrices(ch_est, sol.analog, sol.phases, 1.0, 1.0)
    sig, intf = digital_worst_case(xi, ch_est.g_irs_user, sol.digital, eps)
    return sig / (intf + ch_est.noise_power)


def certified_rate_matrix(ch_est, sol, eps):
    """Certified rates (M, K) in bit/s."""
    return ch_est.spacing * np.log2(1 + certified_sinr(ch_est, sol, eps))


def certified_weighted_rate(ch_est, sol, eps, weights):
    return float(np.asarray(weights, dtype=float) @ certified_rate_matrix(ch_est, sol, eps).sum(axis=1))


def digital_scorer(xi, g_est, eps, weights):
    """``scorer(k)`` for robust rank-one recovery: certified weighted log-SINR on subcarrier ``k``."""
    weights = np.asarray(weights, dtype=float)
    M = g_est.shape[0]

    def scorer(k):
        def score(vk):
            total = 0.0
            for m in range(M):
                own = xi[m, k] @ vk[m]
                other = np.stack([xi[m, k] @ vk[j] for j in range(M) if j != m], axis=1) \
                    if M > 1 else np.zeros((xi.shape[2], 0))
                s, i = worst_case_parts(g_est[m, k], own, other, eps)
                total += weights[m] * np.log2(1 + s / (i + 1.0))
            return float(total)
        return score
    return scorer


def phase_scorer(z, g_est, eps, weights):
    weights = np.asarray(weights, dtype=float)

    def score(phases):
        sig, intf = reflect_worst_case(z, g_est, phases, eps)
        return float(weights @ np.log2(1 + sig / (intf + 1.0)).sum(axis=1))
    return score
