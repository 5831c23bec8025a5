"""Perfect-CSI reflection design: lifted SDR of the phase vector with the SCA template."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conic import NONNEG, PSD, ConicProgram, extract_rank_one
from .sca import ScaState, add_log_epigraph, add_pair_bound, run_sca

REFLECT_MAX_ITER = 15
REFLECT_TOL = 1e-4


@dataclass(frozen=True)
class ReflectLift:
    """Linear forms of the received amplitudes in the phase vector.

    ``cross[m, j, k] = g_m[k] * z_{m,j}[k]`` (element-wise), where
    ``z_{m,j}[k] = u_m[k] H[k] F v_j[k]`` scaled by ``sqrt(P_max) / delta``.
    The amplitude of stream ``j`` at user ``m`` is ``cross[m, j, k] @ phi``.
    """

    cross: np.ndarray
    omega: np.ndarray | None = None

    @property
    def c_vectors(self):
        return np.einsum("mmki->mki", self.cross)

    @property
    def shape(self):
        M, _, K, n = self.cross.shape
        return M, K, n

    def amplitudes(self, phases):
        """Received amplitudes ``A[m, j, k]``."""
        return self.cross @ phases


def build_reflect_lift(ch, F, v, p_max, delta2, g=None):
    """Lift for normalised digital vectors ``v`` (M, K, N_RF) with budget one."""
    g = ch.g_irs_user if g is None else g
    w = np.einsum("kit,tr,jkr->jki", ch.h_bs_irs, F, v)           # H[k] F v_j[k]
    z = ch.u_gain[:, None, :, None] * w[None] * np.sqrt(p_max / delta2)
    return ReflectLift(cross=g[:, None] * z)


def sinr_from_amplitudes(A):
    p = np.abs(A) ** 2
    sig = np.einsum("mmk->mk", p)
    return sig, p.sum(axis=1) - sig


def init_reflect_state(lift, phases):
    sig, interf = sinr_from_amplitudes(lift.amplitudes(phases))
    return ScaState.at_point(sig / (interf + 1.0), interf + 1.0, sig,
                             origin=np.outer(phases, np.conj(phases)))


def build_reflection_subproblem(lift, state, weights):
    """Convex subproblem around ``(state.t, state.b)`` over ``Omega = phi phi^H``."""
    if np.any(state.t <= 0) or np.any(state.b <= 0):
        raise ValueError("SCA state must be strictly positive")
    M, K, n = lift.shape
    C = np.einsum("mjki,mjkl->mjkil", lift.cross.conj(), lift.cross)
    t0, b0 = state.t, state.b
    prog = ConicProgram("reflect")
    omega = prog.add_block("Omega", PSD, n)
    t = {(m, k): prog.add_block(f"t[{m},{k}]", NONNEG) for m in range(M) for k in range(K)}
    b = {(m, k): prog.add_block(f"b[{m},{k}]", NONNEG) for m in range(M) for k in range(K)}
    s_int = {(m, k): prog.add_block(f"s_int[{m},{k}]", NONNEG) for m in range(M) for k in range(K)}
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        prog.add_constraint([(omega, E)], 1.0, name=f"diag[{i}]")
    for m in range(M):
        for k in range(K):
            interf = sum((C[m, j, k] for j in range(M) if j != m), np.zeros((n, n), dtype=complex))
            prog.add_constraint([(omega, interf / b0[m, k]), (s_int[m, k], 0, 1.0), (b[m, k], 0, -1.0)],
                                -1.0 / b0[m, k], name=f"interf[{m},{k}]")
            add_pair_bound(prog, f"sca[{m},{k}]", b[m, k], t[m, k], t0[m, k], b0[m, k],
                                [(omega, C[m, m, k])], state.active[m, k])
            add_log_epigraph(prog, f"log[{m},{k}]", t[m, k], weights[m], t_scale=t0[m, k])
    def signal(sol):
        W = sol.value("Omega")
        return np.real(np.einsum("mkij,ji->mk", np.einsum("mmkij->mkij", C), W))

    prog.meta.update(kind="reflect", C=C, M=M, K=K, t0=t0.copy(), b0=b0.copy(), rho=t0 * b0,
                     signal=signal)
    return prog


@dataclass
class ReflectResult:
    omega: np.ndarray
    state: ScaState
    prog: ConicProgram
    sol: object
    trace: list = field(default_factory=list)


def sca_reflect_loop(lift, init, weights, max_iter=REFLECT_MAX_ITER, tol=REFLECT_TOL, tol_solver=1e-10):
    def build(state):
        return build_reflection_subproblem(lift, state, weights)

    prog, sol, trace = run_sca("reflect", init, build, weights,
                               max_iter=max_iter, tol=tol, tol_solver=tol_solver)
    omega = init.origin if sol is None else sol.value("Omega")
    return ReflectResult(omega=omega, state=init, prog=prog, sol=sol, trace=trace)


def project_unit_modulus(x):
    """Entry-wise ``x / |x|`` with zero entries mapped to one."""
    x = np.asarray(x, dtype=complex)
    mag = np.abs(x)
    out = np.ones_like(x)
    nz = mag > 0
    out[nz] = x[nz] / mag[nz]
    return out


def lifted_score(lift, weights):
    """Weighted log-SINR sum (bit/s/Hz per subcarrier summed) of a phase vector."""
    weights = np.asarray(weights, dtype=float)

    def score(phases):
        sig, interf = sinr_from_amplitudes(lift.amplitudes(phases))
        return float(weights @ np.log2(1 + sig / (interf + 1.0)).sum(axis=1))
    return score


def recover_phases(omega, score=None, n_draws=200, rng=None):
    """Unit-modulus phases from a lifted matrix (eigenvector, else randomisation)."""
    scored = None if score is None else (lambda x: score(project_unit_modulus(x)))
    return project_unit_modulus(extract_rank_one(omega, score=scored, n_draws=n_draws, rng=rng))
