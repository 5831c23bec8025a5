"""Pieces shared by every successive-convex-approximation subproblem."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .conic import EXP, NONNEG, SOC, solve

logger = logging.getLogger(__name__)

T_FLOOR = 1e-9
# largest factor by which b may be enlarged to keep a floored pair admissible;
# beyond it the pair is switched off (t fixed to zero) for the rest of the loop
MAX_INFLATION = 1e3
LN2 = np.log(2.0)


class SubproblemError(RuntimeError):
    """A convex subproblem did not solve to optimality."""

    def __init__(self, label, iteration, status):
        super().__init__(f"{label} subproblem at iteration {iteration}: {status}")
        self.label = label
        self.iteration = iteration
        self.status = status


class UncertaintyTooLarge(SubproblemError):
    """No beamformer keeps a positive worst-case signal over the error ball."""


def amgm_bound(t, b, t0, b0):
    """Convex upper bound ``t0/(2 b0) b^2 + b0/(2 t0) t^2`` of ``t * b``, tight at (t0, b0)."""
    return t0 / (2 * b0) * b ** 2 + b0 / (2 * t0) * t ** 2


def weighted_log_objective(t, weights):
    """``sum_m alpha_m sum_k log2(1 + t_mk)`` in bit/s/Hz."""
    return float(np.asarray(weights, dtype=float) @ np.log2(1 + np.asarray(t)).sum(axis=1))


def add_log_epigraph(prog, name, t_block, weight, t_scale=1.0):
    """``r <= ln(1 + t_scale * x)`` through an exponential cone, ``x`` the entry of
    ``t_block``; adds ``weight * r / ln 2`` to the objective."""
    e = prog.add_block(name, EXP)
    prog.add_constraint([(e, 1, 1.0)], 1.0, name=f"{name}.y")
    prog.add_constraint([(e, 2, 1.0), (t_block, 0, -t_scale)], 1.0, name=f"{name}.z")
    prog.add_objective([(e, 0, weight / LN2)])
    return e


def _scale(term, factor):
    if len(term) == 3:
        return term[0], term[1], factor * term[2]
    return term[0], factor * np.asarray(term[1])


def add_amgm_constraint(prog, name, b_block, t_block, t0, b0, rhs_terms):
    """Product bound ``t0/(2 b0) b^2 + b0/(2 t0) t^2 <= s`` with ``s = sum(rhs_terms)``.

    ``t_block`` and ``b_block`` hold the scaled unknowns ``t / t0`` and
    ``b / b0``.  Dividing the bound by its value ``rho = t0 * b0`` at the
    expansion point gives the rotated quadratic cone
    ``||(sqrt(2) b/b0, sqrt(2) t/t0, s/rho - 1)|| <= s/rho + 1``, whose entries
    are all of order one.  Returns ``rho``: the multiplier of the unscaled
    bound is ``(y[.0] + y[.3]) / rho``.
    """
    rho = float(t0 * b0)
    q = prog.add_block(name, SOC, 4)
    neg = [_scale(term, -1.0 / rho) for term in rhs_terms]
    prog.add_constraint([(q, 0, 1.0)] + neg, 1.0, name=f"{name}.0")
    prog.add_constraint([(q, 1, 1.0), (b_block, 0, -np.sqrt(2.0))], 0.0, name=f"{name}.1")
    prog.add_constraint([(q, 2, 1.0), (t_block, 0, -np.sqrt(2.0))], 0.0, name=f"{name}.2")
    prog.add_constraint([(q, 3, 1.0)] + neg, -1.0, name=f"{name}.3")
    return rho


def add_pair_bound(prog, name, b_block, t_block, t0, b0, rhs_terms, active=True):
    """Product bound of one pair, or ``t = 0`` (row ``name.off``) when inactive."""
    if active:
        return add_amgm_constraint(prog, name, b_block, t_block, t0, b0, rhs_terms)
    prog.add_constraint([(t_block, 0, 1.0)], 0.0, name=f"{name}.off")
    return float(t0 * b0)


def scalar(prog, name, nonneg=True):
    return prog.add_block(name, NONNEG if nonneg else "free", 1)


@dataclass
class ScaState:
    """Expansion point of the product bounds: auxiliary SINR variables ``t`` and
    interference-plus-noise ``b`` (M, K), plus the objective history."""

    t: np.ndarray
    b: np.ndarray
    objective_history: list = field(default_factory=list)
    iteration: int = 0
    active: np.ndarray | None = None
    origin: np.ndarray | None = None     # lifted matrices of the starting point

    def __post_init__(self):
        self.t = np.maximum(np.asarray(self.t, dtype=float), T_FLOOR)
        self.b = np.asarray(self.b, dtype=float)
        if np.any(self.b <= 0):
            raise ValueError("b must be strictly positive")
        if self.active is None:
            self.active = np.ones(self.t.shape, dtype=bool)

    @classmethod
    def at_point(cls, t, b, signal, origin=None):
        """State for a point with SINR ``t``, interference-plus-noise ``b`` and
        signal power ``signal`` (same units as ``b``).

        Where ``t`` is below the floor, ``b`` is enlarged so that the bound
        built around ``(T_FLOOR, b)`` still admits the point with ``t = 0``:
        ``T_FLOOR / (2 b0) * b**2 <= signal``.  A pair that would need ``b0``
        more than ``MAX_INFLATION`` times ``b`` carries a numerically zero
        signal; it is marked inactive instead.
        """
        state = cls(t=t, b=b, origin=origin)
        state._admit(np.asarray(t, dtype=float), np.asarray(b, dtype=float), np.asarray(signal, dtype=float))
        return state

    def move_to(self, t, b, signal):
        self.t = np.maximum(np.asarray(t, dtype=float), T_FLOOR)
        self.b = np.asarray(b, dtype=float)
        self._admit(np.asarray(t, dtype=float), self.b.copy(), np.asarray(signal, dtype=float))

    def _admit(self, t, b, signal):
        low = (t < T_FLOOR) & self.active
        if not np.any(low):
            return
        signal = np.maximum(signal, 0.0)
        dead = low & (T_FLOOR * b > 2 * MAX_INFLATION * signal)
        self.active = self.active & ~dead
        keep = low & ~dead
        need = np.where(keep, T_FLOOR * b ** 2 / (2 * np.where(keep, signal, 1.0)), 0.0)
        self.b = np.where(keep, np.maximum(b, need), b)


def read_pairs(prog, sol, name, scale=None):
    """Scalar blocks ``name[m,k]`` as an (M, K) array, optionally rescaled."""
    M, K = prog.meta["M"], prog.meta["K"]
    out = np.array([[sol.value(f"{name}[{m},{k}]")[0] for k in range(K)] for m in range(M)])
    return out if scale is None else out * scale


def read_point(prog, sol):
    """``(t, b, signal)`` of a solved SCA subproblem; ``meta["signal"](sol)``
    evaluates the signal powers from the matrix variables."""
    meta = prog.meta
    t = read_pairs(prog, sol, meta.get("t_name", "t"), meta["t0"])
    b = read_pairs(prog, sol, meta.get("b_name", "b"), meta["b0"])
    return t, b, meta["signal"](sol)


FALLBACK_TOLS = (1e-8, 1e-7)


def solve_with_fallback(prog, tol_solver, fallback=FALLBACK_TOLS):
    """Solve at ``tol_solver``, retrying at each looser tolerance in ``fallback``
    while the solver stalls."""
    sol = solve(prog, tol=tol_solver)
    for tol in fallback:
        if sol.optimal:
            break
        if tol > tol_solver:
            logger.debug("retrying %s at tolerance %.0e (%s)", prog.name, tol, sol.status)
            sol = solve(prog, tol=tol)
    return sol


def run_sca(label, state, build, weights, max_iter=15, tol=1e-4, tol_solver=1e-10):
    """Generic SCA driver.

    ``build(state)`` returns a program around the current expansion point.  Stops
    when the relative change of the weighted log objective is at most ``tol`` or
    after ``max_iter`` solves.  The previous point is feasible for every
    subproblem, so a solve that lowers the objective only reflects solver
    accuracy: such a step is rejected and the loop stops at the previous point.
    A solver failure after at least one accepted step ends the loop the same
    way; on the first step it raises :class:`SubproblemError`.

    Returns the (program, solution) pair of the last accepted step (``None``
    twice when the first step was rejected) and the trace rows; ``state`` is
    updated in place.
    """
    if not state.objective_history:
        state.objective_history.append(weighted_log_objective(state.t, weights))
    trace = []
    accepted = (None, None)
    for it in range(1, max_iter + 1):
        prog = build(state)
        sol = solve_with_fallback(prog, tol_solver)
        if not sol.optimal:
            if accepted[0] is None:
                raise SubproblemError(label, it, sol.status)
            logger.info("%s stopped at iteration %d: %s", label, it, sol.status)
            trace.append({"loop": label, "iteration": it, "objective": float("nan"),
                          "max_residual": float("nan"), "accepted": False, "status": sol.status})
            break
        t_new, b_new, signal = read_point(prog, sol)
        if np.any(b_new <= 0):
            raise SubproblemError(label, it, "non-positive interference-plus-noise")
        prev = state.objective_history[-1]
        obj = weighted_log_objective(np.maximum(t_new, T_FLOOR), weights)
        row = {"loop": label, "iteration": it, "objective": obj,
               "max_residual": sol.kkt.max() if sol.kkt else float("nan"), "accepted": obj >= prev}
        trace.append(row)
        logger.debug("%(loop)s it=%(iteration)d obj=%(objective).9g res=%(max_residual).2e", row)
        if obj < prev:
            break
        state.move_to(t_new, b_new, signal)
        state.iteration = it
        state.objective_history.append(obj)
        accepted = (prog, sol)
        if obj - prev <= tol * max(abs(prev), 1e-12):
            break
    return accepted[0], accepted[1], trace
