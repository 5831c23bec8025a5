"""Alternating optimisation of analog beamformer, digital beamformers and IRS phases."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .analog import analog_phases, average_gram
from .channel import estimated_channels, generate_channels, sample_csi_error
from .conic import rank_one_ratio
from .digital import (init_sca_state, matched_filter, recover_digital_vectors, sca_digital_loop,
                      scaled_rows, verify_theorem1_certificate)
from .rates import (BeamformingSolution, effective_channels, per_user_rates, robust_rate_mc,
                    weighted_sum_rate)
from .reflect import (build_reflect_lift, init_reflect_state, lifted_score, project_unit_modulus,
                      recover_phases, sca_reflect_loop)
from .robust import (build_robust_digital_subproblem, build_robust_reflection_subproblem,
                     certified_weighted_rate, digital_scorer, init_robust_digital_state,
                     init_robust_reflect_state, monte_carlo_soundness, phase_scorer, robust_sca_loop,
                     xi_matrices, z_vectors)
from .scenario import default_geometry

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlgorithmOptions:
    r_max: int = 10
    outer_tol: float = 1e-3
    inner_max_iter: int = 15
    inner_tol: float = 1e-4
    solver_tol: float = 1e-10
    n_draws: int = 200
    warm_start: bool = True
    certificates: bool = True
    mc_samples: int = 2000
    soundness_samples: int = 0      # ball samples per LMI for the S-procedure check (0: off)
    init: str = "best"              # "best": best of the candidate phases, "ones": identity reflection


@dataclass
class RunRecord:
    """Outcome of one alternating-optimisation run.

    ``history`` is the best-so-far weighted sum rate [bit/s] after each outer
    iteration (entry 0 is the initial point); ``raw_history`` holds the rate
    of each iterate itself.
    """

    solution: BeamformingSolution
    history: list
    raw_history: list
    inner: list = field(default_factory=list)
    certificates: list = field(default_factory=list)
    rank_ratios: list = field(default_factory=list)
    soundness: list = field(default_factory=list)
    outer_iterations: int = 0
    wall_time: float = 0.0
    epsilon: float = 0.0
    certified_rate: float | None = None
    mc_mean: float | None = None
    mc_min: float | None = None
    per_user: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def rate(self):
        return self.history[-1]

    def to_json(self):
        sol = self.solution
        out = {
            "config": self.config,
            "epsilon": self.epsilon,
            "rate_bps": self.rate,
            "certified_rate_bps": self.certified_rate,
            "monte_carlo_bps": {"mean": self.mc_mean, "min": self.mc_min},
            "per_user_bps": list(self.per_user),
            "history_bps": list(self.history),
            "raw_history_bps": list(self.raw_history),
            "outer_iterations": self.outer_iterations,
            "wall_time_s": self.wall_time,
            "inner": self.inner,
            "certificates": self.certificates,
            "rank_ratios": list(self.rank_ratios),
            "soundness": self.soundness,
            "solution": {
                "total_power_w": sol.total_power(),
                "digital_norms": np.linalg.norm(sol.digital, axis=-1).tolist(),
                "phases_rad": np.angle(sol.phases).tolist(),
            },
        }
        return json.dumps(out, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)}")


def design_analog(ch, phases, n_rf):
    """Analog beamformer from the subcarrier-averaged Gram of the effective channels."""
    eff = np.swapaxes(effective_channels(ch, phases), 0, 1)       # (K, M, N_TX)
    return analog_phases(average_gram(eff), n_rf)


def _budget(v, gram):
    total = float(np.real(np.einsum("mki,ij,mkj->", v.conj(), gram, v)))
    return v / np.sqrt(total) if total > 0 else v


def candidate_phases(ch, g=None):
    """Starting reflections: all ones, then per user the unit-modulus projection
    of the phase vector maximising that user's subcarrier-summed cascade gain."""
    g = ch.g_irs_user if g is None else g
    out = [np.ones(ch.n_irs, dtype=complex)]
    # leading left singular vector of each rank-one H[k]
    a = np.stack([np.linalg.svd(ch.h_bs_irs[k])[0][:, 0] for k in range(ch.n_subcarriers)])
    for m in range(ch.n_users):
        d = np.abs(ch.u_gain[m])[:, None] * g[m] * a                   # (K, N_IRS)
        R = d.conj().T @ d
        out.append(project_unit_modulus(np.linalg.eigh(R)[1][:, -1]))
    return out


def initial_point(ch, cfg, score, init="best"):
    """Best starting ``(value, phases, solution, v)`` under ``score(solution)``.

    Each candidate reflection gets its analog design and two digital starts:
    the matched filter to every user, and (for a reflection aimed at user m)
    the matched filter to user m alone.
    """
    if init not in ("best", "ones"):
        raise ValueError(f"unknown init {init!r}; choose 'best' or 'ones'")
    cands = candidate_phases(ch) if init == "best" else [np.ones(ch.n_irs, dtype=complex)]
    best = None
    for c, phases in enumerate(cands):
        F = design_analog(ch, phases, cfg.n_rf)
        gram = F.conj().T @ F
        hbar = scaled_rows(ch, F, phases, cfg.p_max, ch.noise_power)
        starts = [matched_filter(hbar, gram)]
        if c > 0 and ch.n_users > 1:
            only = np.zeros_like(hbar)
            only[c - 1] = hbar[c - 1]
            starts.append(matched_filter(only, gram))
        for v in starts:
            sol = BeamformingSolution(F, v * np.sqrt(cfg.p_max), phases)
            value = score(sol)
            if best is None or value > best[0]:
                best = (value, phases, sol, v)
    return best


def _start_state(hbar, gram, previous, warm):
    """Matched filter, or the previous digital vectors when they score higher."""
    state = init_sca_state(hbar, gram)
    if warm and previous is not None:
        alt = init_sca_state(hbar, gram, _budget(previous, gram))
        if np.sum(np.log1p(alt.t)) > np.sum(np.log1p(state.t)):
            return alt
    return state


def _inner_row(label, outer, result):
    return {"loop": label, "outer": outer, "iterations": len(result.trace),
            "history": list(result.state.objective_history),
            "trace": result.trace}


def run_algorithm1(cfg, geom=None, ch=None, options=None):
    """Perfect-CSI alternating optimisation with a best-iterate guard."""
    opts = options or AlgorithmOptions()
    geom = default_geometry(cfg) if geom is None and ch is None else geom
    ch = generate_channels(cfg, geom) if ch is None else ch
    start = time.perf_counter()
    p_max, delta2, weights = cfg.p_max, ch.noise_power, np.asarray(cfg.weights)
    rng = np.random.default_rng(cfg.seed)

    best_rate, phases, best, v = initial_point(ch, cfg, lambda x: weighted_sum_rate(ch, x, weights),
                                               opts.init)
    record = RunRecord(solution=best, history=[best_rate], raw_history=[best_rate],
                       config=cfg.to_dict())

    for r in range(1, opts.r_max + 1):
        F = design_analog(ch, phases, cfg.n_rf)
        gram = F.conj().T @ F
        hbar = scaled_rows(ch, F, phases, p_max, delta2)
        dig = sca_digital_loop(hbar, gram, _start_state(hbar, gram, v, opts.warm_start), weights,
                               max_iter=opts.inner_max_iter, tol=opts.inner_tol,
                               tol_solver=opts.solver_tol)
        record.inner.append(_inner_row("digital", r, dig))
        _collect_certificates(record, dig, r, opts)
        v = recover_digital_vectors(dig.V, gram, hbar, weights, n_draws=opts.n_draws, rng=rng)

        lift = build_reflect_lift(ch, F, v, p_max, delta2)
        ref = sca_reflect_loop(lift, init_reflect_state(lift, phases), weights,
                               max_iter=opts.inner_max_iter, tol=opts.inner_tol,
                               tol_solver=opts.solver_tol)
        record.inner.append(_inner_row("reflect", r, ref))
        score = lifted_score(lift, weights)
        candidate = recover_phases(ref.omega, score=score, n_draws=opts.n_draws, rng=rng)
        if score(candidate) >= score(phases):
            phases = candidate

        current = BeamformingSolution(F, v * np.sqrt(p_max), phases)
        rate = weighted_sum_rate(ch, current, weights)
        record.raw_history.append(rate)
        prev_best = best_rate
        if rate > best_rate:
            best, best_rate = current, rate
        record.history.append(best_rate)
        record.outer_iterations = r
        logger.info("outer %d rate %.6g best %.6g", r, rate, best_rate)
        if r > 1 and abs(best_rate - prev_best) <= opts.outer_tol * max(abs(prev_best), 1e-300):
            break

    record.solution = best
    record.per_user = per_user_rates(ch, best).tolist()
    record.wall_time = time.perf_counter() - start
    return record


def _collect_certificates(record, dig, outer, opts):
    if dig.sol is None:
        return
    M, K = dig.V.shape[:2]
    for m in range(M):
        for k in range(K):
            ratio = rank_one_ratio(dig.V[m, k])
            record.rank_ratios.append(ratio)
            if not opts.certificates:
                continue
            cert = verify_theorem1_certificate(dig.prog, dig.sol, m, k)
            record.certificates.append({
                "outer": outer, "m": m, "k": k, "rank_ratio": ratio,
                "rank_ok": cert.rank_ok, "theta_rank": cert.theta_rank, "v_rank": cert.v_rank,
                "complementarity": cert.complementarity,
            })


def _check_soundness(record, result, outer, opts, rng):
    if opts.soundness_samples <= 0 or result.sol is None:
        return
    for row in monte_carlo_soundness(result.prog, result.sol, rng, opts.soundness_samples):
        record.soundness.append({"loop": result.prog.meta["kind"], "outer": outer, **row})


def _robust_start(xi, g_est, gram, hbar, previous, eps, warm):
    v = matched_filter(hbar, gram)
    state = init_robust_digital_state(xi, g_est, v, eps)
    if warm and previous is not None:
        alt = init_robust_digital_state(xi, g_est, _budget(previous, gram), eps)
        if np.sum(np.log1p(alt.t)) > np.sum(np.log1p(state.t)):
            return alt
    return state


def draw_estimate(cfg, eps, geom=None):
    """True channel of ``cfg`` and the estimate after an error drawn from the
    ball ``||dg||^2 <= eps`` (seeded by ``cfg.seed``)."""
    geom = default_geometry(cfg) if geom is None else geom
    truth = generate_channels(cfg, geom)
    err = sample_csi_error(cfg.replace(epsilon=eps), np.random.default_rng([cfg.seed, 1]))
    return truth, estimated_channels(truth, err)


def run_robust(cfg, geom=None, ch_estimated=None, eps=None, options=None):
    """Alternating optimisation against the error ball ``||dg||^2 <= eps``.

    ``ch_estimated`` holds the designer's channel estimate; when omitted it is
    produced by :func:`draw_estimate`, and ``per_user`` then reports the rates
    on the true channel (otherwise on the estimate).  The guard tracks the
    certified (worst-case) weighted sum rate, which is also ``history``;
    Monte-Carlo statistics sample the ball around the estimate.
    """
    opts = options or AlgorithmOptions()
    eps = cfg.epsilon if eps is None else float(eps)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    truth = None
    if ch_estimated is None:
        truth, ch_estimated = draw_estimate(cfg, eps, geom)
    ch = ch_estimated
    start = time.perf_counter()
    p_max, delta2, weights = cfg.p_max, ch.noise_power, np.asarray(cfg.weights)
    g_est = ch.g_irs_user
    rng = np.random.default_rng(cfg.seed)
    check_rng = np.random.default_rng([cfg.seed, 3])

    best_rate, phases, best, v = initial_point(
        ch, cfg, lambda x: certified_weighted_rate(ch, x, eps, weights), opts.init)
    record = RunRecord(solution=best, history=[best_rate], raw_history=[best_rate],
                       epsilon=eps, config=cfg.to_dict())

    for r in range(1, opts.r_max + 1):
        F = design_analog(ch, phases, cfg.n_rf)
        gram = F.conj().T @ F
        hbar = scaled_rows(ch, F, phases, p_max, delta2)
        xi = xi_matrices(ch, F, phases, p_max, delta2)
        init = _robust_start(xi, g_est, gram, hbar, v, eps, opts.warm_start)
        dig = robust_sca_loop(
            "robust-digital",
            lambda s, xi=xi, gram=gram: build_robust_digital_subproblem(xi, g_est, gram, s, eps, weights),
            init, weights, max_iter=opts.inner_max_iter, tol=opts.inner_tol, tol_solver=opts.solver_tol)
        record.inner.append(_inner_row("digital", r, dig))
        _check_soundness(record, dig, r, opts, check_rng)
        for block in dig.matrices.reshape(-1, *dig.matrices.shape[-2:]):
            record.rank_ratios.append(rank_one_ratio(block))
        v = recover_digital_vectors(dig.matrices, gram, n_draws=opts.n_draws, rng=rng,
                                    scorer=digital_scorer(xi, g_est, eps, weights))

        z = z_vectors(ch, F, v, p_max, delta2)
        ref = robust_sca_loop(
            "robust-reflect",
            lambda s, z=z: build_robust_reflection_subproblem(z, g_est, s, eps, weights),
            init_robust_reflect_state(z, g_est, phases, eps), weights,
            max_iter=opts.inner_max_iter, tol=opts.inner_tol, tol_solver=opts.solver_tol)
        record.inner.append(_inner_row("reflect", r, ref))
        _check_soundness(record, ref, r, opts, check_rng)
        score = phase_scorer(z, g_est, eps, weights)
        candidate = recover_phases(ref.matrices, score=score, n_draws=opts.n_draws, rng=rng)
        if score(candidate) >= score(phases):
            phases = candidate

        current = BeamformingSolution(F, v * np.sqrt(p_max), phases)
        rate = certified_weighted_rate(ch, current, eps, weights)
        record.raw_history.append(rate)
        prev_best = best_rate
        if rate > best_rate:
            best, best_rate = current, rate
        record.history.append(best_rate)
        record.outer_iterations = r
        logger.info("robust outer %d certified %.6g best %.6g", r, rate, best_rate)
        if r > 1 and abs(best_rate - prev_best) <= opts.outer_tol * max(abs(prev_best), 1e-300):
            break

    record.solution = best
    record.certified_rate = best_rate
    record.per_user = per_user_rates(ch if truth is None else truth, best).tolist()
    if opts.mc_samples > 0:
        mc = robust_rate_mc(ch, best, eps, opts.mc_samples, np.random.default_rng([cfg.seed, 2]), weights)
        record.mc_mean, record.mc_min = mc.mean, mc.min
    record.wall_time = time.perf_counter() - start
    return record
