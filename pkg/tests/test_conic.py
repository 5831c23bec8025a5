import numpy as np
import pytest

from conic_corpus import corpus, water_level
from conftest import crandn
from irsbf.conic import (EXP, NONNEG, PSD, ConicProgram, ConicSolution, congruence_map, extract_rank_one,
                         hmat, hvec, kkt_residuals, rank_one_ratio, solve)


def two_by_two():
    """max Re X01 s.t. X00 = X11 = 1, X PSD (optimum 1 at X = ones)."""
    prog = ConicProgram("2x2")
    X = prog.add_block("X", PSD, 2)
    prog.add_constraint([(X, np.diag([1.0, 0.0]))], 1.0)
    prog.add_constraint([(X, np.diag([0.0, 1.0]))], 1.0)
    prog.add_objective([(X, np.array([[0, 0.5], [0.5, 0]]))])
    return prog


def lp_corner(scale=1.0):
    """min x s.t. x >= 3 written as max -x with x - s = 3."""
    prog = ConicProgram("lp")
    x = prog.add_block("x", NONNEG)
    s = prog.add_block("s", NONNEG)
    prog.add_constraint([(x, 0, 1.0), (s, 0, -1.0)], 3.0)
    prog.add_objective([(x, 0, -scale)])
    return prog


def test_psd_example():
    sol = solve(two_by_two())
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-7)
    np.testing.assert_allclose(sol.value("X"), np.ones((2, 2)), atol=1e-6)


def test_lp_corner():
    sol = solve(lp_corner())
    assert sol.optimal
    assert -sol.objective == pytest.approx(3.0, abs=1e-7)


def test_exponential_cone_example():
    prog = ConicProgram("exp")
    e = prog.add_block("e", EXP)
    prog.add_constraint([(e, 1, 1.0)], 1.0)
    prog.add_constraint([(e, 2, 1.0)], 2.0)
    prog.add_objective([(e, 0, 1.0)])
    sol = solve(prog)
    assert sol.optimal and sol.objective == pytest.approx(np.log(2), abs=1e-7)


@pytest.mark.parametrize("name,prog,opt", corpus(seed=77, per_family=2), ids=lambda x: x if isinstance(x, str) else "")
def test_reference_optima(name, prog, opt):
    sol = solve(prog, tol=1e-9)
    assert sol.optimal, sol.status
    assert sol.objective == pytest.approx(opt, rel=1e-6, abs=1e-7)
    assert sol.kkt.max() <= 1e-6


def test_water_level_oracle_is_optimal():
    g, P = np.array([0.5, 2.0, 4.0]), 1.0
    p = water_level(g, P)
    assert p.sum() == pytest.approx(P)
    # every perturbation along the budget plane lowers the objective
    f = lambda q: np.sum(np.log1p(g * q))
    rng = np.random.default_rng(0)
    for _ in range(200):
        d = rng.normal(size=3)
        d -= d.mean()
        q = p + 1e-3 * d
        if np.all(q >= 0):
            assert f(q) <= f(p) + 1e-12


def test_infeasible_and_unbounded_reported():
    prog = ConicProgram()
    x = prog.add_block("x", NONNEG)
    prog.add_constraint([(x, 0, 1.0)], -1.0)
    assert solve(prog).status == "infeasible"
    prog = ConicProgram()
    x = prog.add_block("x", NONNEG)
    prog.add_objective([(x, 0, 1.0)])
    assert solve(prog).status == "unbounded"


def test_deterministic_and_scale_invariant():
    a, b = solve(two_by_two()), solve(two_by_two())
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    x1 = solve(lp_corner()).value("x")
    x3 = solve(lp_corner(scale=3.0)).value("x")
    np.testing.assert_allclose(x1, x3, atol=1e-7)


def test_kkt_hand_optimum():
    prog = two_by_two()
    x = hvec(np.ones((2, 2)))
    sol = ConicSolution(status="optimal", objective=1.0, x=x, y=np.array([0.5, 0.5]))
    res = kkt_residuals(prog, sol)
    assert res.primal <= 1e-9 and res.dual <= 1e-9 and res.gap <= 1e-9


def test_kkt_perturbation_and_infeasible_point():
    prog = two_by_two()
    y = np.array([0.5, 0.5])
    x = hvec(np.ones((2, 2)))
    x[0] += 1e-3
    res = kkt_residuals(prog, ConicSolution("optimal", 1.0, x, y))
    assert 1e-4 <= res.primal <= 1e-2
    bad = hvec(np.diag([1.0, -1.0]))
    assert kkt_residuals(prog, ConicSolution("optimal", 0.0, bad, y)).primal > 1e-6
    with pytest.raises(ValueError):
        kkt_residuals(prog, ConicSolution("optimal", 1.0, hvec(np.ones((2, 2))), None))


def test_kkt_recomputed_from_program_data():
    sol = solve(two_by_two())
    again = kkt_residuals(two_by_two(), sol)
    assert again.max() <= 1e-8
    assert again == sol.kkt


def test_program_validation():
    prog = ConicProgram()
    x = prog.add_block("x", NONNEG, 2)
    with pytest.raises(ValueError):
        prog.add_block("x", NONNEG)
    other = ConicProgram().add_block("y", NONNEG)
    with pytest.raises(ValueError):
        prog.add_constraint([(other, 0, 1.0)], 0.0)
    X = prog.add_block("X", PSD, 2)
    with pytest.raises(ValueError):
        prog.add_constraint([(X, np.eye(3))], 0.0)
    with pytest.raises(ValueError):
        prog.add_constraint([(X, 0, 1.0)], 0.0)
    with pytest.raises(IndexError):
        prog.add_constraint([(x, 5, 1.0)], 0.0)
    with pytest.raises(ValueError):
        prog.add_block("z", "lorentz")


def test_dump_lists_blocks_and_triplets():
    text = two_by_two().dump()
    assert "block X psd 2 offset 0" in text
    assert text.count("\nb ") == 2 and "\nA 0 0 1" in text


def test_hvec_round_trip_and_isometry(rng):
    G = crandn(rng, 4, 4)
    X = G + G.conj().T
    H = crandn(rng, 4, 4)
    C = H + H.conj().T
    np.testing.assert_allclose(hmat(hvec(X), 4), X, atol=1e-14)
    assert hvec(C) @ hvec(X) == pytest.approx(np.real(np.trace(C @ X)), rel=1e-12)
    L = crandn(rng, 3, 4)
    np.testing.assert_allclose(congruence_map(L) @ hvec(X), hvec(L @ X @ L.conj().T), atol=1e-12)


def test_extract_exact_rank_one(rng):
    v = crandn(rng, 4)
    out = extract_rank_one(np.outer(v, v.conj()))
    phase = out @ v.conj() / abs(out @ v.conj())
    np.testing.assert_allclose(out, phase * v, atol=1e-10)


def test_extract_threshold_skips_randomisation():
    X = np.diag([1.0, 1e-12])

    def score(_):
        raise AssertionError("randomisation must not run")
    out = extract_rank_one(X, score=score)
    np.testing.assert_allclose(np.abs(out), [1.0, 0.0], atol=1e-12)
    assert rank_one_ratio(X) == pytest.approx(1e-12)


def test_extract_draw_statistics():
    seen = []

    def score(x):
        seen.append(np.sum(np.abs(x) ** 2))
        return 0.0
    extract_rank_one(np.eye(2), score=score, n_draws=10_000, rng=np.random.default_rng(1))
    draws = np.array(seen[1:])               # first call scores the principal eigenvector
    assert len(draws) == 10_000
    assert draws.mean() == pytest.approx(2.0, rel=0.03)


def test_extract_feasibility_filter_and_fallback():
    principal_only = extract_rank_one(np.eye(2), score=lambda x: 1.0, feasible=lambda x: False)
    assert np.sum(np.abs(principal_only) ** 2) == pytest.approx(1.0)
    best = extract_rank_one(np.diag([1.0, 0.9]), score=lambda x: abs(x[1]), n_draws=300,
                            rng=np.random.default_rng(0))
    assert abs(best[1]) > 0


def test_extract_rejects_indefinite():
    with pytest.raises(ValueError):
        extract_rank_one(np.diag([1.0, -0.5]))
