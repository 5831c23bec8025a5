"""The S-procedure in one dimension of uncertainty.

We want |g + d|^2 >= c for every error with |d|^2 <= r.  Writing the
condition as a quadratic in d, a multiplier beta >= 0 that makes a small
Hermitian matrix PSD certifies it for the whole ball at once.
"""
import numpy as np

from irsbf.conic import NONNEG, ConicProgram, solve
from irsbf.robust import SProcedureInput, implication_margin, s_procedure_lmi

g, r = 1.0 + 0.5j, 0.25
for c in (0.2, 0.4, 0.6):
    # |g + d|^2 - c = d d* + 2 Re(g* d) + |g|^2 - c
    inp = SProcedureInput(q2=np.eye(1), p2=np.array([np.conj(g)]), e2=abs(g) ** 2 - c, radius2=r)
    prog = ConicProgram("s-procedure")
    beta = prog.add_block("beta", NONNEG)
    s_procedure_lmi(prog, "lmi", inp, beta)
    sol = solve(prog)
    exact = (abs(g) - np.sqrt(r)) ** 2
    sampled = implication_margin(inp, np.random.default_rng(0), 20_000)
    verdict = f"certified with beta = {sol.value('beta')[0]:.4f}" if sol.optimal else "no certificate"
    print(f"c = {c}: worst |g+d|^2 = {exact:.4f}, sampled margin {sampled:+.4f}, {verdict}")
