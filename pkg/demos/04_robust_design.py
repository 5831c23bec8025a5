"""Designing against a bounded channel estimation error.

For growing error bounds eps the robust pipeline maximises a certified
(worst-case) rate.  Monte-Carlo errors drawn from the same ball never do
worse than the certificate.

    python3 demos/04_robust_design.py
"""
from irsbf.algorithm import AlgorithmOptions, draw_estimate, run_robust
from irsbf.scenario import desk_config

cfg = desk_config(seed=2)
opts = AlgorithmOptions(r_max=4, mc_samples=2000, soundness_samples=2000)
_, estimate = draw_estimate(cfg, 0.0)
print(" eps     certified   MC mean    MC min   [Gbit/s]   LMIs sound")
for eps in (0.0, 0.005, 0.01, 0.02, 0.05):
    rec = run_robust(cfg, ch_estimated=estimate, eps=eps, options=opts)
    sound = sum(row["ok"] for row in rec.soundness)
    print(f"{eps:5.3f}   {rec.certified_rate / 1e9:8.4f}  {rec.mc_mean / 1e9:8.4f}  "
          f"{rec.mc_min / 1e9:8.4f}              {sound}/{len(rec.soundness)}")
