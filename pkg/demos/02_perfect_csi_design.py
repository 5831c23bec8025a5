"""Alternating optimisation with perfect channel knowledge.

The analog beamformer comes from the band-averaged channel Gram matrix, the
digital beamformers from an SCA loop over a semidefinite relaxation, and the
IRS phases from a second relaxation.  The script prints the rate after every
outer iteration and checks that the relaxed digital solutions are rank one.

    python3 demos/02_perfect_csi_design.py
"""
import numpy as np

from irsbf.algorithm import AlgorithmOptions, run_algorithm1
from irsbf.scenario import desk_config

cfg = desk_config(seed=1)
rec = run_algorithm1(cfg, options=AlgorithmOptions(init="ones"))

print("best-so-far weighted sum rate per outer iteration [Gbit/s]:")
print("  ", np.round(np.array(rec.history) / 1e9, 4))
for row in rec.inner:
    print(f"  outer {row['outer']} {row['loop']:8s} {row['iterations']:2d} SCA steps, "
          f"objective {row['history'][0]:.4f} -> {row['history'][-1]:.4f}")

live = [c for c in rec.certificates if c["v_rank"] == 1]
print(f"\n{len(live)} active digital blocks; largest eigenvalue ratio "
      f"{max(c['rank_ratio'] for c in live):.1e}")
print("dual certificate holds on all of them:", all(c["rank_ok"] for c in live))
print("per-user rates [Gbit/s]:", np.round(np.array(rec.per_user) / 1e9, 4))
sol = rec.solution
print(f"transmit power {sol.total_power():.4e} W of {cfg.p_max:.4e} W")
