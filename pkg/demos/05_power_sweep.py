"""A small transmit-power sweep written to CSV with its SVG plot.

    python3 demos/05_power_sweep.py [out_dir]
"""
import sys
from pathlib import Path

from irsbf.algorithm import AlgorithmOptions
from irsbf.experiments import SweepSpec, emit_plot, run_sweep, write_csv
from irsbf.scenario import desk_config

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(parents=True, exist_ok=True)
spec = SweepSpec(axis="p_max_dbm", values=(-4, 0, 4, 8), seeds=3, base=desk_config(),
                 options=AlgorithmOptions(r_max=5))
rows = run_sweep(spec)
(out / "power_sweep.csv").write_text(write_csv(rows))
emit_plot(rows, "rate", out / "power_sweep.svg")
for r in rows:
    if r["kind"] == "mean":
        print(f"P_max {r['value']:>3s} dBm: mean sum rate {r['sum_rate_bps'] / 1e9:.3f} Gbit/s")
print(f"wrote {out / 'power_sweep.csv'} and {out / 'power_sweep.svg'}")
