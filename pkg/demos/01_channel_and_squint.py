"""A desk-scale THz scenario: where the users sit, how strong the cascaded
BS -> IRS -> user links are, and how much one analog beam loses across the band.

    python3 demos/01_channel_and_squint.py
"""
import numpy as np

from irsbf.channel import generate_channels, steering_vector
from irsbf.scenario import default_geometry, desk_config, format_config

cfg = desk_config(seed=0)
geom = default_geometry(cfg)
ch = generate_channels(cfg, geom)
print(format_config(cfg))
print()

print("subcarrier frequencies [GHz]:", np.round(ch.freqs / 1e9, 3))
print("noise power per subcarrier [W]: %.3e" % ch.noise_power)
for m in range(cfg.n_users):
    gains = np.abs(ch.u_gain[m])
    print(f"user {m + 1}: |u_m[k]| over subcarriers = {np.array2string(gains, precision=3)}")

# beam squint: a steering vector formed at the centre frequency, evaluated on the band edges
n = cfg.n_tx
centre = steering_vector(n, 0.5)
for k, f in enumerate(ch.freqs):
    squinted = steering_vector(n, 0.5 * f / cfg.f_c)
    print(f"subcarrier {k}: |a(centre)^H a(f_k)| = {abs(centre.conj() @ squinted):.4f}")
