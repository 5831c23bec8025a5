"""System configuration, geometry and derived constants."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 3e8


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of one scenario (linear SI units unless noted).

    ``p_max`` is in watts; use :meth:`from_dict` with ``p_max_dbm`` to enter it
    in dBm.  ``g_t_db`` defaults to ``4 + 20 log10(sqrt(n_tx))``.
    """

    n_tx: int = 64
    n_rf: int = 4
    n_irs: int = 4
    n_users: int = 2
    n_subcarriers: int = 16
    f_c: float = 340e9
    bandwidth: float = 20e9
    p_max: float = float(dbm_to_watt(4.0))
    n0_dbm_hz: float = -174.0
    absorption: float = 0.0033
    g_t_db: float | None = None
    g_r_db: float = 0.0
    chi: float = 1.0
    weights: tuple = ()
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.g_t_db is None:
            object.__setattr__(self, "g_t_db", 4.0 + 20.0 * np.log10(np.sqrt(self.n_tx)))
        if not self.weights:
            object.__setattr__(self, "weights", (1.0,) * self.n_users)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.n_tx < 1 or self.n_rf < 1 or self.n_irs < 1:
            raise ValueError("antenna, RF-chain and IRS element counts must be positive")
        if self.n_rf > self.n_tx:
            raise ValueError(f"n_rf={self.n_rf} exceeds n_tx={self.n_tx}")
        if self.n_users < 1 or self.n_subcarriers < 1:
            raise ValueError("need at least one user and one subcarrier")
        if not self.p_max > 0 or not self.bandwidth > 0 or not self.f_c > 0:
            raise ValueError("p_max, bandwidth and f_c must be positive")
        if len(self.weights) != self.n_users:
            raise ValueError(f"expected {self.n_users} weights, got {len(self.weights)}")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if self.epsilon < 0 or self.absorption < 0:
            raise ValueError("epsilon and absorption must be non-negative")

    @property
    def g_t(self):
        return float(db_to_linear(self.g_t_db))

    @property
    def g_r(self):
        return float(db_to_linear(self.g_r_db))

    @property
    def p_max_dbm(self):
        return float(watt_to_dbm(self.p_max))

    @property
    def subcarrier_spacing(self):
        return self.bandwidth / self.n_subcarriers

    def replace(self, **changes):
        """Copy with changes; ``p_max_dbm`` is accepted, and a changed ``n_tx``
        re-derives ``g_t_db`` unless it is given explicitly."""
        if "p_max_dbm" in changes:
            changes["p_max"] = float(dbm_to_watt(changes.pop("p_max_dbm")))
        if "n_tx" in changes and "g_t_db" not in changes:
            changes["g_t_db"] = None
        if "n_users" in changes and "weights" not in changes:
            changes["weights"] = ()
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, values):
        values = dict(values)
        if "p_max_dbm" in values:
            values["p_max"] = float(dbm_to_watt(values.pop("p_max_dbm")))
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["weights"] = list(self.weights)
        out["p_max_dbm"] = self.p_max_dbm
        return out


def paper_config(**changes):
    """Default parameters of the reference simulation setup."""
    return SystemConfig().replace(**changes)


def desk_config(**changes):
    """Small profile that keeps every subproblem solve in the millisecond range."""
    return SystemConfig(n_tx=16, n_rf=2, n_irs=4, n_users=2, n_subcarriers=4).replace(**changes)


PROFILES = {"desk": desk_config, "paper": paper_config}

_INT_KEYS = {"n_tx", "n_rf", "n_irs", "n_users", "n_subcarriers", "seed"}


def parse_value(key, text):
    text = text.strip()
    if key == "weights":
        return tuple(float(w) for w in text.replace(",", " ").split())
    if key in _INT_KEYS:
        return int(text)
    return float(text)


def parse_config_text(text, base=None):
    """Parse ``key = value`` lines (``#`` comments allowed) into a config.

    Keys are :class:`SystemConfig` field names plus ``p_max_dbm``; missing keys
    keep the values of ``base`` (default: the reference setup).
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, val)
    base = SystemConfig() if base is None else base
    return base.replace(**values)


def load_config(path, base=None):
    return parse_config_text(Path(path).read_text(), base=base)


def format_config(cfg):
    lines = []
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if f.name == "weights":
            val = " ".join(repr(w) for w in val)
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Geometry:
    """BS-IRS link distance and angles plus per-user IRS distances/angles."""

    d_bs_irs: float
    d_irs_user: tuple
    aod_bs: float
    aoa_irs: float
    aoa_user: tuple
    antenna_spacing: float

    def __post_init__(self):
        object.__setattr__(self, "d_irs_user", tuple(float(d) for d in self.d_irs_user))
        object.__setattr__(self, "aoa_user", tuple(float(a) for a in self.aoa_user))
        if self.d_bs_irs <= 0 or any(d <= 0 for d in self.d_irs_user) or self.antenna_spacing <= 0:
            raise ValueError("distances and antenna spacing must be positive")
        if len(self.d_irs_user) != len(self.aoa_user):
            raise ValueError("one distance and one angle per user")
        angles = (self.aod_bs, self.aoa_irs, *self.aoa_user)
        if any(abs(a) > np.pi / 2 + 1e-12 for a in angles):
            raise ValueError("angles must lie within [-pi/2, pi/2]")

    @property
    def n_users(self):
        return len(self.d_irs_user)


def default_geometry(cfg, rng=None, d_bs_irs=5.0, disc_center=None, disc_radius=1.5):
    """Random geometry: BS-IRS angles uniform in [-pi/2, pi/2], users uniform
    in a disc of ``disc_radius`` whose centre lies ``disc_center`` metres in
    front of the IRS, indexed by increasing distance from the IRS (user 1 is
    the nearest).  By default the disc touches the IRS plane
    (``disc_center = disc_radius``).  Antenna spacing is half a wavelength at
    ``f_c``."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    disc_center = disc_radius if disc_center is None else disc_center
    aod, aoa = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
    r = disc_radius * np.sqrt(rng.uniform(size=cfg.n_users))
    ang = rng.uniform(0, 2 * np.pi, size=cfg.n_users)
    x = disc_center + r * np.cos(ang)
    y = r * np.sin(ang)
    order = np.argsort(np.hypot(x, y), kind="stable")
    x, y = x[order], y[order]
    return Geometry(
        d_bs_irs=d_bs_irs,
        d_irs_user=tuple(np.hypot(x, y)),
        aod_bs=float(aod),
        aoa_irs=float(aoa),
        aoa_user=tuple(np.arctan2(y, x)),
        antenna_spacing=SPEED_OF_LIGHT / cfg.f_c / 2,
    )


def subcarrier_frequencies(cfg):
    k = np.arange(1, cfg.n_subcarriers + 1)
    return cfg.f_c + cfg.subcarrier_spacing * (k - 1 - (cfg.n_subcarriers - 1) / 2)


def noise_power_per_subcarrier(cfg):
    """Noise power per subcarrier in watts."""
    return cfg.subcarrier_spacing * float(dbm_to_watt(cfg.n0_dbm_hz))
