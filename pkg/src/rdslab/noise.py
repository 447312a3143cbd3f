"""Reproducible two-sided Wiener increments, the time shift, and OU processes.

A :class:`NoisePath` holds per-channel Gaussian increments on a fixed grid of
step ``dt``.  Increments are keyed by an absolute *generator* index so that the
shift ``theta_t`` is a pure relabelling of time: ``shift(p, t)`` shares the
stored samples and the group law holds exactly.  Two independent one-sided
streams (derived from the seed) are spliced at index 0, giving two-sided time.

Ornstein-Uhlenbeck processes are sampled with the exact one-step update
``z_{n+1} = exp(-kappa dt) z_n + xi_n`` where ``xi_n`` is the path increment
scaled to variance ``(1 - exp(-2 kappa dt)) / (2 kappa)``, so marginals and
autocorrelation are exact in distribution at any step size.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, GridError

__all__ = [
    "NoisePath",
    "OUProcess",
    "make_path",
    "shift",
    "ou_sample",
    "ou_convolution",
    "exp_filter",
]


def _splitmix64(x):
    """One round of splitmix64; used to derive independent stream keys."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def _stream(seed, channel, side):
    """Philox stream keyed by (seed, channel, side); side 0 = t>=0, 1 = t<0, 2 = init."""
    k0 = _splitmix64((seed & 0xFFFFFFFFFFFFFFFF) ^ _splitmix64(channel + 1))
    k1 = _splitmix64(k0 ^ _splitmix64(side + 0x51))
    return np.random.Generator(np.random.Philox(key=(k0 << 64) | k1))


def grid_index(t, dt, what="time"):
    """Snap ``t`` to the grid ``k*dt``; raise GridError when it is off-grid."""
    k = round(t / dt)
    if abs(t - k * dt) > 1e-9 * max(1.0, abs(t)):
        raise GridError(f"{what} {t} is not a multiple of dt={dt}")
    return k


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Discretised multi-channel Wiener increments on a two-sided grid.

    ``increments[c, i]`` covers the generator interval
    ``[(gen_lo + i) dt, (gen_lo + i + 1) dt)``.  Path-clock time ``t`` maps to
    generator index ``round(t/dt) + clock_offset``; ``shift`` only moves
    ``clock_offset``.
    """

    seed: int
    dt: float
    gen_lo: int
    clock_offset: int
    increments: np.ndarray
    channel_scales: np.ndarray

    @property
    def n_channels(self):
        return self.increments.shape[0]

    @property
    def n_steps(self):
        return self.increments.shape[1]

    @property
    def gen_hi(self):
        return self.gen_lo + self.n_steps

    @property
    def t_min(self):
        return (self.gen_lo - self.clock_offset) * self.dt

    @property
    def t_max(self):
        return (self.gen_hi - self.clock_offset) * self.dt

    @property
    def origin(self):
        """Path-clock time of the first stored increment."""
        return self.t_min

    def gen_index(self, t):
        """Generator index of path-clock time ``t`` (must lie on the grid)."""
        return grid_index(t, self.dt) + self.clock_offset

    def increment_slice(self, g0, g1, channel=None):
        """Increments for generator steps ``g0 .. g1-1`` (validated in range)."""
        if g0 < self.gen_lo or g1 > self.gen_hi:
            raise GridError(
                f"generator steps [{g0},{g1}) outside stored range "
                f"[{self.gen_lo},{self.gen_hi})"
            )
        i0, i1 = g0 - self.gen_lo, g1 - self.gen_lo
        if channel is None:
            return self.increments[:, i0:i1]
        return self.increments[channel, i0:i1]

    def to_spec(self):
        """Serializable identity: (seed, dt, horizon, channels, scales) [+ shift]."""
        spec = {
            "seed": self.seed,
            "dt": self.dt,
            "horizon": [self.gen_lo * self.dt, self.gen_hi * self.dt],
            "channels": self.n_channels,
            "scales": [float(s) for s in self.channel_scales],
        }
        if self.clock_offset != 0:
            spec["shift"] = self.clock_offset * self.dt
        return spec

    @staticmethod
    def from_spec(spec):
        p = make_path(
            seed=spec["seed"],
            dt=spec["dt"],
            horizon=tuple(spec["horizon"]),
            channels=spec["channels"],
            scales=spec["scales"],
        )
        if spec.get("shift"):
            p = shift(p, spec["shift"])
        return p


def make_path(seed, dt, horizon, channels=1, scales=None):
    """Generate a two-sided noise path covering ``horizon = (t_min, t_max)``.

    Deterministic in ``(seed, channel, absolute index)``: extending the horizon
    or re-creating the path reproduces overlapping increments bitwise.
    """
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    t_min, t_max = horizon
    if not (t_min <= 0.0 <= t_max):
        raise ConfigError(f"horizon {horizon} must contain 0 (two-sided time)")
    lo = grid_index(t_min, dt, "horizon start")
    hi = grid_index(t_max, dt, "horizon end")
    if hi <= lo:
        raise ConfigError("horizon is empty")
    if scales is None:
        scales = np.ones(channels)
    scales = np.asarray(scales, dtype=float)
    if scales.shape != (channels,):
        raise ConfigError(f"need {channels} channel scales, got shape {scales.shape}")
    if np.any(scales < 0) or not np.all(np.isfinite(scales)):
        raise ConfigError("channel scales must be finite and nonnegative")

    root = np.sqrt(dt)
    inc = np.empty((channels, hi - lo))
    n_neg = -lo  # horizon contains 0, so lo <= 0 <= hi
    for c in range(channels):
        if n_neg:
            # negative side: draw j maps to absolute index -1-j
            inc[c, :n_neg] = _stream(seed, c, 1).standard_normal(n_neg)[::-1]
        if hi:
            inc[c, n_neg:] = _stream(seed, c, 0).standard_normal(hi)
    inc *= root
    return NoisePath(
        seed=seed,
        dt=dt,
        gen_lo=lo,
        clock_offset=0,
        increments=inc,
        channel_scales=scales,
    )


def shift(path, t):
    """The group action ``theta_t``: re-base increments, ``W_s -> W_{t+s} - W_t``.

    ``t`` must be a grid multiple and the shifted horizon must still contain 0.
    """
    k = grid_index(t, path.dt, "shift")
    off = path.clock_offset + k
    if not (path.gen_lo <= off <= path.gen_hi):
        raise GridError(
            f"shift by {t} moves time 0 outside the stored horizon "
            f"[{path.t_min}, {path.t_max}]"
        )
    return replace(path, clock_offset=off)


@dataclass(frozen=True, eq=False)
class OUProcess:
    """Stationary OU samples on the grid points of a driving path.

    ``samples[i]`` is the value at generator grid point ``gen_lo + i``; the
    process is evaluated by generator index so it is invariant under path
    shifts (the true ``z(theta_t omega)`` action).
    """

    rate: float
    samples: np.ndarray
    gen_lo: int
    dt: float
    seed: int
    channel: int

    @property
    def gen_hi(self):
        return self.gen_lo + self.samples.size - 1

    def value(self, gen_index):
        if gen_index < self.gen_lo or gen_index > self.gen_hi:
            raise GridError(f"generator index {gen_index} outside OU sample range")
        return self.samples[gen_index - self.gen_lo]

    def values(self, g0, g1):
        """Samples at generator grid points ``g0 .. g1`` inclusive."""
        if g0 < self.gen_lo or g1 > self.gen_hi:
            raise GridError("requested OU range outside stored samples")
        return self.samples[g0 - self.gen_lo : g1 - self.gen_lo + 1]

    def at_time(self, t, path):
        return self.value(path.gen_index(t))


def ou_sample(path, channel, rate, init=None, scale=1.0):
    """Exact-in-distribution OU process driven by one path channel.

    Starts from the stationary law N(0, 1/(2 rate)) at the path's first grid
    point (the initial draw is keyed by (seed, channel), so it is reproducible)
    unless ``init`` is given.  ``scale`` multiplies the driving increments.
    """
    if rate <= 0:
        raise ConfigError(f"OU rate must be positive, got {rate}")
    if not 0 <= channel < path.n_channels:
        raise ConfigError(f"channel {channel} not in path (has {path.n_channels})")
    dt = path.dt
    decay = np.exp(-rate * dt)
    # xi_n = c * dW_n has variance (1 - exp(-2 kappa dt)) / (2 kappa), exactly
    c = np.sqrt(-np.expm1(-2.0 * rate * dt) / (2.0 * rate * dt)) * scale
    if init is None:
        xi0 = _stream(path.seed, channel, 2).standard_normal(1)[0]
        z0 = np.sqrt(1.0 / (2.0 * rate)) * scale * xi0
    else:
        z0 = float(init)
    dw = path.increments[channel]
    out = np.empty(path.n_steps + 1)
    out[0] = z0
    if path.n_steps:
        out[1:] = lfilter([c], [1.0, -decay], dw, zi=np.array([decay * z0]))[0]
    return OUProcess(
        rate=rate,
        samples=out,
        gen_lo=path.gen_lo,
        dt=dt,
        seed=path.seed,
        channel=channel,
    )


def ou_convolution(path, channel, k, init=None, scale=1.0):
    """Fast-mode response ``exp[-(k^2-1) t] * (white noise)`` for mode ``k >= 2``.

    This is exactly a stationary OU process with relaxation rate ``k^2 - 1``.
    """
    if k <= 1:
        raise ConfigError(f"convolution index k must satisfy k >= 2, got {k}")
    return ou_sample(path, channel, float(k * k - 1), init=init, scale=scale)


def exp_filter(values, rate, dt, init=0.0):
    """Trapezoid discretisation of ``y(t) = int_{-inf}^t exp(-rate (t-s)) g(s) ds``.

    ``values`` are samples of ``g`` on the grid; the filter starts from
    ``init`` at the first point, so the output carries a transient
    ``O(exp(-rate * elapsed))`` that callers must burn off.
    """
    g = np.asarray(values, dtype=float)
    decay = np.exp(-rate * dt)
    out = np.empty_like(g)
    out[0] = init
    if g.size > 1:
        zi = np.array([decay * init + 0.5 * dt * decay * g[0]])
        out[1:] = lfilter([0.5 * dt, 0.5 * dt * decay], [1.0, -decay], g[1:], zi=zi)[0]
    return out
