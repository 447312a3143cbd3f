"""Stable/center/unstable splitting with tempered bound estimation.

Given a Lyapunov spectrum with gaps, :func:`classify` partitions the exponent
groups by the bands ``lambda >= alpha`` (unstable), ``|lambda| <= gamma``
(center), ``lambda <= -beta`` (stable); :func:`build_frame` assembles oblique
projections from the Oseledets frames; :func:`estimate_bounds` evaluates the
sups defining the constants K^s, K^c, K^u, and the temperedness diagnostic
regresses their growth along the noise shift.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    GapError,
    IllConditionedFrameError,
    LowerBoundViolation,
    UnboundedGrowthError,
)

__all__ = [
    "GapParameters",
    "Partition",
    "TrichotomyFrame",
    "BoundReport",
    "classify",
    "build_frame",
    "estimate_bounds",
    "temperedness_diagnostic",
    "unstable_lower_bound",
    "projected_norm",
]

BLOCKS = ("u", "c", "s")


@dataclass(frozen=True)
class GapParameters:
    """Rates (alpha, beta, gamma) of the trichotomy bands.

    ``alpha`` is the forward decay rate charged to the stable block, ``beta``
    the backward decay rate of the unstable block, ``gamma`` the center
    growth allowance.  Following the spectral-ordering statement (the
    definition's ``alpha > gamma > beta`` appears to be a typo), we require
    ``alpha > gamma`` and ``beta > gamma``.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.gamma >= 0):
            raise ConfigError("need alpha > 0, beta > 0, gamma >= 0")
        if not (self.alpha > self.gamma and self.beta > self.gamma):
            raise ConfigError("need alpha > gamma and beta > gamma")


@dataclass(frozen=True)
class Partition:
    """Indices of spectrum groups per block."""

    unstable: tuple
    center: tuple
    stable: tuple

    def block_of(self):
        out = {}
        for name, idx in zip(BLOCKS, (self.unstable, self.center, self.stable)):
            for i in idx:
                out[i] = name
        return out


def classify(spectrum, gap):
    """Partition exponent groups into unstable / center / stable bands.

    Every group must land in exactly one band (none may equal a band edge
    ambiguously or fall between bands); otherwise the gap choice is invalid.
    """
    uns, cen, sta = [], [], []
    for i, lam in enumerate(spectrum.exponents):
        hits = []
        if lam >= gap.alpha:
            hits.append("u")
        if abs(lam) <= gap.gamma:
            hits.append("c")
        if lam <= -gap.beta:
            hits.append("s")
        if len(hits) != 1:
            raise GapError(
                f"exponent {lam} is {'ambiguous' if hits else 'unclassifiable'} "
                f"for gap (alpha={gap.alpha}, beta={gap.beta}, gamma={gap.gamma})"
            )
        {"u": uns, "c": cen, "s": sta}[hits[0]].append(i)
    return Partition(unstable=tuple(uns), center=tuple(cen), stable=tuple(sta))


@dataclass(eq=False)
class TrichotomyFrame:
    """Projections P^u, P^c, P^s with their generating frames and gap.

    ``projections[a]`` is the oblique projection onto the union of the block's
    Oseledets spaces along the complementary ones; ``exponents[a]`` records the
    group exponents per block.  Identity decomposition, idempotency and mutual
    annihilation hold to ``algebra_residual``.
    """

    projections: dict
    frames: dict
    exponents: dict
    gap: GapParameters
    algebra_residual: float

    @property
    def dim(self):
        return next(iter(self.projections.values())).shape[0]

    @property
    def center_dim(self):
        return self.frames["c"].shape[1] if "c" in self.frames else 0

    def block_dims(self):
        return {a: (self.frames[a].shape[1] if a in self.frames else 0) for a in BLOCKS}

    def center_basis(self):
        if "c" not in self.frames:
            raise ConfigError("frame has an empty center block")
        return self.frames["c"]

    def export(self, bounds=None, slopes=None):
        d = {
            "alpha": self.gap.alpha,
            "beta": self.gap.beta,
            "gamma": self.gap.gamma,
            "center_dim": self.center_dim,
        }
        if bounds is not None:
            d["K_s"], d["K_c"], d["K_u"] = (
                bounds.K.get("s"),
                bounds.K.get("c"),
                bounds.K.get("u"),
            )
        if slopes is not None:
            d["temperedness_slopes"] = slopes
        return json.dumps(d, indent=2, sort_keys=True)


def build_frame(splitting, partition, gap, cond_limit=1e8):
    """Assemble oblique projections from an Oseledets splitting and a partition."""
    n = splitting.dim
    frames, exponents = {}, {}
    for name, idx in zip(BLOCKS, (partition.unstable, partition.center, partition.stable)):
        if idx:
            frames[name] = np.hstack([splitting.subspaces[i] for i in idx])
            exponents[name] = np.array([splitting.spectrum.exponents[i] for i in idx])
    t = np.hstack([frames[a] for a in BLOCKS if a in frames])
    if t.shape[1] != n:
        raise ConfigError("partition does not span the truncated space")
    cond = np.linalg.cond(t)
    if cond > cond_limit:
        raise IllConditionedFrameError(cond)
    t_inv = np.linalg.inv(t)
    projections = {}
    start = 0
    for a in BLOCKS:
        if a not in frames:
            continue
        d = frames[a].shape[1]
        projections[a] = t[:, start : start + d] @ t_inv[start : start + d, :]
        start += d
    missing = [a for a in BLOCKS if a not in projections]
    for a in missing:
        projections[a] = np.zeros((n, n))
    # algebra: idempotency, mutual annihilation, partition of identity
    res = np.abs(sum(projections.values()) - np.eye(n)).max()
    for a in BLOCKS:
        res = max(res, np.abs(projections[a] @ projections[a] - projections[a]).max())
        for b in BLOCKS:
            if a != b:
                res = max(res, np.abs(projections[a] @ projections[b]).max())
    if res > 1e-8:
        raise IllConditionedFrameError(res / 1e-18)
    return TrichotomyFrame(
        projections=projections,
        frames=frames,
        exponents=exponents,
        gap=gap,
        algebra_residual=float(res),
    )


def _axis_masks(frame, tol=1e-12):
    """Mode masks when every projection is diagonal 0/1 (axis-aligned frame)."""
    masks = {}
    for a, p in frame.projections.items():
        d = np.diag(p)
        if np.abs(p - np.diag(d)).max() > tol or not np.all(
            (np.abs(d) < tol) | (np.abs(d - 1) < tol)
        ):
            return None
        masks[a] = d > 0.5
    return masks


def projected_norm(src, frame, block, t, base_time=0.0):
    """Spectral norm of ``U(t, theta_base omega) P^block``.

    Uses per-mode log-factors when the source and frame are axis-aligned (safe
    at any horizon); otherwise forms the propagator directly.
    """
    p = frame.projections[block]
    if not p.any():
        return 0.0
    masks = _axis_masks(frame)
    if masks is not None and hasattr(src, "log_factors"):
        lf = src.log_factors(base_time, base_time + t)
        sel = lf[masks[block]]
        return float(np.exp(sel.max())) if sel.size else 0.0
    u = src.propagator(base_time, base_time + t)
    return float(np.linalg.norm(u @ p, 2))


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Estimated trichotomy constants with their per-t margin curves."""

    K: dict
    margins: dict  # block -> (t values, ratio values)
    epsilon: dict  # recorded eps linking gap rates to the spectrum edges

    def margin_ok(self, block, t, value):
        return value <= self.K[block]


def _sup_ratio(src, frame, block, rate, ts, base_time, check_growth=True):
    """sup over ts of ||U(t) P^a|| * exp(rate * t); flags growth at the tail."""
    ts = np.asarray(ts, dtype=float)
    ts = ts[np.argsort(np.abs(ts))]  # from 0 outward
    vals = np.array(
        [projected_norm(src, frame, block, t, base_time) * np.exp(rate * t) for t in ts]
    )
    k = float(vals.max())
    # exploding-ratio guard: log-values still rising over the outer half
    if check_growth and vals.size >= 4:
        half = vals.size // 2
        lg = np.log(np.maximum(vals, 1e-300))
        slope = np.polyfit(np.abs(ts[half:]), lg[half:], 1)[0]
        if slope > 1e-6 and np.argmax(vals) >= vals.size - 2:
            raise UnboundedGrowthError(
                f"bound ratio for block '{block}' grows with the horizon "
                f"(tail slope {slope:.3e}); gap rate {rate} too aggressive"
            )
    return k, (ts, vals)


def estimate_bounds(frame, src, t_grid, base_time=0.0, check_growth=True):
    """Evaluate the sups defining K^s, K^c, K^u on a time grid.

    ``t_grid`` must contain nonnegative entries (used for K^s and the forward
    half of K^c) and, when unstable or center blocks exist, nonpositive ones.
    K^s = sup_{t>=0} ||U(t) P^s|| e^{alpha t}; K^u = sup_{t<=0} ||U(t) P^u||
    e^{-beta t}; K^c = sup_t ||U(t) P^c|| e^{-gamma |t|}.
    """
    ts = np.asarray(t_grid, dtype=float)
    pos = ts[ts >= 0]
    neg = ts[ts <= 0]
    if pos.size == 0:
        raise ConfigError("t_grid needs nonnegative entries")
    gap = frame.gap
    K, margins, eps = {}, {}, {}
    dims = frame.block_dims()
    if dims["s"]:
        K["s"], margins["s"] = _sup_ratio(
            src, frame, "s", gap.alpha, pos, base_time, check_growth
        )
        lam_minus = frame.exponents["s"].max()
        eps["s"] = -gap.alpha - lam_minus  # -alpha = lambda_- + eps
    if dims["u"]:
        if neg.size == 0:
            raise ConfigError("t_grid needs nonpositive entries for the unstable block")
        K["u"], margins["u"] = _sup_ratio(
            src, frame, "u", -gap.beta, neg, base_time, check_growth
        )
        lam_plus = frame.exponents["u"].min()
        eps["u"] = lam_plus - gap.beta  # beta = lambda_+ - eps
    if dims["c"]:
        kp, (tp, vp) = _sup_ratio(src, frame, "c", -gap.gamma, pos, base_time, check_growth)
        if neg.size:
            km, (tm, vm) = _sup_ratio(src, frame, "c", gap.gamma, neg, base_time, check_growth)
            K["c"] = max(kp, km)
            margins["c"] = (np.concatenate([tm, tp]), np.concatenate([vm, vp]))
        else:
            K["c"], margins["c"] = kp, (tp, vp)
    return BoundReport(K=K, margins=margins, epsilon=eps)


def temperedness_diagnostic(bounds_at, shifts):
    """Regression slope of ``log+ K^a(theta_t omega)`` against ``|t|`` per block.

    ``bounds_at(t)`` must return a mapping block -> K value at base point
    ``theta_t omega``.  A tempered family regresses to slope ~ 0; linear drift
    in the cocycle shows up as a slope bounded away from 0.
    """
    shifts = np.asarray(shifts, dtype=float)
    logs = {}
    for t in shifts:
        ks = bounds_at(t)
        for a, v in ks.items():
            logs.setdefault(a, []).append(max(0.0, np.log(max(v, 1e-300))))
    slopes = {}
    for a, vals in logs.items():
        vals = np.asarray(vals)
        x = np.abs(shifts)
        if np.ptp(x) == 0:
            slopes[a] = 0.0
        else:
            slopes[a] = float(np.polyfit(x, vals, 1)[0])
    return slopes


def unstable_lower_bound(frame, src, t_grid, base_time=0.0):
    """Estimate H with ``||U(t) P^u|| >= H exp(a t)`` for t <= 0.

    ``a`` is the slowest unstable exponent.  Raises when the unstable block is
    empty or the estimate collapses to zero.
    """
    if frame.block_dims()["u"] == 0:
        raise ConfigError("unstable block is empty")
    a = float(frame.exponents["u"].min())
    ts = np.asarray(t_grid, dtype=float)
    ts = ts[ts <= 0]
    if ts.size == 0:
        raise ConfigError("t_grid needs nonpositive entries")
    vals = np.array(
        [projected_norm(src, frame, "u", t, base_time) * np.exp(-a * t) for t in ts]
    )
    h = float(vals.min())
    if h < 1e-12:
        raise LowerBoundViolation(f"H = {h:.3e} indistinguishable from zero")
    return h
