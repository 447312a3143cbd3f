"""Numerical multiplicative ergodic theorem on a Galerkin truncation.

Lyapunov exponents come from QR-reorthonormalised block products of the
cocycle (log-accumulated, so long horizons neither overflow nor underflow).
The Oseledets splitting intersects the backward filtration (frames pushed
forward from the far past) with the forward filtration (frames pulled back
from the far future through the inverse cocycle), group by group.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, svd

from .errors import ConfigError, GridError, RankCollapseError, SeparationError

__all__ = [
    "LyapunovSpectrum",
    "OseledetsSplitting",
    "lyapunov_spectrum",
    "singular_limit",
    "oseledets_splitting",
    "principal_angles",
]


def _signed_qr(z):
    """Thin QR with positive diagonal of R (unique, keeps frame orientation stable)."""
    q, r = qr(z, mode="economic")
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    return q * sgn, r * sgn[:, None]


@dataclass(frozen=True, eq=False)
class LyapunovSpectrum:
    """Estimated exponents grouped by multiplicity.

    ``exponents[i]`` is the group mean, ``multiplicities[i]`` its dimension;
    ``spread`` is the standard error of per-block rate means (zero for
    autonomous cocycles); ``raw`` keeps the per-direction estimates.
    """

    exponents: np.ndarray
    multiplicities: np.ndarray
    spread: np.ndarray
    raw: np.ndarray
    block_len: float
    blocks: int
    burn_in: int
    grouping_tol: float
    seed: int = None

    @property
    def top_k(self):
        return int(self.raw.size)

    def group_slices(self):
        out, start = [], 0
        for d in self.multiplicities:
            out.append(slice(start, start + int(d)))
            start += int(d)
        return out

    def to_json(self):
        return json.dumps(
            {
                "exponents": [float(x) for x in self.exponents],
                "multiplicities": [int(d) for d in self.multiplicities],
                "spread": [float(s) for s in self.spread],
                "block_len": self.block_len,
                "blocks": self.blocks,
                "seed": self.seed,
            },
            indent=2,
            sort_keys=True,
        )


def _group(raw, spreads, tol):
    """Merge raw exponents into multiplicity groups within ``tol``."""
    groups = [[0]]
    for i in range(1, raw.size):
        if raw[groups[-1][0]] - raw[i] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    exps = np.array([raw[g].mean() for g in groups])
    mult = np.array([len(g) for g in groups], dtype=int)
    spr = np.array([spreads[g].max() for g in groups])
    return exps, mult, spr


def lyapunov_spectrum(src, path, block_len, blocks, top_k=None, burn_in=0, seed=None):
    """QR block estimator of the top Lyapunov exponents.

    Pushes an orthonormal ``top_k``-frame through ``blocks`` propagator blocks
    of length ``block_len``, re-orthonormalising each time;
    ``lambda_i = (1/(M Delta)) sum_m log R_m[i, i]`` over the retained blocks
    (``burn_in`` leading blocks are dropped from the average, not the chain).
    Deterministic given its inputs.
    """
    n = src.dim
    top_k = n if top_k is None else int(top_k)
    if not 1 <= top_k <= n:
        raise ConfigError(f"top_k must be in 1..{n}")
    if blocks <= burn_in:
        raise ConfigError("need more blocks than burn_in")
    if path is not None and blocks * block_len > path.t_max + 1e-12:
        raise GridError("blocks * block_len exceeds the stored horizon")
    q = np.eye(n)[:, :top_k]
    logs = np.empty((blocks, top_k))
    for m in range(blocks):
        b = src.propagator(m * block_len, (m + 1) * block_len)
        q, r = _signed_qr(b @ q)
        d = np.abs(np.diag(r))
        if np.any(d < 1e-300) or not np.all(np.isfinite(d)):
            raise RankCollapseError(m, float(d.min()))
        logs[m] = np.log(d)
    kept = logs[burn_in:]
    rates = kept / block_len
    raw = rates.mean(axis=0)
    # run-to-run spread: standard error of the block means
    m_kept = rates.shape[0]
    spread = rates.std(axis=0, ddof=1) / np.sqrt(m_kept) if m_kept > 1 else np.zeros(top_k)
    order = np.argsort(raw)[::-1]
    raw, spread = raw[order], spread[order]
    tol = max(0.02, 3.0 * float(spread.max(initial=0.0)))
    exps, mult, spr = _group(raw, spread, tol)
    return LyapunovSpectrum(
        exponents=exps,
        multiplicities=mult,
        spread=spr,
        raw=raw,
        block_len=float(block_len),
        blocks=int(blocks),
        burn_in=int(burn_in),
        grouping_tol=tol,
        seed=seed,
    )


def singular_limit(src, path, t):
    """Finite-time MET matrix ``[U(t)^T U(t)]^(1/(2t))`` via SVD of the propagator.

    Small-t cross-check only; the QR chain is the production estimator for
    large horizons.
    """
    if t <= 0:
        raise ConfigError("singular_limit needs t > 0")
    u = src.propagator(0.0, t)
    if not np.all(np.isfinite(u)):
        raise RankCollapseError(0, float("nan"))
    # [U^T U]^{1/(2t)} has the right singular vectors of U as eigenvectors
    _, s, vt = svd(u)
    return (vt.T * s ** (1.0 / t)) @ vt


def principal_angles(a, b):
    """Principal angles between the column spans of orthonormal ``a`` and ``b``."""
    s = svd(a.T @ b, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class OseledetsSplitting:
    """Oseledets subspaces from filtration intersections.

    ``subspaces[i]`` is an orthonormal frame of the i-th group's space
    (intersection of the forward filtration with the backward one);
    ``backward_flags`` / ``forward_flags`` hold the full filtration frames.
    """

    spectrum: LyapunovSpectrum
    subspaces: list
    backward_flags: np.ndarray  # columns: V_{-r} = span(backward_flags[:, :c_r])
    forward_flags: np.ndarray  # columns ordered slowest-first (far-future pullback)
    intersection_angles: list

    @property
    def dim(self):
        return self.backward_flags.shape[0]

    def projections(self):
        """Oblique projections onto each group along the others."""
        t = np.hstack(self.subspaces)
        t_inv = np.linalg.inv(t)
        out, start = [], 0
        for w in self.subspaces:
            d = w.shape[1]
            out.append(t[:, start : start + d] @ t_inv[start : start + d, :])
            start += d
        return out


def _check_descending(rates, what, slack=0.1):
    """QR chains keep column order; an inverted growth ladder means the start
    frame was pathologically aligned and the filtration would be mislabelled."""
    if np.any(np.diff(rates) > slack):
        raise SeparationError(
            f"{what} chain produced mis-ordered growth rates {rates}; "
            "start frame aligned against the filtration"
        )


def _chain_forward(src, t0, t1, block_len):
    """Push the identity frame from t0 to t1; returns the final Q (N x N).

    The leading r columns converge to the backward filtration (directions fed
    from the far past), fastest growth first.
    """
    n = src.dim
    q = np.eye(n)
    m = int(round((t1 - t0) / block_len))
    logs = np.zeros(n)
    for j in range(m):
        b = src.propagator(t0 + j * block_len, t0 + (j + 1) * block_len)
        q, r = _signed_qr(b @ q)
        d = np.abs(np.diag(r))
        if np.any(d < 1e-300) or not np.all(np.isfinite(d)):
            raise RankCollapseError(j, float(d.min()))
        logs += np.log(d)
    _check_descending(logs / (t1 - t0), "forward")
    return q


def _chain_inverse(src, t1, t0, block_len):
    """Pull a frame from t1 back to t0 through the inverse cocycle.

    Starts from the reversed identity (aligned with backward growth); each
    block is solved against the stored forward propagator, never inverting
    long products.  The leading columns converge to the slowest forward
    directions, so ``span(q[:, :n-r+1])`` approximates the forward-filtration
    space V_r.
    """
    n = src.dim
    q = np.eye(n)[:, ::-1].copy()
    m = int(round((t1 - t0) / block_len))
    logs = np.zeros(n)
    for j in range(m):
        hi = t1 - j * block_len
        b = src.propagator(hi - block_len, hi)
        q, r = _signed_qr(np.linalg.solve(b, q))
        d = np.abs(np.diag(r))
        if np.any(d < 1e-300) or not np.all(np.isfinite(d)):
            raise RankCollapseError(j, float(d.min()))
        logs += np.log(d)
    _check_descending(logs / (t1 - t0), "inverse")
    return q


def oseledets_splitting(src, path, spectrum, t_span, gap_factor=4.0):
    """Intersect filtrations to get the invariant subspaces ``W_i``.

    ``t_span = (t_neg, t_pos)``: the backward filtration comes from pushing a
    frame forward over ``[t_neg, 0]``, the forward filtration from running the
    inverse cocycle down from ``t_pos`` to 0.  Requires the spectrum's groups
    to be separated by more than ``gap_factor`` times their spread.
    """
    t_neg, t_pos = t_span
    if not (t_neg < 0.0 < t_pos):
        raise ConfigError("t_span must satisfy t_neg < 0 < t_pos")
    n = src.dim
    mult = spectrum.multiplicities
    if int(mult.sum()) != n:
        raise ConfigError("splitting needs a full spectrum (top_k == dim)")
    gaps = -np.diff(spectrum.exponents)
    if gaps.size and np.any(gaps <= gap_factor * np.maximum(spectrum.spread[:-1], spectrum.spread[1:])):
        raise SeparationError(
            f"spectral gap {gaps.min():.3e} not larger than "
            f"{gap_factor} x spread; refusing to split"
        )
    block = spectrum.block_len
    q_minus = _chain_forward(src, t_neg, 0.0, block)
    q_plus = _chain_inverse(src, t_pos, 0.0, block)

    cum = np.concatenate([[0], np.cumsum(mult)])
    subspaces, angles = [], []
    for i, d in enumerate(mult):
        d = int(d)
        v_minus = q_minus[:, : cum[i + 1]]  # backward filtration, dim c_i
        v_i = q_plus[:, : n - cum[i]]  # forward filtration V_i, dim n - c_{i-1}
        # principal-vector intersection of span(v_i) and span(v_minus)
        y_l, s, _ = svd(v_i.T @ v_minus)
        cand = v_i @ y_l[:, :d]
        w, _ = _signed_qr(cand)
        ang = np.arccos(np.clip(s[:d], -1.0, 1.0))
        subspaces.append(w)
        angles.append(ang)
    return OseledetsSplitting(
        spectrum=spectrum,
        subspaces=subspaces,
        backward_flags=q_minus,
        forward_flags=q_plus,
        intersection_angles=angles,
    )


def equivariance_residual(splitting, src, path, spectrum, t_span, delta):
    """Relative defect of ``U(delta) W_i(omega) ⊂ W_i(theta_delta omega)``.

    Rebuilds the splitting at base time ``delta`` and measures the worst
    relative distance of propagated basis vectors from the shifted subspace.
    """
    t_neg, t_pos = t_span
    shifted = _splitting_at(src, path, spectrum, (t_neg, t_pos), delta)
    u = src.propagator(0.0, delta)
    worst = 0.0
    for w, w_shift in zip(splitting.subspaces, shifted):
        img = u @ w
        proj = w_shift @ (w_shift.T @ img)
        for col, pcol in zip(img.T, proj.T):
            worst = max(worst, np.linalg.norm(col - pcol) / np.linalg.norm(col))
    return worst


def _splitting_at(src, path, spectrum, t_span, base):
    """Subspace frames of the splitting at base time ``base`` (no respectrum)."""
    t_neg, t_pos = t_span
    n = src.dim
    block = spectrum.block_len
    q_minus = _chain_forward(src, base + t_neg, base, block)
    q_plus = _chain_inverse(src, base + t_pos, base, block)
    mult = spectrum.multiplicities
    cum = np.concatenate([[0], np.cumsum(mult)])
    out = []
    for i, d in enumerate(mult):
        d = int(d)
        v_minus = q_minus[:, : cum[i + 1]]
        v_i = q_plus[:, : n - cum[i]]
        y_l, s, _ = svd(v_i.T @ v_minus)
        w, _ = _signed_qr(v_i @ y_l[:, :d])
        out.append(w)
    return out
