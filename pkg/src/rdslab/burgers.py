"""Stochastic Burgers benchmark on (0, pi) with Dirichlet boundaries.

Galerkin truncation of ``u_t = u_xx - u u_x + u + sigma dW`` onto ``sin(kx)``:
mode ``k`` has linear rate ``1 - k^2`` (mode 1 is the neutral center mode) and
the quadratic term is the exact sine-basis projection of ``u u_x``.  The
explicit center-manifold expansion and the reduced amplitude equation

    da/dt = -(1/12) a^3 + sigma phi_1 + (1/6) a sigma phi_2
            + a^2 sigma (phi_1/18 + phi_3/96)

serve as ground truth: the slaved modes settle to ``-(1/6) a^2`` (mode 2) and
``(1/32) a^3`` (mode 3) when sigma = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .cocycle import ModeBasis, VectorField
from .errors import BlowUpError, ConfigError, DegenerateFitError, NotSettledError
from .noise import exp_filter, make_path, ou_convolution, ou_sample

__all__ = [
    "BurgersConfig",
    "BurgersTrajectory",
    "OuBank",
    "eigenvalues",
    "quadratic_term",
    "quadratic_jacobian",
    "galerkin_rhs",
    "burgers_field",
    "noise_gains",
    "simulate",
    "reduced_step",
    "reduced_simulate",
    "manifold_expansion",
    "fit_manifold_coefficients",
    "compare_full_vs_reduced",
    "sigma_scaling_fit",
]


def eigenvalues(n_modes):
    """Linear rates 1 - k^2 of Delta u + u in the sine basis; mode 1 is 0."""
    return np.array([1.0 - k * k for k in range(1, n_modes + 1)])


def quadratic_term(u):
    """Exact sine-basis projection ``[u u_x]_m`` of the quadratic term.

    ``[u u_x]_m = 1/2 (sum_{j+k=m} k u_j u_k + sum_{j-k=m} k u_j u_k
                       - sum_{k-j=m} k u_j u_k)``
    over the retained modes; accepts a single state (N,) or a batch (T, N).
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    ub = u[None, :] if single else u
    n = ub.shape[1]
    out = np.zeros_like(ub)
    for m in range(1, n + 1):
        acc = np.zeros(ub.shape[0])
        for j in range(1, m):
            acc += (m - j) * ub[:, j - 1] * ub[:, m - j - 1]
        for j in range(m + 1, n + 1):
            acc += (j - m) * ub[:, j - 1] * ub[:, j - m - 1]
        for j in range(1, n - m + 1):
            acc -= (j + m) * ub[:, j - 1] * ub[:, j + m - 1]
        out[:, m - 1] = 0.5 * acc
    return out[0] if single else out


def quadratic_jacobian(u):
    """Derivative of :func:`quadratic_term`: J[m,p] = (m/2)(u_{m-p} - u_{p-m} - u_{p+m})."""
    u = np.asarray(u, dtype=float)
    n = u.size
    J = np.zeros((n, n))
    for m in range(1, n + 1):
        for p in range(1, n + 1):
            v = 0.0
            if 1 <= m - p <= n:
                v += u[m - p - 1]
            if 1 <= p - m <= n:
                v -= u[p - m - 1]
            if p + m <= n:
                v -= u[p + m - 1]
            J[m - 1, p - 1] = 0.5 * m * v
    return J


def galerkin_rhs(u, t=None, path=None):
    """Drift of the truncated equation: (1 - k^2) u_k - [u u_x]_k (noise excluded)."""
    u = np.asarray(u, dtype=float)
    return eigenvalues(u.shape[-1]) * u - quadratic_term(u)


def burgers_field(n_modes, lipschitz_bound=0.0):
    """The deterministic Burgers Galerkin drift as a :class:`VectorField`."""
    return VectorField(
        basis=ModeBasis(eigenvalues(n_modes)),
        nonlinearity=lambda t, u, path: -quadratic_term(u),
        jacobian=lambda t, u, path: -quadratic_jacobian(u),
        lipschitz_bound=lipschitz_bound,
    )


def noise_gains(mu, dt):
    """Exact-OU per-step gains c_k: Var(c_k dW) = (exp(2 mu dt) - 1)/(2 mu)."""
    mu = np.asarray(mu, dtype=float)
    out = np.ones_like(mu)
    nz = mu != 0.0
    out[nz] = np.sqrt(np.expm1(2 * mu[nz] * dt) / (2 * mu[nz] * dt))
    return out


@dataclass(frozen=True)
class BurgersConfig:
    n_modes: int = 6
    sigma: float = 0.0
    sigma_k: tuple = None  # per-mode scales, default all ones
    dt: float = 1e-3
    horizon: tuple = (0.0, 20.0)
    seed: int = 0
    a0: float = 0.1  # initial mode-1 amplitude (u0 = a0 sin x)
    u0: tuple = None  # full initial modes; overrides a0 when given
    cap: float = 1e3

    def __post_init__(self):
        if self.n_modes < 3:
            raise ConfigError("benchmark identities need n_modes >= 3")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")

    def scales(self):
        if self.sigma_k is None:
            return np.ones(self.n_modes)
        s = np.asarray(self.sigma_k, dtype=float)
        if s.shape != (self.n_modes,):
            raise ConfigError("sigma_k must have one entry per mode")
        return s

    def initial_state(self):
        if self.u0 is not None:
            u = np.asarray(self.u0, dtype=float)
            if u.shape != (self.n_modes,):
                raise ConfigError("u0 must have one entry per mode")
            return u.copy()
        u = np.zeros(self.n_modes)
        u[0] = self.a0
        return u


@dataclass(frozen=True, eq=False)
class BurgersTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, n_modes)
    config: BurgersConfig = dc_field(repr=False, default=None)

    @property
    def amplitude(self):
        return self.states[:, 0]

    def to_csv(self):
        n = self.states.shape[1]
        head = "t," + ",".join(f"u_{k}" for k in range(1, n + 1))
        lines = [head]
        for t, row in zip(self.times, self.states):
            lines.append(",".join([repr(float(t))] + [repr(float(x)) for x in row]))
        return "\n".join(lines) + "\n"


def path_for(config):
    """Noise path matching a config: one channel per mode, unscaled increments."""
    return make_path(
        seed=config.seed,
        dt=config.dt,
        horizon=(min(config.horizon[0], -config.dt), config.horizon[1]),
        channels=config.n_modes,
        scales=config.scales(),
    )


def simulate(config, path=None):
    """Exponential-Heun trajectory with exact-OU additive noise per mode.

    Deterministic function of the config (noise regenerated from the seed);
    raises BlowUpError past ``config.cap``.
    """
    if path is None:
        path = path_for(config)
    n = config.n_modes
    mu = eigenvalues(n)
    dt = config.dt
    t0, t1 = config.horizon
    g0, g1 = path.gen_index(t0), path.gen_index(t1)
    steps = g1 - g0
    E = np.exp(mu * dt)
    gains = config.sigma * config.scales() * noise_gains(mu, dt)
    dW = path.increment_slice(g0, g1).T  # (steps, n)
    u = config.initial_state()
    states = np.empty((steps + 1, n))
    states[0] = u
    for i in range(steps):
        f0 = -quadratic_term(u)
        pred = E * (u + dt * f0)
        u = E * u + 0.5 * dt * (E * f0 - quadratic_term(pred)) + gains * dW[i]
        nrm = np.linalg.norm(u)
        if not np.isfinite(nrm) or nrm > config.cap:
            raise BlowUpError(t0 + (i + 1) * dt, nrm, config.cap)
        states[i + 1] = u
    times = t0 + dt * np.arange(steps + 1)
    return BurgersTrajectory(times=times, states=states, config=config)


def reduced_step(a, phi, sigma):
    """Drift of the reduced amplitude model at noise rates ``phi = (phi1, phi2, phi3)``.

    ``phi_k`` are the (scaled) white-noise rates forcing modes 1..3; pass zeros
    for the deterministic part ``-(1/12) a^3``.
    """
    phi1, phi2, phi3 = phi
    return (
        -a**3 / 12.0
        + sigma * phi1
        + a * sigma * phi2 / 6.0
        + a * a * sigma * (phi1 / 18.0 + phi3 / 96.0)
    )


def reduced_simulate(config, path=None):
    """Integrate the reduced model with the same stepper and increments as simulate.

    Heun on the cubic drift; the noise terms use the per-step increments of
    channels 1..3 of the same path, so full and reduced runs are coupled.
    """
    if path is None:
        path = path_for(config)
    dt = config.dt
    t0, t1 = config.horizon
    g0, g1 = path.gen_index(t0), path.gen_index(t1)
    steps = g1 - g0
    scales = config.scales()
    dW = path.increment_slice(g0, g1).T
    a = float(config.initial_state()[0])
    out = np.empty(steps + 1)
    out[0] = a
    sig = config.sigma
    for i in range(steps):
        f0 = -a**3 / 12.0
        pred = a + dt * f0
        a = a + 0.5 * dt * (f0 - pred**3 / 12.0)
        if sig:
            a0 = out[i]
            a += sig * (
                (1.0 + a0 * a0 / 18.0) * scales[0] * dW[i, 0]
                + (a0 / 6.0) * scales[1] * dW[i, 1]
                + (a0 * a0 / 96.0) * scales[2] * dW[i, 2]
            )
        out[i + 1] = a
    times = t0 + dt * np.arange(steps + 1)
    return times, out


class OuBank:
    """All OU convolutions needed by the center-manifold expansion.

    ``h[k]`` is the (scaled) fast-mode response ``H_k phi_k``; ``h_cross[j, k]``
    is ``H_j`` applied to channel-k noise; nested terms are exponential filters
    of already-sampled processes and carry an ``exp(-rate (t - t_min))``
    start-up transient.
    """

    def __init__(self, path, n_modes):
        if path.n_channels < n_modes:
            raise ConfigError(
                f"path has {path.n_channels} channels, expansion needs {n_modes}"
            )
        self.path = path
        self.n = n_modes
        scales = path.channel_scales
        self.h = {
            k: ou_convolution(path, k - 1, k, scale=scales[k - 1]).samples
            for k in range(2, n_modes + 1)
        }
        # H_2 phi_1: rate-3 response to the mode-1 channel
        self.h2_phi1 = ou_sample(path, 0, rate=3.0, scale=scales[0]).samples
        # nested convolutions, started at 0 at the path's first grid point
        self.h2_h3_phi3 = exp_filter(self.h[3], rate=3.0, dt=path.dt)
        self.nested = {}
        for k in range(3, n_modes + 1):
            upper = self.h.get(k + 1, 0.0)
            lower = self.h[k - 1]
            diff = upper - lower if k + 1 <= n_modes else -lower
            self.nested[k] = exp_filter(diff, rate=float(k * k - 1), dt=path.dt)

    def index_of(self, t):
        return self.path.gen_index(t) - self.path.gen_lo


def manifold_expansion(a, bank, sigma, t=0.0):
    """Evaluate the printed center-manifold expansion mode-by-mode at time ``t``.

    ``a`` may be a scalar or an array matching an array of times; returns the
    mode amplitudes including the deterministic slaving, the linear noise
    responses, and the a*sigma cross terms (error O(a^4 + sigma^2)).
    """
    idx = (
        bank.index_of(t)
        if np.isscalar(t)
        else np.array([bank.index_of(tt) for tt in np.atleast_1d(t)])
    )
    a = np.asarray(a, dtype=float)
    n = bank.n
    out = np.zeros(np.broadcast_shapes(a.shape, np.shape(idx)) + (n,))
    h = {k: bank.h[k][idx] for k in bank.h}
    out[..., 0] = a - a * sigma * h[2] / 6.0
    out[..., 1] = (
        -a * a / 6.0
        + sigma * h[2]
        + a * sigma * (bank.h2_phi1[idx] / 3.0 + bank.h2_h3_phi3[idx])
    )
    if n >= 3:
        out[..., 2] = a**3 / 32.0 + sigma * h[3] + a * sigma * 1.5 * bank.nested[3][idx]
    for k in range(4, n + 1):
        out[..., k - 1] = sigma * h[k] + a * sigma * (k / 2.0) * bank.nested[k][idx]
    return out


def settle_sample(traj, settle_time=5.0, drift_tol=1e-6):
    """On-manifold sample (a, u2, u3) at the first grid point past ``settle_time``.

    Settled means the fast transient has died: the slaved-mode deviation
    ``u2 + a^2/6`` drifts by at most ``drift_tol`` per unit time.
    """
    dt = traj.times[1] - traj.times[0]
    i = int(np.searchsorted(traj.times, traj.times[0] + settle_time))
    if i >= traj.states.shape[0]:
        raise NotSettledError("trajectory shorter than the settle time")
    dev = traj.states[:, 1] + traj.states[:, 0] ** 2 / 6.0
    drift = abs(dev[i] - dev[i - 1]) / dt
    if drift > drift_tol:
        raise NotSettledError(
            f"slaved-mode deviation still drifts at {drift:.2e}/unit time"
        )
    return traj.states[i, 0], traj.states[i, 1], traj.states[i, 2]


def fit_manifold_coefficients(trajectories, settle_time=5.0, drift_tol=1e-6):
    """Least-squares slaving coefficients from settled sigma=0 trajectories.

    Fits ``u2 ~ c2 a^2 + c4 a^4`` and ``u3 ~ c3 a^3 + c5 a^5`` through the
    settled samples of each trajectory; returns the coefficients with fit
    residuals.  Raises on non-settled input or a degenerate design.
    """
    samples = [settle_sample(tr, settle_time, drift_tol) for tr in trajectories]
    a = np.array([s[0] for s in samples])
    u2 = np.array([s[1] for s in samples])
    u3 = np.array([s[2] for s in samples])
    if np.allclose(a, 0.0):
        raise DegenerateFitError("all settled amplitudes are zero")
    A2 = np.column_stack([a**2, a**4])
    A3 = np.column_stack([a**3, a**5])
    if np.linalg.matrix_rank(A2) < 2 or np.linalg.matrix_rank(A3) < 2:
        raise DegenerateFitError("amplitude levels do not span the fit basis")
    c2, r2 = np.linalg.lstsq(A2, u2, rcond=None)[0:2]
    c3, r3 = np.linalg.lstsq(A3, u3, rcond=None)[0:2]
    return {
        "c2": float(c2[0]),
        "c3": float(c3[0]),
        "c2_quartic": float(c2[1]),
        "c3_quintic": float(c3[1]),
        "residual_2": float(np.sqrt(r2[0])) if r2.size else 0.0,
        "residual_3": float(np.sqrt(r3[0])) if r3.size else 0.0,
        "samples": samples,
    }


def compare_full_vs_reduced(config, path=None):
    """Coupled-path comparison of the mode-1 amplitude against the reduced model."""
    if path is None:
        path = path_for(config)
    full = simulate(config, path)
    _, red = reduced_simulate(config, path)
    err = full.amplitude - red
    return {
        "seed": config.seed,
        "sigma": config.sigma,
        "sup_error": float(np.max(np.abs(err))),
        "rms_error": float(np.sqrt(np.mean(err**2))),
    }


def sigma_scaling_fit(config, sigmas, seeds):
    """Log-log slope of mean RMS error versus sigma (expected ~2 from O(sigma^2)).

    Runs start from a0 = 0 so the deterministic O(a^4) component vanishes and
    the sigma-driven error is isolated.
    """
    from dataclasses import replace

    means = []
    for sig in sigmas:
        errs = []
        for seed in seeds:
            cfg = replace(config, sigma=sig, seed=seed, a0=0.0, u0=None)
            errs.append(compare_full_vs_reduced(cfg)["rms_error"])
        means.append(float(np.mean(errs)))
    slope = float(np.polyfit(np.log(sigmas), np.log(means), 1)[0])
    return {"sigmas": list(map(float, sigmas)), "mean_rms": means, "slope": slope}
