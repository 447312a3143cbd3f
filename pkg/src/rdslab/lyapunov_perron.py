"""Center-manifold graphs by fixed-point iteration on weighted trajectory spaces.

The graph ``h(v)`` from the center block to stable + unstable is the value at
time 0 of the unique fixed point of the variation-of-constants map

    (J x)(t) = U^c(t) v + int_0^t U^c(t-r) P^c G(x(r)) dr
             + int_{-T}^t U^s(t-r) P^s G(x(r)) dr
             - int_t^{T} U^u(t-r) P^u G(x(r)) dr

on trajectories over ``[-T, T]`` with the exponentially weighted norm
``sup_t exp(-eta |t|) |x(t)|``.  ``G`` is the nonlinearity localised by a
smooth cut-off; the iteration starts from the zero trajectory and contracts at
the printed rate ``rho' = K lip (1/(eta-gamma) + 1/(beta-eta) + 1/(alpha-eta))``
when ``rho' < 1``.  A discrete variant iterates the analogous three-sum map of
the time-one flow on the integer grid.

All three integrals are evaluated by first-order recurrences in the direction
that keeps them contractive (stable sums forward, unstable sums backward, with
re-projection every step), so no long products are ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .errors import ConfigError, GridError, NonContractionError, NotConvergedError
from .cocycle import evolve, evolve_trajectory

__all__ = [
    "mollifier",
    "mollifier_derivative",
    "estimate_lipschitz",
    "make_cutoff",
    "CutoffNonlinearity",
    "WeightedTrajectory",
    "GraphSample",
    "CenterGraph",
    "AdditiveForcing",
    "contraction_constant",
    "default_eta",
    "derived_window",
    "tail_truncation_bound",
    "lp_map_continuous",
    "lp_map_discrete",
    "CenterManifoldSolver",
    "solve_center_graph",
    "graph_derivative_at_zero",
    "invariance_residual",
    "time_one_increment",
    "cutoff_field",
]


def _bump(t):
    return np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)


def mollifier(s):
    """Smooth cut-off: 1 on |s| <= 1, 0 on |s| >= 2, built from exp(-1/t) pieces.

    The quotient construction has derivative exactly -2 at |s| = 3/2, meeting
    the bound sup |sigma'| <= 2 with equality.
    """
    s = np.abs(np.asarray(s, dtype=float))
    up = _bump(2.0 - s)
    down = _bump(s - 1.0)
    return up / (up + down + 1e-300)


def mollifier_derivative(s, h=1e-6):
    s = np.asarray(s, dtype=float)
    return (mollifier(s + h) - mollifier(s - h)) / (2 * h)


def estimate_lipschitz(fn, dim, radius, path, t=0.0, probes=400, seed=0):
    """Sampled sup of difference quotients of ``fn`` over the ball |x| <= radius.

    Mixes far pairs with near pairs (gradient-scale separations); an honest
    estimator, not a certificate.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(probes):
        x = rng.normal(size=dim)
        x *= rng.uniform(0, radius) / max(np.linalg.norm(x), 1e-300)
        d = rng.normal(size=dim)
        d *= rng.choice([1e-4, 1e-2]) * radius / max(np.linalg.norm(d), 1e-300)
        y = x + d
        q = np.linalg.norm(fn(t, y, path) - fn(t, x, path)) / np.linalg.norm(d)
        best = max(best, float(q))
    return best


@dataclass(eq=False)
class CutoffNonlinearity:
    """Nonlinearity localised by ``G(x) = sigma(|x|/rho) F(x)``.

    ``lip`` is the declared global Lipschitz bound of G used by the
    contraction check; when omitted it is estimated by sampling difference
    quotients over the support ball ``|x| <= 2 rho``.  ``certificate`` records
    the closed-form bound 5 * sup_{|x|<=2 rho} ||DF||, from
    ``||DG|| <= sigma ||DF|| + (sup|sigma'| / rho) |F|``.
    """

    raw: object
    radius: float
    dim: int
    path: object
    lip: float = None
    raw_jacobian: object = None
    vectorized: bool = False
    certificate: dict = dc_field(default=None, repr=False)

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("cut-off radius must be positive")
        if self.certificate is None:
            raw_ball = estimate_lipschitz(self.raw, self.dim, 2.0 * self.radius, self.path)
            self.certificate = {
                "raw_lipschitz_ball": raw_ball,
                "constant": 5.0,
                "bound": 5.0 * raw_ball,
            }
        if self.lip is None:
            self.lip = estimate_lipschitz(
                self.__call__, self.dim, 2.0 * self.radius, self.path
            )

    def __call__(self, t, x, path):
        s = np.linalg.norm(x) / self.radius
        if s >= 2.0:
            return np.zeros_like(x)
        return float(mollifier(s)) * self.raw(t, x, path)

    def batch(self, ts, xs, path):
        if self.vectorized:
            s = np.linalg.norm(xs, axis=1) / self.radius
            f = self.raw(ts, xs, path)
            return mollifier(s)[:, None] * f
        return np.array([self(t, x, path) for t, x in zip(ts, xs)])

    def jacobian(self, t, x, path, eps=1e-7):
        nrm = np.linalg.norm(x)
        s = nrm / self.radius
        if s >= 2.0:
            return np.zeros((x.size, x.size))
        f = self.raw(t, x, path)
        if self.raw_jacobian is not None:
            jf = self.raw_jacobian(t, x, path)
        else:
            jf = np.column_stack(
                [
                    (self.raw(t, x + eps * e, path) - self.raw(t, x - eps * e, path))
                    / (2 * eps)
                    for e in np.eye(x.size)
                ]
            )
        sig = float(mollifier(s))
        if nrm < 1e-300 or s <= 1.0:
            return sig * jf
        dsig = float(mollifier_derivative(s))
        return sig * jf + np.outer(f, x) * (dsig / (self.radius * nrm))


def make_cutoff(field, radius, path, lip=None, vectorized_raw=None):
    """Cut off a field's nonlinearity; dimension and jacobian come from the field."""
    raw = field.nonlinearity
    if raw is None:
        raw = lambda t, u, p: np.zeros_like(u)  # noqa: E731
    return CutoffNonlinearity(
        raw=vectorized_raw if vectorized_raw is not None else raw,
        radius=radius,
        dim=field.dim,
        path=path,
        lip=lip,
        raw_jacobian=field.jacobian,
        vectorized=vectorized_raw is not None,
    )


def cutoff_field(field, cutoff):
    """Field whose nonlinearity is the cut-off one (flows stay localised)."""
    return replace(
        field,
        nonlinearity=lambda t, u, p: cutoff(t, u, p),
        jacobian=lambda t, u, p: cutoff.jacobian(t, u, p),
        lipschitz_bound=cutoff.lip,
    )


@dataclass(frozen=True, eq=False)
class WeightedTrajectory:
    """Trajectory samples with the exponentially weighted sup norm."""

    times: np.ndarray
    values: np.ndarray
    eta: float

    def __post_init__(self):
        if self.times.size != self.values.shape[0]:
            raise ConfigError("times and values disagree")
        if abs(self.times[0] + self.times[-1]) > 1e-9:
            raise ConfigError("grid must be symmetric about its base point")

    def norm(self):
        w = np.exp(-self.eta * np.abs(self.times))
        return float(np.max(w * np.linalg.norm(self.values, axis=1)))

    def index_of(self, t):
        dt = self.times[1] - self.times[0]
        i = int(round((t - self.times[0]) / dt))
        if not 0 <= i < self.times.size:
            raise GridError(f"time {t} outside trajectory window")
        return i

    @staticmethod
    def zero(times, dim, eta):
        return WeightedTrajectory(times=times, values=np.zeros((times.size, dim)), eta=eta)


def contraction_constant(K, lip, gap, eta):
    """The printed small-nonlinearity constant
    ``rho' = K lip (1/(eta-gamma) + 1/(beta-eta) + 1/(alpha-eta))``.

    Requires ``gamma < eta < min(alpha, beta)``; the caller decides
    admissibility (``rho' < 1``).
    """
    if not (gap.gamma < eta < min(gap.alpha, gap.beta)):
        raise ConfigError(
            f"eta = {eta} outside the open interval "
            f"({gap.gamma}, {min(gap.alpha, gap.beta)})"
        )
    return K * lip * (
        1.0 / (eta - gap.gamma) + 1.0 / (gap.beta - eta) + 1.0 / (gap.alpha - eta)
    )


def default_eta(gap):
    """Log-scale midpoint of the admissible interval (gamma, min(alpha, beta))."""
    top = min(gap.alpha, gap.beta)
    if gap.gamma <= 0:
        return 0.5 * top
    return float(np.sqrt(gap.gamma * top))


def derived_window(gap, eta, tol):
    """Window half-length T with tail factor exp(-(min(a,b) - eta) T) <= tol/10."""
    rate = min(gap.alpha, gap.beta) - eta
    return float(np.log(10.0 / tol) / rate)


def tail_truncation_bound(traj_norm, K, lip, gap, eta, T):
    """Reported bound on the tail truncated at +-T."""
    return K * lip * traj_norm * np.exp(-(min(gap.alpha, gap.beta) - eta) * T)


@dataclass(eq=False)
class AdditiveForcing:
    """Per-mode additive white noise fed through the same recurrences.

    ``amplitudes[k]`` multiplies channel-k increments; ``gains`` are the
    exact-OU per-step scalings (so a forcing-only solve reproduces the
    stationary OU responses of the linear modes sample-for-sample).
    """

    amplitudes: np.ndarray
    gains: np.ndarray

    def increments(self, path, g0, g1):
        n = self.amplitudes.size
        if path.n_channels < n:
            raise ConfigError("path has fewer channels than forced modes")
        dw = path.increment_slice(g0, g1)[:n].T
        return dw * (self.amplitudes * self.gains)[None, :]


def _diag_steps(src, j0, j1):
    """(steps, N) one-step diagonal factors when the source supports them."""
    if hasattr(src, "step_factors"):
        return src.step_factors(j0, j1)
    return None


class _Window:
    """Precomputed per-step data for one solve window [base - T, base + T]."""

    def __init__(self, src, path, base_time, half_steps, forcing):
        self.dt = path.dt
        self.base = base_time
        self.J = half_steps
        j0 = path.gen_index(base_time) - path.clock_offset  # path-clock step index
        self.times = base_time + self.dt * np.arange(-self.J, self.J + 1)
        self.rel_times = self.dt * np.arange(-self.J, self.J + 1)
        diag = _diag_steps(src, j0 - self.J, j0 + self.J)
        if diag is not None:
            self.diag = diag  # (2J, N)
            self.dense = None
        else:
            self.diag = None
            self.dense = np.stack(
                [src.step_matrix(j) for j in range(j0 - self.J, j0 + self.J)]
            )
        if forcing is not None:
            g0 = path.gen_index(base_time) - self.J
            self.xi = forcing.increments(path, g0, g0 + 2 * self.J)
        else:
            self.xi = None

    def apply(self, i, x):
        """V_i x over grid step i (0-based within the window)."""
        if self.diag is not None:
            return self.diag[i] * x
        return self.dense[i] @ x

    def solve(self, i, x):
        """V_i^{-1} x."""
        if self.diag is not None:
            return x / self.diag[i]
        return np.linalg.solve(self.dense[i], x)


def _continuous_sweep(win, projections, g_split, v, xi_split):
    """One application of the continuous three-integral map on a window."""
    dt = win.dt
    J = win.J
    n_pts = 2 * J + 1
    pc, ps, pu = projections
    gc, gs, gu = g_split
    dim = v.size
    # center linear flow of v
    h = np.empty((n_pts, dim))
    h[J] = pc @ v
    for i in range(J, 2 * J):
        h[i + 1] = pc @ win.apply(i, h[i])
    for i in range(J - 1, -1, -1):
        h[i] = pc @ win.solve(i, h[i + 1])
    # signed center integral from 0
    c = np.zeros((n_pts, dim))
    for i in range(J, 2 * J):
        inc = win.apply(i, c[i] + 0.5 * dt * gc[i]) + 0.5 * dt * gc[i + 1]
        if xi_split is not None:
            inc = inc + xi_split[0][i]
        c[i + 1] = pc @ inc
    for i in range(J - 1, -1, -1):
        rhs = c[i + 1] - 0.5 * dt * gc[i + 1]
        if xi_split is not None:
            rhs = rhs - xi_split[0][i]
        c[i] = pc @ (win.solve(i, rhs) - 0.5 * dt * gc[i])
    # stable history integral, forward from the truncated end
    s = np.zeros((n_pts, dim))
    for i in range(0, 2 * J):
        inc = win.apply(i, s[i] + 0.5 * dt * gs[i]) + 0.5 * dt * gs[i + 1]
        if xi_split is not None:
            inc = inc + xi_split[1][i]
        s[i + 1] = ps @ inc
    # unstable tail integral, backward from the truncated end
    u = np.zeros((n_pts, dim))
    for i in range(2 * J - 1, -1, -1):
        rhs = u[i + 1] + 0.5 * dt * gu[i + 1]
        if xi_split is not None:
            rhs = rhs + xi_split[2][i]
        u[i] = pu @ (win.solve(i, rhs) + 0.5 * dt * gu[i])
    return h + c + s - u


def lp_map_continuous(
    traj, v, frame, cutoff, src, path, forcing=None, window=None, base_time=0.0
):
    """One application of the continuous Lyapunov-Perron map ``J(., v)``.

    ``traj`` lives on a symmetric relative grid with the path's step (absolute
    times are ``base_time + traj.times``); the output shares the grid and
    satisfies ``P^c output(0) = v`` exactly.  Integrals use trapezoid
    quadrature; tails are truncated at the window ends.
    """
    times = traj.times
    J = (times.size - 1) // 2
    if window is None:
        window = _Window(src, path, base_time, J, forcing)
    pc = frame.projections["c"]
    ps = frame.projections["s"]
    pu = frame.projections["u"]
    if np.linalg.norm(pc @ v - v) > 1e-8 * max(1.0, np.linalg.norm(v)):
        raise ConfigError("v must lie in the range of the center projection")
    g = cutoff.batch(window.base + times, traj.values, path)
    g_split = (g @ pc.T, g @ ps.T, g @ pu.T)
    if window.xi is not None:
        xi_split = (window.xi @ pc.T, window.xi @ ps.T, window.xi @ pu.T)
    else:
        xi_split = None
    vals = _continuous_sweep(window, (pc, ps, pu), g_split, v, xi_split)
    return WeightedTrajectory(times=times, values=vals, eta=traj.eta)


def lp_map_discrete(traj, v, frame, cutoff, src, path, base_time=0.0):
    """One application of the discrete three-sum map ``Y(., v)`` (unit time step).

    ``traj.times`` must be the integers ``-T..T``; ``cutoff`` wraps the
    time-one nonlinear increment of the flow (see :func:`time_one_increment`).
    The center sum is oriented like the integral ``int_0^n`` (signed for
    ``n < 0``, empty at ``n = 0``).
    """
    times = traj.times
    J = (times.size - 1) // 2
    if not np.allclose(times, np.arange(-J, J + 1)):
        raise ConfigError("discrete map needs the integer grid -T..T")
    pc = frame.projections["c"]
    ps = frame.projections["s"]
    pu = frame.projections["u"]
    if np.linalg.norm(pc @ v - v) > 1e-8 * max(1.0, np.linalg.norm(v)):
        raise ConfigError("v must lie in the range of the center projection")
    abs_t = base_time + times
    steps = [src.propagator(float(t), float(t) + 1.0) for t in abs_t[:-1]]
    g = np.array([cutoff(float(t), x, path) for t, x in zip(abs_t, traj.values)])
    gc, gs, gu = g @ pc.T, g @ ps.T, g @ pu.T
    n_pts = times.size
    dim = v.size
    h = np.empty((n_pts, dim))
    h[J] = pc @ v
    for i in range(J, n_pts - 1):
        h[i + 1] = pc @ (steps[i] @ h[i])
    for i in range(J - 1, -1, -1):
        h[i] = pc @ np.linalg.solve(steps[i], h[i + 1])
    c = np.zeros((n_pts, dim))
    for i in range(J, n_pts - 1):
        c[i + 1] = pc @ (steps[i] @ c[i] + gc[i])
    for i in range(J - 1, -1, -1):
        c[i] = pc @ np.linalg.solve(steps[i], c[i + 1] - gc[i])
    s = np.zeros((n_pts, dim))
    for i in range(0, n_pts - 1):
        s[i + 1] = ps @ (steps[i] @ s[i] + gs[i])
    u = np.zeros((n_pts, dim))
    for i in range(n_pts - 2, -1, -1):
        u[i] = pu @ np.linalg.solve(steps[i], u[i + 1] + gu[i])
    return WeightedTrajectory(times=times, values=h + c + s - u, eta=traj.eta)


@dataclass(frozen=True, eq=False)
class GraphSample:
    """One graph evaluation with its fixed-point provenance."""

    v: np.ndarray
    h: np.ndarray
    trajectory: WeightedTrajectory
    iterations: int
    updates: tuple
    ratios: tuple
    rho_prime: float
    tail_bound: float
    base_time: float = 0.0

    @property
    def point(self):
        return self.v + self.h


@dataclass(eq=False)
class CenterGraph:
    """Sampled center-manifold graph ``v -> h(v, omega)``."""

    eta: float
    frame: object
    samples: list
    rho_prime: float
    K: float

    def sample_at(self, v, atol=1e-12):
        for s in self.samples:
            if np.allclose(s.v, v, atol=atol):
                return s
        raise ConfigError(f"no graph sample at v = {v}")

    def lipschitz_bound(self):
        """Graph Lipschitz constant K / (1 - rho') from the fixed-point estimate."""
        return self.K / (1.0 - self.rho_prime)

    def to_csv(self):
        dim = self.samples[0].v.size
        head = (
            ",".join(f"v_{i+1}" for i in range(dim))
            + ","
            + ",".join(f"h_{i+1}" for i in range(dim))
            + ",iterations,final_update,rho_prime"
        )
        lines = [head]
        for s in self.samples:
            final = s.updates[-1] if s.updates else 0.0
            lines.append(
                ",".join(repr(float(x)) for x in s.v)
                + ","
                + ",".join(repr(float(x)) for x in s.h)
                + f",{s.iterations},{final!r},{s.rho_prime!r}"
            )
        return "\n".join(lines) + "\n"


class CenterManifoldSolver:
    """Uniform-contraction iteration of the Lyapunov-Perron map.

    Refuses to run when the printed constant ``rho'`` is not < 1.  The window
    half-length is derived from the tolerance unless given: the tail factor is
    kept below tol/10.
    """

    def __init__(
        self,
        src,
        path,
        frame,
        cutoff,
        eta=None,
        K=1.0,
        tol=1e-9,
        max_iter=200,
        window=None,
        mode="continuous",
        forcing=None,
    ):
        self.src = src
        self.path = path
        self.frame = frame
        self.cutoff = cutoff
        self.gap = frame.gap
        self.eta = default_eta(self.gap) if eta is None else float(eta)
        self.K = float(K)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.mode = mode
        self.forcing = forcing
        self.rho_prime = contraction_constant(self.K, cutoff.lip, self.gap, self.eta)
        if window is None:
            window = derived_window(self.gap, self.eta, self.tol)
        if mode == "continuous":
            self.half_steps = int(np.ceil(window / path.dt))
        else:
            self.half_steps = int(np.ceil(window))
        self.T = self.half_steps * (path.dt if mode == "continuous" else 1.0)
        self._windows = {}

    def _window(self, base_time):
        key = round(base_time / self.path.dt)
        if key not in self._windows:
            self._windows[key] = _Window(
                self.src, self.path, base_time, self.half_steps, self.forcing
            )
        return self._windows[key]

    def solve(self, v, base_time=0.0):
        """Fixed point of the map at parameter ``v``; returns a GraphSample."""
        if self.rho_prime >= 1.0:
            raise NonContractionError(self.rho_prime)
        v = np.asarray(v, dtype=float)
        dim = self.frame.dim
        if self.mode == "continuous":
            rel = self.path.dt * np.arange(-self.half_steps, self.half_steps + 1)
            win = self._window(base_time)
        else:
            rel = np.arange(-self.half_steps, self.half_steps + 1, dtype=float)
            win = None
        traj = WeightedTrajectory.zero(rel, dim, self.eta)
        updates, ratios = [], []
        prev = None
        for it in range(1, self.max_iter + 1):
            if self.mode == "continuous":
                new = lp_map_continuous(
                    traj,
                    v,
                    self.frame,
                    self.cutoff,
                    self.src,
                    self.path,
                    forcing=self.forcing,
                    window=win,
                    base_time=base_time,
                )
            else:
                new = lp_map_discrete(
                    traj, v, self.frame, self.cutoff, self.src, self.path, base_time=base_time
                )
            upd = WeightedTrajectory(
                times=rel, values=new.values - traj.values, eta=self.eta
            ).norm()
            updates.append(upd)
            if prev is not None and prev > 100 * np.finfo(float).tiny:
                ratios.append(upd / prev)
            prev = upd
            traj = new
            if upd <= self.tol:
                break
        else:
            raise NotConvergedError(self.max_iter, updates[-1], ratios[-1] if ratios else 0.0)
        pc = self.frame.projections["c"]
        x0 = traj.values[self.half_steps]
        h = x0 - pc @ x0
        tail = tail_truncation_bound(
            traj.norm(), self.K, self.cutoff.lip, self.gap, self.eta, self.T
        )
        return GraphSample(
            v=v,
            h=h,
            trajectory=traj,
            iterations=it,
            updates=tuple(updates),
            ratios=tuple(ratios),
            rho_prime=self.rho_prime,
            tail_bound=tail,
            base_time=base_time,
        )

    def sample_graph(self, vs, base_time=0.0):
        samples = [self.solve(v, base_time) for v in vs]
        return CenterGraph(
            eta=self.eta,
            frame=self.frame,
            samples=samples,
            rho_prime=self.rho_prime,
            K=self.K,
        )

    def derivative_at_zero(self, step=1e-3, base_time=0.0):
        """Central-difference Jacobian of the graph at v = 0 (tangency check)."""
        basis = self.frame.center_basis()
        cols = []
        for b in basis.T:
            up = self.solve(step * b, base_time).h
            dn = self.solve(-step * b, base_time).h
            cols.append((up - dn) / (2.0 * step))
        return np.column_stack(cols)


def solve_center_graph(
    v, frame, cutoff, src, path, eta, K=1.0, tol=1e-9, max_iter=200, T=None, mode="continuous", forcing=None
):
    """One-shot graph evaluation: ``(h(v, omega), trajectory, iterations)``."""
    solver = CenterManifoldSolver(
        src, path, frame, cutoff, eta=eta, K=K, tol=tol, max_iter=max_iter, window=T, mode=mode, forcing=forcing
    )
    sample = solver.solve(np.asarray(v, dtype=float))
    return sample.h, sample.trajectory, sample.iterations


def graph_derivative_at_zero(graph, step, tol=None, curvature_scale=10.0):
    """Tangency matrix from stored graph samples at ``+- step`` basis probes.

    Returns ``(matrix, norm, threshold)`` with the assertion threshold
    ``max(10 tol / step, curvature_scale * step)``.
    """
    basis = graph.frame.center_basis()
    cols = []
    for b in basis.T:
        up = graph.sample_at(step * b)
        dn = graph.sample_at(-step * b)
        cols.append((up.h - dn.h) / (2.0 * step))
    m = np.column_stack(cols)
    norm = float(np.linalg.norm(m, 2))
    if tol is None:
        tol = 1e-9
    thr = max(10.0 * tol / step, curvature_scale * step)
    return m, norm, thr


def time_one_increment(field, path):
    """Raw nonlinearity of the discrete theorem: F(1, x, theta_n) = phi(1, x) - U(1) x."""
    from .cocycle import linear_propagator

    def raw(t, x, p):
        lin = linear_propagator(field, (t, t + 1.0), p).matrix
        return evolve(field, x, (t, t + 1.0), p) - lin @ x

    return raw


def invariance_residual(solver, field, s, probes):
    """Distance of flowed graph points from the time-``s`` graph.

    For each probe ``v``: flow ``x0 = v + h(v)`` with the cut-off field over
    ``[0, s]``, then measure ``|(I - P^c) y - h(P^c y, theta_s)|``.  Probes
    whose trajectory escapes the outer cut-off radius ``2 rho`` are skipped and
    reported (the manifold is local).
    """
    if s < 0:
        raise GridError("invariance check needs s >= 0")
    pc = solver.frame.projections["c"]
    fld = cutoff_field(field, solver.cutoff)
    worst = 0.0
    skipped = []
    residuals = []
    for v in probes:
        v = np.asarray(v, dtype=float)
        x0 = solver.solve(v).point
        traj = evolve_trajectory(fld, x0, (0.0, s), solver.path)
        if np.max(np.linalg.norm(traj, axis=1)) > 2.0 * solver.cutoff.radius:
            skipped.append(v)
            continue
        y = traj[-1]
        w = pc @ y
        h_w = solver.solve(w, base_time=s).h
        r = float(np.linalg.norm((y - w) - h_w))
        residuals.append(r)
        worst = max(worst, r)
    return {"max_residual": worst, "residuals": residuals, "skipped": skipped}
