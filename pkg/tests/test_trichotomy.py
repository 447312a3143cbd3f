import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdslab.cocycle import FieldCocycle, MatrixCocycle, ModeBasis, VectorField
from rdslab.errors import (
    ConfigError,
    GapError,
    LowerBoundViolation,
    UnboundedGrowthError,
)
from rdslab.met import lyapunov_spectrum, oseledets_splitting
from rdslab.noise import make_path, ou_sample
from rdslab.trichotomy import (
    GapParameters,
    build_frame,
    classify,
    estimate_bounds,
    projected_norm,
    temperedness_diagnostic,
    unstable_lower_bound,
)


def spectrum_and_splitting(a, std_path, t_span=(-15.0, 15.0), burn_in=10):
    src = MatrixCocycle(np.asarray(a, dtype=float))
    sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=39, burn_in=burn_in)
    spl = oseledets_splitting(src, std_path, sp, t_span)
    return src, sp, spl


class FakeSpectrum:
    def __init__(self, exponents):
        self.exponents = np.asarray(exponents, dtype=float)
        self.multiplicities = np.ones(len(exponents), dtype=int)
        self.spread = np.zeros(len(exponents))


class TestGapParameters:
    def test_valid(self):
        GapParameters(alpha=1.0, beta=2.0, gamma=0.5)

    def test_gamma_dominance_enforced(self):
        with pytest.raises(ConfigError):
            GapParameters(alpha=0.4, beta=2.0, gamma=0.5)

    def test_positivity(self):
        with pytest.raises(ConfigError):
            GapParameters(alpha=-1.0, beta=1.0, gamma=0.0)


class TestClassify:
    def test_burgers_bands(self):
        sp = FakeSpectrum([0.0, -3.0, -8.0, -15.0])
        part = classify(sp, GapParameters(1.0, 2.0, 0.5))
        assert part.unstable == ()
        assert part.center == (0,)
        assert part.stable == (1, 2, 3)

    def test_three_way(self):
        sp = FakeSpectrum([2.0, 0.0, -1.0])
        part = classify(sp, GapParameters(1.5, 0.5, 0.25))
        assert part.unstable == (0,) and part.center == (1,) and part.stable == (2,)

    def test_boundary_logic(self):
        sp = FakeSpectrum([0.4])
        part = classify(sp, GapParameters(1.0, 1.0, 0.5))
        assert part.center == (0,)
        with pytest.raises(GapError):
            classify(sp, GapParameters(1.0, 1.0, 0.3))

    @settings(max_examples=80, deadline=None)
    @given(
        lam=st.floats(min_value=-5, max_value=5),
        alpha=st.floats(min_value=0.1, max_value=4),
        beta=st.floats(min_value=0.1, max_value=4),
        gamma=st.floats(min_value=0.0, max_value=3.9),
    )
    def test_classified_exactly_once_or_error(self, lam, alpha, beta, gamma):
        if gamma >= alpha or gamma >= beta:
            return
        gap = GapParameters(alpha, beta, gamma)
        sp = FakeSpectrum([lam])
        in_u = lam >= alpha
        in_c = abs(lam) <= gamma
        in_s = lam <= -beta
        if in_u + in_c + in_s == 1:
            part = classify(sp, gap)
            assert len(part.unstable + part.center + part.stable) == 1
        else:
            with pytest.raises(GapError):
                classify(sp, gap)


class TestBuildFrame:
    def test_diagonal_coordinate_projections(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([2.0, 0.0, -3.0]), std_path)
        gap = GapParameters(1.5, 2.5, 0.5)
        frame = build_frame(spl, classify(sp, gap), gap)
        assert np.allclose(frame.projections["u"], np.diag([1.0, 0, 0]), atol=1e-10)
        assert np.allclose(frame.projections["c"], np.diag([0, 1.0, 0]), atol=1e-10)
        assert np.allclose(frame.projections["s"], np.diag([0, 0, 1.0]), atol=1e-10)

    def test_triangular_oblique_projection(self, std_path):
        a = np.array([[1.0, 1.0], [0.0, -1.0]])
        src, sp, spl = spectrum_and_splitting(a, std_path)
        gap = GapParameters(0.5, 0.5, 0.2)
        frame = build_frame(spl, classify(sp, gap), gap)
        # analytic eigenprojection onto span(e1) along span((1, -2)/sqrt5)
        pu = frame.projections["u"]
        assert np.abs(pu @ pu - pu).max() < 1e-12
        v = np.array([1.0, -2.0]) / np.sqrt(5.0)
        assert np.linalg.norm(pu @ v) < 1e-7  # kernel contains the slanted direction
        assert np.allclose(pu @ np.array([1.0, 0.0]), [1.0, 0.0], atol=1e-12)

    def test_rank_bookkeeping(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([2.0, 0.0, -3.0, -5.0]), std_path)
        gap = GapParameters(1.5, 2.5, 0.5)
        frame = build_frame(spl, classify(sp, gap), gap)
        total = sum(np.linalg.matrix_rank(frame.projections[a]) for a in "ucs")
        assert total == 4

    def test_algebra_residuals(self, std_path):
        src, sp, spl = spectrum_and_splitting(
            np.array([[1.2, 0.4, 0.1], [0.0, 0.0, 0.7], [0.0, 0.0, -2.0]]), std_path
        )
        gap = GapParameters(0.9, 1.5, 0.4)
        frame = build_frame(spl, classify(sp, gap), gap)
        assert frame.algebra_residual <= 1e-10


class TestEstimateBounds:
    def test_diagonal_ks_is_one(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([0.0, -3.0]), std_path)
        gap = GapParameters(2.0, 2.0, 0.5)
        frame = build_frame(spl, classify(sp, gap), gap)
        rep = estimate_bounds(frame, src, np.arange(0.0, 10.5, 0.25))
        assert rep.K["s"] == 1.0
        assert rep.K["c"] == 1.0

    def test_alpha_beyond_decay_flagged(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([0.0, -3.0]), std_path)
        gap = GapParameters(3.5, 3.0, 0.5)  # alpha exceeds the true decay rate 3
        frame = build_frame(spl, classify(sp, gap), gap)
        with pytest.raises(UnboundedGrowthError):
            estimate_bounds(frame, src, np.arange(0.0, 10.5, 0.25))

    def test_burgers_horizon_stability(self):
        path = make_path(seed=5, dt=0.01, horizon=(-45, 45), channels=1)
        field = VectorField(basis=ModeBasis(np.array([0.0, -3.0, -8.0, -15.0])))
        src = FieldCocycle(field, path)
        sp = lyapunov_spectrum(src, path, block_len=0.5, blocks=40)
        spl = oseledets_splitting(src, path, sp, (-10.0, 10.0))
        gap = GapParameters(1.0, 2.0, 0.5)
        frame = build_frame(spl, classify(sp, gap), gap)
        short = estimate_bounds(frame, src, np.arange(0.0, 20.0, 0.5))
        long = estimate_bounds(frame, src, np.arange(0.0, 40.0, 0.5))
        for a in ("s", "c"):
            assert np.isfinite(short.K[a])
            assert abs(long.K[a] - short.K[a]) <= 0.05 * short.K[a]

    def test_bound_certificates_probes(self, std_path):
        src, sp, spl = spectrum_and_splitting(
            np.array([[0.0, 0.3], [0.0, -3.0]]), std_path
        )
        gap = GapParameters(2.0, 2.0, 0.5)
        frame = build_frame(spl, classify(sp, gap), gap)
        grid = np.arange(0.0, 12.0, 0.25)
        rep = estimate_bounds(frame, src, grid)
        rng = np.random.default_rng(0)
        for _ in range(200):
            t = float(rng.choice(grid))
            x = rng.normal(size=2)
            x /= np.linalg.norm(x)
            lhs = np.linalg.norm(
                src.propagator(0.0, t) @ frame.projections["s"] @ x
            )
            assert lhs <= rep.K["s"] * np.exp(-gap.alpha * t) + 1e-12

    def test_invariance_of_blocks_under_cocycle(self, std_path):
        a = np.array([[1.0, 0.5, 0.0], [0.0, 0.0, 0.3], [0.0, 0.0, -2.0]])
        src, sp, spl = spectrum_and_splitting(a, std_path)
        gap = GapParameters(0.8, 1.5, 0.4)
        frame = build_frame(spl, classify(sp, gap), gap)
        t = 0.5
        u = src.propagator(0.0, t)
        for blk in "ucs":
            p = frame.projections[blk]
            # constant cocycle: the frame is time-invariant
            res = np.linalg.norm((np.eye(3) - p) @ u @ p, 2)
            assert res <= 1e-3

    def test_epsilon_recorded(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([0.0, -3.0]), std_path)
        gap = GapParameters(2.0, 2.0, 0.5)
        frame = build_frame(spl, classify(sp, gap), gap)
        rep = estimate_bounds(frame, src, np.arange(0.0, 8.0, 0.5))
        # -alpha = lambda_- + eps with lambda_- = -3
        assert abs(rep.epsilon["s"] - 1.0) < 1e-8


class TestTemperedness:
    def test_constant_cocycle_slope_zero(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([0.0, -3.0]), std_path)
        gap = GapParameters(2.0, 2.0, 0.5)
        frame = build_frame(spl, classify(sp, gap), gap)
        grid = np.arange(0.0, 6.0, 0.5)

        def bounds_at(t):
            return estimate_bounds(frame, src, grid, base_time=t).K

        slopes = temperedness_diagnostic(bounds_at, np.arange(-5.0, 5.5, 1.0))
        assert slopes["s"] == 0.0
        assert slopes["c"] == 0.0

    def test_example1_ou_scalar_slope_small(self):
        # diag A with a common OU multiplicative scalar; |t| <= 50
        path = make_path(seed=42, dt=0.05, horizon=(-80, 80), channels=1)
        z = ou_sample(path, 0, rate=1.0)
        field = VectorField(
            basis=ModeBasis(np.array([0.0, -3.0])), multiplicative_scalar=z
        )
        src = FieldCocycle(field, path)
        gap = GapParameters(2.0, 2.0, 0.5)
        sp = lyapunov_spectrum(src, path, block_len=0.5, blocks=40)
        spl = oseledets_splitting(src, path, sp, (-10.0, 10.0))
        frame = build_frame(spl, classify(FakeSpectrum([0.0, -3.0]), gap), gap)
        grid = np.arange(0.0, 15.0, 0.25)

        def bounds_at(t):
            return estimate_bounds(frame, src, grid, base_time=t, check_growth=False).K

        shifts = np.arange(-50.0, 51.0, 5.0)
        slopes = temperedness_diagnostic(bounds_at, shifts)
        assert abs(slopes["s"]) <= 0.02
        assert abs(slopes["c"]) <= 0.02

    def test_adversarial_drift_detected(self):
        # z(t) = t drift: log K grows linearly along the shift
        class DriftCocycle:
            dim = 2
            dt = 0.01

            def log_factors(self, t0, t1):
                drift = 0.5 * (t1**2 - t0**2)
                return np.array([drift, -3.0 * (t1 - t0) + drift])

            def propagator(self, t0, t1):
                return np.diag(np.exp(self.log_factors(t0, t1)))

        src = DriftCocycle()
        gap = GapParameters(2.0, 2.0, 0.5)
        spl = _diag_splitting_2()
        frame = build_frame(spl, classify(FakeSpectrum([0.0, -3.0]), gap), gap)
        grid = np.arange(0.0, 10.0, 0.5)

        def bounds_at(t):
            return estimate_bounds(frame, src, grid, base_time=t, check_growth=False).K

        slopes = temperedness_diagnostic(bounds_at, np.arange(-20.0, 21.0, 2.0))
        assert abs(slopes["s"]) > 0.5


class TestUnstableLowerBound:
    def test_single_unstable_mode(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([2.0, -1.0]), std_path)
        gap = GapParameters(1.5, 0.5, 0.25)
        frame = build_frame(spl, classify(sp, gap), gap)
        h = unstable_lower_bound(frame, src, -np.arange(0.0, 10.0, 0.5))
        assert abs(h - 1.0) < 1e-10

    def test_empty_unstable_rejected(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([0.0, -3.0]), std_path)
        gap = GapParameters(2.0, 2.0, 0.5)
        frame = build_frame(spl, classify(sp, gap), gap)
        with pytest.raises(ConfigError):
            unstable_lower_bound(frame, src, -np.arange(0.0, 5.0, 0.5))

    def test_two_mode_unstable_block(self, std_path):
        src, sp, spl = spectrum_and_splitting(np.diag([3.0, 2.0, -1.0]), std_path)
        gap = GapParameters(1.5, 0.5, 0.25)
        frame = build_frame(spl, classify(sp, gap), gap)
        h = unstable_lower_bound(frame, src, -np.arange(0.0, 10.0, 0.5))
        assert abs(h - 1.0) < 1e-10


def _diag_splitting_2():
    """Minimal stand-in splitting with coordinate-axis frames (2 modes)."""

    class S:
        dim = 2
        subspaces = [np.eye(2)[:, [0]], np.eye(2)[:, [1]]]
        spectrum = FakeSpectrum([0.0, -3.0])

    return S()
