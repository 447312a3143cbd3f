import numpy as np
import pytest
from scipy.linalg import eig

from rdslab.burgers import burgers_field
from rdslab.cocycle import FieldCocycle, MatrixCocycle, ModeBasis, VectorField
from rdslab.errors import ConfigError, SeparationError
from rdslab.met import (
    equivariance_residual,
    lyapunov_spectrum,
    oseledets_splitting,
    principal_angles,
    singular_limit,
)
from rdslab.noise import make_path, ou_sample


class DiagonalOUCocycle:
    """Per-mode scalar cocycle u_k' = z_k(theta_t) u_k (test fixture)."""

    def __init__(self, ous, path):
        self.ous = ous
        self.path = path
        self.dim = len(ous)
        self.dt = path.dt

    def log_factor(self, z, t0, t1):
        g0, g1 = self.path.gen_index(t0), self.path.gen_index(t1)
        zs = z.values(min(g0, g1), max(g0, g1))
        quad = 0.5 * (zs[:-1] + zs[1:]).sum() * self.path.dt
        return quad if t1 >= t0 else -quad

    def propagator(self, t0, t1):
        return np.diag([np.exp(self.log_factor(z, t0, t1)) for z in self.ous])


class TestLyapunovSpectrum:
    def test_constant_diagonal_exact(self, std_path):
        src = MatrixCocycle(np.diag([2.0, -1.0]))
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=20)
        assert np.allclose(sp.exponents, [2.0, -1.0], atol=1e-12)
        assert np.all(sp.spread < 1e-12)

    def test_linearized_burgers_paper_values(self):
        # lambda_k = -(k^2 - 1) for the linearisation du = (Delta + 1) u
        path = make_path(seed=1, dt=1e-3, horizon=(-1, 60), channels=1)
        field = VectorField(basis=ModeBasis(np.array([0.0, -3.0, -8.0, -15.0, -24.0, -35.0])))
        src = FieldCocycle(field, path)
        sp = lyapunov_spectrum(src, path, block_len=0.5, blocks=100, top_k=4)
        assert np.abs(sp.exponents - np.array([0.0, -3.0, -8.0, -15.0])).max() < 0.05

    def test_scalar_ou_cocycle_matches_quadrature(self, std_path):
        # oracle: exponent equals the direct trapezoid average of z over the run
        z1 = ou_sample(std_path, 0, rate=1.0)
        z2 = ou_sample(std_path, 1, rate=0.5)
        src = DiagonalOUCocycle([z1, z2], std_path)
        T = 18.0
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=36)
        expected = sorted(
            (src.log_factor(z, 0.0, T) / T for z in src.ous), reverse=True
        )
        assert np.allclose(sp.raw, expected, atol=1e-10)

    def test_deterministic_given_inputs(self, std_path):
        src = MatrixCocycle(np.array([[1.0, 0.3], [0.0, -2.0]]))
        a = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=30)
        b = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=30)
        assert np.array_equal(a.raw, b.raw)

    def test_multiplicity_grouping(self, std_path):
        src = MatrixCocycle(np.diag([1.0, 1.0 - 1e-4, -2.0]))
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=20)
        assert list(sp.multiplicities) == [2, 1]
        assert abs(sp.exponents[0] - (1.0 - 5e-5)) < 1e-3

    def test_horizon_guard(self, std_path):
        src = MatrixCocycle(np.diag([0.0]))
        with pytest.raises(Exception):
            lyapunov_spectrum(src, std_path, block_len=10.0, blocks=10)

    def test_rank_collapse_reported(self, std_path):
        src = MatrixCocycle(np.diag([0.0, -900.0]), dt=0.01)
        from rdslab.errors import RankCollapseError

        with pytest.raises(RankCollapseError):
            lyapunov_spectrum(src, std_path, block_len=1.0, blocks=10)

    def test_json_export(self, std_path):
        import json

        sp = lyapunov_spectrum(
            MatrixCocycle(np.diag([2.0, -1.0])), std_path, block_len=0.5, blocks=10, seed=4
        )
        d = json.loads(sp.to_json())
        assert d["seed"] == 4 and d["blocks"] == 10
        assert d["exponents"] == [2.0, -1.0]


class TestSingularLimit:
    def test_orthogonal_cocycle_identity(self, std_path):
        th = 0.7
        rot = np.array([[0.0, -th], [th, 0.0]])  # generator of a rotation
        src = MatrixCocycle(rot)
        m = singular_limit(src, std_path, 3.0)
        assert np.allclose(m, np.eye(2), atol=1e-12)

    def test_constant_diagonal_any_t(self, std_path):
        src = MatrixCocycle(np.diag([2.0, -1.0]))
        for t in [0.5, 1.0, 4.0]:
            m = singular_limit(src, std_path, t)
            assert np.allclose(m, np.diag([np.exp(2.0), np.exp(-1.0)]), atol=1e-10)

    def test_burgers_log_eigs_approach_spectrum(self):
        path = make_path(seed=2, dt=1e-2, horizon=(-1, 45), channels=1)
        field = VectorField(basis=ModeBasis(np.array([0.0, -3.0, -8.0])))
        src = FieldCocycle(field, path)
        target = np.array([0.0, -3.0, -8.0])
        errs = []
        for t in [10.0, 20.0, 40.0]:
            m = singular_limit(src, path, t)
            lam = np.sort(np.log(np.linalg.eigvalsh(m)))[::-1]
            errs.append(np.abs(lam - target).max())
        assert errs[0] >= errs[1] >= errs[2]
        assert errs[-1] < 1e-8  # diagonal case: exact at every t


def analytic_eigenframes(a):
    """Eigenvectors of a constant generator, ordered by descending real part."""
    vals, vecs = eig(a)
    order = np.argsort(vals.real)[::-1]
    return vals.real[order], [vecs[:, i].real / np.linalg.norm(vecs[:, i].real) for i in order]


class TestOseledetsSplitting:
    def test_constant_diagonal_coordinate_axes(self, std_path):
        src = MatrixCocycle(np.diag([2.0, -1.0, -4.0]))
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=30)
        spl = oseledets_splitting(src, std_path, sp, (-10.0, 10.0))
        for i, w in enumerate(spl.subspaces):
            ang = principal_angles(w, np.eye(3)[:, [i]])
            assert ang.max() < 1e-12

    def test_triangular_slanted_eigendirection(self, std_path):
        a = np.array([[1.0, 1.0], [0.0, -1.0]])
        src = MatrixCocycle(a)
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=30, burn_in=10)
        spl = oseledets_splitting(src, std_path, sp, (-15.0, 15.0))
        _, frames = analytic_eigenframes(a)
        # W_1 is the first axis, W_2 the non-orthogonal second eigendirection
        assert principal_angles(spl.subspaces[0], np.array(frames[0])[:, None]).max() < 1e-8
        assert principal_angles(spl.subspaces[1], np.array(frames[1])[:, None]).max() < 1e-8

    def test_burgers_axes(self):
        path = make_path(seed=3, dt=1e-2, horizon=(-20, 20), channels=1)
        field = VectorField(basis=ModeBasis(np.array([0.0, -3.0, -8.0, -15.0])))
        src = FieldCocycle(field, path)
        sp = lyapunov_spectrum(src, path, block_len=0.5, blocks=30)
        spl = oseledets_splitting(src, path, sp, (-10.0, 10.0))
        for i, w in enumerate(spl.subspaces):
            assert principal_angles(w, np.eye(4)[:, [i]]).max() <= 1e-3

    def test_gap_refusal(self, std_path):
        src = MatrixCocycle(np.diag([2.0, -1.0]))
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=30)
        # fabricate a spectrum whose spread swamps the gap
        from dataclasses import replace

        bad = replace(sp, spread=np.array([2.0, 2.0]))
        with pytest.raises(SeparationError):
            oseledets_splitting(src, std_path, bad, (-5.0, 5.0))

    def test_equivariance(self, std_path):
        a = np.array([[1.0, 0.7, 0.0], [0.0, -0.5, 0.4], [0.0, 0.0, -2.5]])
        src = MatrixCocycle(a)
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=30, burn_in=10)
        spl = oseledets_splitting(src, std_path, sp, (-15.0, 15.0))
        res = equivariance_residual(spl, src, std_path, sp, (-15.0, 15.0), delta=0.5)
        assert res <= 1e-3

    def test_growth_law_two_sided(self, std_path):
        src = MatrixCocycle(np.diag([2.0, -1.0]))
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=30)
        spl = oseledets_splitting(src, std_path, sp, (-10.0, 10.0))
        for i, lam in enumerate(sp.exponents):
            w = spl.subspaces[i][:, 0]
            for t in [2.0, 5.0, -2.0, -5.0]:
                growth = np.log(np.linalg.norm(src.propagator(0.0, t) @ w)) / t
                assert abs(growth - lam) < 1e-10

    def test_orthogonal_basis_invariance(self, std_path):
        # exponents agree to 1e-8 under an orthogonal change of the truncation basis
        a = np.array([[1.0, 0.5], [0.0, -1.5]])
        rng = np.random.default_rng(0)
        q, _ = np.linalg.qr(rng.normal(size=(2, 2)))

        class Conjugated:
            dim = 2
            dt = std_path.dt

            def propagator(self, t0, t1):
                return q @ MatrixCocycle(a).propagator(t0, t1) @ q.T

        sp1 = lyapunov_spectrum(MatrixCocycle(a), std_path, block_len=0.5, blocks=30, burn_in=10)
        sp2 = lyapunov_spectrum(Conjugated(), std_path, block_len=0.5, blocks=30, burn_in=10)
        assert np.allclose(sp1.raw, sp2.raw, atol=1e-8)


class TestOracleEquivalenceConstantCocycles:
    FIXTURES = [
        np.diag([2.0, -1.0]),
        np.array([[1.0, 1.0], [0.0, -1.0]]),
        np.array([[1.5, 0.8, -0.3], [0.0, 0.2, 0.5], [0.0, 0.0, -1.7]]),
        np.diag([0.5, -0.25, -3.0]),
    ]

    @pytest.mark.parametrize("a", FIXTURES, ids=["diag2", "tri2", "tri3", "diag3"])
    def test_exponents_match_generator_eigenvalues(self, a, std_path):
        src = MatrixCocycle(np.asarray(a))
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=39, burn_in=25)
        vals = sorted(np.linalg.eigvals(np.asarray(a)).real, reverse=True)
        assert np.abs(sp.raw - np.array(vals)).max() < 1e-8

    @pytest.mark.parametrize("a", FIXTURES, ids=["diag2", "tri2", "tri3", "diag3"])
    def test_frames_match_eigenprojections(self, a, std_path):
        a = np.asarray(a)
        src = MatrixCocycle(a)
        sp = lyapunov_spectrum(src, std_path, block_len=0.5, blocks=39, burn_in=25)
        spl = oseledets_splitting(src, std_path, sp, (-30.0, 30.0))
        _, frames = analytic_eigenframes(a)
        for w, f in zip(spl.subspaces, frames):
            assert principal_angles(w, np.asarray(f)[:, None]).max() < 1e-6
