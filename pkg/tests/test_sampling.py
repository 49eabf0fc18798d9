import math

import numpy as np
import pytest
from scipy import stats

from shadowlab import (
    ChainIdentityError,
    DimensionError,
    DirectionChain,
    Polytope,
    RandomSource,
    complement,
    hausdorff,
    orthonormalize,
    project_chain,
    project_to_subspace,
    principal_angles,
    projector,
    sample_chain,
    sample_grassmannian,
    sample_unit_sphere,
)
from oracles import random_polytope


def ks_critical(n, alpha=0.01):
    return stats.kstwobign.isf(alpha) / math.sqrt(n)


def ks2_critical(n, m, alpha=0.01):
    return stats.kstwobign.isf(alpha) * math.sqrt((n + m) / (n * m))


class TestRandomSource:
    def test_reproducible(self):
        a = RandomSource(123, (4, 5)).generator.standard_normal(10)
        b = RandomSource(123, (4, 5)).generator.standard_normal(10)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RandomSource(123, 0).generator.standard_normal(10)
        b = RandomSource(123, 1).generator.standard_normal(10)
        assert not np.array_equal(a, b)

    def test_child_path(self):
        r = RandomSource(7).child(3).child(8)
        assert r.stream == (3, 8)
        direct = RandomSource(7, (3, 8))
        assert np.array_equal(r.generator.standard_normal(4),
                              direct.generator.standard_normal(4))

    def test_negative_stream_rejected(self):
        with pytest.raises(ValueError):
            RandomSource(1, (-1,))


class TestSphereSampler:
    def test_unit_norm(self):
        rng = RandomSource(1)
        for n in (1, 2, 5, 9):
            u = sample_unit_sphere(rng, n)
            assert abs(np.linalg.norm(u) - 1.0) <= 1e-12

    def test_mean_clt_bound(self):
        n, N = 4, 100000
        rng = RandomSource(88)
        draws = np.array([sample_unit_sphere(rng, n) for _ in range(N)])
        assert np.linalg.norm(draws.mean(axis=0)) <= 4.0 / math.sqrt(N) * math.sqrt(n)

    @pytest.mark.parametrize("n", [3, 6])
    def test_first_coordinate_squared_is_beta(self, n):
        N = 10000
        rng = RandomSource(1000 + n)
        u1sq = np.array([sample_unit_sphere(rng, n)[0] ** 2 for _ in range(N)])
        stat = stats.kstest(u1sq, stats.beta(0.5, (n - 1) / 2.0).cdf).statistic
        assert stat < ks_critical(N)

    def test_against_rejection_sampling_oracle(self):
        # uniform-in-cube rejection to the ball, then normalize: an
        # independent construction of the uniform sphere law
        n, N = 4, 4000
        rng = RandomSource(2024)
        ours = np.array([sample_unit_sphere(rng, n)[0] ** 2 for _ in range(N)])
        gen = np.random.default_rng(55)
        oracle = []
        while len(oracle) < N:
            x = gen.uniform(-1.0, 1.0, n)
            r = np.linalg.norm(x)
            if 1e-9 < r <= 1.0:
                oracle.append((x[0] / r) ** 2)
        stat = stats.ks_2samp(ours, np.array(oracle)).statistic
        assert stat < ks2_critical(N, N)

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            sample_unit_sphere(RandomSource(0), 0)


class TestDirectionChain:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            DirectionChain(3, [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(ValueError):
            DirectionChain(2, [[2.0, 0.0]])
        with pytest.raises(DimensionError):
            DirectionChain(2, [[1, 0], [0, 1]])  # m > n - 1

    def test_empty_chain(self):
        c = DirectionChain(4, [])
        assert len(c) == 0


class TestSampleChain:
    def test_single_direction_matches_sphere_sampler(self):
        u_chain = sample_chain(RandomSource(5, 1), 6, 1).directions[0]
        u_sphere = sample_unit_sphere(RandomSource(5, 1), 6)
        assert np.array_equal(u_chain, u_sphere)

    def test_mutual_orthogonality(self):
        rng = RandomSource(9)
        for k in range(50):
            n = int(rng.generator.integers(3, 9))
            m = int(rng.generator.integers(1, n))
            c = sample_chain(rng.child(k), n, m)
            gram = c.directions @ c.directions.T
            assert np.max(np.abs(gram - np.eye(m))) <= 1e-10

    def test_too_long_chain(self):
        with pytest.raises(DimensionError):
            sample_chain(RandomSource(0), 3, 3)

    def test_residual_dimension(self):
        # n = 3, m = 2: the unprojected residual subspace is a line
        c = sample_chain(RandomSource(3), 3, 2)
        span = orthonormalize(list(c.directions))
        rest = complement(span)
        assert rest.dim == 1

    def test_conditional_uniformity_in_complement(self):
        # given U1, the next direction is uniform on the circle of U1-perp:
        # its first complement coordinate squared must be Beta(1/2, 1/2)
        N = 4000
        coords = []
        for i in range(N):
            c = sample_chain(RandomSource(31, i), 3, 2)
            u1, u2 = c.directions
            basis = complement(orthonormalize([u1])).basis
            coords.append(float(basis[:, 0] @ u2) ** 2)
        stat = stats.kstest(np.array(coords), stats.beta(0.5, 0.5).cdf).statistic
        assert stat < ks_critical(N)


class TestGrassmannian:
    def test_projector_properties(self):
        rng = RandomSource(12)
        for k in range(30):
            n = int(rng.generator.integers(2, 8))
            d = int(rng.generator.integers(1, n + 1))
            s = sample_grassmannian(rng.child(k), n, d)
            p = projector(s)
            assert np.max(np.abs(p @ p - p)) <= 1e-10
            assert abs(np.trace(p) - d) <= 1e-10

    def test_full_space(self):
        s = sample_grassmannian(RandomSource(2), 4, 4)
        assert np.allclose(projector(s), np.eye(4), atol=1e-10)

    def test_rotation_invariance_two_sample_ks(self):
        # largest principal angle to a fixed plane, with and without a fixed
        # pre-rotation; Haar invariance makes the two samples identically
        # distributed
        n, N = 4, 10000
        fixed = orthonormalize([[1, 0, 0, 0], [0, 1, 0, 0]])
        theta1, theta2 = 0.71, 1.13
        rot = np.eye(n)
        rot[np.ix_([0, 2], [0, 2])] = [[math.cos(theta1), -math.sin(theta1)],
                                       [math.sin(theta1), math.cos(theta1)]]
        rot2 = np.eye(n)
        rot2[np.ix_([1, 3], [1, 3])] = [[math.cos(theta2), -math.sin(theta2)],
                                        [math.sin(theta2), math.cos(theta2)]]
        rot = rot @ rot2
        a, b = [], []
        for i in range(N):
            w1 = sample_grassmannian(RandomSource(600, (0, i)), n, 2)
            a.append(principal_angles(w1, fixed)[-1])
            w2 = sample_grassmannian(RandomSource(601, (1, i)), n, 2)
            from shadowlab import Subspace
            rotated = Subspace(n, 2, rot @ w2.basis)
            b.append(principal_angles(rotated, fixed)[-1])
        stat = stats.ks_2samp(np.array(a), np.array(b)).statistic
        assert stat < ks2_critical(N, N)


class TestProjectChain:
    def test_empty_chain_returns_nothing(self):
        cube = Polytope([[1, 1], [1, -1], [-1, 1], [-1, -1]])
        assert project_chain(cube, DirectionChain(2, [])) == []

    def test_cube_two_axis_steps(self):
        from shadowlab import generate_body

        cube = generate_body("cube", {"n": 3})
        chain = DirectionChain(3, [[0, 0, 1], [0, 1, 0]])
        bodies = project_chain(cube, chain)
        assert [b.subspace.dim for b in bodies] == [2, 1]
        final = bodies[-1].embed().vertices
        assert np.allclose(sorted(final[:, 0]), [-1.0, 1.0], atol=1e-12)
        assert np.allclose(final[:, 1:], 0.0, atol=1e-12)

    def test_dimension_bookkeeping(self):
        gen = np.random.default_rng(41)
        rng = RandomSource(77)
        for k in range(20):
            n = int(gen.integers(3, 7))
            m = int(gen.integers(1, n))
            P = random_polytope(gen, n)
            bodies = project_chain(P, sample_chain(rng.child(k), n, m))
            assert [b.subspace.dim for b in bodies] == list(range(n - 1, n - m - 1, -1))

    def test_iterated_equals_direct(self):
        gen = np.random.default_rng(90)
        rng = RandomSource(91)
        for k in range(60):
            n = int(gen.integers(3, 7))
            m = int(gen.integers(1, n))
            P = random_polytope(gen, n)
            chain = sample_chain(rng.child(k), n, m)
            bodies = project_chain(P, chain, check_tol=None)
            direct = project_to_subspace(
                P, complement(orthonormalize(list(chain.directions))))
            assert hausdorff(bodies[-1].embed(), direct.embed()) <= 1e-9

    def test_identity_check_rejects_wrong_body(self):
        # corrupting the check tolerance to an impossible value must raise
        from shadowlab import generate_body

        cube = generate_body("cube", {"n": 4})
        chain = sample_chain(RandomSource(8), 4, 2)
        with pytest.raises(ChainIdentityError):
            project_chain(cube, chain, check_tol=-1.0)

    def test_bitwise_reproducibility(self):
        from shadowlab import generate_body

        cube = generate_body("cube", {"n": 4})
        c1 = sample_chain(RandomSource(50, 3), 4, 3)
        c2 = sample_chain(RandomSource(50, 3), 4, 3)
        assert np.array_equal(c1.directions, c2.directions)
        b1 = project_chain(cube, c1)
        b2 = project_chain(cube, c2)
        for x, y in zip(b1, b2):
            assert np.array_equal(x.body.vertices, y.body.vertices)
            assert np.array_equal(x.subspace.basis, y.subspace.basis)
