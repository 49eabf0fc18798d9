import math

import numpy as np
import pytest

from shadowlab import (
    Ball,
    DIVERGENT,
    DimensionError,
    DomainError,
    Polytope,
    RandomSource,
    bound_report,
    circumradius,
    default_grid_step,
    estimate_ElogN,
    estimate_N,
    estimate_conditional_mi,
    estimate_elogn_sweep,
    estimate_n_sweep,
    generate_body,
    sample_codim2_shadow,
    shape_descriptor,
    theorem1_bound,
    theorem1_first_term,
    validate_dpi,
    wilson_interval,
)

CUBE3 = generate_body("cube", {"n": 3})


class TestWilson:
    def test_edges(self):
        lo, hi = wilson_interval(0, 50)
        assert lo == 0.0 and hi > 0.0
        lo, hi = wilson_interval(50, 50)
        assert hi == 1.0 and lo < 1.0

    def test_against_statsmodels(self):
        from statsmodels.stats.proportion import proportion_confint

        for hits, n in [(3, 10), (17, 100), (999, 1000), (1, 2)]:
            lo, hi = wilson_interval(hits, n)
            slo, shi = proportion_confint(hits, n, alpha=0.05, method="wilson")
            assert abs(lo - slo) <= 1e-10
            assert abs(hi - shi) <= 1e-10

    def test_contains_fraction(self):
        for hits, n in [(0, 7), (4, 9), (9, 9)]:
            lo, hi = wilson_interval(hits, n)
            assert 0.0 <= lo <= hits / n <= hi <= 1.0


class TestShapeDescriptor:
    def test_congruent_bodies_share_descriptor(self):
        theta = 1.1
        rot = np.array([[math.cos(theta), -math.sin(theta), 0],
                        [math.sin(theta), math.cos(theta), 0],
                        [0, 0, 1.0]])
        moved = Polytope(CUBE3.vertices @ rot.T + np.array([5.0, 0.0, -2.0]))
        assert shape_descriptor(CUBE3, 1e-6) == shape_descriptor(moved, 1e-6)

    def test_different_boxes_differ(self):
        box = generate_body("box", {"half_widths": [2, 1, 1]})
        assert shape_descriptor(CUBE3, 1e-6) != shape_descriptor(box, 1e-6)

    def test_vertex_permutation_invariant(self):
        gen = np.random.default_rng(4)
        perm = gen.permutation(CUBE3.vertices.shape[0])
        shuffled = Polytope(np.asarray(CUBE3.vertices)[perm])
        assert shape_descriptor(CUBE3, 0.05) == shape_descriptor(shuffled, 0.05)

    def test_grid_must_be_positive(self):
        with pytest.raises(DomainError):
            shape_descriptor(CUBE3, 0.0)

    def test_stability_under_small_perturbation(self):
        # grid chosen so the cube's distance ratios sit well inside their
        # rounding cells (margins > 0.2 grid units, the worst a < delta/10
        # per-vertex wobble can move a pairwise distance)
        delta = 0.04 * circumradius(CUBE3)
        gen = np.random.default_rng(8)
        for _ in range(20):
            noise = gen.uniform(-1, 1, CUBE3.vertices.shape)
            noise *= (0.99 * delta / 10.0) / np.linalg.norm(noise, axis=1, keepdims=True)
            wobbled = Polytope(CUBE3.vertices + noise)
            assert shape_descriptor(CUBE3, delta) == shape_descriptor(wobbled, delta)


class TestEstimateN:
    def test_ball_is_always_one(self):
        ball = Ball(4, 1.5)
        for eps in (0.5, 0.01):
            est = estimate_N(ball, None, eps, 200, RandomSource(1))
            assert est.fraction == 1.0 and est.hits == 200
            assert est.wilson_ci[1] == 1.0

    def test_epsilon_above_diameter_hits_everything(self):
        ref = sample_codim2_shadow(CUBE3, RandomSource(2, 0))
        est = estimate_N(CUBE3, ref, 2.0 * math.sqrt(3) + 0.1, 100, RandomSource(2, 1))
        assert est.fraction == 1.0

    def test_monotone_in_epsilon_with_shared_samples(self):
        ref = sample_codim2_shadow(CUBE3, RandomSource(3, 0))
        grid = [0.5, 0.2, 0.1, 0.05, 0.01]
        ests = estimate_n_sweep(CUBE3, ref, grid, 400, RandomSource(3, 1))
        fracs = [e.fraction for e in ests]
        assert all(a >= b for a, b in zip(fracs, fracs[1:]))
        assert fracs[-1] < fracs[0]  # epsilon matters at this scale
        assert fracs[-1] <= 0.1     # and the fraction vanishes as eps -> 0

    def test_fraction_invariants(self):
        ref = sample_codim2_shadow(CUBE3, RandomSource(4, 0))
        est = estimate_N(CUBE3, ref, 0.2, 150, RandomSource(4, 1))
        assert est.hits / est.n_samples == est.fraction
        lo, hi = est.wilson_ci
        assert 0.0 <= lo <= est.fraction <= hi <= 1.0

    def test_codim_check(self):
        from shadowlab import project_out

        codim1_ref = project_out(CUBE3, [0.0, 0.0, 1.0])
        with pytest.raises(DimensionError):
            estimate_N(CUBE3, codim1_ref, 0.1, 10, RandomSource(5, 1))
        foreign_ref = sample_codim2_shadow(generate_body("cube", {"n": 4}),
                                           RandomSource(5))
        with pytest.raises(DimensionError):
            estimate_N(CUBE3, foreign_ref, 0.1, 10, RandomSource(5, 1))

    def test_workers_bitwise_identical(self):
        ref = sample_codim2_shadow(CUBE3, RandomSource(6, 0))
        a = estimate_n_sweep(CUBE3, ref, [0.3, 0.1], 120, RandomSource(6, 1), workers=1)
        b = estimate_n_sweep(CUBE3, ref, [0.3, 0.1], 120, RandomSource(6, 1), workers=4)
        assert a == b


class TestElogN:
    def test_ball_exact_zero(self):
        value, ci = estimate_ElogN(Ball(4, 1.0), 0.25, 10, 10, RandomSource(7))
        assert value == 0.0 and ci == (0.0, 0.0)

    def test_nonpositive_when_finite(self):
        value, _ = estimate_ElogN(CUBE3, 0.5, 8, 64, RandomSource(8))
        if value is not DIVERGENT:
            assert value <= 0.0

    def test_decreasing_in_epsilon(self):
        sweep = estimate_elogn_sweep(CUBE3, [0.5, 0.2, 0.1], 10, 200, RandomSource(9))
        vals = [s.value for s in sweep]
        finite = [v for v in vals if v is not DIVERGENT]
        assert all(a > b for a, b in zip(finite, finite[1:]))
        # DIVERGENT can only appear at the small end of the grid
        flags = [v is DIVERGENT for v in vals]
        assert flags == sorted(flags)


class TestTheorem1Bound:
    def test_n4_zero(self):
        assert theorem1_first_term(4) == 0.0
        assert theorem1_bound(4, 0.0) == 0.0

    def test_n3_minus_log_pi(self):
        assert abs(theorem1_bound(3, 0.0) - (-math.log(math.pi))) <= 1e-12

    def test_n6(self):
        assert abs(theorem1_bound(6, -1.0) - (1.0 + math.log(math.pi))) <= 1e-12

    def test_divergent_gives_inf(self):
        assert theorem1_bound(5, DIVERGENT) == math.inf

    def test_domain(self):
        with pytest.raises(DomainError):
            theorem1_bound(2, 0.0)


class TestConditionalMI:
    def test_ball_zero(self):
        est = estimate_conditional_mi(Ball(5, 1.0), 3, 100, 0.05, RandomSource(10))
        assert est.value == 0.0
        assert est.class_counts["joint"] == {(0, 0): 100}

    def test_plugin_against_sklearn(self):
        from sklearn.metrics import mutual_info_score

        from shadowlab.estimators import _plugin_mi

        gen = np.random.default_rng(11)
        for _ in range(20):
            n = int(gen.integers(10, 400))
            a = gen.integers(0, int(gen.integers(2, 8)), n)
            b = gen.integers(0, int(gen.integers(2, 8)), n)
            assert abs(_plugin_mi(a, b) - mutual_info_score(a, b)) <= 1e-10

    def test_bounded_by_class_counts(self):
        cube4 = generate_body("cube", {"n": 4})
        est = estimate_conditional_mi(cube4, 2, 150, default_grid_step(cube4),
                                      RandomSource(12))
        assert 0.0 <= est.value <= math.log(len(est.class_counts["first"])) + 1e-12
        assert est.value <= math.log(len(est.class_counts["second"])) + 1e-12

    def test_m_range_enforced(self):
        with pytest.raises(DimensionError):
            estimate_conditional_mi(CUBE3, 3, 10, 0.1, RandomSource(13))

    def test_workers_bitwise_identical(self):
        cube4 = generate_body("cube", {"n": 4})
        a = estimate_conditional_mi(cube4, 2, 80, 0.1, RandomSource(14), workers=1)
        b = estimate_conditional_mi(cube4, 2, 80, 0.1, RandomSource(14), workers=3)
        assert a == b


class TestValidateDPI:
    def test_ball_trivial_pass(self):
        rep = validate_dpi(Ball(5, 1.0), 4, 50, 0.05, RandomSource(15))
        assert rep.passed
        assert rep.mi_first_second.value == 0.0
        assert rep.mi_first_last.value == 0.0
        assert rep.bootstrap_stderr == 0.0

    def test_m2_rejected(self):
        with pytest.raises(DimensionError):
            validate_dpi(generate_body("cube", {"n": 5}), 2, 50, 0.1, RandomSource(16))

    def test_cube5_passes(self):
        cube5 = generate_body("cube", {"n": 5})
        rep = validate_dpi(cube5, 4, 400, 0.05 * circumradius(cube5),
                           RandomSource(17), n_bootstrap=100)
        assert rep.passed
        assert rep.mi_first_last.value <= rep.mi_first_second.value + 2 * rep.bootstrap_stderr


class TestBoundReport:
    def test_ball_attains_bound_with_equality(self):
        rep = bound_report(Ball(4, 1.0), 0.2, 5, 20, 50, None, RandomSource(18))
        assert rep.first_term == 0.0
        assert rep.e_log_n == 0.0
        assert rep.bound == 0.0
        assert rep.mi_plugin == 0.0
        assert rep.flags == ()

    def test_polytope_flagged_degenerate(self):
        rep = bound_report(CUBE3, 0.5, 4, 32, 40, None, RandomSource(19))
        assert "FINITE_GROUP_DEGENERATE" in rep.flags
        if rep.e_log_n is not DIVERGENT:
            assert abs(rep.bound - (rep.first_term - rep.e_log_n)) <= 1e-12


class TestPreFilterSoundness:
    def test_filter_never_rejects_a_verifiable_pair(self):
        # the descriptor pre-filter may only skip pairs the full search would
        # also reject; compare decisions with and without it on live shadows
        from shadowlab.estimators import _eps_match, _shadow_signature
        from shadowlab.geometry import congruence_map

        cube4 = generate_body("cube", {"n": 4})
        rng = RandomSource(2718)
        sigs = []
        for i in range(24):
            sh = sample_codim2_shadow(cube4, rng.child(i))
            sigs.append(_shadow_signature(sh.body.vertices))
        for eps in (0.4, 0.15, 0.05):
            for i in range(0, len(sigs) - 1, 2):
                a, b = sigs[i], sigs[i + 1]
                filtered = _eps_match(a, b, eps)
                full = congruence_map(a[0], b[0], eps) is not None
                assert filtered == full


class TestElogNWorkers:
    def test_sweep_identical_across_worker_counts(self):
        a = estimate_elogn_sweep(CUBE3, [0.4, 0.1], 6, 40, RandomSource(33), workers=1)
        b = estimate_elogn_sweep(CUBE3, [0.4, 0.1], 6, 40, RandomSource(33), workers=3)
        assert a == b


class TestDegenerateBodies:
    def test_point_body_fraction_is_one(self):
        point = Polytope([[0.3, -0.2, 0.9]])
        ref = sample_codim2_shadow(point, RandomSource(44, 0))
        est = estimate_N(point, ref, 0.01, 50, RandomSource(44, 1))
        assert est.fraction == 1.0

    def test_segment_body_runs(self):
        seg = Polytope([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
        ref = sample_codim2_shadow(seg, RandomSource(45, 0))
        est = estimate_N(seg, ref, 0.3, 80, RandomSource(45, 1))
        assert 0.0 <= est.fraction <= 1.0
