import math

import numpy as np
import pytest

from superhedge import (AtomPairSelection, EvolutionModel,
                        MeasureDensity, Payoff, ShockAtom, SpotMeasure,
                        StepSpec, ValidationError, VolatilitySpec,
                        alpha_from_partition, delta_split, enumerate_paths,
                        integral_representation_check, measure_expectation,
                        mixture_density, psi_weights, random_alpha,
                        spot_expectation, verify_martingale)
from superhedge.measures import all_selections, selection_count

from _corpus import random_model, two_point_model

LN2 = math.log(2.0)


def small_model(seed, n_max=3, include_zero=False):
    return random_model(seed, n_max=n_max, atoms_max=4,
                        include_zero=include_zero)


class TestPsiWeights:
    def test_log2_example(self):
        m = two_point_model(100.0, 1.0, 1.0, LN2)
        pd, pu = psi_weights(m, (), -LN2, LN2)
        assert pd == pytest.approx(2.0 / 3.0, rel=1e-15)
        assert pu == pytest.approx(1.0 / 3.0, rel=1e-15)

    def test_symmetric_multiplicative_moves(self):
        # e^{s*up} - 1 == 1 - e^{s*down} forces half/half weights
        m = two_point_model(100.0, 0.5, 1.0, 0.7)
        down, up = math.log(0.4), math.log(1.6)
        pd, pu = psi_weights(m, (), down, up)
        assert pd == pytest.approx(0.5, rel=1e-12)
        assert pu == pytest.approx(0.5, rel=1e-12)

    def test_one_step_martingale_identity(self):
        m = two_point_model(100.0, 0.7, 1.3, 0.9)
        pd, pu = psi_weights(m, (), -0.9, 0.9)
        _, dm, _ = delta_split(m, (), ShockAtom(-0.9, 0.5))
        d_up, _, dp = delta_split(m, (), ShockAtom(0.9, 0.5))
        assert pd * (-dm) + pu * dp == pytest.approx(0.0, abs=1e-12 * 100.0)

    def test_sign_separation_required(self):
        m = two_point_model(100.0, 0.5, 1.0, 0.7)
        with pytest.raises(ValidationError):
            psi_weights(m, (), 0.0, 0.7)

    def test_weights_in_unit_interval_and_sum(self):
        m = two_point_model(50.0, 0.5, 2.2, 0.7)
        for down, up in [(-3.0, 0.1), (-0.01, 5.0), (-1.0, 1.0)]:
            pd, pu = psi_weights(m, (), down, up)
            assert 0.0 < pd < 1.0 and 0.0 < pu < 1.0
            assert pd + pu == pytest.approx(1.0, abs=1e-14)


class TestSpotMeasures:
    def test_normalization_and_martingale(self):
        for seed in range(15):
            m = small_model(seed)
            sel = next(all_selections(m))
            assert spot_expectation(m, sel, Payoff.constant(1.0)) \
                == pytest.approx(1.0, abs=1e-12)
            sn = Payoff.piecewise_linear([(0.0, 0.0)], 1.0)  # identity on S_N
            assert spot_expectation(m, sel, sn) \
                == pytest.approx(m.s0, rel=1e-12)

    def test_two_branch_call(self):
        m = two_point_model(100.0, 1.0, 1.0, LN2)
        v = spot_expectation(m, AtomPairSelection(((0, 1),)), Payoff.call(90.0))
        assert v == pytest.approx(110.0 / 3.0, rel=1e-14)

    def test_forward_sum_equals_backward_recursion(self):
        # terminal payoffs: leaf-sum and backward induction agree
        for seed in range(10):
            m = small_model(seed)
            payoff = Payoff.call(0.9 * m.s0)
            for sel in all_selections(m):
                forward = spot_expectation(m, sel, payoff)

                def backward(level, price, history):
                    if level == m.n_steps:
                        return payoff.terminal_value(price)
                    d, u = sel.pairs[level]
                    shocks = m.steps[level].shocks
                    pd, pu = psi_weights(m, history, shocks[d].eps,
                                         shocks[u].eps)
                    sigma = __import__("superhedge").sigma_at(
                        m, level + 1, history)
                    down = price * (1.0 + m.steps[level].a
                                    * (math.exp(sigma * shocks[d].eps) - 1.0))
                    up = price * (1.0 + m.steps[level].a
                                  * (math.exp(sigma * shocks[u].eps) - 1.0))
                    return pd * backward(level + 1, down,
                                         history + (shocks[d].eps,)) \
                        + pu * backward(level + 1, up,
                                        history + (shocks[u].eps,))

                assert forward == pytest.approx(backward(0, m.s0, ()),
                                                rel=1e-12)

    def test_node_drift_vanishes(self):
        for seed in range(15):
            m = small_model(seed)
            for sel in all_selections(m):
                assert SpotMeasure(m, sel).max_node_drift() <= 1e-10

    def test_selection_validation(self):
        m = two_point_model(100.0, 0.5, 1.0, 0.7)
        with pytest.raises(ValidationError):
            SpotMeasure(m, AtomPairSelection(((1, 1),)))

    def test_zero_atom_not_selectable(self):
        shocks = (ShockAtom(-0.7, 0.4), ShockAtom(0.0, 0.2),
                  ShockAtom(0.7, 0.4))
        m = EvolutionModel(100.0, (StepSpec(0.5, shocks,
                                            VolatilitySpec.constant(1.0)),))
        with pytest.raises(ValidationError):
            SpotMeasure(m, AtomPairSelection(((1, 2),)))
        assert selection_count(m) == 1


class TestAlphaFromPartition:
    def test_two_point_value(self):
        step = StepSpec(0.5, (ShockAtom(-0.7, 0.4), ShockAtom(0.7, 0.6)),
                        VolatilitySpec.constant(1.0))
        sa = alpha_from_partition(step, [], [], [], [], [1.0])
        assert sa.weights[0, 0] == pytest.approx(1.0 / (0.4 * 0.6), rel=1e-15)

    def test_block_construction_normalizes(self):
        # two down atoms p=0.25 each, one up atom p=0.5, one block {first}
        step = StepSpec(0.5, (ShockAtom(-0.9, 0.25), ShockAtom(-0.2, 0.25),
                              ShockAtom(0.8, 0.5)),
                        VolatilitySpec.constant(1.0))
        sa = alpha_from_partition(step, [[0]], [], [0.5], [], [1.0])
        # delta = 1/2 splits evenly: the down factor is 2 on both atoms,
        # the single up atom contributes 1/0.5, so alpha = 4 on both pairs
        assert sa.weights == pytest.approx(np.full((2, 1), 4.0), rel=1e-15)
        total = 0.25 * 0.5 * sa.weights[0, 0] + 0.25 * 0.5 * sa.weights[1, 0]
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_mixtures_stay_normalized(self):
        step = StepSpec(0.5, (ShockAtom(-0.9, 0.2), ShockAtom(-0.2, 0.3),
                              ShockAtom(0.4, 0.3), ShockAtom(0.8, 0.2)),
                        VolatilitySpec.constant(1.0))
        sa = alpha_from_partition(step, [[0], [1]], [[2]], [0.3, 0.6], [0.25],
                                  [0.5, 0.5])
        pd = np.array([0.2, 0.3])
        pu = np.array([0.3, 0.2])
        assert float(pd @ sa.weights @ pu) == pytest.approx(1.0, abs=1e-12)
        assert np.all(sa.weights > 0)

    def test_zero_probability_block_rejected(self):
        step = StepSpec(0.5, (ShockAtom(-0.9, 0.5), ShockAtom(0.8, 0.5)),
                        VolatilitySpec.constant(1.0))
        with pytest.raises(ValidationError):
            alpha_from_partition(step, [[0]], [], [0.5], [], [1.0])

    def test_gammas_must_be_convex(self):
        step = StepSpec(0.5, (ShockAtom(-0.9, 0.25), ShockAtom(-0.2, 0.25),
                              ShockAtom(0.8, 0.5)),
                        VolatilitySpec.constant(1.0))
        with pytest.raises(ValidationError):
            alpha_from_partition(step, [[0]], [], [0.5], [], [0.9])


class TestMixtureDensity:
    def test_two_point_reduces_to_psi_weights(self):
        m = two_point_model(100.0, 0.7, 1.2, 0.8, p_down=0.4)
        density = mixture_density(m, random_alpha(m, 5))
        pd, pu = psi_weights(m, (), -0.8, 0.8)
        # the induced atom probabilities coincide with the spot weights
        assert 0.4 * density.value(1, (), 0) == pytest.approx(pd, rel=1e-14)
        assert 0.6 * density.value(1, (), 1) == pytest.approx(pu, rel=1e-14)

    def test_normalization_payoff_one(self):
        for seed in range(10):
            m = small_model(seed)
            density = mixture_density(m, random_alpha(m, seed + 100))
            assert measure_expectation(m, density, Payoff.constant(1.0)) \
                == pytest.approx(1.0, abs=1e-12)

    def test_conditional_drift_by_direct_summation(self):
        for seed in range(10):
            m = small_model(seed, include_zero=(seed % 3 == 0))
            density = mixture_density(m, random_alpha(m, seed + 7))
            counts = m.atom_counts()
            for idx, path in enumerate_paths(m):
                for n in range(m.n_steps):
                    prefix = idx.atoms[:n]
                    flat = 0
                    for i, j in enumerate(prefix):
                        flat = flat * counts[i] + j
                    s_prev = path.price_seq[n]
                    drift = 0.0
                    for j, atom in enumerate(m.steps[n].shocks):
                        d, _, _ = delta_split(m, path.eps_seq[:n], atom)
                        drift += atom.prob * density.psi[n][flat, j] * d
                    assert abs(drift) <= 1e-10 * s_prev

    def test_terminal_martingale(self):
        sn = Payoff.piecewise_linear([(0.0, 0.0)], 1.0)
        for seed in range(10):
            m = small_model(seed)
            density = mixture_density(m, random_alpha(m, seed))
            assert measure_expectation(m, density, sn) \
                == pytest.approx(m.s0, rel=1e-10)

    def test_strictly_positive(self):
        for seed in range(10):
            m = small_model(seed, include_zero=(seed % 2 == 0))
            density = mixture_density(m, random_alpha(m, seed))
            assert density.strictly_positive


class TestVerifyMartingale:
    def test_mixture_passes(self):
        for seed in range(10):
            m = small_model(seed)
            density = mixture_density(m, random_alpha(m, seed))
            report = verify_martingale(m, density, tol=1e-9)
            assert report.passed and report.equivalent

    def test_perturbed_density_fails_with_location(self):
        m = small_model(1)
        density = mixture_density(m, random_alpha(m, 1))
        psi = tuple(p.copy() for p in density.psi)
        psi[0][0, 0] += 0.01
        bad = MeasureDensity(m, psi)
        report = verify_martingale(m, bad, tol=1e-9)
        assert not report.passed
        assert any(f[0] == 1 and f[1] == () for f in report.failures)

    def test_spot_density_distinguishes_equivalence(self):
        m = small_model(2)
        spot = SpotMeasure(m, next(all_selections(m)))
        report = verify_martingale(m, spot.as_density(), tol=1e-9)
        assert report.passed
        assert not report.equivalent

    def test_spot_density_expectation_matches_tree(self):
        m = small_model(4)
        spot = SpotMeasure(m, next(all_selections(m)))
        payoff = Payoff.call(m.s0)
        assert measure_expectation(m, spot.as_density(), payoff) \
            == pytest.approx(spot.expectation(payoff), rel=1e-12)


class TestIntegralRepresentation:
    def test_two_point_steps_exact(self):
        m = two_point_model(100.0, 0.5, 1.0, 0.7)
        alphas = random_alpha(m, 3)
        assert integral_representation_check(m, alphas, Payoff.call(95.0)) \
            == 0.0

    def test_constant_payoff(self):
        for seed in range(5):
            m = small_model(seed)
            alphas = random_alpha(m, seed)
            assert integral_representation_check(
                m, alphas, Payoff.constant(1.0)) <= 1e-12

    def test_random_models_and_payoffs(self):
        sn = Payoff.piecewise_linear([(0.0, 0.0)], 1.0)
        for seed in range(12):
            m = small_model(seed, include_zero=(seed % 4 == 0))
            alphas = random_alpha(m, seed + 11)
            for payoff in (sn, Payoff.call(m.s0), Payoff.asian_put(m.s0)):
                assert integral_representation_check(m, alphas, payoff) \
                    <= 1e-12

    def test_table_payoff_round_trip(self):
        m = small_model(6, n_max=2)
        alphas = random_alpha(m, 6)
        table = {idx.atoms: float(i % 3) for i, (idx, _)
                 in enumerate(enumerate_paths(m))}
        payoff = Payoff.path_table(table)
        assert integral_representation_check(m, alphas, payoff) <= 1e-12
