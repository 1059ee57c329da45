import math

import numpy as np
import pytest

from helpers import reference_channel
from raccess import (
    AccessPolicy,
    CollisionMatrix,
    PricingVector,
    constant_policy,
    evaluate_constant_success,
    invert_success_curve,
    threshold_from_prices,
    threshold_policy,
)


class TestAccessPolicyValidation:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            AccessPolicy(kind="random")

    def test_threshold_requires_nonnegative_value(self):
        with pytest.raises(ValueError):
            AccessPolicy(kind="threshold")
        with pytest.raises(ValueError):
            threshold_policy(-0.5)
        assert threshold_policy(0.0).threshold == 0.0
        assert threshold_policy(math.inf).threshold == math.inf

    def test_constant_requires_probability(self):
        with pytest.raises(ValueError):
            AccessPolicy(kind="constant")
        with pytest.raises(ValueError):
            constant_policy(1.2)
        with pytest.raises(ValueError):
            constant_policy(-0.1)
        assert constant_policy(0.0).rate == 0.0
        assert constant_policy(1.0).rate == 1.0


class TestPolicyEvaluation:
    def test_threshold_rate_at_is_boundary_inclusive(self):
        pol = threshold_policy(0.7)
        h = np.array([0.2, 0.7, 1.5])
        np.testing.assert_array_equal(pol.rate_at(h), [0.0, 1.0, 1.0])
        assert pol.rate_at(0.7) == 1.0

    def test_constant_rate_at_ignores_the_fade(self):
        pol = constant_policy(0.42)
        np.testing.assert_array_equal(pol.rate_at(np.array([0.0, 5.0])), [0.42, 0.42])
        assert pol.rate_at(3.0) == 0.42

    def test_threshold_decide_is_deterministic(self):
        pol = threshold_policy(0.7)
        assert pol.decide(0.69) == 0
        assert pol.decide(0.7) == 1
        assert pol.decide(2.0) == 1

    def test_constant_decide_needs_an_rng(self):
        pol = constant_policy(0.5)
        with pytest.raises(ValueError):
            pol.decide(1.0)

    def test_constant_decide_is_a_seeded_bernoulli(self):
        pol = constant_policy(0.3)
        draws_a = [pol.decide(0.0, np.random.default_rng(4)) for _ in range(10)]
        draws_b = [pol.decide(0.0, np.random.default_rng(4)) for _ in range(10)]
        assert draws_a == draws_b
        rng = np.random.default_rng(0)
        freq = np.mean([pol.decide(0.0, rng) for _ in range(20_000)])
        assert freq == pytest.approx(0.3, abs=0.02)

    def test_round_trip_through_dict(self):
        for pol in (threshold_policy(0.8), threshold_policy(math.inf), constant_policy(0.25)):
            assert AccessPolicy.from_dict(pol.to_dict()) == pol

    def test_from_dict_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            AccessPolicy.from_dict({"kind": "adaptive"})


class TestPricingVector:
    def test_rejects_negative_prices(self):
        with pytest.raises(ValueError):
            PricingVector(own_price=-0.1, interference_price=0.0, tx_power=1.0)
        with pytest.raises(ValueError):
            PricingVector(own_price=1.0, interference_price=-0.1, tx_power=1.0)

    def test_rejects_nonpositive_tx_power(self):
        with pytest.raises(ValueError):
            PricingVector(own_price=1.0, interference_price=0.0, tx_power=0.0)


class TestThresholdFromPrices:
    def test_priced_out_when_reward_is_zero(self):
        ch = reference_channel()
        pr = PricingVector(own_price=0.0, interference_price=0.2, tx_power=1.0)
        assert threshold_from_prices(pr, ch).threshold == math.inf

    def test_priced_out_when_cost_exceeds_curve_supremum(self):
        ch = reference_channel()
        pr = PricingVector(own_price=1.0, interference_price=0.5, tx_power=1.0)
        assert threshold_from_prices(pr, ch).threshold == math.inf

    def test_interior_threshold_inverts_the_curve(self):
        ch = reference_channel()
        pr = PricingVector(own_price=2.0, interference_price=0.1, tx_power=1.0)
        pol = threshold_from_prices(pr, ch)
        assert pol.kind == "threshold"
        assert pol.threshold == pytest.approx(0.5323384641451812, abs=1e-15)
        assert pol.threshold == pytest.approx(invert_success_curve(ch, 0.55), abs=1e-16)

    def test_always_transmit_when_cost_is_below_the_curve_floor(self):
        class FloorCurve:
            sup = 1.0
            at_zero = 0.3

        ch_like = type("Ch", (), {"curve": FloorCurve()})()
        pr = PricingVector(own_price=10.0, interference_price=0.0, tx_power=1.0)
        assert threshold_from_prices(pr, ch_like).threshold == 0.0

    def test_threshold_rises_with_interference_price(self):
        ch = reference_channel()
        thr = [
            threshold_from_prices(
                PricingVector(own_price=4.0, interference_price=ip, tx_power=1.0), ch
            ).threshold
            for ip in (0.0, 0.5, 1.0)
        ]
        assert thr[0] < thr[1] < thr[2]


class TestEvaluateConstantSuccess:
    def test_product_form(self):
        rates = np.array([0.6, 0.3, 0.8])
        mean_q = np.array([0.5, 0.7, 0.4])
        q = CollisionMatrix(
            q=np.array([[0.0, 0.2, 0.1], [0.5, 0.0, 0.3], [0.4, 0.6, 0.0]])
        )
        # Interferer j erases link 1 with probability q[j, 1].
        want = 0.3 * 0.7 * (1.0 - 0.6 * 0.2) * (1.0 - 0.8 * 0.6)
        got = evaluate_constant_success(rates, mean_q, q, 1)
        assert got == pytest.approx(want, rel=1e-12)

    def test_single_link_has_no_interference_factor(self):
        got = evaluate_constant_success(
            np.array([0.5]), np.array([0.6]), CollisionMatrix.none(1), 0
        )
        assert got == pytest.approx(0.3, rel=1e-12)

    def test_rejects_inconsistent_sizes_and_bad_values(self):
        with pytest.raises(ValueError):
            evaluate_constant_success([0.5, 0.5], [0.6], CollisionMatrix.none(2), 0)
        with pytest.raises(ValueError):
            evaluate_constant_success([1.5], [0.6], CollisionMatrix.none(1), 0)
        with pytest.raises(ValueError):
            evaluate_constant_success([0.5], [0.6], CollisionMatrix.none(1), 1)
