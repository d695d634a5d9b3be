"""Model-layer oracles: hand-computed SINR/rate instances and invariants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_scenario, rand_channel, rand_star, unit_instance
from starqwsr.model import (
    BeamformingSolution,
    ChannelRealization,
    DecodingOrder,
    Scenario,
    StarConfig,
    UserSpec,
    achievable_rates,
    check_fairness,
    effective_gain,
    lifted_gain,
    oma_rate,
    qwsr,
    replace,
    sinr,
    validate_star,
)


class TestTypes:
    def test_scenario_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            make_scenario(noise_power=0.0)
        with pytest.raises(ValueError):
            make_scenario(p_max=-1.0)
        with pytest.raises(ValueError):
            make_scenario(sides=("reflection", "reflection"))  # ES needs both sides
        with pytest.raises(ValueError):
            make_scenario(arrival_rates=(1.0,))

    def test_ts_scenario_single_side_pair_allowed_for_ts_only(self):
        s = make_scenario(protocol="TS", sides=("reflection", "transmission"))
        assert s.protocol == "TS"

    def test_user_spec_side_checked(self):
        with pytest.raises(ValueError):
            UserSpec(id=0, side="left", position=(0, 0, 0))

    def test_star_config_wraps_phases_and_normalizes(self):
        m = 4
        star = StarConfig(
            beta_r=np.full(m, 0.3 + 2e-10),
            beta_t=np.full(m, 0.7 - 1e-10),
            theta_r=np.array([0.0, 2 * np.pi + 0.5, -0.5, 7 * np.pi]),
            theta_t=np.zeros(m),
        )
        assert np.all(star.theta_r >= 0) and np.all(star.theta_r < 2 * np.pi)
        assert np.abs(star.beta_r + star.beta_t - 1.0).max() == 0.0

    def test_star_config_rejects_gross_violation(self):
        with pytest.raises(ValueError):
            StarConfig(
                beta_r=np.array([0.6]),
                beta_t=np.array([0.6]),
                theta_r=np.zeros(1),
                theta_t=np.zeros(1),
            )
        with pytest.raises(ValueError):
            StarConfig(
                beta_r=np.array([1.5]),
                beta_t=np.array([-0.5]),
                theta_r=np.zeros(1),
                theta_t=np.zeros(1),
            )

    def test_energy_conservation_invariant_on_random_configs(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            star = rand_star(rng, 6)
            assert np.abs(star.beta_r + star.beta_t - 1.0).max() <= 1e-9

    def test_decoding_order_positions(self):
        o = DecodingOrder((2, 0, 1))
        assert o.position(2) == 0 and o.position(1) == 2
        assert o.later_than(0) == (1,)
        assert o.at_or_after(0) == (0, 1)
        with pytest.raises(ValueError):
            DecodingOrder((0, 0, 1))

    def test_beamforming_solution_ts_allocation_checked(self):
        scen, chan, star, order, w = unit_instance()
        with pytest.raises(ValueError):
            BeamformingSolution(
                w=w, star=star, order=order, rates=np.zeros(2), qwsr=0.0,
                ts_allocation=(0.6, 0.6),
            )


class TestEffectiveGain:
    def test_scalar_product_squared(self):
        scen, chan, star, order, w = unit_instance(beta=1.0, w=2.0)
        assert effective_gain(scen, chan, star, 0, w[0]) == pytest.approx(4.0, abs=1e-12)

    def test_amplitude_is_sqrt_beta(self):
        scen, chan, star, order, w = unit_instance(beta=0.5, w=1.0)
        assert effective_gain(scen, chan, star, 0, w[0]) == pytest.approx(0.5, abs=1e-12)

    def test_lift_equivalence_100_random_instances(self):
        rng = np.random.default_rng(1)
        scen = make_scenario(n=4, m=20)
        for _ in range(100):
            chan = rand_channel(rng, 2, 20, 4)
            star = rand_star(rng, 20)
            w = rng.normal(size=4) + 1j * rng.normal(size=4)
            rx = int(rng.integers(0, 2))
            a = effective_gain(scen, chan, star, rx, w)
            b = lifted_gain(scen, chan, star, rx, w)
            assert abs(a - b) <= 1e-9 * max(1.0, abs(a))

    def test_dimension_mismatch_rejected(self):
        scen, chan, star, order, w = unit_instance()
        with pytest.raises(ValueError):
            effective_gain(scen, chan, star, 0, np.ones(3, dtype=complex))


class TestSinrAndRates:
    def _hand_instance(self):
        # two users, N=M=1, G=v=1, beta_r=beta_t=0.5, theta=0, w_k=1, sigma^2=1
        scen = make_scenario(n=1, m=1, noise_power=1.0)
        chan = ChannelRealization(g=np.ones((1, 1), complex), v=np.ones((2, 1), complex))
        star = StarConfig(
            beta_r=np.array([0.5]), beta_t=np.array([0.5]),
            theta_r=np.zeros(1), theta_t=np.zeros(1),
        )
        order = DecodingOrder((0, 1))
        w = np.ones((2, 1), complex)
        return scen, chan, star, order, w

    def test_hand_sinr_values(self):
        scen, chan, star, order, w = self._hand_instance()
        assert sinr(scen, chan, star, w, order, 0, 0) == pytest.approx(1 / 3, abs=1e-12)
        assert sinr(scen, chan, star, w, order, 0, 1) == pytest.approx(1 / 3, abs=1e-12)
        assert sinr(scen, chan, star, w, order, 1, 1) == pytest.approx(0.5, abs=1e-12)

    def test_hand_rates(self):
        scen, chan, star, order, w = self._hand_instance()
        r = achievable_rates(scen, chan, star, w, order)
        assert r[0] == pytest.approx(math.log2(4 / 3), abs=1e-12)
        assert r[1] == pytest.approx(math.log2(1.5), abs=1e-12)

    def test_decoder_before_user_rejected(self):
        scen, chan, star, order, w = self._hand_instance()
        with pytest.raises(ValueError):
            sinr(scen, chan, star, w, order, 1, 0)

    def test_single_user_rate_is_snr_log(self):
        scen = make_scenario(n=1, m=1, sides=("reflection",), arrival_rates=(1.0,))
        chan = ChannelRealization(g=np.ones((1, 1), complex), v=np.ones((1, 1), complex))
        star = StarConfig(
            beta_r=np.ones(1), beta_t=np.zeros(1), theta_r=np.zeros(1), theta_t=np.zeros(1)
        )
        w = np.array([[2.0 + 0j]])
        r = achievable_rates(scen, chan, star, w, DecodingOrder((0,)))
        assert r[0] == pytest.approx(math.log2(1 + 4.0), abs=1e-12)

    def test_zero_beamformers_zero_rates(self):
        scen, chan, star, order, w = self._hand_instance()
        r = achievable_rates(scen, chan, star, np.zeros_like(w), order)
        assert np.all(r == 0.0)
        assert sinr(scen, chan, star, np.zeros_like(w), order, 0, 0) == 0.0

    def test_rate_monotone_in_noise(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            scen = make_scenario(n=3, m=5, noise_power=rng.uniform(0.1, 2.0))
            chan = rand_channel(rng, 2, 5, 3)
            star = rand_star(rng, 5)
            w = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
            order = DecodingOrder((0, 1))
            r1 = achievable_rates(scen, chan, star, w, order)
            worse = replace(scen, noise_power=scen.noise_power * rng.uniform(1.5, 4.0))
            r2 = achievable_rates(worse, chan, star, w, order)
            assert np.all(r2 <= r1 + 1e-12)

    def test_moving_later_never_hurts_own_sinr(self):
        rng = np.random.default_rng(3)
        sides = ("reflection", "transmission", "reflection")
        for _ in range(25):
            scen = make_scenario(n=3, m=4, sides=sides, arrival_rates=(1.0,) * 3)
            chan = rand_channel(rng, 3, 4, 3)
            star = rand_star(rng, 4)
            w = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            o1 = DecodingOrder((0, 1, 2))
            o2 = DecodingOrder((1, 0, 2))  # user 0 moved later
            s1 = sinr(scen, chan, star, w, o1, 0, 0)
            s2 = sinr(scen, chan, star, w, o2, 0, 0)
            assert s2 >= s1 - 1e-15

    def test_ts_rates_scale_with_alpha_and_ignore_cross_side(self):
        scen = make_scenario(n=1, m=1, protocol="TS")
        chan = ChannelRealization(g=np.ones((1, 1), complex), v=np.ones((2, 1), complex))
        star = StarConfig(
            beta_r=np.ones(1), beta_t=np.ones(1),
            theta_r=np.zeros(1), theta_t=np.zeros(1), protocol="TS",
        )
        w = np.ones((2, 1), complex)
        order = DecodingOrder((0, 1))
        r = achievable_rates(scen, chan, star, w, order, ts_alpha=(0.25, 0.75))
        # each side alone: full beta, no cross interference
        assert r[0] == pytest.approx(0.25 * math.log2(2.0), abs=1e-12)
        assert r[1] == pytest.approx(0.75 * math.log2(2.0), abs=1e-12)


class TestQwsrAndOma:
    def test_zero_queues(self):
        assert qwsr((0.0, 0.0), (3.0, 4.0)) == 0.0

    def test_hand_dot_product(self):
        assert qwsr((10.0, 5.0), (0.415, 0.585)) == pytest.approx(7.075, abs=1e-12)

    def test_negative_queue_rejected(self):
        with pytest.raises(ValueError):
            qwsr((-1.0, 2.0), (1.0, 1.0))

    def test_oma_full_share_equals_single_user_rate(self):
        scen, chan, star, order, w = unit_instance(beta=1.0, w=2.0)
        r = oma_rate(scen, chan, star, 0, w[0], 1.0)
        assert r == pytest.approx(math.log2(1 + 4.0), abs=1e-12)

    def test_oma_zero_share_is_zero(self):
        scen, chan, star, order, w = unit_instance()
        assert oma_rate(scen, chan, star, 0, w[0], 0.0) == 0.0

    def test_oma_share_monotone_concave_shape(self):
        scen, chan, star, order, w = unit_instance(beta=1.0, w=2.0)
        vals = [oma_rate(scen, chan, star, 0, w[0], p) for p in (0.2, 0.5, 1.0)]
        assert vals[0] < vals[1] < vals[2]


class TestValidation:
    def test_es_half_half_ok(self):
        star = StarConfig(
            beta_r=np.full(3, 0.5), beta_t=np.full(3, 0.5),
            theta_r=np.zeros(3), theta_t=np.zeros(3),
        )
        assert validate_star(star, "ES") == []

    def test_ms_non_binary_flagged(self):
        star = StarConfig(
            beta_r=np.full(3, 0.5), beta_t=np.full(3, 0.5),
            theta_r=np.zeros(3), theta_t=np.zeros(3), protocol="MS",
        )
        out = validate_star(star)
        assert out and "non-binary" in out[0]

    def test_ms_binary_ok(self):
        star = StarConfig(
            beta_r=np.array([1.0, 0.0, 1.0]), beta_t=np.array([0.0, 1.0, 0.0]),
            theta_r=np.zeros(3), theta_t=np.zeros(3), protocol="MS",
        )
        assert validate_star(star) == []

    def test_ts_uniform_required(self):
        star = StarConfig(
            beta_r=np.array([1.0, 0.0]), beta_t=np.array([1.0, 1.0]),
            theta_r=np.zeros(2), theta_t=np.zeros(2), protocol="TS",
        )
        out = validate_star(star)
        assert any("beta_r" in v for v in out)

    def test_fairness_equal_beamformers_holds(self):
        scen, chan, star, order, w = unit_instance(beta=0.5, w=1.0)
        w2 = np.ones((2, 1), complex)
        assert check_fairness(scen, chan, star, w2, order) == []

    def test_fairness_violation_reported_with_magnitude(self):
        scen, chan, star, order, _ = unit_instance(beta=0.5, w=1.0)
        w = np.array([[1.0 + 0j], [2.0 + 0j]])  # later user strictly stronger
        bad = check_fairness(scen, chan, star, w, order)
        assert bad and bad[0][1] == 0 and bad[0][2] == 1 and bad[0][3] > 0


@settings(max_examples=30, deadline=None)
@given(
    q=st.lists(st.floats(0, 1e4), min_size=2, max_size=2),
    scale=st.floats(0.1, 10.0),
)
def test_qwsr_scales_linearly_in_queues(q, scale):
    r = (0.4, 1.3)
    assert qwsr([scale * x for x in q], r) == pytest.approx(scale * qwsr(q, r), rel=1e-12)
