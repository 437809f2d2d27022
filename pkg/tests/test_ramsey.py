"""Dephasing envelopes: closed forms, cumulant quadrature, jump ODE, Monte Carlo."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from noisyemitter import (
    ColoredGaussian,
    DomainError,
    EnvelopeCurve,
    JumpModel,
    OneOverF,
    SystemParams,
    Telegraph,
    TLFEnsemble,
    White,
    WithWhiteBackground,
    build_jump_model,
    coherence_decay,
    envelope_for_model,
    envelope_gaussian_from_acf,
    envelope_jump,
    envelope_mc,
    envelope_ou,
    envelope_telegraph,
    make_envelope_callable,
)

CANONICAL = SystemParams(gamma_plus=0.45, gamma_minus=0.45, gamma_loss=0.1)


class TestEnvelopeOU:
    def test_matches_quadrature_oracle(self):
        for t in (0.5, 2.0, 5.0):
            curve = envelope_ou(1.0, 2.0, [0.0, t])
            assert curve.values[-1] == pytest.approx(oracles.ou_envelope(1.0, 2.0, t), rel=1e-12)

    def test_frozen_values(self):
        curve = envelope_ou(1.0, 2.0, [0.0, 0.5, 2.0, 5.0])
        assert np.allclose(
            np.real(curve.values[1:]),
            [0.9121326405414613, 0.4702085733071624, 0.10539802828930511],
            rtol=1e-12,
        )

    def test_zero_amplitude_is_unity(self):
        curve = envelope_ou(0.0, 1.0, np.linspace(0.0, 10.0, 11))
        assert np.allclose(np.real(curve.values), 1.0, rtol=0, atol=0)

    def test_quasistatic_limit_is_gaussian(self):
        curve = envelope_ou(1.0, 0.0, [0.0, 1.0])
        assert curve.values[-1] == pytest.approx(math.exp(-0.5), rel=1e-12)

    def test_fast_noise_limit_is_exponential(self):
        # kappa = 10 sigma: within 2% of exp(-(sigma^2/kappa) t) out to t = 20
        t = np.linspace(0.0, 20.0, 81)
        curve = envelope_ou(1.0, 10.0, t)
        ref = np.exp(-0.1 * t)
        assert np.max(np.abs(np.real(curve.values) / ref - 1.0)) <= 0.02

    @settings(max_examples=40, deadline=None)
    @given(
        sigma=st.floats(min_value=0.0, max_value=5.0),
        kappa=st.floats(min_value=0.0, max_value=20.0),
    )
    def test_bounded_and_monotone(self, sigma, kappa):
        t = np.linspace(0.0, 8.0, 33)
        vals = np.real(envelope_ou(sigma, kappa, t).values)
        assert np.all(vals <= 1.0 + 1e-12)
        assert np.all(vals > 0.0)
        assert np.all(np.diff(vals) <= 1e-12)

    def test_negative_rate_rejected(self):
        with pytest.raises(DomainError):
            envelope_ou(-1.0, 1.0, [0.0, 1.0])


class TestEnvelopeTelegraph:
    def test_matches_generator_oracle(self):
        for t in (0.5, 2.0):
            curve = envelope_telegraph(2.0, 2.0, [0.0, t])
            ref = oracles.telegraph_envelope_matrix(2.0, 2.0, t)
            assert curve.values[-1] == pytest.approx(ref, rel=1e-12)

    def test_frozen_values(self):
        curve = envelope_telegraph(2.0, 2.0, [0.0, 0.5, 2.0])
        assert np.allclose(
            np.real(curve.values[1:]),
            [0.6597001533917016, -0.15312276841404926],
            rtol=1e-11,
        )

    def test_static_limit_is_cosine(self):
        curve = envelope_telegraph(1.0, 0.0, [0.0, math.pi])
        assert curve.values[-1] == pytest.approx(-1.0, abs=1e-12)

    def test_zero_amplitude_is_unity(self):
        curve = envelope_telegraph(0.0, 1.0, np.linspace(0.0, 5.0, 11))
        assert np.allclose(np.real(curve.values), 1.0, rtol=0, atol=1e-15)

    def test_degenerate_root_is_smooth(self):
        # kappa = 2 sigma collapses to (1 + kappa t / 2) e^{-kappa t / 2}
        t = np.array([0.0, 0.7, 1.9])
        curve = envelope_telegraph(1.0, 2.0, t)
        expected = (1.0 + t) * np.exp(-t)
        assert np.allclose(np.real(curve.values), expected, rtol=1e-12)
        nearby = envelope_telegraph(1.0, 2.0 + 1e-9, t)
        assert np.allclose(np.real(curve.values), np.real(nearby.values), atol=1e-8)

    def test_fast_noise_limit_is_exponential(self):
        # kappa = 5 sigma, sigma = 2: within 5% of the motional-narrowing rate
        t = np.linspace(0.0, 1.0, 21)
        curve = envelope_telegraph(2.0, 10.0, t)
        ref = np.exp(-0.4 * t)
        assert np.max(np.abs(np.real(curve.values) / ref - 1.0)) <= 0.05

    def test_slow_noise_oscillates(self):
        t = np.linspace(0.0, 2.0 * math.pi, 101)
        vals = np.real(envelope_telegraph(1.0, 0.1, t).values)
        assert vals.min() < -0.5

    @settings(max_examples=40, deadline=None)
    @given(
        sigma=st.floats(min_value=0.01, max_value=5.0),
        kappa=st.floats(min_value=0.0, max_value=20.0),
    )
    def test_bounded(self, sigma, kappa):
        t = np.linspace(0.0, 8.0, 33)
        vals = np.real(envelope_telegraph(sigma, kappa, t).values)
        assert np.all(np.abs(vals) <= 1.0 + 1e-12)


class TestEnvelopeGaussianFromAcf:
    def test_zero_acf_is_unity(self):
        curve = envelope_gaussian_from_acf(lambda tau: 0.0, np.linspace(0.0, 4.0, 9))
        assert np.allclose(np.real(curve.values), 1.0, rtol=0, atol=0)

    def test_constant_acf_is_gaussian_decay(self):
        curve = envelope_gaussian_from_acf(lambda tau: 4.0, [0.0, 0.5])
        assert curve.values[-1] == pytest.approx(math.exp(-0.5), rel=1e-10)

    def test_exponential_acf_matches_closed_form(self):
        t = np.linspace(0.0, 5.0, 20)
        curve = envelope_gaussian_from_acf(lambda tau: 1.5**2 * math.exp(-0.8 * tau), t)
        ref = envelope_ou(1.5, 0.8, t)
        assert np.max(np.abs(curve.values - ref.values)) <= 1e-8

    def test_squared_exponential_matches_quadrature_oracle(self):
        acf = lambda tau: math.exp(-(tau**2))
        for t_end in (0.7, 1.9):
            curve = envelope_gaussian_from_acf(acf, [0.0, t_end])
            expected = math.exp(-oracles.cumulant_exponent(acf, t_end))
            assert curve.values[-1] == pytest.approx(expected, rel=1e-9)


class TestEnvelopeJump:
    def test_telegraph_jump_matches_closed_form(self):
        t = np.linspace(0.0, 6.0, 50)
        jump = build_jump_model(Telegraph(sigma=2.0, kappa=1.0))
        curve = envelope_jump(jump, t)
        ref = envelope_telegraph(2.0, 1.0, t)
        assert np.max(np.abs(curve.values - ref.values)) <= 1e-8

    def test_zero_realizations_stay_unity(self):
        jump = JumpModel(
            realizations=np.array([0.0, 0.0]),
            transition_matrix=np.array([[-0.5, 0.5], [0.5, -0.5]]),
            stationary=np.array([0.5, 0.5]),
        )
        curve = envelope_jump(jump, np.linspace(0.0, 4.0, 9))
        assert np.allclose(curve.values, 1.0, rtol=0, atol=1e-14)

    def test_ensemble_is_product_of_single_fluctuators(self):
        # M independent fluctuators of amplitude sigma/sqrt(M) multiply.
        M, sigma, kappa = 4, 2.0, 0.5
        jump = build_jump_model(TLFEnsemble(M=M, sigma=sigma, kappa=kappa))
        for t in (0.8, 2.5):
            val = envelope_jump(jump, [0.0, t]).values[-1]
            single = oracles.telegraph_envelope_matrix(sigma / math.sqrt(M), kappa, t)
            assert val == pytest.approx(single**M, rel=1e-10)

    def test_composite_is_product_over_components(self):
        comps = ((1.0, 1.0), (4.0, 1.0))
        jump = build_jump_model(OneOverF(components=comps, gaussian=False, M=1))
        n = len(comps)
        for t in (1.0, 4.0):
            val = envelope_jump(jump, [0.0, t]).values[-1]
            ref = 1.0
            for kappa_j, sigma_j in comps:
                ref *= oracles.telegraph_envelope_matrix(sigma_j / math.sqrt(n), kappa_j, t)
            assert val == pytest.approx(ref, rel=1e-10)

    def test_large_ensemble_approaches_gaussian_limit(self):
        # M = 10, kappa = 0.1 sigma: quasi-static Gaussian decay within 5%
        sigma = 2.0
        t = np.linspace(0.0, 1.05, 22)
        jump = build_jump_model(TLFEnsemble(M=10, sigma=sigma, kappa=0.1 * sigma))
        vals = np.real(envelope_jump(jump, t).values)
        ref = np.real(envelope_ou(sigma, 0.0, t).values)
        mask = ref >= 0.1
        assert np.max(np.abs(vals[mask] / ref[mask] - 1.0)) <= 0.05

    def test_state_cap_enforced(self):
        jump = build_jump_model(TLFEnsemble(M=3, sigma=1.0, kappa=1.0))
        with pytest.raises(DomainError):
            envelope_jump(jump, [0.0, 1.0], state_cap=2)


class TestEnvelopeMC:
    def test_zero_noise_is_exactly_unity(self):
        t = np.linspace(0.0, 2.0, 21)
        curve = envelope_mc(ColoredGaussian(sigma=0.0, kappa=1.0), t, n_traj=200, seed=1)
        assert np.allclose(curve.values, 1.0, rtol=0, atol=0)
        assert np.allclose(curve.stderr, 0.0, rtol=0, atol=0)

    def test_ou_within_five_stderr(self):
        model = ColoredGaussian(sigma=1.0, kappa=2.0)
        t = np.linspace(0.0, 2.0, 41)
        curve = envelope_mc(model, t, n_traj=10000, seed=5)
        ref = envelope_ou(1.0, 2.0, t)
        dev = np.abs(curve.values - ref.values)
        assert np.all(dev[1:] <= 5.0 * curve.stderr[1:])

    def test_telegraph_within_five_stderr(self):
        model = Telegraph(sigma=2.0, kappa=0.1)
        t = np.linspace(0.0, 2.0, 41)
        curve = envelope_mc(model, t, n_traj=10000, seed=7)
        ref = envelope_telegraph(2.0, 0.1, t)
        dev = np.abs(curve.values - ref.values)
        assert np.all(dev[1:] <= 5.0 * curve.stderr[1:])

    def test_background_damps_deterministically(self):
        model = Telegraph(sigma=1.0, kappa=1.0)
        t = np.linspace(0.0, 2.0, 21)
        bare = envelope_mc(model, t, n_traj=500, seed=3)
        damped = envelope_mc(WithWhiteBackground(base=model, gamma_wb=0.3), t, n_traj=500, seed=3)
        assert np.allclose(damped.values, bare.values * np.exp(-0.3 * t), rtol=1e-14, atol=0)

    def test_deterministic_in_seed(self):
        model = ColoredGaussian(sigma=1.0, kappa=1.0)
        t = np.linspace(0.0, 1.0, 11)
        a = envelope_mc(model, t, n_traj=300, seed=9)
        b = envelope_mc(model, t, n_traj=300, seed=9)
        assert np.array_equal(a.values, b.values)

    def test_white_rejected(self):
        with pytest.raises(DomainError):
            envelope_mc(White(gamma_phi=0.3), np.linspace(0.0, 1.0, 11), n_traj=200)

    def test_too_few_trajectories_rejected(self):
        with pytest.raises(DomainError):
            envelope_mc(Telegraph(sigma=1.0, kappa=1.0), [0.0, 0.1], n_traj=99)

    def test_coarse_phase_step_rejected(self):
        with pytest.raises(DomainError, match="sigma\\*dt"):
            envelope_mc(Telegraph(sigma=2.0, kappa=1.0), np.linspace(0.0, 3.0, 31), n_traj=200)


class TestCoherenceDecay:
    def test_initial_superposition(self):
        env = envelope_ou(1.0, 1.0, np.linspace(0.0, 3.0, 16))
        decay = coherence_decay(CANONICAL, env)
        assert decay.coherence[0] == pytest.approx(0.5, abs=0.0)
        assert decay.population[0] == pytest.approx(0.0, abs=0.0)

    def test_noiseless_half_life_point(self):
        t = np.array([0.0, 2.0])  # Gamma = 1, so t = 2/Gamma
        env = EnvelopeCurve(t, np.ones(2))
        decay = coherence_decay(CANONICAL, env)
        assert decay.coherence[-1] == pytest.approx(0.5 * math.exp(-1.0), rel=1e-15)

    def test_product_identity_with_ou(self):
        t = np.linspace(0.0, 5.0, 26)
        env = envelope_ou(1.0, 2.0, t)
        decay = coherence_decay(CANONICAL, env)
        assert np.allclose(
            decay.coherence, 0.5 * np.exp(-0.5 * t) * env.values, rtol=1e-15, atol=0
        )

    def test_population_relaxes_to_inverted_floor(self):
        t = np.linspace(0.0, 30.0, 16)
        env = EnvelopeCurve(t, np.ones(16))
        decay = coherence_decay(CANONICAL, env)
        assert np.allclose(decay.population, np.exp(-t) - 1.0, rtol=1e-15, atol=0)
        assert decay.population[-1] == pytest.approx(-1.0, abs=1e-12)


class TestMakeEnvelopeCallable:
    def test_white_closed_form(self):
        fn = make_envelope_callable(White(gamma_phi=0.3))
        t = np.linspace(0.0, 4.0, 9)
        assert np.allclose(fn(t), np.exp(-0.3 * t), rtol=1e-15, atol=0)

    def test_matches_curve_builders(self):
        t = np.linspace(0.0, 4.0, 17)
        fn = make_envelope_callable(ColoredGaussian(sigma=1.0, kappa=2.0))
        assert np.allclose(fn(t), np.real(envelope_ou(1.0, 2.0, t).values), rtol=1e-15)
        fn = make_envelope_callable(Telegraph(sigma=2.0, kappa=1.0))
        assert np.allclose(fn(t), np.real(envelope_telegraph(2.0, 1.0, t).values), rtol=1e-15)

    def test_composite_with_background(self):
        comps = ((1.0, 1.0), (4.0, 2.0))
        model = WithWhiteBackground(
            base=OneOverF(components=comps, gaussian=True), gamma_wb=0.2
        )
        fn = make_envelope_callable(model)
        t = np.linspace(0.0, 3.0, 7)
        expected = np.exp(-0.2 * t)
        for kappa_j, sigma_j in comps:
            expected = expected * np.real(
                envelope_ou(sigma_j / math.sqrt(2.0), kappa_j, t).values
            )
        assert np.allclose(fn(t), expected, rtol=1e-12)

    def test_jump_models_rejected(self):
        with pytest.raises(DomainError):
            make_envelope_callable(TLFEnsemble(M=3, sigma=1.0, kappa=1.0))

    def test_scalar_and_shape_preserved(self):
        fn = make_envelope_callable(ColoredGaussian(sigma=1.0, kappa=1.0))
        assert np.shape(fn(1.0)) == ()
        assert fn(np.zeros((2, 3))).shape == (2, 3)


class TestEnvelopeForModel:
    def test_white_auto(self):
        t = np.linspace(0.0, 2.0, 9)
        curve = envelope_for_model(White(gamma_phi=0.4), t)
        assert np.allclose(curve.values, np.exp(-0.4 * t), rtol=1e-15)

    def test_auto_matches_closed_forms(self):
        t = np.linspace(0.0, 4.0, 17)
        curve = envelope_for_model(ColoredGaussian(sigma=1.0, kappa=2.0), t)
        assert np.allclose(curve.values, envelope_ou(1.0, 2.0, t).values, rtol=1e-15)
        curve = envelope_for_model(Telegraph(sigma=2.0, kappa=1.0), t)
        assert np.allclose(curve.values, envelope_telegraph(2.0, 1.0, t).values, rtol=1e-15)

    def test_auto_routes_ensembles_through_jump_ode(self):
        t = np.linspace(0.0, 2.0, 9)
        model = TLFEnsemble(M=3, sigma=1.0, kappa=0.5)
        auto = envelope_for_model(model, t)
        jump = envelope_for_model(model, t, method="jump")
        assert np.allclose(auto.values, jump.values, rtol=0, atol=1e-14)

    def test_closed_method_rejects_ensembles(self):
        with pytest.raises(DomainError):
            envelope_for_model(TLFEnsemble(M=3, sigma=1.0, kappa=0.5), [0.0, 1.0], method="closed")

    def test_acf_route_matches_closed_form(self):
        t = np.linspace(0.0, 3.0, 13)
        curve = envelope_for_model(ColoredGaussian(sigma=1.0, kappa=2.0), t, method="acf")
        ref = envelope_ou(1.0, 2.0, t)
        assert np.max(np.abs(curve.values - ref.values)) <= 1e-9

    def test_acf_route_rejects_jump_noise(self):
        with pytest.raises(DomainError):
            envelope_for_model(Telegraph(sigma=1.0, kappa=1.0), [0.0, 1.0], method="acf")

    def test_jump_route_rejects_gaussian_noise(self):
        with pytest.raises(DomainError):
            envelope_for_model(ColoredGaussian(sigma=1.0, kappa=1.0), [0.0, 1.0], method="jump")

    def test_unknown_method_rejected(self):
        with pytest.raises(DomainError):
            envelope_for_model(Telegraph(sigma=1.0, kappa=1.0), [0.0, 1.0], method="magic")

    def test_white_rejects_sampling_methods(self):
        with pytest.raises(DomainError):
            envelope_for_model(White(gamma_phi=0.3), [0.0, 1.0], method="mc")

    def test_background_factor_applied(self):
        t = np.linspace(0.0, 3.0, 13)
        base = Telegraph(sigma=1.0, kappa=1.0)
        bare = envelope_for_model(base, t)
        damped = envelope_for_model(WithWhiteBackground(base=base, gamma_wb=0.25), t)
        assert np.allclose(damped.values, bare.values * np.exp(-0.25 * t), rtol=1e-14)

    def test_mc_route_carries_stderr(self):
        t = np.linspace(0.0, 1.0, 21)
        curve = envelope_for_model(
            ColoredGaussian(sigma=1.0, kappa=1.0), t, method="mc", n_traj=200, seed=2
        )
        assert curve.stderr is not None
        assert np.all(curve.stderr[1:] > 0)
