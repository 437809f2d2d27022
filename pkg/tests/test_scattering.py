"""Averaged single-photon scattering: all four routes against independent oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from noisyemitter import (
    MINUS,
    PLUS,
    ComplexSpectrum,
    ConvergenceError,
    DomainError,
    FrequencyGrid,
    JumpModel,
    ScatterResult,
    SystemParams,
    Telegraph,
    TLFEnsemble,
    apply_white_background,
    build_jump_model,
    envelope_ou,
    laplace_envelope,
    make_envelope_callable,
    make_grid,
    scatter_from_envelope,
    scatter_jump,
    transmittance_ou_series,
    transmittance_quasistatic,
    transmittance_telegraph,
    transmittance_white,
)

CANONICAL = SystemParams(gamma_plus=0.45, gamma_minus=0.45, gamma_loss=0.1)
GRID = make_grid(-5.0, 5.0, 101)
RESONANCE = FrequencyGrid(np.array([0.0]))


def ou_callable(sigma, kappa):
    fn = make_envelope_callable(__import__("noisyemitter").ColoredGaussian(sigma=sigma, kappa=kappa))
    return fn


class TestScatterResult:
    def test_amplitude_relations_hold_by_construction(self):
        res = transmittance_white(CANONICAL, 0.1, GRID)
        g = res.overlap.values
        assert np.max(np.abs(res.transmittance.values - (1.0 - 0.45 * g))) <= 1e-15
        assert np.max(np.abs(res.reflectance.values - (-0.45 * g))) <= 1e-15
        expected_loss = -math.sqrt(0.1 * 0.45) * g
        assert np.max(np.abs(res.loss_reflectance.values - expected_loss)) <= 1e-15

    def test_inconsistent_amplitudes_rejected(self):
        res = transmittance_white(CANONICAL, 0.1, GRID)
        with pytest.raises(DomainError, match="relations"):
            ScatterResult(
                params=CANONICAL,
                input_channel=PLUS,
                transmittance=res.transmittance,
                reflectance=ComplexSpectrum(GRID, -res.reflectance.values, "reflectance"),
                loss_reflectance=res.loss_reflectance,
                overlap=res.overlap,
            )

    def test_grid_property(self):
        res = transmittance_white(CANONICAL, 0.0, GRID)
        assert res.grid is res.transmittance.grid


class TestApplyWhiteBackground:
    def test_zero_shift_is_identity(self):
        shifted = apply_white_background(CANONICAL, 0.0)
        assert shifted.half_width() == CANONICAL.half_width()

    def test_shift_moves_half_width_only(self):
        shifted = apply_white_background(CANONICAL, 0.3)
        assert shifted.half_width() == pytest.approx(CANONICAL.half_width() + 0.3, rel=1e-15)
        assert shifted.gamma(PLUS) == CANONICAL.gamma(PLUS)
        assert shifted.gamma(MINUS) == CANONICAL.gamma(MINUS)
        assert shifted.gamma_loss == CANONICAL.gamma_loss

    def test_two_half_shifts_equal_one(self):
        once = apply_white_background(CANONICAL, 0.4)
        twice = apply_white_background(apply_white_background(CANONICAL, 0.2), 0.2)
        assert twice.half_width() == pytest.approx(once.half_width(), rel=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            apply_white_background(CANONICAL, -0.1)

    def test_noiseless_with_background_is_white_lineshape(self):
        shifted = apply_white_background(CANONICAL, 0.25)
        res = scatter_from_envelope(shifted, lambda t: np.ones_like(t), GRID)
        ref = transmittance_white(CANONICAL, 0.25, GRID)
        assert np.max(np.abs(res.transmittance.values - ref.transmittance.values)) <= 1e-12


class TestTransmittanceWhite:
    def test_noiseless_resonance_value(self):
        res = transmittance_white(CANONICAL, 0.0, RESONANCE)
        assert abs(res.transmittance.values[0] - 0.1) <= 1e-15

    def test_dephased_resonance_value(self):
        res = transmittance_white(CANONICAL, 0.1, RESONANCE)
        assert res.transmittance.values[0] == pytest.approx(0.25, rel=1e-15)

    def test_far_detuned_transparency(self):
        grid = make_grid(-1000.0, 1000.0, 2)
        res = transmittance_white(CANONICAL, 0.0, grid)
        assert np.max(np.abs(1.0 - res.transmittance.values)) < 1e-3

    def test_matches_independent_oracle(self):
        res = transmittance_white(CANONICAL, 0.17, GRID)
        for i, d in enumerate(GRID.detunings):
            ref = oracles.white_transmittance(0.45, 0.5, 0.17, d)
            assert abs(res.transmittance.values[i] - ref) <= 1e-14

    def test_negative_rate_rejected(self):
        with pytest.raises(DomainError):
            transmittance_white(CANONICAL, -0.1, GRID)


class TestLaplaceEnvelope:
    def test_constant_envelope_is_pole(self):
        delta = np.linspace(-2e4, 2e4, 41)
        s = 0.5 - 1j * delta
        vals, err = laplace_envelope(lambda t: np.ones_like(t), s)
        assert np.max(np.abs(vals - 1.0 / s)) <= 1e-9
        assert err <= 1e-7

    def test_exponential_envelope_is_shifted_pole(self):
        s = np.array([0.5, 0.5 - 3.3j, 0.5 + 1.7j, 0.5 - 800j])
        vals, _ = laplace_envelope(lambda t: np.exp(-0.35 * t), s)
        assert np.max(np.abs(vals - 1.0 / (s + 0.35))) <= 1e-9

    def test_ou_envelope_matches_quadrature_oracle(self):
        env = ou_callable(1.0, 2.0)
        s = np.array([0.5 + 0j, 0.5 - 3.3j, 0.5 + 1.7j])
        vals, _ = laplace_envelope(env, s)
        frozen = [
            1.1845930729386607,
            0.06479370460053567 + 0.30662725130250834j,
            0.2558536435387476 - 0.5175859583486464j,
        ]
        for v, f, sv in zip(vals, frozen, s):
            assert abs(v - f) <= 2e-9
            assert abs(v - oracles.laplace_quad(env, sv)) <= 2e-8

    def test_shape_preserved(self):
        s = (0.5 - 1j * np.linspace(-3, 3, 12)).reshape(3, 4)
        vals, _ = laplace_envelope(lambda t: np.exp(-t), s)
        assert vals.shape == (3, 4)

    def test_nonpositive_real_part_rejected(self):
        with pytest.raises(DomainError):
            laplace_envelope(lambda t: np.exp(-t), np.array([0.0 + 1j]))

    def test_growing_envelope_rejected(self):
        with pytest.raises(DomainError, match="<= 1"):
            laplace_envelope(lambda t: np.exp(0.1 * t), np.array([1.0 + 0j]))

    def test_nonsmooth_envelope_fails_loudly(self):
        env = lambda t: np.exp(-np.sqrt(np.abs(t)))
        with pytest.raises(ConvergenceError):
            laplace_envelope(env, np.array([0.5 + 0j, 0.5 - 1e5j]))


class TestScatterFromEnvelope:
    def test_noiseless_resonance(self):
        res = scatter_from_envelope(CANONICAL, lambda t: np.ones_like(t), RESONANCE)
        assert abs(res.transmittance.values[0] - 0.1) <= 1e-12

    def test_white_envelope_matches_closed_form(self):
        res = scatter_from_envelope(CANONICAL, lambda t: np.exp(-0.2 * t), GRID)
        ref = transmittance_white(CANONICAL, 0.2, GRID)
        assert np.max(np.abs(res.transmittance.values - ref.transmittance.values)) <= 1e-8

    def test_gaussian_envelope_resonance_depth(self):
        res = scatter_from_envelope(
            CANONICAL, lambda t: np.exp(-0.5 * t * t), RESONANCE
        )
        t0 = res.transmittance.values[0]
        assert t0.real == pytest.approx(0.6056, abs=2e-4)
        ref = 1.0 - 0.45 * oracles.gaussian_average_overlap(0.5, 1.0, 0.0)
        assert abs(t0 - ref) <= 1e-8

    def test_quadrature_error_reported(self):
        res = scatter_from_envelope(CANONICAL, lambda t: np.exp(-0.2 * t), GRID)
        assert res.meta is not None
        assert res.meta["quadrature_error"] <= 1e-8

    def test_bad_initial_value_rejected(self):
        with pytest.raises(DomainError, match="envelope"):
            scatter_from_envelope(CANONICAL, lambda t: 0.5 * np.ones_like(t), GRID)


class TestOuSeries:
    def test_zero_amplitude_is_noiseless(self):
        res = transmittance_ou_series(CANONICAL, 0.0, 1.0, GRID)
        ref = transmittance_white(CANONICAL, 0.0, GRID)
        assert np.max(np.abs(res.transmittance.values - ref.transmittance.values)) <= 1e-12

    def test_fast_noise_is_motional_narrowed_lorentzian(self):
        # 2% on the |t| <= 1 scale; the residual is the e^{(sigma/kappa)^2} factor
        res = transmittance_ou_series(CANONICAL, 1.0, 10.0, RESONANCE)
        ref = transmittance_white(CANONICAL, 0.1, RESONANCE)
        assert abs(res.transmittance.values[0] - ref.transmittance.values[0]) <= 0.02

    def test_matches_laplace_route(self):
        res = transmittance_ou_series(CANONICAL, 1.0, 2.0, RESONANCE)
        ref = scatter_from_envelope(CANONICAL, ou_callable(1.0, 2.0), RESONANCE)
        assert abs(res.transmittance.values[0] - ref.transmittance.values[0]) <= 1e-6
        assert res.transmittance.values[0].real == pytest.approx(0.4669331171772936, abs=1e-9)

    def test_reports_truncation_metadata(self):
        res = transmittance_ou_series(CANONICAL, 1.0, 2.0, GRID)
        assert res.meta["n_terms"] >= 3
        assert res.meta["truncation_bound"] >= 0.0

    def test_slow_noise_fails_toward_quasistatic(self):
        with pytest.raises(ConvergenceError, match="quasi-static"):
            transmittance_ou_series(CANONICAL, 8.0, 1.0, GRID)

    def test_zero_kappa_rejected(self):
        with pytest.raises(DomainError, match="quasi-static"):
            transmittance_ou_series(CANONICAL, 1.0, 0.0, GRID)


class TestQuasistatic:
    def test_resonance_depth_vs_gaussian_average_oracle(self):
        res = transmittance_quasistatic(CANONICAL, 1.0, RESONANCE)
        t0 = res.transmittance.values[0]
        assert abs(t0 - (1.0 - 0.45 * oracles.gaussian_average_overlap(0.5, 1.0, 0.0))) <= 1e-12
        assert t0.real == pytest.approx(0.6056359945958354, abs=1e-12)

    def test_detuned_value_vs_oracle(self):
        grid = FrequencyGrid(np.array([1.3]))
        res = transmittance_quasistatic(CANONICAL, 1.0, grid)
        ref = 1.0 - 0.45 * oracles.gaussian_average_overlap(0.5, 1.0, 1.3)
        assert abs(res.transmittance.values[0] - ref) <= 1e-10
        assert res.transmittance.values[0] == pytest.approx(
            0.7727019739585009 - 0.22278203337562635j, abs=1e-10
        )

    def test_narrow_limit_recovers_noiseless(self):
        res = transmittance_quasistatic(CANONICAL, 1e-4, RESONANCE)
        assert abs(res.transmittance.values[0] - 0.1) <= 1e-3

    def test_matches_laplace_route_on_grid(self):
        grid = make_grid(-5.0, 5.0, 101)
        res = transmittance_quasistatic(CANONICAL, 1.0, grid)
        ref = scatter_from_envelope(CANONICAL, lambda t: np.exp(-0.5 * t * t), grid)
        assert np.max(np.abs(res.transmittance.values - ref.transmittance.values)) <= 1e-6

    def test_zero_sigma_rejected(self):
        with pytest.raises(DomainError):
            transmittance_quasistatic(CANONICAL, 0.0, GRID)


class TestTelegraph:
    def test_static_limit_is_two_lorentzian_average(self):
        res = transmittance_telegraph(CANONICAL, 2.0, 0.0, RESONANCE)
        t0 = res.transmittance.values[0]
        assert t0 == pytest.approx(1.0 - 0.225 / 4.25, rel=1e-12)
        ref = 1.0 - 0.45 * oracles.telegraph_static_overlap(0.5, 2.0, 0.0)
        assert abs(t0 - ref) <= 1e-14
        assert t0.real == pytest.approx(0.9470588235294117, rel=1e-14)

    def test_zero_amplitude_is_noiseless(self):
        res = transmittance_telegraph(CANONICAL, 0.0, 1.0, GRID)
        ref = transmittance_white(CANONICAL, 0.0, GRID)
        assert np.max(np.abs(res.transmittance.values - ref.transmittance.values)) <= 1e-14

    def test_fast_noise_near_white_limit(self):
        res = transmittance_telegraph(CANONICAL, 2.0, 10.0, RESONANCE)
        ref = transmittance_white(CANONICAL, 0.4, RESONANCE)
        assert abs(res.transmittance.values[0] - ref.transmittance.values[0]) <= 0.03

    def test_negative_rates_rejected(self):
        with pytest.raises(DomainError):
            transmittance_telegraph(CANONICAL, -1.0, 1.0, GRID)


class TestScatterJump:
    def test_telegraph_jump_equals_closed_form(self):
        grid = make_grid(-8.0, 8.0, 201)
        for kappa in (10.0, 2.0, 0.1):
            jump = build_jump_model(Telegraph(sigma=2.0, kappa=kappa))
            res = scatter_jump(CANONICAL, jump, grid)
            ref = transmittance_telegraph(CANONICAL, 2.0, kappa, grid)
            assert np.max(np.abs(res.transmittance.values - ref.transmittance.values)) <= 1e-12

    def test_single_silent_state_is_noiseless(self):
        jump = JumpModel(
            realizations=np.array([0.0]),
            transition_matrix=np.array([[0.0]]),
            stationary=np.array([1.0]),
        )
        res = scatter_jump(CANONICAL, jump, GRID)
        ref = transmittance_white(CANONICAL, 0.0, GRID)
        assert np.max(np.abs(res.transmittance.values - ref.transmittance.values)) <= 1e-13

    def test_large_ensemble_nears_quasistatic(self):
        jump = build_jump_model(TLFEnsemble(M=10, sigma=2.0, kappa=0.2))
        res = scatter_jump(CANONICAL, jump, RESONANCE)
        ref = transmittance_quasistatic(CANONICAL, 2.0, RESONANCE)
        assert abs(res.transmittance.values[0] / ref.transmittance.values[0] - 1.0) <= 0.05

    def test_state_cap_enforced(self):
        jump = build_jump_model(TLFEnsemble(M=3, sigma=1.0, kappa=1.0))
        with pytest.raises(DomainError, match="cap"):
            scatter_jump(CANONICAL, jump, GRID, state_cap=3)


def _all_route_results(grid):
    yield transmittance_white(CANONICAL, 0.2, grid)
    yield transmittance_ou_series(CANONICAL, 1.0, 2.0, grid)
    yield transmittance_quasistatic(CANONICAL, 1.0, grid)
    yield transmittance_telegraph(CANONICAL, 2.0, 1.0, grid)
    yield scatter_jump(CANONICAL, build_jump_model(Telegraph(sigma=2.0, kappa=1.0)), grid)
    yield scatter_from_envelope(CANONICAL, ou_callable(1.0, 2.0), grid)


class TestCrossRouteInvariants:
    def test_hermitian_symmetry(self):
        grid = make_grid(-5.0, 5.0, 11)
        for res in _all_route_results(grid):
            t = res.transmittance.values
            assert np.max(np.abs(t - np.conj(t[::-1]))) <= 1e-10

    def test_passivity(self):
        grid = make_grid(-20.0, 20.0, 81)
        for res in _all_route_results(grid):
            t = res.transmittance.values
            assert np.max(np.abs(t)) <= 1.0 + 1e-12
            assert np.max(t.real) <= 1.0 + 1e-12

    def test_chirality_scaling(self):
        skewed = SystemParams(gamma_plus=0.6, gamma_minus=0.3, gamma_loss=0.1)
        base = transmittance_white(CANONICAL, 0.2, GRID)
        skew = transmittance_white(skewed, 0.2, GRID)
        # same total width, so the overlap G is identical
        assert np.max(np.abs(skew.overlap.values - base.overlap.values)) <= 1e-14
        ratio_t = (skew.transmittance.values - 1.0) / (base.transmittance.values - 1.0)
        assert np.allclose(ratio_t, 0.6 / 0.45, rtol=1e-12)
        ratio_r = skew.reflectance.values / base.reflectance.values
        assert np.allclose(ratio_r, math.sqrt(0.6 * 0.3) / 0.45, rtol=1e-12)

    def test_minus_channel_input(self):
        skewed = SystemParams(gamma_plus=0.6, gamma_minus=0.3, gamma_loss=0.1)
        res = transmittance_white(skewed, 0.0, RESONANCE, input_channel=MINUS)
        t0 = res.transmittance.values[0]
        assert t0 == pytest.approx(1.0 - 0.3 / 0.5, rel=1e-14)
