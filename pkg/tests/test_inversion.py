"""Dispersion completion and Fourier envelope recovery from spectra."""

from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

from noisyemitter import (
    ComplexSpectrum,
    DomainError,
    FrequencyGrid,
    SystemParams,
    envelope_from_complex_transmittance,
    envelope_from_transmittance,
    envelope_ou,
    kramers_kronig,
    make_grid,
    transmittance_ou_series,
    transmittance_quasistatic,
    transmittance_white,
)
from noisyemitter.inversion import RecoveredEnvelope

CANONICAL = SystemParams(gamma_plus=0.45, gamma_minus=0.45, gamma_loss=0.1)
WIDE = make_grid(-40.0, 40.0, 2**14)


def _mask_envelope(reference: np.ndarray, floor: float = 0.05) -> np.ndarray:
    return np.abs(reference) >= floor


class TestKramersKronig:
    def test_lorentzian_pair(self):
        res = transmittance_white(CANONICAL, 0.1, WIDE)
        im = kramers_kronig(WIDE, res.transmittance.values.real)
        assert np.max(np.abs(im - res.transmittance.values.imag)) <= 1e-3

    def test_multi_lorentzian_pair(self):
        res = transmittance_ou_series(CANONICAL, 1.0, 2.0, WIDE)
        im = kramers_kronig(WIDE, res.transmittance.values.real)
        assert np.max(np.abs(im - res.transmittance.values.imag)) <= 1e-3

    def test_output_is_antisymmetric(self):
        res = transmittance_white(CANONICAL, 0.1, WIDE)
        im = kramers_kronig(WIDE, res.transmittance.values.real)
        assert np.max(np.abs(im + im[::-1])) <= 1e-10

    def test_transparent_input_gives_zero(self):
        grid = make_grid(-10.0, 10.0, 64)
        im = kramers_kronig(grid, np.ones(64))
        assert np.max(np.abs(im)) == 0.0

    def test_undecayed_edges_warn_by_default(self):
        grid = make_grid(-1.0, 1.0, 64)  # Lorentzian hw 0.6 barely decays here
        res = transmittance_white(CANONICAL, 0.1, grid)
        with pytest.warns(UserWarning, match="tail"):
            kramers_kronig(grid, res.transmittance.values.real)

    def test_undecayed_edges_error_when_extrapolation_disabled(self):
        grid = make_grid(-1.0, 1.0, 64)
        res = transmittance_white(CANONICAL, 0.1, grid)
        with pytest.raises(DomainError, match="extrapolation"):
            kramers_kronig(grid, res.transmittance.values.real, allow_extrapolation=False)

    def test_one_sided_grid_rejected(self):
        grid = make_grid(1.0, 10.0, 64)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(DomainError, match="both sides"):
                kramers_kronig(grid, np.full(64, 0.99))

    def test_short_grid_rejected(self):
        grid = make_grid(-1.0, 1.0, 7)
        with pytest.raises(DomainError, match="at least 8"):
            kramers_kronig(grid, np.ones(7))

    def test_nonuniform_grid_rejected(self):
        grid = FrequencyGrid(np.concatenate([np.linspace(-2, 0, 8), [0.5, 1.5, 2.0]]))
        with pytest.raises(DomainError, match="uniform"):
            kramers_kronig(grid, np.ones(len(grid)))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DomainError):
            kramers_kronig(WIDE, np.ones(10))


class TestComplexRecovery:
    def test_white_roundtrip(self):
        res = transmittance_white(CANONICAL, 0.3, WIDE)
        rec = envelope_from_complex_transmittance(CANONICAL, res.transmittance)
        ref = np.exp(-0.3 * rec.times)
        mask = _mask_envelope(ref)
        assert np.max(np.abs(rec.values[mask] - ref[mask])) <= 2e-2

    def test_ou_roundtrip(self):
        res = transmittance_ou_series(CANONICAL, 1.0, 2.0, WIDE)
        rec = envelope_from_complex_transmittance(CANONICAL, res.transmittance)
        ref = np.real(envelope_ou(1.0, 2.0, rec.times).values)
        mask = _mask_envelope(ref)
        assert np.max(np.abs(rec.values[mask] - ref[mask])) <= 2e-2

    def test_quasistatic_roundtrip(self):
        # the static-Gaussian line is ~5 Gamma wide at half depth, so the
        # 20x-width span rule needs a wider grid than the Lorentzian cases
        grid = make_grid(-60.0, 60.0, 2**14)
        res = transmittance_quasistatic(CANONICAL, 1.0, grid)
        rec = envelope_from_complex_transmittance(CANONICAL, res.transmittance)
        ref = np.exp(-0.5 * rec.times**2)
        mask = _mask_envelope(ref)
        assert np.max(np.abs(rec.values[mask] - ref[mask])) <= 2e-2

    def test_initial_value_restored(self):
        res = transmittance_white(CANONICAL, 0.3, WIDE)
        rec = envelope_from_complex_transmittance(CANONICAL, res.transmittance)
        assert rec.times[0] == 0.0
        assert abs(rec.values[0] - 1.0) <= 1e-2
        assert rec.normalized[0] == pytest.approx(1.0, abs=0.0)

    def test_asymmetric_grid_rejected(self):
        grid = make_grid(-30.0, 40.0, 2**13)
        res = transmittance_white(CANONICAL, 0.3, grid)
        with pytest.raises(DomainError, match="symmetric"):
            envelope_from_complex_transmittance(CANONICAL, res.transmittance)

    def test_narrow_span_rejected(self):
        grid = make_grid(-2.0, 2.0, 64)
        res = transmittance_white(CANONICAL, 0.3, grid)
        with pytest.raises(DomainError):
            envelope_from_complex_transmittance(CANONICAL, res.transmittance)

    def test_excessive_horizon_rejected(self):
        res = transmittance_white(CANONICAL, 0.3, WIDE)
        with pytest.raises(DomainError, match="t_max"):
            envelope_from_complex_transmittance(CANONICAL, res.transmittance, t_max=80.0)


class TestRealRecovery:
    def test_white_roundtrip(self):
        res = transmittance_white(CANONICAL, 0.3, WIDE)
        rec = envelope_from_transmittance(CANONICAL, WIDE, res.transmittance.values.real)
        ref = np.exp(-0.3 * rec.times)
        mask = _mask_envelope(ref)
        assert np.max(np.abs(rec.values[mask] - ref[mask])) <= 2e-2

    def test_ou_roundtrip(self):
        res = transmittance_ou_series(CANONICAL, 1.0, 2.0, WIDE)
        rec = envelope_from_transmittance(CANONICAL, WIDE, res.transmittance.values.real)
        ref = np.real(envelope_ou(1.0, 2.0, rec.times).values)
        mask = _mask_envelope(ref)
        assert np.max(np.abs(rec.values[mask] - ref[mask])) <= 2e-2

    def test_matches_complex_route(self):
        res = transmittance_ou_series(CANONICAL, 1.0, 2.0, WIDE)
        rec_r = envelope_from_transmittance(CANONICAL, WIDE, res.transmittance.values.real)
        rec_c = envelope_from_complex_transmittance(CANONICAL, res.transmittance)
        mask = _mask_envelope(rec_c.values.real)
        assert np.max(np.abs(rec_r.values[mask] - rec_c.values.real[mask])) <= 3e-2

    def test_dispersion_completed_route_matches_power_route(self):
        # real data -> dispersion integral -> complex recovery stays close
        res = transmittance_ou_series(CANONICAL, 1.0, 2.0, WIDE)
        re_t = res.transmittance.values.real
        im_t = kramers_kronig(WIDE, re_t)
        completed = ComplexSpectrum(WIDE, re_t + 1j * im_t, "transmittance")
        rec_c = envelope_from_complex_transmittance(CANONICAL, completed)
        rec_r = envelope_from_transmittance(CANONICAL, WIDE, re_t)
        mask = _mask_envelope(rec_r.values)
        assert np.max(np.abs(rec_c.values[mask] - rec_r.values[mask])) <= 3e-2

    def test_zero_coupling_channel_rejected(self):
        params = SystemParams(gamma_plus=0.9, gamma_minus=0.0, gamma_loss=0.1)
        res = transmittance_white(params, 0.3, WIDE)
        with pytest.raises(DomainError, match="coupling"):
            envelope_from_transmittance(params, WIDE, res.transmittance.values.real,
                                        input_channel="-")


class TestRecoveredEnvelope:
    def test_arrays_read_only(self):
        rec = RecoveredEnvelope(
            times=np.array([0.0, 1.0]),
            values=np.array([1.0, 0.5]),
            normalized=np.array([1.0, 0.5]),
        )
        with pytest.raises(ValueError):
            rec.values[0] = 2.0
