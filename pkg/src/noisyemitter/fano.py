"""Scattering through a dispersive filter cavity in one transmission line.

The filter multiplies the emitter coupling by a Lorentzian response
z(delta) = 1 / (1 - 2i (delta - omega_c) / kappa_c), which turns the bare
lineshapes into Fano profiles and mixes the noise average into a
z-reweighted overlap. All outputs reduce to the direct-coupling results at
z = 1 (filter on resonance and infinitely broad).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    PLUS,
    ComplexSpectrum,
    DomainError,
    EnvelopeCurve,
    FrequencyGrid,
    SystemParams,
    _require_finite,
    other_channel,
)
from .inversion import _fit_power_tails, _tail_transform
from .scattering import ScatterResult, _check_envelope, _eval_envelope, laplace_envelope

_EDGE_DECAY_LIMIT = 1e-4
_RECOVERY_AMPLIFICATION_LOG = 30.0


@dataclass(frozen=True)
class FanoParams:
    """Filter cavity line: center omega_c, full linewidth kappa_c > 0."""

    omega_c: float
    kappa_c: float

    def __post_init__(self) -> None:
        _require_finite("omega_c", self.omega_c)
        _require_finite("kappa_c", self.kappa_c)
        if self.kappa_c <= 0:
            raise DomainError("kappa_c must be positive")


def fano_z(grid: FrequencyGrid | np.ndarray, fano: FanoParams) -> np.ndarray:
    """Complex filter response z(delta); z -> 1 on resonance, z -> 0 far away."""
    delta = grid.detunings if isinstance(grid, FrequencyGrid) else np.asarray(grid, dtype=float)
    return 1.0 / (1.0 - 2j * (delta - fano.omega_c) / fano.kappa_c)


@dataclass(frozen=True)
class FanoScatter:
    """Filtered scattering output.

    `result` holds the physical transmittance/reflectance built from the
    effective overlap (1 - t)/gamma_mu, so the amplitude relations between
    channels keep holding; its loss_reflectance slot is the same formal
    combination and is not the physical filtered loss amplitude.
    `fano_overlap` is the z-reweighted noise average itself.
    """

    result: ScatterResult
    fano_overlap: ComplexSpectrum
    z: np.ndarray

    def __post_init__(self) -> None:
        z = np.array(self.z, dtype=complex, copy=True)
        if z.shape != self.result.grid.detunings.shape:
            raise DomainError("z must match the frequency grid")
        z.flags.writeable = False
        object.__setattr__(self, "z", z)


def fano_scatter(
    params: SystemParams,
    fano: FanoParams,
    envelope,
    grid: FrequencyGrid,
    input_channel: str = PLUS,
    tol: float = 1e-9,
) -> FanoScatter:
    """Noise-averaged scattering amplitudes behind the filter.

    The overlap generalizes to G_F = L[C_phi]((z gamma + gamma_loss)/2
    + gamma_wb - i delta) and the transmittance to
    t = 1 - z gamma_mu / (gamma/2) + z^2 gamma_mu G_F: the incoming photon
    is filtered once on the way in and the re-emitted amplitude once on the
    way out, so the emitter term carries z^2 - the same weight the homodyne
    ratio carries - and the background term carries a single z. With this
    the weak-drive homodyne ratio at Q = G_F is identically the
    transmittance.
    """
    gamma = params.gamma_guided()
    if gamma <= 0:
        raise DomainError("filtered scattering needs guided coupling")
    gm = params.gamma(input_channel)
    _check_envelope(envelope)
    delta = grid.detunings
    z = fano_z(grid, fano)
    s = 0.5 * (z * gamma + params.gamma_loss) + params.gamma_wb - 1j * delta
    g_fano, err = laplace_envelope(envelope, s, tol=tol)
    t = 1.0 - z * gm / (0.5 * gamma) + z * z * gm * g_fano
    overlap_eff = np.zeros_like(t) if gm == 0 else (1.0 - t) / gm
    result = ScatterResult.from_overlap(
        params,
        grid,
        overlap_eff,
        input_channel,
        meta={"quadrature_error": err, "omega_c": fano.omega_c, "kappa_c": fano.kappa_c},
    )
    fano_overlap = ComplexSpectrum(grid=grid, values=g_fano, kind="overlap")
    return FanoScatter(result=result, fano_overlap=fano_overlap, z=z)


def fano_measurements(
    params: SystemParams,
    fano: FanoParams,
    fano_overlap: ComplexSpectrum,
    input_channel: str = PLUS,
    output_channel: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Homodyne and power lineshapes behind the filter from the overlap.

    homodyne = Lambda + z^2 sqrt(gamma_out gamma_in) G_F with
    Lambda = delta_out,in - 2 z sqrt(gamma_out gamma_in) / gamma the
    no-emitter background; the power spectrum adds the incoherent filtered
    re-emission term.
    """
    if output_channel is None:
        output_channel = input_channel
    gamma = params.gamma_guided()
    if gamma <= 0:
        raise DomainError("filtered scattering needs guided coupling")
    g_in = params.gamma(input_channel)
    g_out = params.gamma(output_channel)
    root = math.sqrt(g_out * g_in)
    same = 1.0 if output_channel == input_channel else 0.0
    z = fano_z(fano_overlap.grid, fano)
    q = fano_overlap.values
    background = same - 2.0 * z * root / gamma
    homodyne = background + z**2 * root * q
    abs_z2 = np.abs(z) ** 2
    kernel = z**2 * np.conj(background) + abs_z2**2 * root / (
        abs_z2 * gamma + params.gamma_loss
    )
    power = np.abs(background) ** 2 + 2.0 * root * np.real(kernel * q)
    return homodyne, power


def fano_recover_envelope(
    params: SystemParams,
    fano: FanoParams,
    fano_overlap: ComplexSpectrum,
    t_max: float | None = None,
) -> EnvelopeCurve:
    """Undo the filter and the radiative decay to recover C_phi from G_F.

    C_phi(t) = e^{(gamma_loss/2 + gamma_wb) t} (1/2 pi)
    int ddelta e^{-i delta t} e^{z(delta) gamma t / 2}
    (1 - (gamma/kappa_c) z^2) G_F(delta). The weight in front of G_F is the
    Jacobian of the curve s(delta) = z gamma/2 + gamma_loss/2 + gamma_wb
    - i delta along which the forward map samples the Laplace transform;
    with it the integral is an exact contour inversion and the round trip
    through fano_scatter is the identity (the broadband limit drops the
    z^2 term and is only accurate to O(gamma/kappa_c)). Causal 1/delta
    tails are integrated analytically (z -> 0 there), which also restores
    C(0) -> 1.
    """
    gamma = params.gamma_guided()
    grid = fano_overlap.grid
    delta = grid.detunings
    if len(grid) < 16:
        raise DomainError("recovery needs at least 16 grid points")
    if not grid.is_uniform(rtol=1e-8):
        raise DomainError("recovery requires a uniform frequency grid")
    h = float(delta[1] - delta[0])
    if abs(delta[0] + delta[-1]) > 1e-6 * h:
        raise DomainError("recovery requires a grid symmetric about delta = 0")
    g = fano_overlap.values
    peak = float(np.max(np.abs(g)))
    if peak <= 0:
        raise DomainError("overlap spectrum is identically zero")
    edge = max(abs(complex(g[0])), abs(complex(g[-1])))
    if edge >= _EDGE_DECAY_LIMIT * peak:
        raise DomainError(
            "recovery grid is too narrow: |G| at the edges must fall below"
            f" {_EDGE_DECAY_LIMIT:g} of its peak"
        )
    if t_max is None:
        t_max = 6.0 / params.Gamma()
    damping = 0.5 * params.gamma_loss + params.gamma_wb
    if (damping + 0.5 * gamma) * t_max > _RECOVERY_AMPLIFICATION_LOG:
        raise DomainError("t_max is beyond the amplification bound of the recovery")
    if fano.kappa_c <= gamma:
        # the inversion contour s(delta) only stays monotone for a filter
        # broader than the guided emission rate
        raise DomainError("recovery needs kappa_c > gamma_plus + gamma_minus")
    n_t = max(int(round(t_max * 40.0 * params.Gamma())) + 1, 121)
    times = np.linspace(0.0, t_max, n_t)
    z = fano_z(grid, fano)
    g = g * (1.0 - (gamma / fano.kappa_c) * z * z)
    # grid part: (h / 2 pi) sum_k exp(t (z_k gamma / 2 - i delta_k)) G_k
    rate = 0.5 * gamma * z - 1j * delta
    block = max(1, int(4e6 // max(len(grid), 1)))
    grid_part = np.empty(n_t, dtype=complex)
    for lo in range(0, n_t, block):
        hi = min(lo + block, n_t)
        grid_part[lo:hi] = np.exp(times[lo:hi, None] * rate[None, :]) @ g
    grid_part *= h
    c_odd, c_even, X = _fit_power_tails(delta, g)
    total = grid_part + _tail_transform(times, X, c_odd, c_even)
    values = np.exp(damping * times) / (2.0 * math.pi) * total
    return EnvelopeCurve(times=times, values=values, tol=0.05)
